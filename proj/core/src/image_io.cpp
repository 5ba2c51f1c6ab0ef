#include "boxseg/image_io.hpp"

#include <cstdio>
#include <fstream>

#include "boxseg/common.hpp"

namespace boxseg {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(detail::cat(path, ": cannot open file"));
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

// Netpbm header scanner. Tracks the current byte offset so parse errors can
// point at the exact spot.
struct PnmScanner {
  const std::string& path;
  const std::string& bytes;
  std::size_t pos = 0;

  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw Error(detail::cat(path, ": ", what, " at byte ", at));
  }

  void skip_space() {
    while (pos < bytes.size()) {
      char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        return;
      }
    }
  }

  int read_int(const char* what) {
    skip_space();
    std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1 << 20) fail(start, detail::cat("unreasonable ", what));
      ++pos;
    }
    if (pos == start) fail(pos, detail::cat("expected ", what));
    return static_cast<int>(v);
  }
};

ImageU8 read_pnm(const std::string& path, char kind, int channels) {
  std::string bytes = read_file(path);
  PnmScanner sc{path, bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != kind)
    sc.fail(0, detail::cat("expected magic 'P", std::string(1, kind), "'"));
  sc.pos = 2;
  int w = sc.read_int("width");
  int h = sc.read_int("height");
  int maxval = sc.read_int("maxval");
  if (w <= 0 || h <= 0) sc.fail(2, "non-positive image dimensions");
  if (maxval != 255) sc.fail(sc.pos, detail::cat("unsupported maxval ", maxval));
  if (sc.pos >= bytes.size()) sc.fail(sc.pos, "missing pixel data");
  ++sc.pos;  // single whitespace byte after maxval
  std::size_t need = static_cast<std::size_t>(w) * h * channels;
  std::size_t have = bytes.size() - sc.pos;
  if (have < need)
    sc.fail(bytes.size(), detail::cat("truncated pixel data (need ", need,
                                      " bytes, have ", have, ")"));
  ImageU8 img;
  img.channels = channels;
  img.h = h;
  img.w = w;
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(sc.pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(sc.pos + need));
  return img;
}

void write_pnm(const std::string& path, char kind, int channels,
               const ImageU8& img) {
  if (img.channels != channels)
    throw Error(detail::cat(path, ": image has ", img.channels,
                            " channels, format needs ", channels));
  if (img.h <= 0 || img.w <= 0)
    throw Error(detail::cat(path, ": empty image"));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(detail::cat(path, ": cannot open file for writing"));
  out << 'P' << kind << '\n' << img.w << ' ' << img.h << '\n' << "255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw Error(detail::cat(path, ": write failed"));
}

}  // namespace

ImageU8 ImageU8::filled(int channels, int h, int w, std::uint8_t value) {
  ImageU8 img;
  img.channels = channels;
  img.h = h;
  img.w = w;
  img.data.assign(static_cast<std::size_t>(channels) * h * w, value);
  return img;
}

ImageU8 read_ppm(const std::string& path) { return read_pnm(path, '6', 3); }
void write_ppm(const std::string& path, const ImageU8& img) {
  write_pnm(path, '6', 3, img);
}
ImageU8 read_pgm(const std::string& path) { return read_pnm(path, '5', 1); }
void write_pgm(const std::string& path, const ImageU8& img) {
  write_pnm(path, '5', 1, img);
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t = Tensor::zeros({img.channels, img.h, img.w});
  float* out = t.data().data();
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x)
        *out++ = static_cast<float>(img.at(y, x, c)) / 255.0f;
  return t;
}

ImageU8 tensor_to_image(const Tensor& t) {
  if (t.rank() != 3)
    throw Error(detail::cat("tensor_to_image needs rank-3 input, got shape ",
                            shape_str(t.shape())));
  ImageU8 img = ImageU8::filled(t.dim(0), t.dim(1), t.dim(2), 0);
  const float* in = t.data().data();
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        float v = *in++ * 255.0f + 0.5f;
        img.at(y, x, c) = static_cast<std::uint8_t>(
            v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v));
      }
  return img;
}

}  // namespace boxseg
