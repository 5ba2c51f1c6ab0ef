#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/tensor.hpp"

namespace boxseg {

// 8-bit image, rows interleaved (RGB for 3 channels, gray for 1).
struct ImageU8 {
  int channels = 0, h = 0, w = 0;
  std::vector<std::uint8_t> data;

  static ImageU8 filled(int channels, int h, int w, std::uint8_t value);
  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
  bool operator==(const ImageU8&) const = default;
};

// Binary PPM (P6) / PGM (P5), maxval 255. Parse errors name the file and the
// byte offset of the problem.
ImageU8 read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageU8& img);
ImageU8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageU8& img);

// [3,H,W] float tensor with values k/255.
Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& t);

}  // namespace boxseg
