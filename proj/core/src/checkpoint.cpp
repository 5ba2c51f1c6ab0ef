#include "boxseg/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "boxseg/common.hpp"

namespace boxseg {
namespace {

constexpr char kMagic[4] = {'B', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct ByteWriter {
  std::ofstream out;
  explicit ByteWriter(const std::string& path)
      : out(path, std::ios::binary | std::ios::trunc) {
    if (!out) throw Error(detail::cat(path, ": cannot open file for writing"));
  }
  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
};

struct ByteReader {
  const std::string& path;
  std::string data;
  std::size_t pos = 0;

  const char* take(std::size_t n, const char* what) {
    if (pos + n > data.size())
      throw Error(detail::cat(path, ": truncated at byte ", data.size(),
                              " while reading ", what, " (need ",
                              pos + n - data.size(), " more bytes)"));
    const char* p = data.data() + pos;
    pos += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    std::memcpy(&v, take(4, what), 4);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v;
    std::memcpy(&v, take(8, what), 8);
    return v;
  }
};

}  // namespace

void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta,
                     const std::string& path) {
  ByteWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(meta.stage);
  w.u64(meta.step);
  w.u64(meta.rng_state);
  w.u32(static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& [name, t] : params.tensors()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) {
      std::int32_t d = t.dim(i);
      w.bytes(&d, 4);
    }
    w.bytes(t.data().data(), sizeof(float) * t.size());
  }
  if (!w.out) throw Error(detail::cat(path, ": write failed"));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(detail::cat(path, ": cannot open file"));
  ByteReader r{path};
  r.data.assign((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());

  if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0)
    throw Error(detail::cat(path, ": bad magic at byte 0"));
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw Error(detail::cat(path, ": unsupported version ", version,
                            " at byte 4"));
  LoadedCheckpoint lc;
  lc.meta.stage = r.u32("stage");
  lc.meta.step = r.u64("step");
  lc.meta.rng_state = r.u64("rng state");
  std::uint32_t count = r.u32("tensor count");
  if (count > 1u << 20)
    throw Error(detail::cat(path, ": implausible tensor count ", count,
                            " at byte ", r.pos - 4));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::size_t at = r.pos;
    std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 4096)
      throw Error(detail::cat(path, ": implausible name length ", name_len,
                              " at byte ", at));
    std::string name(r.take(name_len, "tensor name"), name_len);
    at = r.pos;
    std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8)
      throw Error(detail::cat(path, ": implausible rank ", rank, " at byte ",
                              at));
    std::vector<int> dims(rank);
    std::size_t numel = 1;
    for (auto& d : dims) {
      at = r.pos;
      std::int32_t v;
      std::memcpy(&v, r.take(4, "dimension"), 4);
      if (v <= 0 || v > 1 << 24)
        throw Error(detail::cat(path, ": implausible dimension ", v,
                                " at byte ", at));
      d = v;
      numel *= static_cast<std::size_t>(v);
      if (numel > 1u << 28)
        throw Error(detail::cat(path, ": tensor '", name, "' too large"));
    }
    Tensor t = Tensor::zeros(dims);
    std::memcpy(t.data().data(), r.take(sizeof(float) * numel, "tensor data"),
                sizeof(float) * numel);
    lc.params.add_trainable(name, t);
  }
  if (r.pos != r.data.size())
    throw Error(detail::cat(path, ": ", r.data.size() - r.pos,
                            " trailing bytes at byte ", r.pos));
  return lc;
}

ModelConfig infer_model_config(const ParamStore& params) {
  const char* first = "detector.trunk.1.w";
  if (!params.contains(first))
    throw Error(detail::cat("checkpoint has no '", first,
                            "'; not a detector checkpoint"));
  ModelConfig cfg;
  cfg.base_width = params.at(first).dim(0);
  int scales = 0;
  while (params.contains(detail::cat("detector.head.", scales + 1, ".w")))
    ++scales;
  cfg.scales = scales;
  Tensor head1 = params.at("detector.head.1.w");
  cfg.num_classes = head1.dim(0) - 5;
  if (cfg.num_classes < 1)
    throw Error(detail::cat("detector head predicts ", head1.dim(0),
                            " channels; expected at least 6"));
  cfg.validate();
  return cfg;
}

int infer_ps_grid(const ParamStore& params) {
  if (!params.contains("instance.ps.w"))
    throw Error("checkpoint has no 'instance.ps.w'; not an instance checkpoint");
  int ch = params.at("instance.ps.w").dim(0);
  int k = static_cast<int>(std::lround(std::sqrt(ch / 2.0)));
  if (k < 1 || 2 * k * k != ch)
    throw Error(detail::cat("instance head has ", ch,
                            " channels, which is not 2*k*k for integer k"));
  return k;
}

}  // namespace boxseg
