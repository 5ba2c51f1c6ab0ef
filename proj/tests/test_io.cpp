#include "boxseg/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "boxseg/decoder.hpp"
#include "boxseg/detector.hpp"
#include "boxseg/rng.hpp"

namespace boxseg {
namespace {

namespace fs = std::filesystem;

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("boxseg_ckpt_" + name)).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParamStore small_store(std::uint64_t seed) {
  Rng rng(seed);
  ParamStore p;
  Tensor a = Tensor::zeros({3, 2});
  Tensor b = Tensor::zeros({4});
  Tensor c = Tensor::zeros({2, 1, 3, 3});
  for (Tensor* t : {&a, &b, &c})
    for (float& v : t->data()) v = rng.uniform(-1.0f, 1.0f);
  p.add_trainable("zeta", a);
  p.add_trainable("alpha.w", b);
  p.add_trainable("mid.bias", c);
  return p;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const std::string path = temp_path("roundtrip.bin");
  ParamStore p = small_store(5);
  CheckpointMeta meta{2, 1234, 0xdeadbeefcafe1234ULL};
  save_checkpoint(p, meta, path);

  LoadedCheckpoint lc = load_checkpoint(path);
  EXPECT_EQ(lc.meta.stage, meta.stage);
  EXPECT_EQ(lc.meta.step, meta.step);
  EXPECT_EQ(lc.meta.rng_state, meta.rng_state);
  ASSERT_EQ(lc.params.names(), p.names());
  for (const std::string& name : p.names()) {
    Tensor want = p.at(name);
    Tensor got = lc.params.at(name);
    ASSERT_EQ(got.shape(), want.shape()) << name;
    for (std::size_t i = 0; i < want.size(); ++i)
      EXPECT_EQ(got.data()[i], want.data()[i]) << name << "[" << i << "]";
  }

  // Saving the reloaded store reproduces the file byte for byte.
  const std::string path2 = temp_path("roundtrip2.bin");
  save_checkpoint(lc.params, lc.meta, path2);
  EXPECT_EQ(slurp(path), slurp(path2));
}

TEST(Checkpoint, SaveIsIndependentOfInsertionOrder) {
  const std::string pa = temp_path("order_a.bin");
  const std::string pb = temp_path("order_b.bin");
  ParamStore p = small_store(9);
  ParamStore q;
  const std::vector<std::string> names = p.names();
  for (auto it = names.rbegin(); it != names.rend(); ++it)
    q.add_trainable(*it, p.at(*it));
  CheckpointMeta meta{0, 1, 2};
  save_checkpoint(p, meta, pa);
  save_checkpoint(q, meta, pb);
  EXPECT_EQ(slurp(pa), slurp(pb));
}

TEST(Checkpoint, BadMagicIsRejectedAtByteZero) {
  const std::string path = temp_path("magic.bin");
  save_checkpoint(small_store(1), CheckpointMeta{}, path);
  auto bytes = slurp(path);
  bytes[1] = 'X';
  spit(path, bytes);
  try {
    load_checkpoint(path);
    FAIL() << "expected a load error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("byte 0"), std::string::npos);
  }
}

TEST(Checkpoint, UnsupportedVersionIsRejected) {
  const std::string path = temp_path("version.bin");
  save_checkpoint(small_store(1), CheckpointMeta{}, path);
  auto bytes = slurp(path);
  bytes[4] = 99;
  spit(path, bytes);
  try {
    load_checkpoint(path);
    FAIL() << "expected a load error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, TruncationReportsByteOffset) {
  const std::string path = temp_path("trunc.bin");
  save_checkpoint(small_store(1), CheckpointMeta{}, path);
  auto bytes = slurp(path);
  for (std::size_t cut : {bytes.size() - 3, bytes.size() / 2, std::size_t{7}}) {
    auto clipped = bytes;
    clipped.resize(cut);
    spit(path, clipped);
    try {
      load_checkpoint(path);
      FAIL() << "expected a load error at cut " << cut;
    } catch (const Error& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
      EXPECT_NE(msg.find("byte"), std::string::npos) << msg;
    }
  }
}

TEST(Checkpoint, TrailingBytesAreRejected) {
  const std::string path = temp_path("trailing.bin");
  save_checkpoint(small_store(1), CheckpointMeta{}, path);
  auto bytes = slurp(path);
  bytes.push_back('\0');
  spit(path, bytes);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Checkpoint, ImplausibleRankIsRejected) {
  const std::string path = temp_path("rank.bin");
  ParamStore p;
  Tensor t = Tensor::zeros({2, 2});
  for (float& v : t.data()) v = 1.0f;
  p.add_trainable("w", t);
  save_checkpoint(p, CheckpointMeta{}, path);
  auto bytes = slurp(path);
  // Layout after the 28-byte header: u32 name_len | "w" | u32 rank | ...
  const std::size_t rank_off = 28 + 4 + 1;
  bytes[rank_off] = 100;
  spit(path, bytes);
  try {
    load_checkpoint(path);
    FAIL() << "expected a load error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
}

TEST(Checkpoint, NegativeDimensionIsRejected) {
  const std::string path = temp_path("dim.bin");
  ParamStore p;
  Tensor t = Tensor::zeros({2, 2});
  for (float& v : t.data()) v = 1.0f;
  p.add_trainable("w", t);
  save_checkpoint(p, CheckpointMeta{}, path);
  auto bytes = slurp(path);
  const std::size_t dim_off = 28 + 4 + 1 + 4;  // first i32 dim
  bytes[dim_off + 3] = static_cast<char>(0x80);  // sign bit
  spit(path, bytes);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Checkpoint, MissingFileIsAnError) {
  EXPECT_THROW(load_checkpoint(temp_path("does_not_exist.bin")), Error);
}

TEST(InferConfig, RecoversArchitectureFromShapes) {
  ModelConfig cfg;
  cfg.image_size = 64;
  cfg.num_classes = 4;
  cfg.scales = 3;
  cfg.base_width = 8;
  cfg.validate();
  Rng rng(3);
  ParamStore p;
  build_detector_params(p, rng, cfg);
  build_decoder_params(p, rng, cfg, true);

  const std::string path = temp_path("infer.bin");
  save_checkpoint(p, CheckpointMeta{1, 10, 42}, path);
  LoadedCheckpoint lc = load_checkpoint(path);
  ModelConfig got = infer_model_config(lc.params);
  EXPECT_EQ(got.num_classes, cfg.num_classes);
  EXPECT_EQ(got.scales, cfg.scales);
  EXPECT_EQ(got.base_width, cfg.base_width);
}

TEST(InferConfig, RecoversInstanceGrid) {
  ModelConfig cfg;
  cfg.num_classes = 2;
  cfg.base_width = 8;
  cfg.validate();
  Rng rng(4);
  for (int k : {1, 3, 7}) {
    ParamStore p;
    build_detector_params(p, rng, cfg);
    build_decoder_params(p, rng, cfg, false);
    PSConfig ps;
    ps.k = k;
    build_instance_params(p, rng, cfg, ps);
    EXPECT_EQ(infer_ps_grid(p), k);
  }
}

}  // namespace
}  // namespace boxseg
