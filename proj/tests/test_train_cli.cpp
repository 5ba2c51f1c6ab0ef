#include "boxseg/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "boxseg/checkpoint.hpp"
#include "boxseg/decoder.hpp"
#include "boxseg/pipeline.hpp"
#include "boxseg/train.hpp"
#include "testing_util.hpp"

namespace boxseg {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("boxseg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

std::map<std::string, std::vector<char>> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& e : fs::directory_iterator(dir))
    out[e.path().filename().string()] = slurp(e.path());
  return out;
}

int cli(const std::vector<std::string>& args) { return run_cli(args); }

std::string cli_stdout(const std::vector<std::string>& args, int want_rc = 0) {
  ::testing::internal::CaptureStdout();
  const int rc = cli(args);
  std::string out = ::testing::internal::GetCapturedStdout();
  EXPECT_EQ(rc, want_rc) << out;
  return out;
}

TEST(LrSchedule, SwitchPointsAreExact) {
  TrainConfig tc;
  tc.steps = 10;
  tc.lr = 1.0;
  EXPECT_DOUBLE_EQ(lr_at(tc, 0), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(tc, 5), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(tc, 6), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(tc, 8), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(tc, 9), 0.01);
  tc.steps = 500;
  EXPECT_DOUBLE_EQ(lr_at(tc, 299), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(tc, 300), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(tc, 449), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(tc, 450), 0.01);
}

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.image_size = 32;
  cfg.num_classes = 2;
  cfg.scales = 2;
  cfg.base_width = 4;
  cfg.validate();
  return cfg;
}

std::vector<SynthSample> small_corpus(int n, bool masks) {
  DatasetConfig dc;
  dc.image_size = 32;
  dc.num_classes = 2;
  std::vector<SynthSample> out;
  Rng rng(99);
  for (int i = 0; i < n; ++i) {
    SynthSample s = generate_sample(rng.next_u64(), dc);
    s.has_mask = masks;
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::string, std::vector<float>> snapshot(const ParamStore& p,
                                                   const std::string& prefix) {
  std::map<std::string, std::vector<float>> out;
  for (const std::string& name : p.names())
    if (name.rfind(prefix, 0) == 0) {
      Tensor t = p.at(name);
      out[name].assign(t.data().begin(), t.data().end());
    }
  return out;
}

TEST(TrainDetector, LossDropsAndRunsAreReproducible) {
  ModelConfig cfg = small_cfg();
  std::vector<SynthSample> data = small_corpus(6, false);
  TrainConfig tc;
  tc.steps = 25;
  tc.batch = 4;
  tc.lr = 0.05;
  tc.log_every = 0;

  auto run = [&]() {
    Rng rng(7);
    ParamStore p;
    build_detector_params(p, rng, cfg);
    std::vector<double> losses = train_detector(p, cfg, data, tc);
    return std::make_pair(losses, snapshot(p, "detector."));
  };
  auto [losses_a, params_a] = run();
  auto [losses_b, params_b] = run();
  ASSERT_EQ(losses_a.size(), static_cast<std::size_t>(tc.steps));
  EXPECT_LT(losses_a.back(), losses_a.front());
  EXPECT_EQ(losses_a, losses_b);
  EXPECT_EQ(params_a, params_b);
}

TEST(TrainSemantic, FrozenDetectorBytesNeverMove) {
  ModelConfig cfg = small_cfg();
  std::vector<SynthSample> data = small_corpus(5, true);
  Rng rng(8);
  ParamStore p;
  build_detector_params(p, rng, cfg);
  build_decoder_params(p, rng, cfg, true);
  p.set_trainable_prefix("detector.", false);

  auto det_before = snapshot(p, "detector.");
  auto dec_before = snapshot(p, "decoder.");
  TrainConfig tc;
  tc.steps = 8;
  tc.batch = 2;
  tc.lr = 0.05;
  tc.log_every = 0;
  std::vector<double> losses = train_semantic(p, cfg, data, tc);
  ASSERT_EQ(losses.size(), 8u);
  for (double l : losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_EQ(snapshot(p, "detector."), det_before);
  EXPECT_NE(snapshot(p, "decoder."), dec_before);
}

TEST(TrainInstance, UpdatesHeadAndDecoderOnly) {
  ModelConfig cfg = small_cfg();
  std::vector<SynthSample> data = small_corpus(5, true);
  Rng rng(9);
  ParamStore p;
  build_detector_params(p, rng, cfg);
  build_decoder_params(p, rng, cfg, false);
  PSConfig ps;
  ps.k = 3;
  build_instance_params(p, rng, cfg, ps);
  p.set_trainable_prefix("detector.", false);

  auto det_before = snapshot(p, "detector.");
  auto head_before = snapshot(p, "instance.");
  TrainConfig tc;
  tc.steps = 6;
  tc.batch = 2;
  tc.lr = 0.05;
  tc.log_every = 0;
  std::vector<double> losses = train_instance(p, cfg, ps, data, tc);
  ASSERT_EQ(losses.size(), 6u);
  for (double l : losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_EQ(snapshot(p, "detector."), det_before);
  EXPECT_NE(snapshot(p, "instance."), head_before);
}

TEST(Pipeline, QuietDetectorYieldsBackgroundOnly) {
  ModelConfig cfg = small_cfg();
  Rng rng(10);
  ParamStore p;
  build_detector_params(p, rng, cfg);
  build_decoder_params(p, rng, cfg, true);
  PSConfig ps;
  ps.k = 3;
  build_instance_params(p, rng, cfg, ps);

  Tensor image = testing::rand_tensor(rng, {3, 32, 32}, 0.0, 1.0);
  LabelMap lm = semantic_infer(p, cfg, image);
  EXPECT_EQ(lm.h, 32);
  EXPECT_EQ(lm.w, 32);
  for (std::int32_t v : lm.data) EXPECT_EQ(v, 0);
  EXPECT_TRUE(instance_infer(p, cfg, ps, image).empty());
}

struct CliWorld {
  fs::path data = fresh_dir("data");
  fs::path out = fresh_dir("out");

  CliWorld() {
    cli_stdout({"gen-data", "--out", data.string(), "--n", "8", "--classes",
                "2", "--seed", "5"});
  }
};

TEST(Cli, GenDataIsByteDeterministic) {
  fs::path a = fresh_dir("gen_a");
  fs::path b = fresh_dir("gen_b");
  std::string out_a = cli_stdout({"gen-data", "--out", a.string(), "--n", "6",
                                  "--classes", "2", "--seed", "3",
                                  "--mask-fraction", "0.5"});
  std::string out_b = cli_stdout({"gen-data", "--out", b.string(), "--n", "6",
                                  "--classes", "2", "--seed", "3",
                                  "--mask-fraction", "0.5"});
  EXPECT_NE(out_a.find("wrote 6 samples (3 with masks)"), std::string::npos)
      << out_a;
  auto bytes_a = dir_bytes(a);
  EXPECT_EQ(bytes_a.size(), 18u);  // image + instance map + metadata per sample
  EXPECT_EQ(bytes_a, dir_bytes(b));
}

TEST(Cli, FullPipelineIsDeterministicAndFreezesTheDetector) {
  CliWorld w;
  const std::string det_a = (w.out / "det_a.ckpt").string();
  const std::string det_b = (w.out / "det_b.ckpt").string();
  std::vector<std::string> train_args = {"train-detector", "--data",
                                         w.data.string(), "--steps", "3",
                                         "--seed", "11", "--out", det_a};
  cli_stdout(train_args);
  train_args.back() = det_b;
  cli_stdout(train_args);
  ASSERT_EQ(slurp(det_a), slurp(det_b));

  const std::string sem = (w.out / "sem.ckpt").string();
  cli_stdout({"train-semantic", "--data", w.data.string(), "--detector", det_a,
              "--steps", "3", "--seed", "12", "--out", sem});
  LoadedCheckpoint det = load_checkpoint(det_a);
  LoadedCheckpoint seg = load_checkpoint(sem);
  EXPECT_EQ(det.meta.stage, 0u);
  EXPECT_EQ(seg.meta.stage, 1u);
  for (const std::string& name : det.params.names()) {
    Tensor a = det.params.at(name);
    Tensor b = seg.params.at(name);
    ASSERT_EQ(a.shape(), b.shape()) << name;
    for (std::size_t i = 0; i < a.size(); ++i)
      ASSERT_EQ(a.data()[i], b.data()[i]) << name << "[" << i << "]";
  }

  const std::string inst = (w.out / "inst.ckpt").string();
  cli_stdout({"train-instance", "--data", w.data.string(), "--detector", det_a,
              "--k", "3", "--steps", "3", "--seed", "13", "--out", inst});
  LoadedCheckpoint ips = load_checkpoint(inst);
  EXPECT_EQ(ips.meta.stage, 2u);
  EXPECT_EQ(infer_ps_grid(ips.params), 3);

  // evaluation output and rendered predictions are byte-stable too
  std::string eval_a =
      cli_stdout({"eval-semantic", "--data", w.data.string(), "--ckpt", sem});
  std::string eval_b =
      cli_stdout({"eval-semantic", "--data", w.data.string(), "--ckpt", sem});
  EXPECT_EQ(eval_a, eval_b);
  EXPECT_NE(eval_a.find("miou="), std::string::npos);

  std::string imap =
      cli_stdout({"eval-instance", "--data", w.data.string(), "--ckpt", inst,
                  "--thresholds", "0.5,0.7"});
  EXPECT_NE(imap.find("map_r@0.5="), std::string::npos);
  EXPECT_NE(imap.find("map_r@0.7="), std::string::npos);

  const std::string render_a = (w.out / "r_a.ppm").string();
  const std::string render_b = (w.out / "r_b.ppm").string();
  const std::string img = (w.data / "00000.ppm").string();
  cli_stdout({"predict", "--image", img, "--ckpt", sem, "--mode", "semantic",
              "--render", render_a});
  cli_stdout({"predict", "--image", img, "--ckpt", sem, "--mode", "semantic",
              "--render", render_b});
  EXPECT_EQ(slurp(render_a), slurp(render_b));
  cli_stdout({"predict", "--image", img, "--ckpt", inst, "--mode", "instance",
              "--render", render_a});
}

TEST(Cli, ConfigFileFillsDefaultsButExplicitFlagsWin) {
  fs::path dir = fresh_dir("cfg");
  const std::string cfg_path = (dir / "run.json").string();
  {
    std::ofstream out(cfg_path);
    out << R"({"n": 5, "classes": 2, "out": ")" << (dir / "from_cfg").string()
        << R"("})";
  }
  std::string a = cli_stdout({"gen-data", "--config", cfg_path});
  EXPECT_NE(a.find("wrote 5 samples"), std::string::npos) << a;
  std::string b = cli_stdout({"gen-data", "--config", cfg_path, "--n", "2",
                              "--out", (dir / "override").string()});
  EXPECT_NE(b.find("wrote 2 samples"), std::string::npos) << b;
}

TEST(Cli, FailuresAreOneErrorLineAndNonzeroExit) {
  ::testing::internal::CaptureStderr();
  int rc = cli({"eval-semantic", "--data", "/nonexistent/dir", "--ckpt",
                "/nonexistent/ckpt"});
  std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, 1);
  EXPECT_EQ(err.rfind("error: ", 0), 0u) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;

  ::testing::internal::CaptureStderr();
  rc = cli({"gen-data"});  // --out is required
  err = ::testing::internal::GetCapturedStderr();
  EXPECT_NE(rc, 0);

  ::testing::internal::CaptureStderr();
  rc = cli({"no-such-command"});
  err = ::testing::internal::GetCapturedStderr();
  EXPECT_NE(rc, 0);

  CliWorld w;
  const std::string det = (w.out / "det.ckpt").string();
  cli_stdout({"train-detector", "--data", w.data.string(), "--steps", "1",
              "--seed", "1", "--out", det});
  ::testing::internal::CaptureStderr();
  rc = cli({"eval-instance", "--data", w.data.string(), "--ckpt", det,
            "--thresholds", "0.5,nope"});
  err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, 1);
  EXPECT_EQ(err.rfind("error: ", 0), 0u) << err;
}

}  // namespace
}  // namespace boxseg
