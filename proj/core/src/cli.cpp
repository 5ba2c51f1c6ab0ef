#include "boxseg/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "boxseg/checkpoint.hpp"
#include "boxseg/dataset_io.hpp"
#include "boxseg/decoder.hpp"
#include "boxseg/detector.hpp"
#include "boxseg/common.hpp"
#include "boxseg/metrics.hpp"
#include "boxseg/pipeline.hpp"
#include "boxseg/render.hpp"
#include "boxseg/train.hpp"
#include "json.hpp"

namespace boxseg {
namespace {

// --config FILE supplies defaults: each key "name" acts like --name VALUE
// unless that flag was given explicitly.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string cfg_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      cfg_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      cfg_path = args[i].substr(9);
  }
  if (cfg_path.empty()) return args;
  std::ifstream in(cfg_path, std::ios::binary);
  if (!in) throw Error(detail::cat(cfg_path, ": cannot open config file"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(detail::cat(cfg_path, ": ", e.what()));
  }
  if (!j.is_object())
    throw Error(detail::cat(cfg_path, ": config root must be a JSON object"));
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    std::string flag = "--" + key;
    bool present = false;
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        present = true;
        break;
      }
    if (present) continue;
    std::string text;
    if (value.is_string())
      text = value.get<std::string>();
    else if (value.is_boolean())
      text = value.get<bool>() ? "true" : "false";
    else
      text = value.dump();
    args.push_back(flag);
    args.push_back(text);
  }
  return args;
}

void check_image_geometry(const ModelConfig& cfg, int h, int w,
                          const std::string& what) {
  int div = 1 << (cfg.scales + 1);
  if (h != w)
    throw Error(detail::cat(what, ": image is ", w, "x", h,
                            "; only square images are supported"));
  if (h % div != 0)
    throw Error(detail::cat(what, ": image side ", h,
                            " is not divisible by ", div));
}

// Model geometry for training comes from the data itself.
ModelConfig config_from_dataset(const std::vector<SynthSample>& ds) {
  require(!ds.empty(), "dataset is empty");
  ModelConfig cfg;
  cfg.image_size = ds[0].h();
  int max_cls = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    check_image_geometry(cfg, ds[i].h(), ds[i].w(),
                         detail::cat("sample ", i));
    require(ds[i].h() == ds[0].h(),
            "sample ", i, " is ", ds[i].h(), "px but sample 0 is ", ds[0].h(),
            "px; mixed sizes are not supported");
    for (const auto& inst : ds[i].instances) max_cls = std::max(max_cls, inst.cls);
  }
  require(max_cls >= 1, "dataset has no instances");
  cfg.num_classes = max_cls;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_thresholds(const std::string& text,
                                     std::vector<std::string>* tokens) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string tok = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t a = tok.find_first_not_of(" \t");
    std::size_t b = tok.find_last_not_of(" \t");
    tok = a == std::string::npos ? "" : tok.substr(a, b - a + 1);
    if (tok.empty())
      throw Error(detail::cat("bad threshold list '", text, "'"));
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !(v > 0.0) || v > 1.0)
      throw Error(detail::cat("bad threshold '", tok,
                              "'; need a number in (0, 1]"));
    out.push_back(v);
    tokens->push_back(tok);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct GenArgs {
  std::uint64_t seed = 1;
  int n = 200;
  int classes = 3;
  double mask_fraction = 1.0;
  std::string out;
};

int cmd_gen_data(const GenArgs& a) {
  require(a.n >= 1, "--n must be at least 1, got ", a.n);
  require(a.classes >= 1 && a.classes <= 6,
          "--classes must be in 1..6, got ", a.classes);
  DatasetConfig dc;
  dc.num_classes = a.classes;
  Rng rng(a.seed);
  std::vector<SynthSample> samples;
  samples.reserve(static_cast<std::size_t>(a.n));
  for (int i = 0; i < a.n; ++i)
    samples.push_back(generate_sample(rng.next_u64(), dc));
  std::vector<bool> flags =
      make_split(samples, a.mask_fraction, a.classes, rng.next_u64());
  int with_mask = 0;
  for (int i = 0; i < a.n; ++i) {
    samples[static_cast<std::size_t>(i)].has_mask =
        flags[static_cast<std::size_t>(i)];
    with_mask += flags[static_cast<std::size_t>(i)];
  }
  write_dataset(samples, a.out);
  std::printf("wrote %d samples (%d with masks) to %s\n", a.n, with_mask,
              a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data, out, detector;
  int steps = 500;
  double lr = 0.01;
  std::uint64_t seed = 1;
  int k = 7, p = 2, n = 4;
};

int cmd_train_detector(const TrainArgs& a) {
  std::vector<SynthSample> ds = read_dataset(a.data);
  ModelConfig cfg = config_from_dataset(ds);
  ParamStore params;
  Rng init_rng(a.seed);
  build_detector_params(params, init_rng, cfg);
  TrainConfig tc;
  tc.steps = a.steps;
  tc.lr = a.lr;
  tc.seed = a.seed;
  train_detector(params, cfg, ds, tc, &std::cout);
  save_checkpoint(params, {0, static_cast<std::uint64_t>(a.steps), a.seed},
                  a.out);
  std::printf("saved checkpoint to %s\n", a.out.c_str());
  return 0;
}

int cmd_train_semantic(const TrainArgs& a) {
  std::vector<SynthSample> ds = read_dataset(a.data);
  LoadedCheckpoint lc = load_checkpoint(a.detector);
  ModelConfig cfg = infer_model_config(lc.params);
  cfg.image_size = ds.empty() ? cfg.image_size : ds[0].h();
  config_from_dataset(ds);  // geometry sanity only
  ParamStore params = std::move(lc.params);
  Rng init_rng(a.seed);
  build_decoder_params(params, init_rng, cfg, true);
  params.set_trainable_prefix("detector.", false);
  TrainConfig tc;
  tc.steps = a.steps;
  tc.lr = a.lr;
  tc.seed = a.seed;
  train_semantic(params, cfg, ds, tc, &std::cout);
  save_checkpoint(params, {1, static_cast<std::uint64_t>(a.steps), a.seed},
                  a.out);
  std::printf("saved checkpoint to %s\n", a.out.c_str());
  return 0;
}

int cmd_train_instance(const TrainArgs& a) {
  std::vector<SynthSample> ds = read_dataset(a.data);
  LoadedCheckpoint lc = load_checkpoint(a.detector);
  ModelConfig cfg = infer_model_config(lc.params);
  cfg.image_size = ds.empty() ? cfg.image_size : ds[0].h();
  config_from_dataset(ds);
  PSConfig ps;
  ps.k = a.k;
  ps.p = a.p;
  ps.n = a.n;
  ps.validate();
  ParamStore params = std::move(lc.params);
  Rng init_rng(a.seed);
  build_decoder_params(params, init_rng, cfg, false);
  build_instance_params(params, init_rng, cfg, ps);
  params.set_trainable_prefix("detector.", false);
  TrainConfig tc;
  tc.steps = a.steps;
  tc.lr = a.lr;
  tc.seed = a.seed;
  train_instance(params, cfg, ps, ds, tc, &std::cout);
  save_checkpoint(params, {2, static_cast<std::uint64_t>(a.steps), a.seed},
                  a.out);
  std::printf("saved checkpoint to %s\n", a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string data, ckpt;
  std::string thresholds = "0.5,0.7";
};

int cmd_eval_semantic(const EvalArgs& a) {
  std::vector<SynthSample> ds = read_dataset(a.data);
  require(!ds.empty(), "dataset is empty");
  LoadedCheckpoint lc = load_checkpoint(a.ckpt);
  ModelConfig cfg = infer_model_config(lc.params);
  require(lc.params.contains("decoder.head.w"),
          "checkpoint has no semantic head; expected train-semantic output");
  std::vector<LabelMap> preds, gts;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    check_image_geometry(cfg, ds[i].h(), ds[i].w(), detail::cat("sample ", i));
    cfg.image_size = ds[i].h();
    preds.push_back(semantic_infer(lc.params, cfg, ds[i].image_tensor()));
    gts.push_back(ds[i].semantic_labels());
  }
  MiouResult r = eval_miou(preds, gts, cfg.num_classes);
  for (int c = 0; c <= cfg.num_classes; ++c) {
    auto ci = static_cast<std::size_t>(c);
    if (r.counted[ci])
      std::printf("iou_class_%d=%.6f\n", c, r.per_class[ci]);
    else
      std::printf("iou_class_%d=nan\n", c);
  }
  std::printf("miou=%.6f\n", r.mean);
  return 0;
}

int cmd_eval_instance(const EvalArgs& a) {
  std::vector<std::string> tokens;
  std::vector<double> thresholds = parse_thresholds(a.thresholds, &tokens);
  std::vector<SynthSample> ds = read_dataset(a.data);
  require(!ds.empty(), "dataset is empty");
  LoadedCheckpoint lc = load_checkpoint(a.ckpt);
  ModelConfig cfg = infer_model_config(lc.params);
  PSConfig ps;
  ps.k = infer_ps_grid(lc.params);
  std::vector<std::vector<InstancePrediction>> preds;
  std::vector<std::vector<GtInstance>> gts;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    check_image_geometry(cfg, ds[i].h(), ds[i].w(), detail::cat("sample ", i));
    cfg.image_size = ds[i].h();
    preds.push_back(instance_infer(lc.params, cfg, ps, ds[i].image_tensor()));
    std::vector<GtInstance> g;
    for (const auto& inst : ds[i].instances)
      g.push_back({inst.cls, inst.mask});
    gts.push_back(std::move(g));
  }
  std::vector<double> res = eval_map_r(preds, gts, cfg.num_classes, thresholds);
  for (std::size_t t = 0; t < res.size(); ++t)
    std::printf("map_r@%s=%.6f\n", tokens[t].c_str(), res[t]);
  return 0;
}

struct PredictArgs {
  std::string image, ckpt, mode, render;
};

int cmd_predict(const PredictArgs& a) {
  ImageU8 img = read_ppm(a.image);
  LoadedCheckpoint lc = load_checkpoint(a.ckpt);
  ModelConfig cfg = infer_model_config(lc.params);
  check_image_geometry(cfg, img.h, img.w, a.image);
  cfg.image_size = img.h;
  Tensor t = image_to_tensor(img);
  ImageU8 out;
  if (a.mode == "semantic") {
    require(lc.params.contains("decoder.head.w"),
            "checkpoint has no semantic head; expected train-semantic output");
    out = render_semantic(img, semantic_infer(lc.params, cfg, t));
  } else {
    PSConfig ps;
    ps.k = infer_ps_grid(lc.params);
    out = render_instances(img, instance_infer(lc.params, cfg, ps, t));
  }
  write_ppm(a.render, out);
  std::printf("wrote %s\n", a.render.c_str());
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args) {
  int rc = 0;
  try {
    std::vector<std::string> args = merge_config(raw_args);

    CLI::App app{"box-driven semantic and instance segmentation on synthetic shapes"};
    app.require_subcommand(1);
    std::string config_path;  // consumed by merge_config; registered so it parses

    GenArgs gen;
    CLI::App* sub_gen = app.add_subcommand("gen-data", "generate a dataset");
    sub_gen->add_option("--seed", gen.seed, "base RNG seed");
    sub_gen->add_option("--n", gen.n, "number of samples");
    sub_gen->add_option("--classes", gen.classes, "number of object classes");
    sub_gen->add_option("--mask-fraction", gen.mask_fraction,
                        "fraction of samples that keep masks for training");
    sub_gen->add_option("--out", gen.out, "output directory")->required();
    sub_gen->add_option("--config", config_path, "JSON file with defaults");
    sub_gen->callback([&] { rc = cmd_gen_data(gen); });

    TrainArgs td;
    td.steps = 600;
    CLI::App* sub_td =
        app.add_subcommand("train-detector", "train the detection stage");
    sub_td->add_option("--data", td.data, "dataset directory")->required();
    sub_td->add_option("--steps", td.steps, "optimizer steps");
    sub_td->add_option("--lr", td.lr, "base learning rate");
    sub_td->add_option("--seed", td.seed, "RNG seed");
    sub_td->add_option("--out", td.out, "checkpoint file")->required();
    sub_td->add_option("--config", config_path, "JSON file with defaults");
    sub_td->callback([&] { rc = cmd_train_detector(td); });

    TrainArgs ts;
    CLI::App* sub_ts = app.add_subcommand(
        "train-semantic", "train the semantic decoder on a frozen detector");
    sub_ts->add_option("--data", ts.data, "dataset directory")->required();
    sub_ts->add_option("--detector", ts.detector, "detector checkpoint")
        ->required();
    sub_ts->add_option("--steps", ts.steps, "optimizer steps");
    sub_ts->add_option("--lr", ts.lr, "base learning rate");
    sub_ts->add_option("--seed", ts.seed, "RNG seed");
    sub_ts->add_option("--out", ts.out, "checkpoint file")->required();
    sub_ts->add_option("--config", config_path, "JSON file with defaults");
    sub_ts->callback([&] { rc = cmd_train_semantic(ts); });

    TrainArgs ti;
    ti.lr = 0.02;
    CLI::App* sub_ti = app.add_subcommand(
        "train-instance", "train the instance head on a frozen detector");
    sub_ti->add_option("--data", ti.data, "dataset directory")->required();
    sub_ti->add_option("--detector", ti.detector, "detector checkpoint")
        ->required();
    sub_ti->add_option("--k", ti.k, "relative-position grid size");
    sub_ti->add_option("--p", ti.p, "positive ROIs per object");
    sub_ti->add_option("--n", ti.n, "negative ROIs per object");
    sub_ti->add_option("--steps", ti.steps, "optimizer steps");
    sub_ti->add_option("--lr", ti.lr, "base learning rate");
    sub_ti->add_option("--seed", ti.seed, "RNG seed");
    sub_ti->add_option("--out", ti.out, "checkpoint file")->required();
    sub_ti->add_option("--config", config_path, "JSON file with defaults");
    sub_ti->callback([&] { rc = cmd_train_instance(ti); });

    EvalArgs es;
    CLI::App* sub_es = app.add_subcommand(
        "eval-semantic", "report per-class IoU and mIoU on a dataset");
    sub_es->add_option("--data", es.data, "dataset directory")->required();
    sub_es->add_option("--ckpt", es.ckpt, "semantic checkpoint")->required();
    sub_es->add_option("--config", config_path, "JSON file with defaults");
    sub_es->callback([&] { rc = cmd_eval_semantic(es); });

    EvalArgs ei;
    CLI::App* sub_ei = app.add_subcommand(
        "eval-instance", "report mask mAP at the given IoU thresholds");
    sub_ei->add_option("--data", ei.data, "dataset directory")->required();
    sub_ei->add_option("--ckpt", ei.ckpt, "instance checkpoint")->required();
    sub_ei->add_option("--thresholds", ei.thresholds,
                       "comma-separated IoU thresholds");
    sub_ei->add_option("--config", config_path, "JSON file with defaults");
    sub_ei->callback([&] { rc = cmd_eval_instance(ei); });

    PredictArgs pr;
    CLI::App* sub_pr =
        app.add_subcommand("predict", "run one image and render the result");
    sub_pr->add_option("--image", pr.image, "input PPM image")->required();
    sub_pr->add_option("--ckpt", pr.ckpt, "checkpoint file")->required();
    sub_pr->add_option("--mode", pr.mode, "semantic or instance")
        ->required()
        ->check(CLI::IsMember({"semantic", "instance"}));
    sub_pr->add_option("--render", pr.render, "output PPM overlay")
        ->required();
    sub_pr->add_option("--config", config_path, "JSON file with defaults");
    sub_pr->callback([&] { rc = cmd_predict(pr); });

    std::vector<const char*> argv;
    argv.push_back("boxseg");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 1;
  }
  return rc;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace boxseg
