#include "boxseg/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "boxseg/common.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace boxseg {
namespace {

std::string sample_stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

bool is_sample_stem(const std::string& s) {
  if (s.size() != 5) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

void write_json(const SynthSample& s, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["has_mask"] = s.has_mask;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& inst : s.instances) {
    nlohmann::json ji;
    ji["class"] = inst.cls;
    ji["box"] = {inst.box.x_min, inst.box.y_min, inst.box.x_max,
                 inst.box.y_max};
    arr.push_back(std::move(ji));
  }
  j["instances"] = std::move(arr);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(detail::cat(path, ": cannot open file for writing"));
  out << j.dump(2) << '\n';
  if (!out) throw Error(detail::cat(path, ": write failed"));
}

SynthSample read_sample(const std::string& dir, const std::string& stem) {
  std::string json_path = dir + "/" + stem + ".json";
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw Error(detail::cat(json_path, ": cannot open file"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(detail::cat(json_path, ": ", e.what()));
  }

  SynthSample s;
  try {
    if (j.at("schema_version").get<int>() != 1)
      throw Error(detail::cat(json_path, ": unsupported schema_version ",
                              j["schema_version"].dump()));
    s.has_mask = j.at("has_mask").get<bool>();
    s.image = read_ppm(dir + "/" + stem + ".ppm");
    ImageU8 imap = read_pgm(dir + "/" + stem + ".inst.pgm");
    if (imap.h != s.image.h || imap.w != s.image.w)
      throw Error(detail::cat(json_path, ": instance map is ", imap.w, "x",
                              imap.h, " but image is ", s.image.w, "x",
                              s.image.h));
    const auto& arr = j.at("instances");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      SynthInstance inst;
      inst.cls = arr[i].at("class").get<int>();
      if (inst.cls < 1)
        throw Error(detail::cat(json_path, ": instance ", i, " has class ",
                                inst.cls, " < 1"));
      const auto& b = arr[i].at("box");
      if (b.size() != 4)
        throw Error(detail::cat(json_path, ": instance ", i,
                                " box needs 4 numbers, has ", b.size()));
      inst.box = Box{b[0].get<float>(), b[1].get<float>(), b[2].get<float>(),
                     b[3].get<float>()};
      if (!(inst.box.x_min >= 0 && inst.box.x_min < inst.box.x_max &&
            inst.box.x_max <= 1 && inst.box.y_min >= 0 &&
            inst.box.y_min < inst.box.y_max && inst.box.y_max <= 1))
        throw Error(detail::cat(json_path, ": instance ", i,
                                " box is out of range"));
      inst.mask.assign(imap.data.size(), 0);
      s.instances.push_back(std::move(inst));
    }
    for (std::size_t p = 0; p < imap.data.size(); ++p) {
      int v = imap.data[p];
      if (v > static_cast<int>(s.instances.size()))
        throw Error(detail::cat(dir, "/", stem, ".inst.pgm: pixel value ", v,
                                " exceeds instance count ",
                                s.instances.size()));
      if (v > 0) s.instances[static_cast<std::size_t>(v - 1)].mask[p] = 1;
    }
    for (std::size_t i = 0; i < s.instances.size(); ++i) {
      const auto& m = s.instances[i].mask;
      if (std::find(m.begin(), m.end(), 1) == m.end())
        throw Error(detail::cat(dir, "/", stem, ".inst.pgm: instance ", i,
                                " has no visible pixels"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(detail::cat(json_path, ": ", e.what()));
  }
  return s;
}

}  // namespace

void write_dataset(const std::vector<SynthSample>& samples,
                   const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(detail::cat(dir, ": cannot create directory"));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::string stem = sample_stem(i);
    write_ppm(dir + "/" + stem + ".ppm", samples[i].image);
    write_pgm(dir + "/" + stem + ".inst.pgm", samples[i].instance_map());
    write_json(samples[i], dir + "/" + stem + ".json");
  }
}

std::vector<SynthSample> read_dataset(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw Error(detail::cat(dir, ": not a directory"));
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.extension() != ".json") continue;
    std::string stem = p.stem().string();
    if (is_sample_stem(stem)) stems.push_back(stem);
  }
  std::sort(stems.begin(), stems.end());
  std::vector<SynthSample> samples;
  samples.reserve(stems.size());
  for (const auto& stem : stems) samples.push_back(read_sample(dir, stem));
  return samples;
}

std::vector<bool> make_split(const std::vector<SynthSample>& samples,
                             double mask_fraction, int num_classes,
                             std::uint64_t seed) {
  std::size_t n = samples.size();
  if (n == 0) throw Error("make_split: empty sample list");
  if (!(mask_fraction > 0.0) || mask_fraction > 1.0)
    throw Error(detail::cat("make_split: mask_fraction ", mask_fraction,
                            " outside (0, 1]"));
  std::vector<std::set<int>> classes(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& inst : samples[i].instances) classes[i].insert(inst.cls);

  std::vector<int> corpus_missing;
  for (int c = 1; c <= num_classes; ++c) {
    bool found = false;
    for (const auto& set : classes)
      if (set.count(c)) {
        found = true;
        break;
      }
    if (!found) corpus_missing.push_back(c);
  }
  if (!corpus_missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < corpus_missing.size(); ++i)
      list += detail::cat(i ? ", " : "", corpus_missing[i]);
    throw Error(detail::cat(
        "make_split: no sample contains class(es) ", list,
        "; cannot give every class a mask-carrying example"));
  }

  std::size_t m = static_cast<std::size_t>(
      std::ceil(mask_fraction * static_cast<double>(n)));
  m = std::min(m, n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)));
    std::swap(order[i], order[j]);
  }

  // Repair pass: if the random prefix misses a class, swap in the earliest
  // unmarked sample that has it, evicting a marked sample whose classes stay
  // covered without it. Each round covers a new class, so this terminates.
  std::vector<int> cover(static_cast<std::size_t>(num_classes) + 1, 0);
  auto add_cover = [&](std::size_t s, int delta) {
    for (int c : classes[s])
      if (c <= num_classes) cover[static_cast<std::size_t>(c)] += delta;
  };
  for (std::size_t i = 0; i < m; ++i) add_cover(order[i], +1);
  for (;;) {
    int missing = 0;
    for (int c = 1; c <= num_classes; ++c)
      if (cover[static_cast<std::size_t>(c)] == 0) {
        missing = c;
        break;
      }
    if (missing == 0) break;
    std::size_t donor_pos = m;
    while (donor_pos < n && !classes[order[donor_pos]].count(missing))
      ++donor_pos;
    if (donor_pos == n)
      throw Error(detail::cat("make_split: class ", missing,
                              " appears only in already-marked samples"));
    std::size_t victim_pos = m;
    for (std::size_t i = m; i-- > 0;) {
      bool safe = true;
      for (int c : classes[order[i]])
        if (c <= num_classes && cover[static_cast<std::size_t>(c)] < 2 &&
            !classes[order[donor_pos]].count(c)) {
          safe = false;
          break;
        }
      if (safe) {
        victim_pos = i;
        break;
      }
    }
    if (victim_pos == m)
      throw Error(detail::cat(
          "make_split: cannot cover class ", missing, " with ", m,
          " marked samples without uncovering another class"));
    add_cover(order[victim_pos], -1);
    add_cover(order[donor_pos], +1);
    std::swap(order[victim_pos], order[donor_pos]);
  }

  std::vector<bool> flags(n, false);
  for (std::size_t i = 0; i < m; ++i) flags[order[i]] = true;
  return flags;
}

}  // namespace boxseg
