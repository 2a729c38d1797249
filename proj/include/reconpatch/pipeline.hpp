#pragma once

// The five pipeline stages behind the command-line tool. Each stage validates
// its configuration and inputs before writing anything.

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reconpatch/config.hpp"
#include "reconpatch/error.hpp"
#include "reconpatch/eval.hpp"
#include "reconpatch/feature_io.hpp"
#include "reconpatch/memory_bank.hpp"
#include "reconpatch/patch_features.hpp"
#include "reconpatch/repr_learning.hpp"
#include "reconpatch/scoring.hpp"

namespace reconpatch {

namespace fs = std::filesystem;

struct StagePaths {
  fs::path checkpoint;
  fs::path bank;
  fs::path scores;
  fs::path report;
};

inline StagePaths default_paths(const PipelineConfig& cfg, Split split = Split::Test) {
  return {cfg.workdir / "model.rcpm", cfg.workdir / "bank.rcpb",
          cfg.workdir / ("scores_" + std::string(to_string(split)) + ".jsonl"), cfg.workdir / "report.json"};
}

inline DatasetManifest load_pipeline_manifest(const PipelineConfig& cfg) {
  if (cfg.manifest.empty()) fail(ErrorCode::ConfigError, "paths.manifest is not set");
  if (!fs::exists(cfg.manifest)) fail(ErrorCode::IoFailure, "manifest " + cfg.manifest.string() + " does not exist");
  auto m = load_manifest(cfg.manifest);
  for (const auto& lv : cfg.patch.levels)
    if (std::find(m.levels.begin(), m.levels.end(), lv) == m.levels.end())
      fail(ErrorCode::MissingLevelPath, "level " + lv + " is not declared in the manifest");
  return m;
}

inline PatchFeatureSet load_patch_features(const SampleEntry& sample, const PatchConfig& patch) {
  std::vector<TensorF32> maps;
  maps.reserve(patch.levels.size());
  for (const auto& lv : patch.levels) {
    auto it = sample.feature_paths.find(lv);
    if (it == sample.feature_paths.end()) fail(ErrorCode::MissingLevelPath, "sample " + sample.id + " lacks level " + lv);
    maps.push_back(read_tensor(it->second));
  }
  return build_patch_features(maps, patch.patch_size);
}

inline std::vector<PatchFeatureSet> load_split_features(const std::vector<const SampleEntry*>& samples,
                                                        const PatchConfig& patch, unsigned workers) {
  std::vector<PatchFeatureSet> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) { out[i] = load_patch_features(*samples[i], patch); });
  for (const auto& s : out)
    if (s.dim() != out.front().dim()) fail(ErrorCode::DimMismatch, "samples differ in merged feature dimension");
  return out;
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

inline void run_train(const PipelineConfig& cfg, const fs::path& out_path, std::ostream& log) {
  const auto manifest = load_pipeline_manifest(cfg);
  const auto train_samples = manifest.split(Split::Train);
  if (train_samples.empty()) fail(ErrorCode::EmptyDataset, "manifest has no train samples");
  const auto sets = load_split_features(train_samples, cfg.patch, cfg.workers);

  std::size_t patches = 0;
  for (const auto& s : sets) patches += s.size();
  log << "training on " << sets.size() << " samples, " << patches << " patches\n";
  const auto model = train(sets, cfg.train);
  ensure_parent(out_path);
  save_checkpoint(out_path, model, cfg.train);
  log << "wrote " << out_path.string() << "\n";
}

inline std::vector<double> image_scores(const MemoryBank& bank, const RepresentationModel& model,
                                        const std::vector<PatchFeatureSet>& sets, std::size_t b, unsigned workers) {
  std::vector<double> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.push_back(image_score(score_sample(bank, model, s, b, workers)));
  return out;
}

inline void run_build_bank(const PipelineConfig& cfg, const fs::path& checkpoint_path, const fs::path& out_path,
                           std::ostream& log) {
  const auto manifest = load_pipeline_manifest(cfg);
  const auto ck = load_checkpoint(checkpoint_path);
  const auto train_samples = manifest.split(Split::Train);
  if (train_samples.empty()) fail(ErrorCode::EmptyDataset, "manifest has no train samples");
  const auto sets = load_split_features(train_samples, cfg.patch, cfg.workers);
  if (sets.front().dim() != ck.model.input_dim())
    fail(ErrorCode::DimMismatch, "checkpoint expects input dim " + std::to_string(ck.model.input_dim()) + ", features have " +
                                     std::to_string(sets.front().dim()));

  MemoryBank bank = build_bank(ck.model, sets, cfg.bank.fraction, cfg.bank.seed);
  bank.category = manifest.category;
  bank.fingerprint = bank_fingerprint(ck.config, manifest.category);
  if (bank.size() < cfg.scoring.b)
    fail(ErrorCode::BankTooSmall, "bank holds " + std::to_string(bank.size()) + " rows but scoring.b = " +
                                      std::to_string(cfg.scoring.b));
  const auto train_scores = image_scores(bank, ck.model, sets, cfg.scoring.b, cfg.workers);
  bank.norm_stats = fit_norm_stats(train_scores);

  ensure_parent(out_path);
  save_bank(out_path, bank);
  log << "wrote " << out_path.string() << " (" << bank.size() << " rows, dim " << bank.dim() << ")\n";
}

inline std::string map_file_name(std::size_t ordinal, const std::string& id) {
  std::string clean = id;
  for (char& c : clean)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << ordinal << "_" << clean << ".npy";
  return os.str();
}

// Writes one JSON line per sample and the upsampled score maps (as NPY) next
// to the output file under maps_<split>/.
inline void run_score(const PipelineConfig& cfg, const fs::path& checkpoint_path, const fs::path& bank_path, Split split,
                      const fs::path& out_path, std::ostream& log) {
  const auto manifest = load_pipeline_manifest(cfg);
  const auto ck = load_checkpoint(checkpoint_path);
  std::vector<std::string> warnings;
  const auto bank = load_bank(bank_path, bank_fingerprint(ck.config, manifest.category), warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  if (bank.dim() != ck.model.feature_dim()) fail(ErrorCode::DimMismatch, "bank dim does not match the checkpoint's f output");
  if (bank.size() < cfg.scoring.b) fail(ErrorCode::BankTooSmall, "bank is smaller than scoring.b");

  const auto samples = manifest.split(split);
  if (samples.empty()) log << "warning: no " << to_string(split) << " samples in manifest; writing empty output\n";
  const auto sets = load_split_features(samples, cfg.patch, cfg.workers);
  if (!sets.empty() && sets.front().dim() != ck.model.input_dim())
    fail(ErrorCode::DimMismatch, "features do not match the checkpoint input dim");

  const std::string maps_rel = "maps_" + std::string(to_string(split));
  const fs::path maps_dir = out_path.parent_path() / maps_rel;
  ensure_parent(out_path);
  if (!samples.empty()) fs::create_directories(maps_dir);

  std::ostringstream lines;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& entry = *samples[i];
    const auto map = upsample_map(score_sample(bank, ck.model, sets[i], cfg.scoring.b, cfg.workers), entry.image_size,
                                  cfg.scoring.smooth_sigma);
    const double score = image_score(map);
    const std::string name = map_file_name(i, entry.id);
    TensorF32 t({map.up_height, map.up_width}, std::vector<float>(map.upsampled.begin(), map.upsampled.end()));
    write_tensor(maps_dir / name, t);

    nlohmann::json rec = {{"id", entry.id}, {"image_score", score}, {"map_path", maps_rel + "/" + name}};
    rec["normalized_score"] = bank.norm_stats ? nlohmann::json(normalize(score, *bank.norm_stats)) : nlohmann::json(nullptr);
    lines << rec.dump() << "\n";
  }
  write_text(out_path, lines.str());
  log << "scored " << samples.size() << " samples -> " << out_path.string() << "\n";
}

struct ScoreRecord {
  std::string id;
  double image_score = 0.0;
  std::optional<double> normalized_score;
  std::optional<std::string> map_path;
};

inline std::vector<ScoreRecord> read_scores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open scores " + path.string());
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ScoreRecord r;
      r.id = j.at("id").get<std::string>();
      r.image_score = j.at("image_score").get<double>();
      if (auto it = j.find("normalized_score"); it != j.end() && !it->is_null()) r.normalized_score = it->get<double>();
      if (auto it = j.find("map_path"); it != j.end() && !it->is_null()) r.map_path = it->get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

inline std::vector<int> load_mask(const fs::path& path) {
  const auto t = read_tensor(path);
  std::vector<int> mask(t.data.size());
  std::transform(t.data.begin(), t.data.end(), mask.begin(), [](float v) { return v != 0.0f ? 1 : 0; });
  return mask;
}

inline nlohmann::json evaluate_scores(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                      const std::vector<ScoreRecord>& records, const fs::path& scores_dir, std::ostream& log) {
  std::map<std::string, const SampleEntry*> by_id;
  for (const auto& s : manifest.samples) by_id[s.id] = &s;

  LabeledScores ls;
  std::vector<double> normal, abnormal;
  std::vector<const ScoreRecord*> used;
  for (const auto& r : records) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) fail(ErrorCode::InvariantViolation, "scored sample '" + r.id + "' is not in the manifest");
    if (it->second->label == Label::Unknown) continue;
    const int label = it->second->label == Label::Abnormal ? 1 : 0;
    ls.scores.push_back(r.image_score);
    ls.labels.push_back(label);
    (label ? abnormal : normal).push_back(r.image_score);
    used.push_back(&r);
  }

  nlohmann::json report;
  report["n_samples"] = ls.scores.size();
  report["image_auroc"] = auroc(ls);
  const auto thr = f1_optimal_threshold(ls);
  report["f1"] = thr.f1;
  report["threshold"] = thr.threshold;
  try {
    report["d_prime"] = discriminability(normal, abnormal);
  } catch (const Error& e) {
    log << "warning: d_prime unavailable: " << e.what() << "\n";
    report["d_prime"] = nullptr;
  }

  const bool any_mask = std::any_of(used.begin(), used.end(), [&](const ScoreRecord* r) { return by_id[r->id]->mask_path.has_value(); });
  if (cfg.eval.pixel && any_mask) {
    std::vector<std::vector<double>> maps;
    std::vector<std::vector<int>> masks;
    for (const ScoreRecord* r : used) {
      const auto* entry = by_id[r->id];
      if (!r->map_path) fail(ErrorCode::InvariantViolation, "sample '" + r->id + "' has no score map");
      if (!entry->mask_path && entry->label == Label::Abnormal) continue;
      const auto map = read_tensor(scores_dir / *r->map_path);
      maps.emplace_back(map.data.begin(), map.data.end());
      masks.push_back(entry->mask_path ? load_mask(*entry->mask_path) : std::vector<int>(map.data.size(), 0));
    }
    report["pixel_auroc"] = pixel_auroc(maps, masks);
  }
  return report;
}

inline void run_eval(const PipelineConfig& cfg, const fs::path& scores_path, const fs::path& out_path, std::ostream& log) {
  const auto manifest = load_pipeline_manifest(cfg);
  const auto records = read_scores(scores_path);
  const auto report = evaluate_scores(cfg, manifest, records, scores_path.parent_path(), log);
  write_text(out_path, report.dump(2) + "\n");
  log << "image AUROC " << report["image_auroc"].get<double>() << " -> " << out_path.string() << "\n";
}

// Mean of the per-model normalised image scores, matched by sample id.
inline void run_fuse(const std::vector<fs::path>& inputs, const fs::path& out_path, std::ostream& log) {
  require(!inputs.empty(), ErrorCode::LengthMismatch, "fuse needs at least one score file");
  std::vector<std::vector<ScoreRecord>> all;
  for (const auto& p : inputs) all.push_back(read_scores(p));

  const auto& first = all.front();
  std::vector<std::vector<double>> lists(all.size());
  for (std::size_t f = 0; f < all.size(); ++f) {
    std::map<std::string, const ScoreRecord*> by_id;
    for (const auto& r : all[f]) by_id[r.id] = &r;
    if (all[f].size() != first.size())
      fail(ErrorCode::LengthMismatch, inputs[f].string() + " has " + std::to_string(all[f].size()) + " samples, expected " +
                                          std::to_string(first.size()));
    for (const auto& r : first) {
      auto it = by_id.find(r.id);
      if (it == by_id.end()) fail(ErrorCode::LengthMismatch, "sample id '" + r.id + "' missing from " + inputs[f].string());
      if (!it->second->normalized_score)
        fail(ErrorCode::InvariantViolation, "sample id '" + r.id + "' has no normalized_score in " + inputs[f].string());
      lists[f].push_back(*it->second->normalized_score);
    }
  }
  const auto fused = fuse(lists);
  std::ostringstream lines;
  for (std::size_t i = 0; i < first.size(); ++i)
    lines << nlohmann::json{{"id", first[i].id}, {"image_score", fused[i]}, {"normalized_score", fused[i]}}.dump() << "\n";
  write_text(out_path, lines.str());
  log << "fused " << inputs.size() << " score files -> " << out_path.string() << "\n";
}

}  // namespace reconpatch
