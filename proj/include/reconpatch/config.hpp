#pragma once

// Pipeline configuration: one JSON document, every field optional except the
// manifest path, unknown keys rejected. Dotted overrides ("train.lr=1e-4")
// are applied to the document before validation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reconpatch/error.hpp"
#include "reconpatch/repr_learning.hpp"

namespace reconpatch {

struct PatchConfig {
  std::vector<std::string> levels{"2", "3"};
  std::size_t patch_size = 3;
};

struct BankConfig {
  double fraction = 0.01;
  std::uint64_t seed = 0;
};

struct ScoringConfig {
  std::size_t b = 5;
  double smooth_sigma = 4.0;
};

struct EvalConfig {
  bool pixel = true;
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path workdir = "work";
  PatchConfig patch;
  TrainConfig train;
  BankConfig bank;
  ScoringConfig scoring;
  EvalConfig eval;
  unsigned workers = 1;
};

inline nlohmann::json default_config_json() {
  return nlohmann::json::parse(R"({
    "paths": {"manifest": null, "workdir": "work"},
    "patch": {"levels": ["2", "3"], "s": 3},
    "similarity": {"sigma": 1.0, "k": 10, "alpha": 0.5},
    "train": {"epochs": 120, "batch_size": 64, "lr": 1e-5, "weight_decay": 1e-2,
              "margin": 1.0, "gamma": 0.99, "seed": 0, "d_f": 512, "d_g": null},
    "bank": {"fraction": 0.01, "seed": 0},
    "scoring": {"b": 5, "smooth_sigma": 4.0},
    "eval": {"pixel": true},
    "workers": 1
  })");
}

namespace config_detail {

inline void check_keys(const nlohmann::json& user, const nlohmann::json& schema, const std::string& prefix) {
  if (!user.is_object()) fail(ErrorCode::ConfigError, (prefix.empty() ? "config" : prefix) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    auto it = schema.find(key);
    if (it == schema.end()) fail(ErrorCode::ConfigError, "unknown config key '" + path + "'");
    if (it->is_object()) check_keys(value, *it, path);
  }
}

template <typename T>
T get(const nlohmann::json& doc, const std::string& section, const std::string& key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::ConfigError, section + "." + key + " has the wrong type");
  }
}

inline std::size_t get_count(const nlohmann::json& doc, const std::string& section, const std::string& key) {
  const auto& v = doc.at(section).at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(ErrorCode::ConfigError, section + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

inline std::uint64_t get_seed(const nlohmann::json& doc, const std::string& section) {
  const auto& v = doc.at(section).at("seed");
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    fail(ErrorCode::ConfigError, section + ".seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

// Parses an override value as JSON when possible, otherwise as a plain string.
inline nlohmann::json parse_value(const std::string& text) {
  auto v = nlohmann::json::parse(text, nullptr, false);
  if (v.is_discarded()) return text;
  return v;
}

}  // namespace config_detail

// Applies "a.b.c" = value overrides to a (user) config document.
inline void apply_overrides(nlohmann::json& doc, const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [key, value] : overrides) {
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) fail(ErrorCode::ConfigError, "malformed override key '" + key + "'");
      if (!node->is_object()) *node = nlohmann::json::object();
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = config_detail::parse_value(value);
  }
}

// `base_dir` resolves relative paths (normally the config file's directory).
inline PipelineConfig parse_config(const nlohmann::json& user, const std::filesystem::path& base_dir) {
  using namespace config_detail;
  const auto defaults = default_config_json();
  check_keys(user, defaults, "");
  nlohmann::json doc = defaults;
  doc.merge_patch(user);

  PipelineConfig cfg;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  if (const auto& m = doc["paths"]["manifest"]; !m.is_null()) cfg.manifest = resolve(get<std::string>(doc, "paths", "manifest"));
  cfg.workdir = resolve(get<std::string>(doc, "paths", "workdir"));

  cfg.patch.levels.clear();
  const auto& levels = doc["patch"]["levels"];
  if (!levels.is_array() || levels.empty()) fail(ErrorCode::ConfigError, "patch.levels must be a non-empty list");
  for (const auto& lv : levels) {
    if (lv.is_string()) cfg.patch.levels.push_back(lv.get<std::string>());
    else if (lv.is_number_integer()) cfg.patch.levels.push_back(std::to_string(lv.get<long long>()));
    else fail(ErrorCode::ConfigError, "patch.levels entries must be strings or integers");
  }
  cfg.patch.patch_size = get_count(doc, "patch", "s");
  if (cfg.patch.patch_size % 2 == 0) fail(ErrorCode::ConfigError, "patch.s must be an odd positive integer");

  auto& t = cfg.train;
  t.sim.sigma = get<double>(doc, "similarity", "sigma");
  t.sim.k = get_count(doc, "similarity", "k");
  t.sim.alpha = get<double>(doc, "similarity", "alpha");
  t.epochs = get_count(doc, "train", "epochs");
  t.batch_size = get_count(doc, "train", "batch_size");
  t.lr = get<double>(doc, "train", "lr");
  t.weight_decay = get<double>(doc, "train", "weight_decay");
  t.margin = get<double>(doc, "train", "margin");
  t.gamma = get<double>(doc, "train", "gamma");
  t.seed = get_seed(doc, "train");
  t.d_f = get_count(doc, "train", "d_f");
  t.d_g = doc["train"]["d_g"].is_null() ? t.d_f : get_count(doc, "train", "d_g");
  validate(t);

  cfg.bank.fraction = get<double>(doc, "bank", "fraction");
  if (!(cfg.bank.fraction > 0.0 && cfg.bank.fraction <= 1.0)) fail(ErrorCode::ConfigError, "bank.fraction must lie in (0,1]");
  cfg.bank.seed = get_seed(doc, "bank");

  cfg.scoring.b = get_count(doc, "scoring", "b");
  if (cfg.scoring.b < 2) fail(ErrorCode::ConfigError, "scoring.b must be at least 2");
  cfg.scoring.smooth_sigma = get<double>(doc, "scoring", "smooth_sigma");
  if (!(cfg.scoring.smooth_sigma >= 0.0)) fail(ErrorCode::ConfigError, "scoring.smooth_sigma must be non-negative");

  cfg.eval.pixel = get<bool>(doc, "eval", "pixel");

  const auto& w = doc["workers"];
  if (!w.is_number_integer() || w.get<long long>() < 1) fail(ErrorCode::ConfigError, "workers must be a positive integer");
  cfg.workers = w.get<unsigned>();
  return cfg;
}

inline nlohmann::json read_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open config " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    return doc;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::ConfigError, path.string() + ": " + ex.what());
  }
}

inline PipelineConfig load_config(const std::filesystem::path& path,
                                  const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  auto doc = read_config_json(path);
  apply_overrides(doc, overrides);
  return parse_config(doc, path.parent_path());
}

}  // namespace reconpatch
