#pragma once

// Greedy k-center coreset selection over f-space features and the on-disk
// memory bank built from it.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "reconpatch/error.hpp"
#include "reconpatch/patch_features.hpp"
#include "reconpatch/repr_learning.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch {

struct NormStats {
  double median = 0.0;
  double mad = 0.0;
  double beta = 1.4826;

  bool operator==(const NormStats&) const = default;
};

struct MemoryBank {
  Matrix<float> coreset;  // M x dim
  double fraction = 1.0;
  std::optional<NormStats> norm_stats;
  std::uint64_t fingerprint = 0;
  std::string category;

  std::size_t dim() const { return coreset.cols; }
  std::size_t size() const { return coreset.rows; }

  bool operator==(const MemoryBank&) const = default;
};

struct CoresetOptions {
  std::uint64_t seed = 0;
  // Fixes the first center instead of drawing it from the seeded RNG.
  std::optional<std::size_t> first_index;
  // Optional map applied to the features before distances are measured
  // (e.g. a random projection). Selection indices still refer to the input rows.
  std::function<Matrix<float>(const Matrix<float>&)> pre_projection;
};

inline std::size_t coreset_size(std::size_t n, double fraction) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n);
}

struct CoresetSelection {
  std::vector<std::size_t> indices;
  // Coverage radius (max distance of any point to its nearest center) after
  // each selected center.
  std::vector<double> radii;
};

inline CoresetSelection greedy_coreset_trace(const Matrix<float>& features, double fraction, const CoresetOptions& opts = {}) {
  require(features.rows >= 1, ErrorCode::EmptyInput, "no candidate features");
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::FractionOutOfRange, "fraction must lie in (0,1]");

  Matrix<float> projected;
  const Matrix<float>* space = &features;
  if (opts.pre_projection) {
    projected = opts.pre_projection(features);
    require(projected.rows == features.rows, ErrorCode::ShapeMismatch, "pre-projection changed the row count");
    space = &projected;
  }

  const std::size_t n = space->rows;
  const std::size_t target = coreset_size(n, fraction);
  std::size_t first = 0;
  if (opts.first_index) {
    require(*opts.first_index < n, ErrorCode::EmptyInput, "first center index out of range");
    first = *opts.first_index;
  } else {
    std::mt19937_64 rng(opts.seed);
    first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  CoresetSelection sel;
  sel.indices.reserve(target);
  // Squared distance to the nearest chosen center; -1 marks chosen rows.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t next = first;
  while (true) {
    sel.indices.push_back(next);
    nearest[next] = -1.0;
    auto c = space->row(next);
    double radius = 0.0;
    std::size_t arg = n;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] < 0.0) continue;
      const double d = squared_distance(space->row(i), c);
      if (d < nearest[i]) nearest[i] = d;
      radius = std::max(radius, nearest[i]);
      if (nearest[i] > best) {
        best = nearest[i];
        arg = i;
      }
    }
    sel.radii.push_back(std::sqrt(radius));
    if (sel.indices.size() == target || arg == n) break;
    next = arg;
  }
  return sel;
}

inline std::vector<std::size_t> greedy_coreset(const Matrix<float>& features, double fraction, std::uint64_t seed) {
  CoresetOptions opts;
  opts.seed = seed;
  return greedy_coreset_trace(features, fraction, opts).indices;
}

// Max over points of the distance to the nearest of `centers`.
inline double coverage_radius(const Matrix<float>& features, std::span<const std::size_t> centers) {
  double radius = 0.0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : centers) best = std::min(best, squared_distance(features.row(i), features.row(c)));
    radius = std::max(radius, best);
  }
  return std::sqrt(radius);
}

// f-space features of every patch of every training set, stacked.
inline Matrix<float> project_features(const RepresentationModel& model, std::span<const PatchFeatureSet> sets) {
  std::size_t total = 0;
  for (const auto& s : sets) total += s.size();
  Matrix<float> out(total, model.feature_dim());
  std::size_t r = 0;
  for (const auto& s : sets) {
    const auto y = forward_f(model, s.vectors);
    for (std::size_t i = 0; i < y.data.size(); ++i) out.data[r * out.cols + i] = static_cast<float>(y.data[i]);
    r += s.size();
  }
  return out;
}

inline MemoryBank bank_from_features(const Matrix<float>& candidates, double fraction, std::uint64_t seed) {
  const auto idx = greedy_coreset(candidates, fraction, seed);
  MemoryBank bank;
  bank.fraction = fraction;
  bank.coreset = Matrix<float>(idx.size(), candidates.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = candidates.row(idx[r]);
    std::copy(src.begin(), src.end(), bank.coreset.row(r).begin());
  }
  return bank;
}

inline MemoryBank build_bank(const RepresentationModel& model, std::span<const PatchFeatureSet> train_sets, double fraction,
                             std::uint64_t seed) {
  require(!train_sets.empty(), ErrorCode::EmptyInput, "no training feature sets");
  for (const auto& s : train_sets)
    require(s.dim() == model.input_dim(), ErrorCode::DimMismatch, "feature dim does not match the model input");
  return bank_from_features(project_features(model, train_sets), fraction, seed);
}

// FNV-1a over the training configuration and dataset category.
inline std::uint64_t bank_fingerprint(const TrainConfig& cfg, const std::string& category) {
  const std::string text = to_json(cfg).dump() + "\n" + category;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Bank file: "RCPB" | u32 version | u32 dim | u64 M | f64 fraction |
// u64 fingerprint | M*dim float32 LE | u64 trailer length | JSON metadata.

inline constexpr std::uint32_t kBankVersion = 1;

inline void save_bank(const std::filesystem::path& path, const MemoryBank& bank) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write("RCPB", 4);
  bin_detail::put<std::uint32_t>(out, kBankVersion);
  bin_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(bank.dim()));
  bin_detail::put<std::uint64_t>(out, bank.size());
  bin_detail::put<double>(out, bank.fraction);
  bin_detail::put<std::uint64_t>(out, bank.fingerprint);
  out.write(reinterpret_cast<const char*>(bank.coreset.data.data()),
            static_cast<std::streamsize>(bank.coreset.data.size() * sizeof(float)));

  nlohmann::json meta = {{"category", bank.category}};
  if (bank.norm_stats)
    meta["norm_stats"] = {{"median", bank.norm_stats->median}, {"mad", bank.norm_stats->mad}, {"beta", bank.norm_stats->beta}};
  const std::string trailer = meta.dump();
  bin_detail::put<std::uint64_t>(out, trailer.size());
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

inline MemoryBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open bank " + path.string());
  const std::string what = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "RCPB") fail(ErrorCode::VersionMismatch, what + ": not a memory bank file");
  const auto version = bin_detail::get<std::uint32_t>(in, ErrorCode::CorruptPayload, what);
  if (version != kBankVersion)
    fail(ErrorCode::VersionMismatch, what + ": bank version " + std::to_string(version) + " is not supported");

  MemoryBank bank;
  const auto dim = bin_detail::get<std::uint32_t>(in, ErrorCode::CorruptPayload, what);
  const auto rows = bin_detail::get<std::uint64_t>(in, ErrorCode::CorruptPayload, what);
  bank.fraction = bin_detail::get<double>(in, ErrorCode::CorruptPayload, what);
  bank.fingerprint = bin_detail::get<std::uint64_t>(in, ErrorCode::CorruptPayload, what);
  if (dim == 0 || rows == 0 || rows > (std::uint64_t{1} << 40) / dim)
    fail(ErrorCode::CorruptPayload, what + ": implausible bank dimensions");
  if (!(bank.fraction > 0.0 && bank.fraction <= 1.0)) fail(ErrorCode::CorruptPayload, what + ": bad fraction");

  bank.coreset = Matrix<float>(rows, dim);
  const auto bytes = static_cast<std::streamsize>(bank.coreset.data.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(bank.coreset.data.data()), bytes);
  if (in.gcount() != bytes) fail(ErrorCode::CorruptPayload, what + ": truncated coreset payload");
  for (float v : bank.coreset.data)
    if (!std::isfinite(v)) fail(ErrorCode::CorruptPayload, what + ": non-finite coreset value");

  try {
    const auto meta = nlohmann::json::parse(bin_detail::read_trailer(in, what));
    bank.category = meta.at("category").get<std::string>();
    if (auto it = meta.find("norm_stats"); it != meta.end())
      bank.norm_stats = NormStats{it->at("median").get<double>(), it->at("mad").get<double>(), it->at("beta").get<double>()};
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::CorruptPayload, what + ": bad metadata trailer: " + ex.what());
  }
  return bank;
}

// Loads a bank and compares its fingerprint against the expected one. A
// mismatch is not fatal; it is reported through `warnings`.
inline MemoryBank load_bank(const std::filesystem::path& path, std::uint64_t expected_fingerprint,
                            std::vector<std::string>& warnings) {
  MemoryBank bank = load_bank(path);
  if (bank.fingerprint != expected_fingerprint)
    warnings.push_back(std::string(to_string(ErrorCode::VersionMismatch)) + ": bank " + path.string() +
                       " was built with a different training configuration or category");
  return bank;
}

}  // namespace reconpatch
