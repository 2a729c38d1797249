#pragma once

// Target-oriented representation learning: an affine feature layer f and an
// affine projection g trained with the relaxed contrastive loss, using
// pseudo-labels computed by an EMA copy of the same two layers.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "reconpatch/error.hpp"
#include "reconpatch/patch_features.hpp"
#include "reconpatch/similarity.hpp"
#include "reconpatch/tensor.hpp"

namespace reconpatch {

inline constexpr double kRelativeDistanceEps = 1e-12;

struct AffineLayer {
  Matrix<double> weight;  // in x out
  std::vector<double> bias;

  std::size_t in_dim() const { return weight.rows; }
  std::size_t out_dim() const { return weight.cols; }

  bool operator==(const AffineLayer&) const = default;
};

// f followed by g.
struct Network {
  AffineLayer f;
  AffineLayer g;

  std::array<std::span<double>, 4> params() { return {f.weight.data, f.bias, g.weight.data, g.bias}; }
  std::array<std::span<const double>, 4> params() const {
    return {std::span<const double>(f.weight.data), std::span<const double>(f.bias),
            std::span<const double>(g.weight.data), std::span<const double>(g.bias)};
  }

  bool operator==(const Network&) const = default;
};

struct RepresentationModel {
  Network live;
  Network ema;

  std::size_t input_dim() const { return live.f.in_dim(); }
  std::size_t feature_dim() const { return live.f.out_dim(); }
  std::size_t projection_dim() const { return live.g.out_dim(); }

  bool operator==(const RepresentationModel&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 120;
  std::size_t batch_size = 64;
  double lr = 1e-5;
  double weight_decay = 1e-2;
  double margin = 1.0;
  double gamma = 0.99;
  SimilarityConfig sim;
  std::uint64_t seed = 0;
  std::size_t d_f = 512;
  std::size_t d_g = 512;
};

inline void validate(const TrainConfig& cfg) {
  auto bad = [](const std::string& m) { fail(ErrorCode::ConfigError, "train: " + m); };
  if (cfg.batch_size < 2) bad("batch_size must be >= 2");
  if (!(cfg.lr >= 0.0)) bad("lr must be non-negative");
  if (!(cfg.weight_decay >= 0.0)) bad("weight_decay must be non-negative");
  if (!(cfg.margin > 0.0)) bad("margin must be positive");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) bad("gamma must lie in [0,1]");
  if (cfg.d_f == 0 || cfg.d_g == 0) bad("d_f and d_g must be positive");
  if (!(cfg.sim.sigma > 0.0)) bad("similarity.sigma must be positive");
  if (!(cfg.sim.alpha >= 0.0 && cfg.sim.alpha <= 1.0)) bad("similarity.alpha must lie in [0,1]");
  if (cfg.sim.k < 2 || cfg.sim.k > cfg.batch_size) bad("similarity.k must lie in [2, batch_size]");
}

inline nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lr", cfg.lr},
          {"weight_decay", cfg.weight_decay},
          {"margin", cfg.margin},
          {"gamma", cfg.gamma},
          {"sigma", cfg.sim.sigma},
          {"k", cfg.sim.k},
          {"alpha", cfg.sim.alpha},
          {"seed", cfg.seed},
          {"d_f", cfg.d_f},
          {"d_g", cfg.d_g}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.margin = j.at("margin").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.sim.sigma = j.at("sigma").get<double>();
  c.sim.k = j.at("k").get<std::size_t>();
  c.sim.alpha = j.at("alpha").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.d_f = j.at("d_f").get<std::size_t>();
  c.d_g = j.at("d_g").get<std::size_t>();
  return c;
}

// W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0. Values are rounded to float32
// so that a checkpoint of an untrained model reproduces it exactly.
inline RepresentationModel init_model(std::size_t input_dim, std::size_t d_f, std::size_t d_g, std::mt19937_64& rng) {
  require(input_dim > 0 && d_f > 0 && d_g > 0, ErrorCode::DimMismatch, "model dimensions must be positive");
  auto make = [&rng](std::size_t in, std::size_t out) {
    AffineLayer l{Matrix<double>(in, out), std::vector<double>(out, 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : l.weight.data) v = static_cast<float>(dist(rng));
    return l;
  };
  RepresentationModel m;
  m.live.f = make(input_dim, d_f);
  m.live.g = make(d_f, d_g);
  m.ema = m.live;
  return m;
}

inline RepresentationModel init_model(std::size_t input_dim, std::size_t d_f, std::size_t d_g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_model(input_dim, d_f, d_g, rng);
}

template <typename T>
Matrix<double> forward(const AffineLayer& layer, const Matrix<T>& x) {
  require(x.cols == layer.in_dim(), ErrorCode::DimMismatch,
          "input dim " + std::to_string(x.cols) + " != layer input dim " + std::to_string(layer.in_dim()));
  const std::size_t out = layer.out_dim();
  Matrix<double> y(x.rows, out);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto yr = y.row(r);
    std::copy(layer.bias.begin(), layer.bias.end(), yr.begin());
    auto xr = x.row(r);
    for (std::size_t i = 0; i < x.cols; ++i) {
      const double xi = static_cast<double>(xr[i]);
      if (xi == 0.0) continue;
      auto wr = layer.weight.row(i);
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
    }
  }
  return y;
}

template <typename T>
Matrix<double> forward_f(const Network& net, const Matrix<T>& p) {
  return forward(net.f, p);
}

inline EmbeddingBatch forward_g(const Network& net, const Matrix<double>& zf) { return forward(net.g, zf); }

template <typename T>
EmbeddingBatch embed(const Network& net, const Matrix<T>& p) {
  return forward_g(net, forward_f(net, p));
}

// Model-level entry points use the live (trained) layers.
template <typename T>
Matrix<double> forward_f(const RepresentationModel& model, const Matrix<T>& p) {
  return forward_f(model.live, p);
}

inline EmbeddingBatch forward_g(const RepresentationModel& model, const Matrix<double>& zf) {
  return forward_g(model.live, zf);
}

inline Matrix<double> euclidean_distances(const EmbeddingBatch& z) {
  auto d = pairwise_sq_distances(z);
  for (auto& v : d.data) v = std::sqrt(v);
  return d;
}

// delta_ij = ||z_i - z_j|| / max(eps, mean_n ||z_i - z_n||). Not symmetric.
inline Matrix<double> relative_distances(const EmbeddingBatch& z) {
  require(z.rows >= 2, ErrorCode::ShapeMismatch, "relative distances need at least two embeddings");
  auto d = euclidean_distances(z);
  const double n = static_cast<double>(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) {
    auto row = d.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    const double denom = std::max(kRelativeDistanceEps, mean);
    for (double& v : row) v /= denom;
  }
  return d;
}

inline double relaxed_contrastive_loss(const EmbeddingBatch& z, const SimilarityWeights& w, double margin) {
  require(w.rows == z.rows && w.cols == z.rows, ErrorCode::ShapeMismatch, "weights must be n x n for n embeddings");
  const auto delta = relative_distances(z);
  double attract = 0.0, repel = 0.0;
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.rows; ++j) {
      const double dl = delta(i, j);
      const double wij = w(i, j);
      const double hinge = std::max(margin - dl, 0.0);
      attract += wij * dl * dl;
      repel += (1.0 - wij) * hinge * hinge;
    }
  const double n = static_cast<double>(z.rows);
  return attract / n + repel / n;
}

// dL/dz for the relaxed contrastive loss, returned together with L.
inline double relaxed_contrastive_backward(const EmbeddingBatch& z, const SimilarityWeights& w, double margin,
                                           Matrix<double>& grad_z) {
  require(w.rows == z.rows && w.cols == z.rows, ErrorCode::ShapeMismatch, "weights must be n x n for n embeddings");
  const std::size_t n = z.rows;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto dist = euclidean_distances(z);
  grad_z = Matrix<double>(n, z.cols, 0.0);

  double loss = 0.0;
  std::vector<double> g_delta(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += dist(i, j);
    mean /= static_cast<double>(n);
    const bool guarded = mean <= kRelativeDistanceEps;
    const double denom = guarded ? kRelativeDistanceEps : mean;

    // dL/d(delta_ij) and the row's coupling through the mean distance.
    double coupling = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dl = dist(i, j) / denom;
      const double hinge = std::max(margin - dl, 0.0);
      loss += (w(i, j) * dl * dl + (1.0 - w(i, j)) * hinge * hinge) * inv_n;
      g_delta[j] = 2.0 * inv_n * (w(i, j) * dl - (1.0 - w(i, j)) * hinge);
      coupling += g_delta[j] * dist(i, j);
    }
    const double mean_term = guarded ? 0.0 : coupling * inv_n / (denom * denom);

    auto zi = z.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || dist(i, j) == 0.0) continue;
      const double h = g_delta[j] / denom - mean_term;
      const double scale = h / dist(i, j);
      auto zj = z.row(j);
      auto gi = grad_z.row(i);
      auto gj = grad_z.row(j);
      for (std::size_t c = 0; c < z.cols; ++c) {
        const double u = scale * (zi[c] - zj[c]);
        gi[c] += u;
        gj[c] -= u;
      }
    }
  }
  return loss;
}

struct Gradients {
  Network grad;  // same shapes as the network
  double loss = 0.0;
};

// Analytic gradients of the relaxed contrastive loss through g(f(p)).
template <typename T>
Gradients loss_gradients(const Network& net, const Matrix<T>& p_batch, const SimilarityWeights& w, double margin) {
  const auto zf = forward_f(net, p_batch);
  const auto z = forward_g(net, zf);
  Matrix<double> dz;
  Gradients out;
  out.loss = relaxed_contrastive_backward(z, w, margin, dz);

  auto& gf = out.grad.f;
  auto& gg = out.grad.g;
  gf = {Matrix<double>(net.f.in_dim(), net.f.out_dim(), 0.0), std::vector<double>(net.f.out_dim(), 0.0)};
  gg = {Matrix<double>(net.g.in_dim(), net.g.out_dim(), 0.0), std::vector<double>(net.g.out_dim(), 0.0)};

  const std::size_t n = p_batch.rows, df = net.f.out_dim(), dg = net.g.out_dim();
  Matrix<double> dzf(n, df, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto dzr = dz.row(r);
    auto zfr = zf.row(r);
    for (std::size_t o = 0; o < dg; ++o) gg.bias[o] += dzr[o];
    for (std::size_t i = 0; i < df; ++i) {
      auto wrow = net.g.weight.row(i);
      auto grow = gg.weight.row(i);
      double acc = 0.0;
      for (std::size_t o = 0; o < dg; ++o) {
        grow[o] += zfr[i] * dzr[o];
        acc += wrow[o] * dzr[o];
      }
      dzf(r, i) = acc;
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto dr = dzf.row(r);
    auto pr = p_batch.row(r);
    for (std::size_t o = 0; o < df; ++o) gf.bias[o] += dr[o];
    for (std::size_t i = 0; i < p_batch.cols; ++i) {
      const double pi = static_cast<double>(pr[i]);
      if (pi == 0.0) continue;
      auto grow = gf.weight.row(i);
      for (std::size_t o = 0; o < df; ++o) grow[o] += pi * dr[o];
    }
  }
  return out;
}

inline void ema_update(RepresentationModel& model, double gamma) {
  require(gamma >= 0.0 && gamma <= 1.0, ErrorCode::GammaOutOfRange, "gamma must lie in [0,1]");
  auto live = model.live.params();
  auto ema = model.ema.params();
  for (std::size_t b = 0; b < live.size(); ++b)
    for (std::size_t i = 0; i < live[b].size(); ++i) ema[b][i] = gamma * ema[b][i] + (1.0 - gamma) * live[b][i];
}

// Single-step optimizer interface over the four parameter blocks of a network.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Network& params, const Network& grads, double lr) = 0;
};

// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  explicit AdamW(double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Network& params, const Network& grads, double lr) override {
    auto p = params.params();
    auto g = grads.params();
    if (m_[0].empty())
      for (std::size_t b = 0; b < p.size(); ++b) {
        m_[b].assign(p[b].size(), 0.0);
        v_[b].assign(p[b].size(), 0.0);
      }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t b = 0; b < p.size(); ++b) {
      for (std::size_t i = 0; i < p[b].size(); ++i) {
        p[b][i] *= 1.0 - lr * weight_decay_;
        m_[b][i] = beta1_ * m_[b][i] + (1.0 - beta1_) * g[b][i];
        v_[b][i] = beta2_ * v_[b][i] + (1.0 - beta2_) * g[b][i] * g[b][i];
        const double mhat = m_[b][i] / c1;
        const double vhat = v_[b][i] / c2;
        p[b][i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  std::array<std::vector<double>, 4> m_, v_;
  std::uint64_t t_ = 0;
};

// Cosine annealing from base_lr (step 0) towards 0 at total_steps.
inline double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base_lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * t));
}

struct TrainStepInfo {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

using TrainObserver = std::function<void(const TrainStepInfo&)>;

// Flat view over the rows of several patch feature sets.
class PatchPool {
 public:
  explicit PatchPool(std::span<const PatchFeatureSet> sets) : sets_(sets) {
    std::size_t total = 0;
    for (const auto& s : sets) {
      offsets_.push_back(total);
      total += s.size();
    }
    total_ = total;
  }

  std::size_t size() const { return total_; }

  std::span<const float> row(std::size_t idx) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), idx);
    const std::size_t set = static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
    return sets_[set].vectors.row(idx - offsets_[set]);
  }

  Matrix<float> gather(std::span<const std::size_t> idx) const {
    const std::size_t dim = sets_.empty() ? 0 : sets_[0].dim();
    Matrix<float> out(idx.size(), dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto src = row(idx[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

 private:
  std::span<const PatchFeatureSet> sets_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

// min(n, total) distinct indices drawn uniformly.
inline std::vector<std::size_t> sample_batch(std::size_t total, std::size_t n, std::mt19937_64& rng) {
  n = std::min(n, total);
  std::vector<std::size_t> out;
  out.reserve(n);
  std::uniform_int_distribution<std::size_t> dist(0, total - 1);
  while (out.size() < n) {
    const std::size_t idx = dist(rng);
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

inline std::size_t total_train_steps(std::size_t pool_size, const TrainConfig& cfg) {
  return cfg.epochs * ((pool_size + cfg.batch_size - 1) / cfg.batch_size);
}

inline RepresentationModel train(std::span<const PatchFeatureSet> dataset, const TrainConfig& cfg,
                                 const TrainObserver& observer = {}) {
  require(!dataset.empty(), ErrorCode::EmptyDataset, "no training feature sets");
  validate(cfg);
  const std::size_t dim = dataset[0].dim();
  for (const auto& s : dataset) require(s.dim() == dim, ErrorCode::DimMismatch, "training sets differ in feature dim");

  const PatchPool pool(dataset);
  require(pool.size() >= 2, ErrorCode::EmptyDataset, "need at least two training patches");
  require(cfg.sim.k <= std::min(cfg.batch_size, pool.size()), ErrorCode::KOutOfRange,
          "similarity.k exceeds the number of patches per batch");

  std::mt19937_64 rng(cfg.seed);
  RepresentationModel model = init_model(dim, cfg.d_f, cfg.d_g, rng);
  AdamW optimizer(cfg.weight_decay);

  const std::size_t steps = total_train_steps(pool.size(), cfg);
  for (std::size_t step = 0; step < steps; ++step) {
    const auto idx = sample_batch(pool.size(), cfg.batch_size, rng);
    const auto batch = pool.gather(idx);
    const auto weights = similarity_weights(embed(model.ema, batch), cfg.sim);
    const auto grads = loss_gradients(model.live, batch, weights, cfg.margin);
    const double lr = cosine_lr(cfg.lr, step, steps);
    optimizer.step(model.live, grads.grad, lr);
    ema_update(model, cfg.gamma);
    if (observer) observer({step, grads.loss, lr});
  }
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoint: "RCPM" | u32 version | u32 D | u32 d_f | u32 d_g |
// live {W_f, b_f, W_g, b_g} | ema {W_f, b_f, W_g, b_g} (float32 LE) |
// u64 trailer length | TrainConfig JSON.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace bin_detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, ErrorCode on_short, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) fail(on_short, what + ": unexpected end of file");
  return v;
}

inline void put_floats(std::ostream& out, std::span<const double> v) {
  std::vector<float> tmp(v.begin(), v.end());
  out.write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(tmp.size() * sizeof(float)));
}

inline void get_floats(std::istream& in, std::span<double> v, const std::string& what) {
  std::vector<float> tmp(v.size());
  const auto bytes = static_cast<std::streamsize>(tmp.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(tmp.data()), bytes);
  if (in.gcount() != bytes) fail(ErrorCode::CorruptPayload, what + ": truncated parameter block");
  for (std::size_t i = 0; i < tmp.size(); ++i) {
    if (!std::isfinite(tmp[i])) fail(ErrorCode::CorruptPayload, what + ": non-finite parameter");
    v[i] = tmp[i];
  }
}

inline std::string read_trailer(std::istream& in, const std::string& what) {
  const auto len = get<std::uint64_t>(in, ErrorCode::CorruptPayload, what);
  if (len > (std::uint64_t{1} << 30)) fail(ErrorCode::CorruptPayload, what + ": implausible trailer length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (in.gcount() != static_cast<std::streamsize>(len)) fail(ErrorCode::CorruptPayload, what + ": truncated trailer");
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::CorruptPayload, what + ": trailing bytes");
  return s;
}

}  // namespace bin_detail

struct Checkpoint {
  RepresentationModel model;
  TrainConfig config;
};

inline void save_checkpoint(const std::filesystem::path& path, const RepresentationModel& model, const TrainConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write("RCPM", 4);
  bin_detail::put<std::uint32_t>(out, kCheckpointVersion);
  bin_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.input_dim()));
  bin_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_dim()));
  bin_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.projection_dim()));
  for (const Network* net : {&model.live, &model.ema})
    for (auto block : net->params()) bin_detail::put_floats(out, block);
  const std::string trailer = to_json(cfg).dump();
  bin_detail::put<std::uint64_t>(out, trailer.size());
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open checkpoint " + path.string());
  const std::string what = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "RCPM") fail(ErrorCode::VersionMismatch, what + ": not a model checkpoint");
  const auto version = bin_detail::get<std::uint32_t>(in, ErrorCode::CorruptPayload, what);
  if (version != kCheckpointVersion)
    fail(ErrorCode::VersionMismatch, what + ": checkpoint version " + std::to_string(version) + " is not supported");
  const auto D = bin_detail::get<std::uint32_t>(in, ErrorCode::CorruptPayload, what);
  const auto df = bin_detail::get<std::uint32_t>(in, ErrorCode::CorruptPayload, what);
  const auto dg = bin_detail::get<std::uint32_t>(in, ErrorCode::CorruptPayload, what);
  if (D == 0 || df == 0 || dg == 0) fail(ErrorCode::CorruptPayload, what + ": zero dimension");

  Checkpoint ck;
  for (Network* net : {&ck.model.live, &ck.model.ema}) {
    net->f = {Matrix<double>(D, df), std::vector<double>(df)};
    net->g = {Matrix<double>(df, dg), std::vector<double>(dg)};
    for (auto block : net->params()) bin_detail::get_floats(in, block, what);
  }
  try {
    ck.config = train_config_from_json(nlohmann::json::parse(bin_detail::read_trailer(in, what)));
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::CorruptPayload, what + ": bad config trailer: " + ex.what());
  }
  return ck;
}

}  // namespace reconpatch
