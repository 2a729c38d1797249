#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reconpatch/repr_learning.hpp"
#include "reconpatch/synthetic.hpp"
#include "support.hpp"

namespace rp = reconpatch;
namespace ts = testing_support;
using rp::Matrix;

namespace {

rp::TrainConfig small_config() {
  rp::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.lr = 1e-3;
  cfg.d_f = 4;
  cfg.d_g = 3;
  cfg.sim = {1.0, 4, 0.5};
  cfg.seed = 9;
  return cfg;
}

std::vector<rp::PatchFeatureSet> random_sets(std::size_t count, std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::vector<rp::PatchFeatureSet> out;
  for (std::size_t i = 0; i < count; ++i) {
    rp::PatchFeatureSet s;
    s.height = rows;
    s.width = 1;
    s.vectors = ts::random_matrix<float>(rows, dim, rng);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Loss, ZeroWhenSimilarPairsCoincideAndDissimilarPairsClearTheMargin) {
  // Two points, weight 1 on the diagonal and 0 off it. Each row's mean
  // distance is d/2, so delta_01 = 2 >= m = 1 and every term vanishes.
  Matrix<double> z(2, 1);
  z(0, 0) = 0.0;
  z(1, 0) = 3.0;
  Matrix<double> w(2, 2, 0.0);
  w(0, 0) = w(1, 1) = 1.0;
  EXPECT_DOUBLE_EQ(rp::relaxed_contrastive_loss(z, w, 1.0), 0.0);
}

TEST(Loss, AllSimilarPairsGiveDeltaSquaredTerms) {
  // With w = 1 everywhere only the attraction term remains: each of the two
  // off-diagonal deltas is 2, so L = (4 + 4) / 2 = 4 regardless of spacing.
  for (double gap : {0.5, 1.0, 7.0}) {
    Matrix<double> z(2, 2, 0.0);
    z(1, 1) = gap;
    const Matrix<double> w(2, 2, 1.0);
    EXPECT_DOUBLE_EQ(rp::relaxed_contrastive_loss(z, w, 1.0), 4.0);
  }
}

TEST(Loss, RepulsionPenalisesPairsInsideTheMargin) {
  // w = 0 off the diagonal, delta = 2 < m = 3: each ordered pair adds (3-2)^2.
  Matrix<double> z(2, 1, 0.0);
  z(1, 0) = 1.0;
  Matrix<double> w(2, 2, 0.0);
  w(0, 0) = w(1, 1) = 1.0;
  EXPECT_DOUBLE_EQ(rp::relaxed_contrastive_loss(z, w, 3.0), (1.0 + 1.0) / 2.0);
}

TEST(Loss, RelativeDistanceRowsAverageToOne) {
  std::mt19937_64 rng(2);
  const auto z = ts::random_matrix<double>(7, 3, rng);
  const auto d = rp::relative_distances(z);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += d(i, j);
    EXPECT_NEAR(s / 7.0, 1.0, 1e-12);
    EXPECT_EQ(d(i, i), 0.0);
  }
}

TEST(Loss, InvariantToTranslationAndScaleOfEmbeddings) {
  std::mt19937_64 rng(3);
  const auto z = ts::random_matrix<double>(6, 3, rng);
  const auto w = rp::pairwise_similarity(z, 2.0);
  auto moved = z;
  for (std::size_t i = 0; i < moved.rows; ++i)
    for (std::size_t c = 0; c < moved.cols; ++c) moved(i, c) = 4.0 * z(i, c) + 1.5;
  EXPECT_NEAR(rp::relaxed_contrastive_loss(moved, w, 1.0), rp::relaxed_contrastive_loss(z, w, 1.0), 1e-12);
}

TEST(Gradients, MatchCentralDifferencesOnEmbeddings) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 3 + rng() % 6, d = 1 + rng() % 4;
    auto z = ts::random_matrix<double>(n, d, rng);
    const auto w = rp::similarity_weights(z, {1.0, 2 + rng() % (n - 1), 0.5});
    Matrix<double> grad;
    const double loss = rp::relaxed_contrastive_backward(z, w, 1.0, grad);
    EXPECT_NEAR(loss, rp::relaxed_contrastive_loss(z, w, 1.0), 1e-12);
    const double h = 1e-5;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      const double orig = z.data[i];
      z.data[i] = orig + h;
      const double up = rp::relaxed_contrastive_loss(z, w, 1.0);
      z.data[i] = orig - h;
      const double down = rp::relaxed_contrastive_loss(z, w, 1.0);
      z.data[i] = orig;
      EXPECT_NEAR(grad.data[i], (up - down) / (2 * h), 1e-6 * std::max(1.0, std::abs(grad.data[i])));
    }
  }
}

TEST(Gradients, BiasGradientsVanish) {
  std::mt19937_64 rng(5);
  const auto model = rp::init_model(5, 4, 3, 11);
  const auto p = ts::random_matrix<double>(9, 5, rng);
  const auto w = rp::similarity_weights(rp::embed(model.ema, p), {1.0, 4, 0.5});
  const auto g = rp::loss_gradients(model.live, p, w, 1.0);
  for (double v : g.grad.f.bias) EXPECT_NEAR(v, 0.0, 1e-12);
  for (double v : g.grad.g.bias) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Ema, KnownUpdates) {
  auto model = rp::init_model(2, 2, 2, 1);
  for (auto b : model.live.params()) std::fill(b.begin(), b.end(), 1.0);
  for (auto b : model.ema.params()) std::fill(b.begin(), b.end(), 0.0);
  rp::ema_update(model, 0.9);
  for (auto b : model.ema.params())
    for (double v : b) EXPECT_NEAR(v, 0.1, 1e-15);
  rp::ema_update(model, 0.9);
  for (auto b : model.ema.params())
    for (double v : b) EXPECT_NEAR(v, 0.19, 1e-15);

  auto frozen = model;
  rp::ema_update(frozen, 1.0);
  EXPECT_EQ(frozen.ema, model.ema);
  rp::ema_update(frozen, 0.0);
  EXPECT_EQ(frozen.ema, frozen.live);
  EXPECT_THROW(rp::ema_update(frozen, 1.1), rp::Error);
}

TEST(Ema, RepeatedUpdatesWithFixedLiveMatchClosedForm) {
  // t updates toward a fixed target: ema_t = live + gamma^t (ema_0 - live).
  auto model = rp::init_model(3, 2, 2, 2);
  for (auto b : model.ema.params()) std::fill(b.begin(), b.end(), 0.5);
  const auto start = model.ema;
  const double gamma = 0.8;
  for (int t = 0; t < 7; ++t) rp::ema_update(model, gamma);
  const auto live = model.live.params();
  const auto ema = model.ema.params();
  const auto e0 = start.params();
  for (std::size_t b = 0; b < live.size(); ++b)
    for (std::size_t i = 0; i < live[b].size(); ++i)
      EXPECT_NEAR(ema[b][i], live[b][i] + std::pow(gamma, 7) * (e0[b][i] - live[b][i]), 1e-12);
}

TEST(Training, ZeroEpochsReturnsInitialisation) {
  std::mt19937_64 rng(6);
  const auto sets = random_sets(3, 10, 5, rng);
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto model = rp::train(sets, cfg);
  std::mt19937_64 init_rng(cfg.seed);
  EXPECT_EQ(model, rp::init_model(5, cfg.d_f, cfg.d_g, init_rng));
  EXPECT_EQ(model.live, model.ema);
}

TEST(Training, FrozenWhenLearningRateAndDecayAreZero) {
  std::mt19937_64 rng(7);
  const auto sets = random_sets(2, 12, 4, rng);
  auto cfg = small_config();
  cfg.lr = 0.0;
  cfg.gamma = 1.0;
  auto zero = cfg;
  zero.epochs = 0;
  EXPECT_EQ(rp::train(sets, cfg), rp::train(sets, zero));
}

TEST(Training, DeterministicForASeedAndObservesEveryStep) {
  std::mt19937_64 rng(8);
  const auto sets = random_sets(3, 10, 4, rng);
  const auto cfg = small_config();
  std::vector<double> losses, lrs;
  const auto a = rp::train(sets, cfg, [&](const rp::TrainStepInfo& s) {
    losses.push_back(s.loss);
    lrs.push_back(s.lr);
  });
  EXPECT_EQ(a, rp::train(sets, cfg));
  EXPECT_EQ(losses.size(), rp::total_train_steps(30, cfg));
  EXPECT_DOUBLE_EQ(lrs.front(), cfg.lr);
  for (std::size_t i = 1; i < lrs.size(); ++i) EXPECT_LE(lrs[i], lrs[i - 1]);
  for (double l : losses) EXPECT_TRUE(std::isfinite(l));
}

TEST(Training, PullsClustersTogetherRelativeToTheirSeparation) {
  rp::synthetic::FixtureParams p;
  p.separation = 10.0;
  const auto [set, ids] = rp::synthetic::two_clusters(200, p);
  rp::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 64;
  cfg.lr = 1e-2;
  cfg.sim = {16.0, 32, 0.0};
  cfg.d_f = 8;
  cfg.d_g = 8;
  cfg.seed = 1;

  auto ratio = [&](const Matrix<double>& y) {
    double intra = 0.0, inter = 0.0;
    std::size_t ni = 0, nx = 0;
    for (std::size_t i = 0; i < y.rows; ++i)
      for (std::size_t j = i + 1; j < y.rows; ++j) {
        const double d = rp::euclidean_distance(y.row(i), y.row(j));
        if (ids[i] == ids[j]) intra += d, ++ni;
        else inter += d, ++nx;
      }
    return (intra / static_cast<double>(ni)) / (inter / static_cast<double>(nx));
  };
  const std::vector<rp::PatchFeatureSet> sets = {set};
  const auto model = rp::train(sets, cfg);
  EXPECT_LT(ratio(rp::forward_f(model, set.vectors)), ratio(set.vectors.cast<double>()));
}

TEST(Training, Errors) {
  std::mt19937_64 rng(9);
  const auto cfg = small_config();
  EXPECT_THROW(rp::train({}, cfg), rp::Error);
  auto sets = random_sets(2, 10, 4, rng);
  sets[1].vectors = ts::random_matrix<float>(10, 3, rng);
  EXPECT_THROW(rp::train(sets, cfg), rp::Error);
  auto big_k = cfg;
  big_k.sim.k = 40;
  big_k.batch_size = 64;
  EXPECT_THROW(rp::train(random_sets(1, 10, 4, rng), big_k), rp::Error);
}

TEST(Adam, FirstStepMovesEachParameterByLr) {
  // Bias-corrected first step is g / (|g| + eps) ~ sign(g).
  auto model = rp::init_model(2, 2, 2, 3);
  rp::Network grads = model.live;
  for (auto b : grads.params()) std::fill(b.begin(), b.end(), 0.25);
  const auto before = model.live;
  rp::AdamW opt(0.0);
  opt.step(model.live, grads, 0.01);
  const auto a = model.live.params();
  const auto b = before.params();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i) EXPECT_NEAR(b[k][i] - a[k][i], 0.01, 1e-8);
}

TEST(CosineSchedule, Endpoints) {
  EXPECT_DOUBLE_EQ(rp::cosine_lr(0.1, 0, 100), 0.1);
  EXPECT_NEAR(rp::cosine_lr(0.1, 50, 100), 0.05, 1e-15);
  EXPECT_NEAR(rp::cosine_lr(0.1, 100, 100), 0.0, 1e-15);
}

TEST(Checkpoint, RoundTripsAtFloatPrecision) {
  ts::TempDir dir("ckpt");
  auto model = rp::init_model(6, 4, 3, 5);
  model.ema.f.bias[1] = 0.123456789;
  const auto cfg = small_config();
  rp::save_checkpoint(dir / "m.rcpm", model, cfg);
  const auto ck = rp::load_checkpoint(dir / "m.rcpm");
  EXPECT_EQ(rp::to_json(ck.config), rp::to_json(cfg));
  const auto a = ck.model.ema.params();
  const auto b = model.ema.params();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i) EXPECT_EQ(a[k][i], static_cast<double>(static_cast<float>(b[k][i])));
  // Initialisation is already float-representable, so the live layers survive exactly.
  EXPECT_EQ(ck.model.live, model.live);

  // Save -> load -> save is byte stable.
  rp::save_checkpoint(dir / "n.rcpm", ck.model, ck.config);
  EXPECT_EQ(ts::read_bytes(dir / "m.rcpm"), ts::read_bytes(dir / "n.rcpm"));
}

TEST(Checkpoint, CorruptionIsDetected) {
  ts::TempDir dir("ckpt");
  rp::save_checkpoint(dir / "m.rcpm", rp::init_model(4, 3, 2, 1), small_config());
  const auto bytes = ts::read_bytes(dir / "m.rcpm");

  auto code = [&](const std::string& content) {
    ts::write_bytes(dir / "x.rcpm", content);
    try {
      rp::load_checkpoint(dir / "x.rcpm");
    } catch (const rp::Error& e) {
      return e.code();
    }
    return rp::ErrorCode::ConfigError;
  };
  EXPECT_EQ(code(bytes.substr(0, bytes.size() / 2)), rp::ErrorCode::CorruptPayload);
  EXPECT_EQ(code(bytes + "junk"), rp::ErrorCode::CorruptPayload);
  EXPECT_EQ(code("XXXX" + bytes.substr(4)), rp::ErrorCode::VersionMismatch);
  auto bumped = bytes;
  bumped[4] = 2;
  EXPECT_EQ(code(bumped), rp::ErrorCode::VersionMismatch);
}

TEST(TrainConfigJson, RoundTripsAndValidates) {
  const auto cfg = small_config();
  EXPECT_EQ(rp::to_json(rp::train_config_from_json(rp::to_json(cfg))), rp::to_json(cfg));
  auto bad = cfg;
  bad.gamma = 2.0;
  EXPECT_THROW(rp::validate(bad), rp::Error);
  bad = cfg;
  bad.sim.k = 1;
  EXPECT_THROW(rp::validate(bad), rp::Error);
}

TEST(Forward, IdentityBiasAndScalarExamples) {
  rp::AffineLayer layer;
  layer.weight = Matrix<double>(2, 2, 0.0);
  layer.weight(0, 0) = layer.weight(1, 1) = 1.0;
  layer.bias = {0.0, 0.0};
  Matrix<double> x(1, 2);
  x.data = {3.0, -4.0};
  EXPECT_EQ(rp::forward(layer, x).data, x.data);

  layer.weight = Matrix<double>(2, 2, 0.0);
  layer.bias = {1.5, -2.0};
  EXPECT_EQ(rp::forward(layer, x).data, (std::vector<double>{1.5, -2.0}));

  rp::AffineLayer scalar;
  scalar.weight = Matrix<double>(1, 1, 2.0);
  scalar.bias = {1.0};
  EXPECT_EQ(rp::forward(scalar, Matrix<double>(1, 1, 3.0))(0, 0), 7.0);
}

TEST(RelativeDistance, ClosedFormsAndScaleInvariance) {
  Matrix<double> two(2, 3);
  two.data = {0, 1, 2, 5, -1, 4};
  const auto d = rp::relative_distances(two);
  EXPECT_DOUBLE_EQ(d(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(d(1, 0), 2.0);
  for (double v : rp::relative_distances(Matrix<double>(4, 3, 1.5)).data) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(11);
  const auto z = ts::random_matrix<double>(7, 3, rng);
  auto scaled = z;
  for (double& v : scaled.data) v *= 4.0;
  const auto a = rp::relative_distances(z), b = rp::relative_distances(scaled);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-13);
}

TEST(Loss, IdenticalEmbeddingsWithFullSimilarityHaveZeroLossAndGradient) {
  const Matrix<double> z(5, 3, 2.0), w(5, 5, 1.0);
  EXPECT_EQ(rp::relaxed_contrastive_loss(z, w, 1.0), 0.0);
  Matrix<double> grad;
  rp::relaxed_contrastive_backward(z, w, 1.0, grad);
  for (double v : grad.data) EXPECT_EQ(v, 0.0);
}

TEST(Loss, NonNegativeOnRandomBatches) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng() % 10;
    const auto z = ts::random_matrix<double>(n, 3, rng);
    Matrix<double> w(n, n);
    for (double& v : w.data) v = u(rng);
    EXPECT_GE(rp::relaxed_contrastive_loss(z, w, 0.5 + u(rng)), 0.0);
  }
}

TEST(Gradients, FlatHingeRegionGivesZero) {
  // Two points with zero similarity sit at relative distance 2 > m, so nothing pulls or pushes.
  Matrix<double> z(2, 2);
  z.data = {0, 0, 3, 4};
  Matrix<double> w(2, 2, 0.0);
  w(0, 0) = w(1, 1) = 1.0;
  Matrix<double> grad;
  rp::relaxed_contrastive_backward(z, w, 1.0, grad);
  for (double v : grad.data) EXPECT_EQ(v, 0.0);
}

TEST(Ema, SingleStepAndComposition) {
  auto model = rp::init_model(2, 2, 2, 3);
  for (auto b : model.live.params()) std::fill(b.begin(), b.end(), 0.0);
  for (auto b : model.ema.params()) std::fill(b.begin(), b.end(), 1.0);
  rp::ema_update(model, 0.9);
  for (auto b : model.ema.params())
    for (double v : b) EXPECT_NEAR(v, 0.9, 1e-15);
  rp::ema_update(model, 0.9);
  for (auto b : model.ema.params())
    for (double v : b) EXPECT_NEAR(v, 0.81, 1e-15);
}
