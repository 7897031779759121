#include "dmmvh/net.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dmmvh/error.hpp"
#include "dmmvh/gradcheck.hpp"

namespace dmmvh {
namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.view_dims = {5, 3};
  cfg.proj_dim = 3;
  cfg.bits = 4;
  return cfg;
}

std::vector<FeatureRecord> random_batch(const ModelConfig& cfg, std::size_t b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureRecord> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    out[i].id = "r" + std::to_string(i);
    for (std::size_t d : cfg.view_dims) {
      Vector x(d);
      for (double& v : x) v = g(rng);
      out[i].views.push_back(std::move(x));
    }
    out[i].label = Vector{1.0};
  }
  return out;
}

TEST(NetTest, NormalizeViewZeroWeights) {
  const ModelConfig cfg = small_config();
  const ModelParams p = zero_params(cfg);
  EXPECT_EQ(normalize_view(Vector{1, -2, 3, 4, 5}, p, 0), Vector(3));
}

TEST(NetTest, NormalizeViewScalarIdentity) {
  ModelConfig cfg;
  cfg.view_dims = {1};
  cfg.proj_dim = 1;
  cfg.bits = 1;
  ModelParams p = zero_params(cfg);
  p.norm_w[0](0, 0) = 1.0;
  EXPECT_NEAR(normalize_view(Vector{0.5}, p, 0)[0], 0.46212, 1e-5);
}

TEST(NetTest, NormalizeViewRangeAndShape) {
  const ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 4);
  for (auto t : p.tensors()) {
    for (double& x : t) x *= 3.0;
  }
  const Vector y = normalize_view(Vector{2, -1, 0.5, 3, -4}, p, 0);
  ASSERT_EQ(y.size(), 3u);
  for (double v : y) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(normalize_view(Vector{1, 2}, p, 0), ShapeError);
}

TEST(NetTest, ContextGatingHalfGateAtZero) {
  ModelConfig cfg;
  cfg.view_dims = {1, 1};
  cfg.proj_dim = 1;
  cfg.bits = 1;
  const ModelParams p = zero_params(cfg);
  const GateResult r = context_gating(Vector{1, -2}, p);
  EXPECT_EQ(r.gate, (Vector{0.5, 0.5}));
  EXPECT_EQ(r.fused, (Vector{0.5, -1}));
}

TEST(NetTest, ContextGatingSaturates) {
  ModelConfig cfg;
  cfg.view_dims = {1, 1};
  cfg.proj_dim = 1;
  cfg.bits = 1;
  ModelParams p = zero_params(cfg);
  p.fusion_b = Vector{40, 40};
  const GateResult r = context_gating(Vector{0.3, -0.7}, p);
  EXPECT_NEAR(r.fused[0], 0.3, 1e-15);
  EXPECT_NEAR(r.fused[1], -0.7, 1e-15);
  EXPECT_THROW(context_gating(Vector{1, 2, 3}, p), ShapeError);
}

TEST(NetTest, HashHead) {
  ModelConfig cfg;
  cfg.view_dims = {2};
  cfg.proj_dim = 2;
  cfg.bits = 3;
  ModelParams p = zero_params(cfg);
  EXPECT_EQ(hash_head(Vector{3, 1}, p), Vector(3));
  p.hash_w(0, 0) = 1.0;
  const Vector h = hash_head(Vector{3, 1}, p);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_NEAR(h[0], 0.99505, 1e-5);
  EXPECT_THROW(hash_head(Vector{1}, p), ShapeError);
}

TEST(NetTest, ForwardWithoutDropoutIgnoresMode) {
  const ModelConfig cfg = small_config();
  const ModelParams p = init_params(cfg, 8);
  const auto batch = random_batch(cfg, 6, 1);
  const auto train = forward_batch(batch, p, cfg, 0.0, true, 123);
  const auto eval = forward_batch(batch, p, cfg, 0.0, false, 999);
  EXPECT_EQ(train.codes, eval.codes);
  EXPECT_EQ(train.tape.dropout_mask.size(), 0u);
}

TEST(NetTest, ForwardSingleRecordMatchesComposition) {
  const ModelConfig cfg = small_config();
  const ModelParams p = init_params(cfg, 8);
  const auto batch = random_batch(cfg, 1, 2);
  const auto fr = forward_batch(batch, p, cfg, 0.0, false, 0);
  Vector concat;
  std::vector<double> parts;
  for (std::size_t v = 0; v < cfg.num_views(); ++v) {
    const Vector y = normalize_view(batch[0].views[v], p, v);
    parts.insert(parts.end(), y.begin(), y.end());
  }
  const Vector h = hash_head(context_gating(Vector(parts), p).fused, p);
  for (std::size_t k = 0; k < cfg.bits; ++k) EXPECT_NEAR(fr.codes(0, k), h[k], 1e-14);
}

TEST(NetTest, ForwardDeterministicUnderSeed) {
  const ModelConfig cfg = small_config();
  const ModelParams p = init_params(cfg, 8);
  const auto batch = random_batch(cfg, 8, 3);
  const auto a = forward_batch(batch, p, cfg, 0.1, true, 77);
  const auto b = forward_batch(batch, p, cfg, 0.1, true, 77);
  EXPECT_EQ(a.codes, b.codes);
  EXPECT_EQ(a.tape.dropout_mask, b.tape.dropout_mask);
}

TEST(NetTest, ForwardRejectsBadInput) {
  const ModelConfig cfg = small_config();
  const ModelParams p = init_params(cfg, 8);
  EXPECT_THROW(forward_batch({}, p, cfg, 0.0, false, 0), ArgumentError);
  auto batch = random_batch(cfg, 2, 3);
  batch[1].views[0] = Vector(4);
  EXPECT_THROW(forward_batch(batch, p, cfg, 0.0, false, 0), ShapeError);
}

TEST(NetTest, CodesAndGatesStayInOpenIntervals) {
  const ModelConfig cfg = small_config();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelParams p = init_params(cfg, seed);
    const auto fr = forward_batch(random_batch(cfg, 8, seed + 100), p, cfg, 0.1, true, seed);
    for (double h : fr.codes.span()) {
      EXPECT_GT(h, -1.0);
      EXPECT_LT(h, 1.0);
    }
    for (double g : fr.tape.gate.span()) {
      EXPECT_GT(g, 0.0);
      EXPECT_LT(g, 1.0);
    }
  }
}

TEST(NetTest, DropoutMaskIsInvertedAndUnbiased) {
  ModelConfig cfg;
  cfg.view_dims = {4};
  cfg.proj_dim = 1000;
  cfg.bits = 2;
  const ModelParams p = init_params(cfg, 1);
  std::vector<FeatureRecord> batch(100);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].id = std::to_string(i);
    batch[i].views = {Vector{1, 2, 3, 4}};
    batch[i].label = Vector{1.0};
  }
  const auto fr = forward_batch(batch, p, cfg, 0.1, true, 5);
  const auto mask = fr.tape.dropout_mask.span();
  ASSERT_EQ(mask.size(), 100000u);
  double sum = 0.0;
  for (double m : mask) {
    EXPECT_TRUE(m == 0.0 || m == 1.0 / 0.9);
    sum += m;
  }
  EXPECT_NEAR(sum / static_cast<double>(mask.size()), 1.0, 0.01);
}

TEST(NetTest, BackwardOfZeroUpstreamIsZero) {
  const ModelConfig cfg = small_config();
  const ModelParams p = init_params(cfg, 8);
  const auto fr = forward_batch(random_batch(cfg, 5, 4), p, cfg, 0.1, true, 3);
  const Gradients g = backward_batch(fr.tape, p, cfg, Matrix(5, cfg.bits));
  for (auto t : g.tensors()) {
    for (double x : t) EXPECT_EQ(x, 0.0);
  }
  EXPECT_THROW(backward_batch(fr.tape, p, cfg, Matrix(4, cfg.bits)), ShapeError);
}

TEST(NetTest, BackwardScalarNetworkHandDerived) {
  ModelConfig cfg;
  cfg.view_dims = {1};
  cfg.proj_dim = 1;
  cfg.bits = 1;
  ModelParams p = zero_params(cfg);
  const double x = 0.7, w1 = 0.9, b1 = -0.2, wf = 1.3, bf = 0.1, wh = -1.1, bh = 0.3;
  p.norm_w[0](0, 0) = w1;
  p.norm_b[0][0] = b1;
  p.fusion_w(0, 0) = wf;
  p.fusion_b[0] = bf;
  p.hash_w(0, 0) = wh;
  p.hash_b[0] = bh;
  FeatureRecord r{"a", {Vector{x}}, Vector{1.0}};
  const auto fr = forward_batch(std::vector<FeatureRecord>{r}, p, cfg, 0.0, false, 0);
  const Gradients g = backward_batch(fr.tape, p, cfg, Matrix{{1.0}});

  // L = h; chain rule written out by hand.
  const double n = std::tanh(w1 * x + b1);
  const double gate = 1.0 / (1.0 + std::exp(-(wf * n + bf)));
  const double f = gate * n;
  const double h = std::tanh(wh * f + bh);
  const double da = 1.0 - h * h;
  const double df = da * wh;
  const double ds = df * n * gate * (1.0 - gate);
  const double dn = df * gate + ds * wf;
  const double dz = dn * (1.0 - n * n);
  EXPECT_NEAR(fr.codes(0, 0), h, 1e-15);
  EXPECT_NEAR(g.hash_w(0, 0), da * f, 1e-14);
  EXPECT_NEAR(g.hash_b[0], da, 1e-14);
  EXPECT_NEAR(g.fusion_w(0, 0), ds * n, 1e-14);
  EXPECT_NEAR(g.fusion_b[0], ds, 1e-14);
  EXPECT_NEAR(g.norm_w[0](0, 0), dz * x, 1e-14);
  EXPECT_NEAR(g.norm_b[0][0], dz, 1e-14);
}

// Finite differences of a fixed linear readout sum(C .* H), independent of the loss module.
TEST(NetTest, BackwardMatchesFiniteDifferencesOfReadout) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (FusionMode mode : {FusionMode::kGated, FusionMode::kConcat}) {
    ModelConfig cfg = small_config();
    cfg.fusion = mode;
    ModelParams p = init_params(cfg, 12);
    const auto batch = random_batch(cfg, 4, 6);
    Matrix readout(4, cfg.bits);
    for (double& c : readout.span()) c = gauss(rng);
    auto objective = [&](const ModelParams& params) {
      const auto fr = forward_batch(batch, params, cfg, 0.0, false, 0);
      double s = 0.0;
      for (std::size_t i = 0; i < readout.size(); ++i) s += readout.span()[i] * fr.codes.span()[i];
      return s;
    };
    const auto fr = forward_batch(batch, p, cfg, 0.0, false, 0);
    const Gradients g = backward_batch(fr.tape, p, cfg, readout);
    auto theta = p.tensors();
    const auto grads = g.tensors();
    const double h = 1e-6;
    for (std::size_t t = 0; t < theta.size(); ++t) {
      for (std::size_t i = 0; i < theta[t].size(); ++i) {
        const double saved = theta[t][i];
        theta[t][i] = saved + h;
        const double up = objective(p);
        theta[t][i] = saved - h;
        const double down = objective(p);
        theta[t][i] = saved;
        const double numeric = (up - down) / (2 * h);
        EXPECT_NEAR(grads[t][i], numeric, 1e-7 + 1e-5 * std::abs(numeric));
      }
    }
  }
}

TEST(NetTest, DropoutMaskEntersBackward) {
  const ModelConfig cfg = small_config();
  const ModelParams p = init_params(cfg, 3);
  const auto batch = random_batch(cfg, 6, 9);
  const auto fr = forward_batch(batch, p, cfg, 0.5, true, 4);
  Matrix ones(6, cfg.bits, 1.0);
  const Gradients g = backward_batch(fr.tape, p, cfg, ones);
  // A unit dropped for every sample receives no gradient through its projection row.
  for (std::size_t j = 0; j < cfg.proj_dim; ++j) {
    bool all_dropped = true;
    for (std::size_t i = 0; i < 6; ++i) all_dropped = all_dropped && fr.tape.dropout_mask(i, j) == 0.0;
    if (all_dropped) {
      EXPECT_EQ(g.norm_b[0][j], 0.0);
    }
  }
}

TEST(NetTest, MaskedViewIsZeroInput) {
  ModelConfig cfg = small_config();
  cfg.active_views = {true, false};
  const ModelParams p = init_params(cfg, 3);
  auto batch = random_batch(cfg, 3, 1);
  const auto a = forward_batch(batch, p, cfg, 0.0, false, 0);
  for (auto& r : batch) r.views[1] = Vector(3, 42.0);
  const auto b = forward_batch(batch, p, cfg, 0.0, false, 0);
  EXPECT_EQ(a.codes, b.codes);
}

TEST(NetTest, InitIsSeededAndBounded) {
  const ModelConfig cfg = small_config();
  EXPECT_EQ(init_params(cfg, 5), init_params(cfg, 5));
  EXPECT_NE(init_params(cfg, 5), init_params(cfg, 6));
  const ModelParams p = init_params(cfg, 5);
  for (double w : p.norm_w[0].span()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(5.0));
  for (double w : p.hash_w.span()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(6.0));
}

TEST(NetTest, BinarizeSignsAndTieRule) {
  EXPECT_EQ(binarize(std::vector<double>{0.9, -0.3}).unpack(), (std::vector<double>{1, -1}));
  EXPECT_EQ(binarize(std::vector<double>{0.0}).unpack(), (std::vector<double>{1}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> h(37);
    for (double& x : h) x = u(rng);
    const HashCode once = binarize(h);
    EXPECT_EQ(binarize(once.unpack()), once);
  }
}

TEST(NetTest, GradcheckSuitePasses) {
  const GradcheckResult r = run_gradcheck(7, 20);
  EXPECT_EQ(r.instances, 20u);
  EXPECT_GT(r.parameters_checked, 1000u);
  EXPECT_LT(r.max_rel_error, 1e-4) << "worst tensor " << r.worst_tensor;
}

}  // namespace
}  // namespace dmmvh
