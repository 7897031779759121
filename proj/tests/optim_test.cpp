#include "dmmvh/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dmmvh/error.hpp"

namespace dmmvh {
namespace {

ModelConfig scalar_config() {
  ModelConfig cfg;
  cfg.view_dims = {1};
  cfg.proj_dim = 1;
  cfg.bits = 1;
  return cfg;
}

ModelParams filled(const ModelConfig& cfg, double v) {
  ModelParams p = zero_params(cfg);
  for (auto t : p.tensors()) std::fill(t.begin(), t.end(), v);
  return p;
}

TEST(OptimTest, ZeroGradientWithoutDecayIsFixedPoint) {
  ModelConfig cfg;
  cfg.view_dims = {3, 2};
  cfg.proj_dim = 2;
  cfg.bits = 3;
  ModelParams p = init_params(cfg, 1);
  const ModelParams before = p;
  OptimState s = make_optim_state(p, AdamWConfig{});
  const Gradients g = zero_params(cfg);
  for (int i = 0; i < 100; ++i) adamw_step(p, g, s);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 100u);
}

TEST(OptimTest, FirstStepBiasCorrected) {
  const ModelConfig cfg = scalar_config();
  ModelParams p = filled(cfg, 1.0);
  OptimState s = make_optim_state(p, AdamWConfig{});
  adamw_step(p, filled(cfg, 1.0), s);
  // m_hat = v_hat = 1 after bias correction.
  const double expected = 1.0 - 1e-5 * (1.0 / (1.0 + 1e-8));
  for (auto t : p.tensors()) EXPECT_NEAR(t[0], expected, 1e-15);
  EXPECT_NEAR(expected, 0.99999, 1e-12);
}

TEST(OptimTest, DecoupledDecayOnly) {
  const ModelConfig cfg = scalar_config();
  ModelParams p = filled(cfg, 1.0);
  AdamWConfig h;
  h.weight_decay = 0.01;
  OptimState s = make_optim_state(p, h);
  adamw_step(p, zero_params(cfg), s);
  for (auto t : p.tensors()) EXPECT_NEAR(t[0], 1.0 - 1e-7, 1e-18);
}

TEST(OptimTest, FirstStepMagnitudeBoundedByLr) {
  ModelConfig cfg;
  cfg.view_dims = {4};
  cfg.proj_dim = 3;
  cfg.bits = 2;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams p = init_params(cfg, trial);
    const ModelParams before = p;
    Gradients g = zero_params(cfg);
    for (auto t : g.tensors()) {
      for (double& x : t) x = gauss(rng);
    }
    AdamWConfig h;
    h.lr = 1e-3;
    OptimState s = make_optim_state(p, h);
    adamw_step(p, g, s);
    const auto after = p.tensors();
    const auto prior = before.tensors();
    const auto grads = g.tensors();
    for (std::size_t t = 0; t < after.size(); ++t) {
      for (std::size_t i = 0; i < after[t].size(); ++i) {
        const double delta = after[t][i] - prior[t][i];
        EXPECT_LE(std::abs(delta), h.lr * (1.0 + 1e-12));
        if (grads[t][i] != 0.0) {
          EXPECT_LT(delta * grads[t][i], 0.0);
        }
      }
    }
  }
}

TEST(OptimTest, MomentsAndDeterminism) {
  const ModelConfig cfg = scalar_config();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ModelParams a = filled(cfg, 0.3);
  ModelParams b = a;
  OptimState sa = make_optim_state(a, AdamWConfig{});
  OptimState sb = make_optim_state(b, AdamWConfig{});
  for (int i = 0; i < 50; ++i) {
    Gradients g = zero_params(cfg);
    for (auto t : g.tensors()) t[0] = gauss(rng);
    adamw_step(a, g, sa);
    adamw_step(b, g, sb);
    for (auto t : sa.v.tensors()) EXPECT_GE(t[0], 0.0);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.step, 50u);
}

TEST(OptimTest, ShapeMismatchRejected) {
  ModelConfig big = scalar_config();
  big.bits = 2;
  ModelParams p = zero_params(scalar_config());
  OptimState s = make_optim_state(p, AdamWConfig{});
  EXPECT_THROW(adamw_step(p, zero_params(big), s), ShapeError);
}

TEST(OptimTest, InvalidHyperParameters) {
  AdamWConfig h;
  h.beta1 = 1.0;
  EXPECT_THROW(validate(h), ConfigError);
  h = AdamWConfig{};
  h.lr = 0.0;
  EXPECT_THROW(validate(h), ConfigError);
}

}  // namespace
}  // namespace dmmvh
