#include "dmmvh/optim.hpp"

#include <cmath>

#include "dmmvh/error.hpp"

namespace dmmvh {

void validate(const AdamWConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be > 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(cfg.eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

OptimState make_optim_state(const ModelParams& params, const AdamWConfig& hyper) {
  validate(hyper);
  OptimState s;
  s.hyper = hyper;
  s.m = params;
  s.v = params;
  for (auto t : s.m.tensors()) std::fill(t.begin(), t.end(), 0.0);
  for (auto t : s.v.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return s;
}

void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state) {
  adamw_step(params, grads, state, state.hyper.lr);
}

void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state, double lr) {
  if (!same_shape(params, grads) || !same_shape(params, state.m) ||
      !same_shape(params, state.v)) {
    throw ShapeError("adamw_step: parameter, gradient and moment shapes differ");
  }
  const AdamWConfig& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);

  auto theta = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].size(); ++i) {
      const double gi = g[k][i];
      m[k][i] = h.beta1 * m[k][i] + (1.0 - h.beta1) * gi;
      v[k][i] = h.beta2 * v[k][i] + (1.0 - h.beta2) * gi * gi;
      const double m_hat = m[k][i] / bc1;
      const double v_hat = v[k][i] / bc2;
      theta[k][i] -= lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * theta[k][i]);
    }
  }
  for (auto t2 : params.tensors()) require_finite(t2, "adamw_step");
}

}  // namespace dmmvh
