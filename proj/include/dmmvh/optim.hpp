#pragma once

#include <cstdint>

#include "dmmvh/net.hpp"

namespace dmmvh {

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

void validate(const AdamWConfig& cfg);

struct OptimState {
  std::uint64_t step = 0;
  Gradients m;  // first moments
  Gradients v;  // second moments, non-negative
  AdamWConfig hyper;

  friend bool operator==(const OptimState&, const OptimState&) = default;
};

OptimState make_optim_state(const ModelParams& params, const AdamWConfig& hyper);

// One AdamW update with bias correction and decoupled weight decay:
//   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
// `lr` overrides hyper.lr when a schedule is in use.
void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state);
void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state, double lr);

}  // namespace dmmvh
