#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace dmmvh {

struct GradcheckResult {
  std::size_t instances = 0;
  std::size_t parameters_checked = 0;
  // max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-3); the
  // 1e-3 floor turns the 1e-4 relative tolerance into a 1e-7 absolute one near zero.
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Compares analytic parameter gradients of the total loss against central finite
// differences (step `step`) on `instances` random small networks and batches:
// view dims in [3, 8], projection in [2, 4], bits in [2, 6], batch in [2, 8], dropout off.
GradcheckResult run_gradcheck(std::uint64_t seed, std::size_t instances = 20, double step = 1e-5);

}  // namespace dmmvh
