#include "dmmvh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dmmvh/data.hpp"
#include "dmmvh/loss.hpp"
#include "dmmvh/net.hpp"

namespace dmmvh {

namespace {

double loss_at(const std::vector<FeatureRecord>& batch, const Matrix& labels,
               const ModelParams& params, const ModelConfig& model, const LossConfig& loss) {
  ForwardResult fr = forward_batch(batch, params, model, 0.0, false, 0);
  return total_loss(fr.codes, labels, loss).loss;
}

}  // namespace

GradcheckResult run_gradcheck(std::uint64_t seed, std::size_t instances, double step) {
  std::mt19937_64 rng(seed);
  auto uniform_int = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  GradcheckResult result;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    ModelConfig model;
    const std::size_t views = uniform_int(1, 3);
    for (std::size_t v = 0; v < views; ++v) model.view_dims.push_back(uniform_int(3, 8));
    model.proj_dim = uniform_int(2, 4);
    model.bits = uniform_int(2, 6);
    model.fusion = inst % 4 == 3 ? FusionMode::kConcat : FusionMode::kGated;

    const std::size_t b = uniform_int(2, 8);
    const std::size_t categories = 3;
    std::vector<FeatureRecord> batch(b);
    for (std::size_t i = 0; i < b; ++i) {
      batch[i].id = "g" + std::to_string(i);
      for (std::size_t d : model.view_dims) {
        Vector x(d);
        for (double& xk : x) xk = gauss(rng);
        batch[i].views.push_back(std::move(x));
      }
      batch[i].label = Vector(categories);
      batch[i].label[uniform_int(0, categories - 1)] = 1.0;
      if (coin(rng)) batch[i].label[uniform_int(0, categories - 1)] = 1.0;
    }
    const Matrix labels = label_matrix(batch);

    LossConfig loss;
    loss.lambda = coin(rng) ? 0.5 : 0.25 + 0.25 * std::uniform_real_distribution<double>()(rng);
    if (loss.lambda * b < 1.0) loss.lambda = 0.5;
    loss.mu = 0.5;
    loss.w_d = 1.5;

    // Scale the default initialization up so gates and tanh units leave their linear range.
    ModelParams params = init_params(model, rng());
    for (auto t : params.tensors()) {
      for (double& x : t) x *= 2.0;
    }

    ForwardResult fr = forward_batch(batch, params, model, 0.0, false, 0);
    const TotalLoss tl = total_loss(fr.codes, labels, loss);
    const Gradients analytic = backward_batch(fr.tape, params, model, tl.grad);

    const auto names = params.tensor_names();
    auto theta = params.tensors();
    const auto grads = analytic.tensors();
    for (std::size_t t = 0; t < theta.size(); ++t) {
      for (std::size_t i = 0; i < theta[t].size(); ++i) {
        const double saved = theta[t][i];
        theta[t][i] = saved + step;
        const double up = loss_at(batch, labels, params, model, loss);
        theta[t][i] = saved - step;
        const double down = loss_at(batch, labels, params, model, loss);
        theta[t][i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = grads[t][i];
        const double err =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
        if (err > result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_tensor = names[t];
        }
        ++result.parameters_checked;
      }
    }
    ++result.instances;
  }
  return result;
}

}  // namespace dmmvh
