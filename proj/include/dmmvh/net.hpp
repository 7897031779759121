#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmmvh/data.hpp"
#include "dmmvh/hash_code.hpp"
#include "dmmvh/linalg.hpp"

namespace dmmvh {

enum class FusionMode {
  kGated,   // x_fusion = sigmoid(W x + b) * x
  kConcat,  // x_fusion = x
};

struct ModelConfig {
  std::vector<std::size_t> view_dims;
  std::size_t proj_dim = 64;
  std::size_t bits = 16;
  FusionMode fusion = FusionMode::kGated;
  // Views switched off here are fed as zero vectors (single-view ablations).
  // Empty means every view is active.
  std::vector<bool> active_views;

  std::size_t num_views() const { return view_dims.size(); }
  std::size_t fused_dim() const { return view_dims.size() * proj_dim; }
  bool view_active(std::size_t v) const { return active_views.empty() || active_views[v]; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& cfg);

// All trainable weights. Layouts: norm_w[v] is proj_dim x view_dims[v],
// fusion_w is n x n, hash_w is bits x n, with n = views * proj_dim.
struct ModelParams {
  std::vector<Matrix> norm_w;
  std::vector<Vector> norm_b;
  Matrix fusion_w;
  Vector fusion_b;
  Matrix hash_w;
  Vector hash_b;

  // Flat views of every tensor in a fixed order (see tensor_names).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<std::string> tensor_names() const;
  // (rows, cols) per tensor; vectors report cols == 1.
  std::vector<std::pair<std::size_t, std::size_t>> tensor_shapes() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Gradients mirror the parameter layout exactly.
using Gradients = ModelParams;

ModelParams zero_params(const ModelConfig& cfg);
// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, weights and biases alike.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
// Throws ShapeError unless every tensor matches cfg, NumericError on non-finite values.
void validate(const ModelParams& params, const ModelConfig& cfg);
bool same_shape(const ModelParams& a, const ModelParams& b);

// Single-sample building blocks.
Vector normalize_view(const Vector& x, const ModelParams& params, std::size_t view);

struct GateResult {
  Vector fused;
  Vector gate;
};
GateResult context_gating(const Vector& x_concat, const ModelParams& params);

Vector hash_head(const Vector& x_fusion, const ModelParams& params);

// Activations kept for the backward pass. Every matrix has one row per sample.
struct BatchTape {
  std::vector<Matrix> inputs;      // per view, after view masking
  std::vector<Matrix> normalized;  // per view, tanh outputs
  Matrix concat;
  Matrix dropout_mask;  // empty when dropout is identity
  Matrix dropped;       // concat after dropout
  Matrix gate;          // empty in concat fusion mode
  Matrix fused;
  Matrix codes;         // tanh outputs of the hash layer

  std::size_t batch_size() const { return codes.rows(); }
};

struct ForwardResult {
  Matrix codes;
  BatchTape tape;
};

ForwardResult forward_batch(std::span<const FeatureRecord> batch, const ModelParams& params,
                            const ModelConfig& cfg, double dropout_p, bool train_mode,
                            std::uint64_t rng_seed);

Gradients backward_batch(const BatchTape& tape, const ModelParams& params,
                         const ModelConfig& cfg, const Matrix& d_codes);

// Eval-mode continuous codes for a record list, one row per record.
Matrix encode(std::span<const FeatureRecord> records, const ModelParams& params,
              const ModelConfig& cfg);

// Sign thresholding; h_k == 0 maps to +1.
HashCode binarize(std::span<const double> h);
std::vector<HashCode> binarize_rows(const Matrix& codes);

}  // namespace dmmvh
