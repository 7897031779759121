#pragma once

#include <cstddef>
#include <vector>

#include "dmmvh/linalg.hpp"

namespace dmmvh {

enum class SimilarityMode {
  kBinary,      // s_ij = 1 iff the label vectors overlap
  kRawProduct,  // s_ij = <y_i, y_j>; may exceed 1 for multi-label data (experimental)
};

struct LossConfig {
  // Fraction of the batch in each of the two pair blocks, in (0, 0.5].
  double lambda = 0.5;
  // Weight of the quantization term.
  double mu = 0.5;
  // Weight on log(1 + e^phi) for every pair.
  double w_d = 1.5;
  // Weight of the metric term; 0 removes it (quantization-only ablation).
  double metric_weight = 1.0;
  // Replace w_d by s_ij per pair, giving the loss that ignores dissimilar pairs.
  bool weight_by_similarity = false;
  SimilarityMode similarity = SimilarityMode::kBinary;
};

void validate(const LossConfig& cfg);

// Number of rows in each pair block for batch size b: floor(lambda * b).
// Throws ConfigError when that is below 1.
std::size_t block_size(const LossConfig& cfg, std::size_t batch_size);

Matrix pairwise_similarity(const Matrix& labels_a, const Matrix& labels_b,
                           SimilarityMode mode = SimilarityMode::kBinary);

// The first and last lambda*b rows of a batch, their code inner products and similarities.
struct PairBlock {
  std::vector<std::size_t> prec_indices;
  std::vector<std::size_t> rest_indices;
  Matrix phi;
  Matrix sim;
};

PairBlock build_pair_block(const Matrix& codes, const Matrix& labels, const LossConfig& cfg);

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

// Mean over block pairs of w_d * softplus(phi) - s * phi. grad is d loss / d phi.
LossResult metric_loss(const PairBlock& block, const LossConfig& cfg);

// (1/b) * sum over `rows` of || |h_i| - 1 ||_2 with b = codes.rows(). grad has the
// shape of codes; rows outside `rows` get zero. Non-differentiable points get a zero
// subgradient.
LossResult quantization_loss(const Matrix& codes, const std::vector<std::size_t>& rows);

struct TotalLoss {
  double loss = 0.0;
  double metric = 0.0;
  double quantization = 0.0;
  Matrix grad;  // d loss / d codes
};

TotalLoss total_loss(const Matrix& codes, const Matrix& labels, const LossConfig& cfg);

// Hamming distance of two +/-1 codes from their inner product: (K - phi) / 2.
double hamming_from_inner(double phi, std::size_t bits);

}  // namespace dmmvh
