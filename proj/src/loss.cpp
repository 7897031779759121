#include "dmmvh/loss.hpp"

#include <cmath>
#include <string>

#include "dmmvh/error.hpp"

namespace dmmvh {

void validate(const LossConfig& cfg) {
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 0.5)) throw ConfigError("lambda must be in (0, 0.5]");
  if (!(cfg.mu >= 0.0) || !std::isfinite(cfg.mu)) throw ConfigError("mu must be >= 0");
  if (!(cfg.w_d >= 0.0) || !std::isfinite(cfg.w_d)) throw ConfigError("w_d must be >= 0");
  if (!(cfg.metric_weight >= 0.0) || !std::isfinite(cfg.metric_weight)) {
    throw ConfigError("metric weight must be >= 0");
  }
}

std::size_t block_size(const LossConfig& cfg, std::size_t batch_size) {
  validate(cfg);
  // Tolerate representation error in products such as 0.3 * 10.
  const auto m = static_cast<std::size_t>(std::floor(cfg.lambda * batch_size + 1e-9));
  if (m < 1) {
    throw ConfigError("lambda * batch_size must be >= 1 (lambda=" + std::to_string(cfg.lambda) +
                      ", batch=" + std::to_string(batch_size) + ")");
  }
  return m;
}

Matrix pairwise_similarity(const Matrix& labels_a, const Matrix& labels_b, SimilarityMode mode) {
  if (labels_a.cols() != labels_b.cols()) {
    throw ShapeError("pairwise_similarity: category counts " + std::to_string(labels_a.cols()) +
                     " and " + std::to_string(labels_b.cols()));
  }
  Matrix s = matmul_nt(labels_a, labels_b);
  if (mode == SimilarityMode::kBinary) {
    for (double& x : s.span()) x = x > 0.0 ? 1.0 : 0.0;
  }
  return s;
}

PairBlock build_pair_block(const Matrix& codes, const Matrix& labels, const LossConfig& cfg) {
  const std::size_t b = codes.rows();
  if (b < 2) throw ArgumentError("pair block needs a batch of at least 2");
  if (labels.rows() != b) throw ShapeError("label rows do not match the code rows");
  const std::size_t m = block_size(cfg, b);

  PairBlock block;
  Matrix h_prec(m, codes.cols());
  Matrix h_rest(m, codes.cols());
  Matrix y_prec(m, labels.cols());
  Matrix y_rest(m, labels.cols());
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t p = i;
    const std::size_t r = b - m + i;
    block.prec_indices.push_back(p);
    block.rest_indices.push_back(r);
    std::copy(codes.row(p).begin(), codes.row(p).end(), h_prec.row(i).begin());
    std::copy(codes.row(r).begin(), codes.row(r).end(), h_rest.row(i).begin());
    std::copy(labels.row(p).begin(), labels.row(p).end(), y_prec.row(i).begin());
    std::copy(labels.row(r).begin(), labels.row(r).end(), y_rest.row(i).begin());
  }
  block.phi = matmul_nt(h_prec, h_rest);
  block.sim = pairwise_similarity(y_prec, y_rest, cfg.similarity);
  return block;
}

LossResult metric_loss(const PairBlock& block, const LossConfig& cfg) {
  const std::size_t m = block.prec_indices.size();
  const double scale = 1.0 / static_cast<double>(m * m);
  LossResult out{0.0, Matrix(block.phi.rows(), block.phi.cols())};
  for (std::size_t i = 0; i < block.phi.rows(); ++i) {
    for (std::size_t j = 0; j < block.phi.cols(); ++j) {
      const double phi = block.phi(i, j);
      const double s = block.sim(i, j);
      const double w = cfg.weight_by_similarity ? s : cfg.w_d;
      out.loss += w * softplus(phi) - s * phi;
      out.grad(i, j) = (w * sigmoid(phi) - s) * scale;
    }
  }
  out.loss *= scale;
  return out;
}

LossResult quantization_loss(const Matrix& codes, const std::vector<std::size_t>& rows) {
  const double inv_b = 1.0 / static_cast<double>(codes.rows());
  LossResult out{0.0, Matrix(codes.rows(), codes.cols())};
  for (std::size_t i : rows) {
    if (i >= codes.rows()) throw ArgumentError("quantization_loss: row index out of range");
    auto h = codes.row(i);
    double sq = 0.0;
    for (double x : h) sq += (std::abs(x) - 1.0) * (std::abs(x) - 1.0);
    const double norm = std::sqrt(sq);
    out.loss += norm;
    if (norm == 0.0) continue;
    auto g = out.grad.row(i);
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double sgn = h[k] > 0.0 ? 1.0 : (h[k] < 0.0 ? -1.0 : 0.0);
      g[k] = inv_b * (std::abs(h[k]) - 1.0) / norm * sgn;
    }
  }
  out.loss *= inv_b;
  return out;
}

TotalLoss total_loss(const Matrix& codes, const Matrix& labels, const LossConfig& cfg) {
  const PairBlock block = build_pair_block(codes, labels, cfg);
  TotalLoss out;
  out.grad = Matrix(codes.rows(), codes.cols());

  if (cfg.metric_weight > 0.0) {
    const LossResult lm = metric_loss(block, cfg);
    out.metric = lm.loss;
    // phi = H_prec H_rest^T, so each side receives dPhi times the other side's rows.
    for (std::size_t i = 0; i < block.prec_indices.size(); ++i) {
      auto g_prec = out.grad.row(block.prec_indices[i]);
      for (std::size_t j = 0; j < block.rest_indices.size(); ++j) {
        const double d = cfg.metric_weight * lm.grad(i, j);
        if (d == 0.0) continue;
        auto h_rest = codes.row(block.rest_indices[j]);
        auto h_prec = codes.row(block.prec_indices[i]);
        auto g_rest = out.grad.row(block.rest_indices[j]);
        for (std::size_t k = 0; k < g_prec.size(); ++k) {
          g_prec[k] += d * h_rest[k];
          g_rest[k] += d * h_prec[k];
        }
      }
    }
  }

  std::vector<std::size_t> rows = block.prec_indices;
  rows.insert(rows.end(), block.rest_indices.begin(), block.rest_indices.end());
  const LossResult lq = quantization_loss(codes, rows);
  out.quantization = lq.loss;
  if (cfg.mu > 0.0) {
    auto g = out.grad.span();
    auto gq = lq.grad.span();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg.mu * gq[i];
  }

  out.loss = cfg.metric_weight * out.metric + cfg.mu * out.quantization;
  if (!std::isfinite(out.loss)) throw NumericError("total loss is not finite");
  return out;
}

double hamming_from_inner(double phi, std::size_t bits) {
  const double k = static_cast<double>(bits);
  if (std::abs(phi) > k) {
    throw ArgumentError("inner product " + std::to_string(phi) + " outside [-K, K] for K=" +
                        std::to_string(bits));
  }
  return 0.5 * (k - phi);
}

}  // namespace dmmvh
