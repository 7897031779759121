#include "dmmvh/net.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dmmvh/error.hpp"

namespace dmmvh {

void validate(const ModelConfig& cfg) {
  if (cfg.view_dims.empty()) throw ConfigError("model needs at least one view");
  for (std::size_t d : cfg.view_dims) {
    if (d == 0) throw ConfigError("view dimension must be positive");
  }
  if (cfg.proj_dim == 0) throw ConfigError("projection dimension must be positive");
  if (cfg.bits == 0) throw ConfigError("code length must be positive");
  if (!cfg.active_views.empty()) {
    if (cfg.active_views.size() != cfg.view_dims.size()) {
      throw ConfigError("active view mask length does not match view count");
    }
    bool any = false;
    for (bool a : cfg.active_views) any = any || a;
    if (!any) throw ConfigError("at least one view must be active");
  }
}

std::vector<std::span<double>> ModelParams::tensors() {
  std::vector<std::span<double>> out;
  for (std::size_t v = 0; v < norm_w.size(); ++v) {
    out.push_back(norm_w[v].span());
    out.push_back(norm_b[v].span());
  }
  out.push_back(fusion_w.span());
  out.push_back(fusion_b.span());
  out.push_back(hash_w.span());
  out.push_back(hash_b.span());
  return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (std::size_t v = 0; v < norm_w.size(); ++v) {
    out.push_back(norm_w[v].span());
    out.push_back(norm_b[v].span());
  }
  out.push_back(fusion_w.span());
  out.push_back(fusion_b.span());
  out.push_back(hash_w.span());
  out.push_back(hash_b.span());
  return out;
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> out;
  for (std::size_t v = 0; v < norm_w.size(); ++v) {
    out.push_back("norm_w." + std::to_string(v));
    out.push_back("norm_b." + std::to_string(v));
  }
  out.insert(out.end(), {"fusion_w", "fusion_b", "hash_w", "hash_b"});
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> ModelParams::tensor_shapes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t v = 0; v < norm_w.size(); ++v) {
    out.emplace_back(norm_w[v].rows(), norm_w[v].cols());
    out.emplace_back(norm_b[v].size(), 1);
  }
  out.emplace_back(fusion_w.rows(), fusion_w.cols());
  out.emplace_back(fusion_b.size(), 1);
  out.emplace_back(hash_w.rows(), hash_w.cols());
  out.emplace_back(hash_b.size(), 1);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

ModelParams zero_params(const ModelConfig& cfg) {
  validate(cfg);
  const std::size_t n = cfg.fused_dim();
  ModelParams p;
  for (std::size_t d : cfg.view_dims) {
    p.norm_w.emplace_back(cfg.proj_dim, d);
    p.norm_b.emplace_back(cfg.proj_dim);
  }
  p.fusion_w = Matrix(n, n);
  p.fusion_b = Vector(n);
  p.hash_w = Matrix(cfg.bits, n);
  p.hash_b = Vector(cfg.bits);
  return p;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = zero_params(cfg);
  std::mt19937_64 rng(mix_seed(seed, 0x1417));
  auto fill = [&rng](std::span<double> t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : t) x = dist(rng);
  };
  for (std::size_t v = 0; v < cfg.num_views(); ++v) {
    fill(p.norm_w[v].span(), cfg.view_dims[v]);
    fill(p.norm_b[v].span(), cfg.view_dims[v]);
  }
  fill(p.fusion_w.span(), cfg.fused_dim());
  fill(p.fusion_b.span(), cfg.fused_dim());
  fill(p.hash_w.span(), cfg.fused_dim());
  fill(p.hash_b.span(), cfg.fused_dim());
  return p;
}

void validate(const ModelParams& params, const ModelConfig& cfg) {
  const ModelParams expected = zero_params(cfg);
  if (!same_shape(params, expected)) {
    throw ShapeError("model parameters do not match the model configuration");
  }
  for (auto t : params.tensors()) require_finite(t, "model parameters");
}

bool same_shape(const ModelParams& a, const ModelParams& b) {
  return a.tensor_shapes() == b.tensor_shapes();
}

namespace {

Vector affine(const Matrix& w, const Vector& b, const Vector& x) {
  if (w.cols() != x.size()) {
    throw ShapeError("input length " + std::to_string(x.size()) + " but layer expects " +
                     std::to_string(w.cols()));
  }
  Vector out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) out[i] = dot(w.row(i), x.span()) + b[i];
  return out;
}

// Batched x W^T + b.
Matrix affine_rows(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix out = matmul_nt(x, w);
  add_row_bias(out, b);
  return out;
}

}  // namespace

Vector normalize_view(const Vector& x, const ModelParams& params, std::size_t view) {
  if (view >= params.norm_w.size()) throw ShapeError("view index out of range");
  return apply_unary(affine(params.norm_w[view], params.norm_b[view], x), UnaryOp::kTanh);
}

GateResult context_gating(const Vector& x_concat, const ModelParams& params) {
  Vector gate = apply_unary(affine(params.fusion_w, params.fusion_b, x_concat), UnaryOp::kSigmoid);
  Vector fused = elementwise(gate, x_concat, BinaryOp::kMul);
  return {std::move(fused), std::move(gate)};
}

Vector hash_head(const Vector& x_fusion, const ModelParams& params) {
  return apply_unary(affine(params.hash_w, params.hash_b, x_fusion), UnaryOp::kTanh);
}

ForwardResult forward_batch(std::span<const FeatureRecord> batch, const ModelParams& params,
                            const ModelConfig& cfg, double dropout_p, bool train_mode,
                            std::uint64_t rng_seed) {
  if (batch.empty()) throw ArgumentError("forward_batch: empty batch");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("dropout probability must be in [0, 1)");
  }
  const std::size_t b = batch.size();
  const std::size_t views = cfg.num_views();
  const std::size_t proj = cfg.proj_dim;
  const std::size_t n = cfg.fused_dim();

  BatchTape tape;
  tape.concat = Matrix(b, n);
  for (std::size_t v = 0; v < views; ++v) {
    const std::size_t d = cfg.view_dims[v];
    Matrix x(b, d);
    for (std::size_t i = 0; i < b; ++i) {
      const FeatureRecord& r = batch[i];
      if (r.views.size() != views) {
        throw ShapeError("record " + r.id + " has " + std::to_string(r.views.size()) +
                         " views, model expects " + std::to_string(views));
      }
      if (r.views[v].size() != d) {
        throw ShapeError("record " + r.id + " view " + std::to_string(v) + " has dimension " +
                         std::to_string(r.views[v].size()) + ", model expects " +
                         std::to_string(d));
      }
      if (cfg.view_active(v)) std::copy(r.views[v].begin(), r.views[v].end(), x.row(i).begin());
    }
    Matrix z = affine_rows(x, params.norm_w[v], params.norm_b[v]);
    Matrix normed = apply_unary(z, UnaryOp::kTanh);
    for (std::size_t i = 0; i < b; ++i) {
      auto src = normed.row(i);
      std::copy(src.begin(), src.end(), tape.concat.row(i).begin() + v * proj);
    }
    tape.inputs.push_back(std::move(x));
    tape.normalized.push_back(std::move(normed));
  }

  tape.dropped = tape.concat;
  if (train_mode && dropout_p > 0.0) {
    // Inverted dropout: kept units are scaled so the expected mask value is 1.
    std::mt19937_64 rng(rng_seed);
    std::bernoulli_distribution keep(1.0 - dropout_p);
    const double scale = 1.0 / (1.0 - dropout_p);
    tape.dropout_mask = Matrix(b, n);
    auto mask = tape.dropout_mask.span();
    auto dropped = tape.dropped.span();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = keep(rng) ? scale : 0.0;
      dropped[i] *= mask[i];
    }
  }

  if (cfg.fusion == FusionMode::kGated) {
    tape.gate = apply_unary(affine_rows(tape.dropped, params.fusion_w, params.fusion_b),
                            UnaryOp::kSigmoid);
    tape.fused = elementwise(tape.gate, tape.dropped, BinaryOp::kMul);
  } else {
    tape.fused = tape.dropped;
  }

  tape.codes = apply_unary(affine_rows(tape.fused, params.hash_w, params.hash_b), UnaryOp::kTanh);
  Matrix codes = tape.codes;
  return {std::move(codes), std::move(tape)};
}

Gradients backward_batch(const BatchTape& tape, const ModelParams& params,
                         const ModelConfig& cfg, const Matrix& d_codes) {
  const std::size_t b = tape.batch_size();
  if (d_codes.rows() != b || d_codes.cols() != tape.codes.cols()) {
    throw ShapeError("backward_batch: gradient shape does not match the forward output");
  }
  const std::size_t views = cfg.num_views();
  const std::size_t proj = cfg.proj_dim;
  const std::size_t n = cfg.fused_dim();
  Gradients g = zero_params(cfg);

  // Hash layer: h = tanh(a).
  Matrix d_pre(b, tape.codes.cols());
  {
    auto h = tape.codes.span();
    auto dh = d_codes.span();
    auto da = d_pre.span();
    for (std::size_t i = 0; i < da.size(); ++i) da[i] = dh[i] * (1.0 - h[i] * h[i]);
  }
  g.hash_w = matmul_tn(d_pre, tape.fused);
  g.hash_b = column_sums(d_pre);
  Matrix d_fused = matmul(d_pre, params.hash_w);

  // Fusion: f = g * x with g = sigmoid(W x + b); x reaches f through both factors.
  Matrix d_dropped(b, n);
  if (cfg.fusion == FusionMode::kGated) {
    Matrix d_gate_pre(b, n);
    {
      auto df = d_fused.span();
      auto x = tape.dropped.span();
      auto gate = tape.gate.span();
      auto ds = d_gate_pre.span();
      auto dx = d_dropped.span();
      for (std::size_t i = 0; i < ds.size(); ++i) {
        ds[i] = df[i] * x[i] * gate[i] * (1.0 - gate[i]);
        dx[i] = df[i] * gate[i];
      }
    }
    g.fusion_w = matmul_tn(d_gate_pre, tape.dropped);
    g.fusion_b = column_sums(d_gate_pre);
    Matrix through_gate = matmul(d_gate_pre, params.fusion_w);
    d_dropped = elementwise(d_dropped, through_gate, BinaryOp::kAdd);
  } else {
    d_dropped = std::move(d_fused);
  }

  Matrix d_concat = tape.dropout_mask.size() == 0
                        ? std::move(d_dropped)
                        : elementwise(d_dropped, tape.dropout_mask, BinaryOp::kMul);

  for (std::size_t v = 0; v < views; ++v) {
    Matrix d_z(b, proj);
    const Matrix& normed = tape.normalized[v];
    for (std::size_t i = 0; i < b; ++i) {
      auto dc = d_concat.row(i).subspan(v * proj, proj);
      auto y = normed.row(i);
      auto dz = d_z.row(i);
      for (std::size_t j = 0; j < proj; ++j) dz[j] = dc[j] * (1.0 - y[j] * y[j]);
    }
    g.norm_w[v] = matmul_tn(d_z, tape.inputs[v]);
    g.norm_b[v] = column_sums(d_z);
  }
  return g;
}

Matrix encode(std::span<const FeatureRecord> records, const ModelParams& params,
              const ModelConfig& cfg) {
  constexpr std::size_t kChunk = 512;
  Matrix out(records.size(), cfg.bits);
  for (std::size_t start = 0; start < records.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, records.size() - start);
    ForwardResult fr = forward_batch(records.subspan(start, len), params, cfg, 0.0, false, 0);
    for (std::size_t i = 0; i < len; ++i) {
      auto src = fr.codes.row(i);
      std::copy(src.begin(), src.end(), out.row(start + i).begin());
    }
  }
  return out;
}

HashCode binarize(std::span<const double> h) { return HashCode::from_signs(h); }

std::vector<HashCode> binarize_rows(const Matrix& codes) {
  std::vector<HashCode> out;
  out.reserve(codes.rows());
  for (std::size_t i = 0; i < codes.rows(); ++i) out.push_back(binarize(codes.row(i)));
  return out;
}

}  // namespace dmmvh
