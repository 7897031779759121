#include "dmmvh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmmvh/error.hpp"

namespace dmmvh {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double apply(UnaryOp f, double x) {
  switch (f) {
    case UnaryOp::kSigmoid: return sigmoid(x);
    case UnaryOp::kTanh: return std::tanh(x);
    case UnaryOp::kExp: return std::exp(x);
    case UnaryOp::kAbs: return std::abs(x);
  }
  return x;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a) + " x " + dims(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  require_finite(out.span(), "matmul");
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + dims(a) + " x " + dims(b) + "^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  require_finite(out.span(), "matmul_nt");
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + dims(a) + "^T x " + dims(b));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  require_finite(out.span(), "matmul_tn");
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

namespace {

void combine(std::span<const double> a, std::span<const double> b, std::span<double> out,
             BinaryOp op) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (op) {
      case BinaryOp::kAdd: out[i] = a[i] + b[i]; break;
      case BinaryOp::kSub: out[i] = a[i] - b[i]; break;
      case BinaryOp::kMul: out[i] = a[i] * b[i]; break;
    }
  }
}

}  // namespace

Vector elementwise(const Vector& a, const Vector& b, BinaryOp op) {
  if (a.size() != b.size()) {
    throw ShapeError("elementwise: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  Vector out(a.size());
  combine(a.span(), b.span(), out.span(), op);
  require_finite(out.span(), "elementwise");
  return out;
}

Matrix elementwise(const Matrix& a, const Matrix& b, BinaryOp op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("elementwise: " + dims(a) + " and " + dims(b));
  }
  Matrix out(a.rows(), a.cols());
  combine(a.span(), b.span(), out.span(), op);
  require_finite(out.span(), "elementwise");
  return out;
}

Vector apply_unary(const Vector& a, UnaryOp f) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(f, a[i]);
  require_finite(out.span(), "apply_unary");
  return out;
}

Matrix apply_unary(const Matrix& a, UnaryOp f) {
  Matrix out(a.rows(), a.cols());
  auto src = a.span();
  auto dst = out.span();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = apply(f, src[i]);
  require_finite(out.span(), "apply_unary");
  return out;
}

void add_row_bias(Matrix& m, const Vector& bias) {
  if (bias.size() != m.cols()) {
    throw ShapeError("add_row_bias: bias length " + std::to_string(bias.size()) +
                     " for " + dims(m));
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

Vector column_sums(const Matrix& m) {
  Vector out(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values)) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace dmmvh
