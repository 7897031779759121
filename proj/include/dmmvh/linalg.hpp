#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dmmvh {

// Dense vector of doubles.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

// Dense row-major matrix of doubles. Rows index samples wherever a batch is involved.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class BinaryOp { kAdd, kSub, kMul };
enum class UnaryOp { kSigmoid, kTanh, kExp, kAbs };

// Numerically stable logistic function; never overflows.
double sigmoid(double x);
// log(1 + e^x) without overflow.
double softplus(double x);
double apply(UnaryOp f, double x);

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T, the common "rows against rows" product.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b, used for weight gradients.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Vector elementwise(const Vector& a, const Vector& b, BinaryOp op);
Matrix elementwise(const Matrix& a, const Matrix& b, BinaryOp op);
Vector apply_unary(const Vector& a, UnaryOp f);
Matrix apply_unary(const Matrix& a, UnaryOp f);

// Adds bias to every row of m in place.
void add_row_bias(Matrix& m, const Vector& bias);
Vector column_sums(const Matrix& m);
double dot(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> values);
// Throws NumericError naming `what` if any value is NaN or Inf.
void require_finite(std::span<const double> values, const char* what);

}  // namespace dmmvh
