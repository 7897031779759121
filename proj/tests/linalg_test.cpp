#include "dmmvh/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dmmvh/error.hpp"

namespace dmmvh {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.span()) x = g(rng);
  return m;
}

TEST(LinalgTest, MatmulIdentity) {
  const Matrix m{{1.5, -2.0}, {0.25, 4.0}};
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(LinalgTest, MatmulHandExpansion) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  EXPECT_EQ(matmul(a, b), (Matrix{{17}, {39}}));
}

TEST(LinalgTest, MatmulZeroAnnihilates) {
  std::mt19937_64 rng(3);
  const Matrix m = random_matrix(3, 4, rng);
  EXPECT_EQ(matmul(Matrix(1, 3), m), Matrix(1, 4));
}

TEST(LinalgTest, MatmulShapeMismatch) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  EXPECT_THROW(matmul_nt(Matrix(2, 3), Matrix(2, 4)), ShapeError);
  EXPECT_THROW(matmul_tn(Matrix(2, 3), Matrix(3, 3)), ShapeError);
}

TEST(LinalgTest, TransposedProductsAgreeWithExplicitTranspose) {
  std::mt19937_64 rng(5);
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix b = random_matrix(5, 3, rng);
  const Matrix c = random_matrix(4, 2, rng);
  const Matrix nt = matmul_nt(a, b);
  const Matrix ref_nt = matmul(a, transpose(b));
  const Matrix tn = matmul_tn(a, c);
  const Matrix ref_tn = matmul(transpose(a), c);
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.span()[i], ref_nt.span()[i], 1e-12);
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.span()[i], ref_tn.span()[i], 1e-12);
}

TEST(LinalgTest, MatmulIsAssociative) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = dim(rng), q = dim(rng), r = dim(rng), s = dim(rng);
    const Matrix a = random_matrix(p, q, rng);
    const Matrix b = random_matrix(q, r, rng);
    const Matrix c = random_matrix(r, s, rng);
    const Matrix left = matmul(a, matmul(b, c));
    const Matrix right = matmul(matmul(a, b), c);
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max(1.0, std::abs(right.span()[i]));
      EXPECT_LE(std::abs(left.span()[i] - right.span()[i]) / scale, 1e-9);
    }
  }
}

TEST(LinalgTest, ElementwiseOps) {
  EXPECT_EQ(elementwise(Vector{1, 2, 3}, Vector{1, 1, 1}, BinaryOp::kMul), (Vector{1, 2, 3}));
  EXPECT_EQ(elementwise(Vector{1, 2}, Vector{-1, -2}, BinaryOp::kAdd), (Vector{0, 0}));
  EXPECT_EQ(elementwise(Vector{0.5, 0.5}, Vector{4, 8}, BinaryOp::kMul), (Vector{2, 4}));
  EXPECT_EQ(elementwise(Vector{3, 2}, Vector{1, 2}, BinaryOp::kSub), (Vector{2, 0}));
  EXPECT_THROW(elementwise(Vector{1, 2}, Vector{1}, BinaryOp::kAdd), ShapeError);
}

TEST(LinalgTest, UnaryOps) {
  EXPECT_EQ(apply_unary(Vector{0}, UnaryOp::kSigmoid), Vector{0.5});
  EXPECT_EQ(apply_unary(Vector{0}, UnaryOp::kTanh), Vector{0});
  EXPECT_EQ(apply_unary(Vector{-2, 3}, UnaryOp::kAbs), (Vector{2, 3}));
  EXPECT_DOUBLE_EQ(apply_unary(Vector{1}, UnaryOp::kExp)[0], std::exp(1.0));
}

TEST(LinalgTest, SigmoidStableAtExtremes) {
  // e^-1000 underflows to 0 in double; the true value (~5e-435) is below 1e-300.
  const double lo = apply_unary(Vector{-1000}, UnaryOp::kSigmoid)[0];
  EXPECT_TRUE(std::isfinite(lo));
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(lo, 1e-300);
  const double hi = sigmoid(1000.0);
  EXPECT_EQ(hi, 1.0);
  for (double x : {-700.0, -30.0, 30.0, 700.0}) EXPECT_TRUE(std::isfinite(sigmoid(x)));
}

TEST(LinalgTest, SigmoidSymmetry) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12);
  }
}

TEST(LinalgTest, SoftplusMatchesNaiveInSafeRange) {
  for (double x : {-20.0, -1.0, 0.0, 0.5, 10.0, 30.0}) {
    EXPECT_NEAR(softplus(x), std::log1p(std::exp(x)), 1e-12);
  }
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_GE(softplus(-800.0), 0.0);
}

TEST(LinalgTest, NoNaNOnFiniteInput) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-700.0, 700.0);
  Vector v(500);
  for (double& x : v) x = u(rng);
  for (UnaryOp f : {UnaryOp::kSigmoid, UnaryOp::kTanh, UnaryOp::kAbs}) {
    EXPECT_TRUE(all_finite(apply_unary(v, f).span()));
  }
}

TEST(LinalgTest, OverflowIsReported) {
  EXPECT_THROW(apply_unary(Vector{1000}, UnaryOp::kExp), NumericError);
  const Matrix big{{1e200}};
  EXPECT_THROW(matmul(big, big), NumericError);
}

TEST(LinalgTest, MatrixDataLengthChecked) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), ShapeError);
}

TEST(LinalgTest, RowBiasAndColumnSums) {
  Matrix m{{1, 2}, {3, 4}};
  add_row_bias(m, Vector{10, 20});
  EXPECT_EQ(m, (Matrix{{11, 22}, {13, 24}}));
  EXPECT_EQ(column_sums(m), (Vector{24, 46}));
  EXPECT_THROW(add_row_bias(m, Vector{1}), ShapeError);
}

}  // namespace
}  // namespace dmmvh
