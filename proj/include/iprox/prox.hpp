#pragma once

#include "iprox/oracles.hpp"

#include <utility>

namespace iprox {

/// Euclidean projection onto a closed set, viewed as a map on flat vectors.
using Projection = std::function<Vector(const Vector&)>;

// ---------------------------------------------------------------------------
// Catalog of simple oracles.

SmoothOracle zero_smooth();
/// f(x) = 0.5 * curvature * |x - center|^2.
SmoothOracle quadratic_smooth(double curvature, Vector center);
/// f(x) = 0.5 x^T Q x + c^T x for symmetric Q; Lipschitz hint is |Q|_2.
SmoothOracle quadratic_form_smooth(Matrix Q, Vector c);
/// f(x) = 0.5 dist(x, S)^2 for a set with single-valued projection near x.
SmoothOracle half_sq_distance_smooth(Projection project, double lipschitz = 1.0);

ProxOracle zero_prox();
/// g(x) = weight * |x|_1; prox is soft thresholding.
ProxOracle l1_prox(double weight = 1.0);
/// Indicator of a set given by its projection; membership uses a relative tolerance.
ProxOracle indicator_prox(Projection project, ConvexityClass convexity, double member_tol = 1e-9);
/// Indicator of {0}.
ProxOracle zero_point_indicator();
/// Indicator of the nonnegative orthant.
ProxOracle nonnegative_indicator();

// ---------------------------------------------------------------------------
// Moreau envelope.

enum class EnvelopeRegime { convex, prox_regular_local };

struct TrustBall {
  Vector center;
  double radius = 0.0;
};

struct MoreauEnvelope {
  ProxOracle base;
  double lambda = 1.0;
  EnvelopeRegime regime = EnvelopeRegime::convex;
  /// Region in which the gradient formula is asserted (prox-regular regime only).
  std::optional<TrustBall> trust;
};

/// min_w base(w) + |w - x|^2 / (2 lambda), attained at prox_lambda base(x).
double moreau_value(const MoreauEnvelope& M, const Vector& x);
/// (x - prox_lambda base(x)) / lambda. Throws UsageError outside the trust ball.
Vector moreau_grad(const MoreauEnvelope& M, const Vector& x);
/// The envelope as a smooth oracle with Lipschitz hint 1/lambda.
SmoothOracle as_smooth(const MoreauEnvelope& M);

/// (0.5 |x - P(x)|^2, x - P(x)).
std::pair<double, Vector> half_sq_distance_grad(const Projection& project, const Vector& x);

// ---------------------------------------------------------------------------
// Sets of the low-rank feasibility problem.

/// { X : <A_i, X> = B_i, i = 1..D } for N x M matrices, stored as a D x (N*M)
/// operator acting on column-major vec(X). The Gram matrix (<A_i, A_j>) is
/// factored once at construction; instances are read-only afterwards.
class AffineMeasurementSet {
 public:
  using OperatorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  AffineMeasurementSet(OperatorMatrix operators, Vector rhs, Eigen::Index rows, Eigen::Index cols);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  Eigen::Index measurements() const { return ops_.rows(); }
  const OperatorMatrix& operators() const { return ops_; }
  const Vector& rhs() const { return rhs_; }
  const Matrix& gram() const { return gram_; }
  /// True when the Cholesky factor was rejected and the pseudo-solve is in use.
  bool singular() const { return singular_; }
  /// L L^T of the stored factor (or the thresholded eigen-reconstruction).
  Matrix reconstructed_gram() const;

  /// A(X) for a flat column-major X.
  Vector apply(const Vector& x) const;
  /// A*(y) = sum_i y_i A_i as a flat vector.
  Vector adjoint(const Vector& y) const;
  /// (A A*)^{-1} r, or the least-norm solve in the singular case.
  Vector gram_solve(const Vector& r) const;

  Vector project(const Vector& x) const;
  Matrix project(const Matrix& X) const;
  /// dist(x, set)^2 from the measurement residual alone: r^T G^{-1} r.
  double sq_distance(const Vector& x) const;

 private:
  OperatorMatrix ops_;
  Vector rhs_;
  Eigen::Index rows_, cols_;
  Matrix gram_;
  Eigen::LLT<Matrix> llt_;
  bool singular_ = false;
  Matrix eig_vectors_;
  Vector eig_inv_values_;  // zero where thresholded
  bool consistent_ = true;
};

/// Matrices of rank at most R. The shape is only needed for the flat-vector
/// overload; the matrix overload accepts any shape.
class RankSet {
 public:
  explicit RankSet(Eigen::Index rank_bound, Eigen::Index rows = 0, Eigen::Index cols = 0);

  Eigen::Index rank_bound() const { return rank_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  /// Truncated SVD keeping the first R singular triples in the order returned
  /// by the decomposition.
  Matrix project(const Matrix& X) const;
  Vector project(const Vector& x) const;
  /// dist(X, set)^2 = sum of squared trailing singular values.
  double sq_distance(const Matrix& X) const;
  /// Projection and half squared distance from one decomposition.
  std::pair<Matrix, double> project_with_half_sq_distance(const Matrix& X) const;

 private:
  Eigen::Index rank_, rows_, cols_;
};

}  // namespace iprox
