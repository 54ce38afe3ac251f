#include "iprox/prox.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace iprox {

SmoothOracle zero_smooth() {
  SmoothOracle f;
  f.eval = [](const Vector&) { return 0.0; };
  f.grad = [](const Vector& x) { return Vector::Zero(x.size()).eval(); };
  f.lipschitz_hint = 0.0;
  return f;
}

SmoothOracle quadratic_smooth(double curvature, Vector center) {
  SmoothOracle f;
  f.eval = [curvature, center](const Vector& x) {
    require_same_size(x, center, "quadratic_smooth");
    return 0.5 * curvature * (x - center).squaredNorm();
  };
  f.grad = [curvature, center](const Vector& x) {
    require_same_size(x, center, "quadratic_smooth");
    return (curvature * (x - center)).eval();
  };
  f.lipschitz_hint = std::abs(curvature);
  return f;
}

SmoothOracle quadratic_form_smooth(Matrix Q, Vector c) {
  if (Q.rows() != Q.cols() || Q.rows() != c.size()) {
    throw UsageError("quadratic_form_smooth: Q must be square and match c");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  SmoothOracle f;
  f.lipschitz_hint = es.eigenvalues().cwiseAbs().maxCoeff();
  f.eval = [Q, c](const Vector& x) { return 0.5 * x.dot(Q * x) + c.dot(x); };
  f.grad = [Q, c](const Vector& x) { return (Q * x + c).eval(); };
  return f;
}

SmoothOracle half_sq_distance_smooth(Projection project, double lipschitz) {
  SmoothOracle f;
  f.eval = [project](const Vector& x) { return 0.5 * (x - project(x)).squaredNorm(); };
  f.grad = [project](const Vector& x) { return (x - project(x)).eval(); };
  f.value_and_grad = [project](const Vector& x) { return half_sq_distance_grad(project, x); };
  f.lipschitz_hint = lipschitz;
  return f;
}

ProxOracle zero_prox() {
  ProxOracle g;
  g.eval = [](const Vector&) { return ExtendedReal(0.0); };
  g.prox = [](double, const Vector& v) { return std::optional<Vector>(v); };
  g.convexity = ConvexityClass::convex();
  return g;
}

ProxOracle l1_prox(double weight) {
  if (weight < 0.0) throw UsageError("l1_prox: weight must be nonnegative");
  ProxOracle g;
  g.eval = [weight](const Vector& x) { return ExtendedReal(weight * x.lpNorm<1>()); };
  g.prox = [weight](double step, const Vector& v) {
    const double t = step * weight;
    Vector p = v.unaryExpr([t](double a) { return std::copysign(std::max(std::abs(a) - t, 0.0), a); });
    return std::optional<Vector>(std::move(p));
  };
  g.convexity = ConvexityClass::convex();
  return g;
}

ProxOracle indicator_prox(Projection project, ConvexityClass convexity, double member_tol) {
  ProxOracle g;
  g.eval = [project, member_tol](const Vector& x) {
    const double gap = (x - project(x)).norm();
    return gap <= member_tol * (1.0 + x.norm()) ? ExtendedReal(0.0) : ExtendedReal::infinity();
  };
  g.prox = [project](double, const Vector& v) { return std::optional<Vector>(project(v)); };
  g.convexity = convexity;
  g.indicator = true;
  return g;
}

ProxOracle zero_point_indicator() {
  return indicator_prox([](const Vector& x) { return Vector::Zero(x.size()).eval(); },
                        ConvexityClass::convex(), 0.0);
}

ProxOracle nonnegative_indicator() {
  return indicator_prox([](const Vector& x) { return x.cwiseMax(0.0).eval(); },
                        ConvexityClass::convex(), 0.0);
}

double moreau_value(const MoreauEnvelope& M, const Vector& x) {
  if (!(M.lambda > 0.0)) throw UsageError("moreau_value: lambda must be positive");
  const auto p = M.base.prox(M.lambda, x);
  if (!p) throw InfeasibleError("moreau_value: proximal mapping is empty");
  const ExtendedReal gp = M.base.value_at_prox(*p);
  if (gp.is_infinite()) throw InfeasibleError("moreau_value: prox point outside dom g");
  return gp.value() + (*p - x).squaredNorm() / (2.0 * M.lambda);
}

Vector moreau_grad(const MoreauEnvelope& M, const Vector& x) {
  if (!(M.lambda > 0.0)) throw UsageError("moreau_grad: lambda must be positive");
  if (M.regime == EnvelopeRegime::prox_regular_local) {
    if (!M.trust) throw UsageError("moreau_grad: prox-regular regime needs a trust ball");
    require_same_size(x, M.trust->center, "moreau_grad");
    if ((x - M.trust->center).norm() > M.trust->radius) {
      throw UsageError("moreau_grad: point outside the declared trust ball");
    }
  }
  const auto p = M.base.prox(M.lambda, x);
  if (!p) throw InfeasibleError("moreau_grad: proximal mapping is empty");
  return (x - *p) / M.lambda;
}

SmoothOracle as_smooth(const MoreauEnvelope& M) {
  SmoothOracle f;
  f.eval = [M](const Vector& x) { return moreau_value(M, x); };
  f.grad = [M](const Vector& x) { return moreau_grad(M, x); };
  f.lipschitz_hint = 1.0 / M.lambda;
  return f;
}

std::pair<double, Vector> half_sq_distance_grad(const Projection& project, const Vector& x) {
  Vector d = x - project(x);
  const double v = 0.5 * d.squaredNorm();
  return {v, std::move(d)};
}

// ---------------------------------------------------------------------------

AffineMeasurementSet::AffineMeasurementSet(OperatorMatrix operators, Vector rhs, Eigen::Index rows,
                                           Eigen::Index cols)
    : ops_(std::move(operators)), rhs_(std::move(rhs)), rows_(rows), cols_(cols) {
  if (rows <= 0 || cols <= 0 || ops_.cols() != rows * cols) {
    throw UsageError("AffineMeasurementSet: operators must have rows*cols columns");
  }
  if (ops_.rows() != rhs_.size() || ops_.rows() == 0) {
    throw UsageError("AffineMeasurementSet: need one right-hand side entry per operator");
  }
  gram_.resize(ops_.rows(), ops_.rows());
  gram_.setZero();
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(ops_);
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();

  llt_.compute(gram_);
  if (llt_.info() == Eigen::Success) {
    const Vector pivots = llt_.matrixL().toDenseMatrix().diagonal().array().square();
    singular_ = pivots.minCoeff() < 1e-12 * pivots.maxCoeff();
  } else {
    singular_ = true;
  }
  if (singular_) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(gram_);
    eig_vectors_ = es.eigenvectors();
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    eig_inv_values_ = es.eigenvalues().unaryExpr(
        [top](double l) { return l > 1e-12 * top ? 1.0 / l : 0.0; });
    const Vector coeffs = eig_vectors_.transpose() * rhs_;
    double null_part = 0.0;
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
      if (eig_inv_values_(i) == 0.0) null_part += coeffs(i) * coeffs(i);
    }
    consistent_ = std::sqrt(null_part) <= 1e-8 * (1.0 + rhs_.norm());
  }
}

Matrix AffineMeasurementSet::reconstructed_gram() const {
  if (!singular_) {
    const Matrix L = llt_.matrixL();
    return L * L.transpose();
  }
  const Vector values = eig_inv_values_.unaryExpr([](double v) { return v > 0.0 ? 1.0 / v : 0.0; });
  return eig_vectors_ * values.asDiagonal() * eig_vectors_.transpose();
}

Vector AffineMeasurementSet::apply(const Vector& x) const {
  if (x.size() != ops_.cols()) throw UsageError("AffineMeasurementSet::apply: shape mismatch");
  return ops_ * x;
}

Vector AffineMeasurementSet::adjoint(const Vector& y) const {
  if (y.size() != ops_.rows()) throw UsageError("AffineMeasurementSet::adjoint: shape mismatch");
  return ops_.transpose() * y;
}

Vector AffineMeasurementSet::gram_solve(const Vector& r) const {
  if (!singular_) return llt_.solve(r);
  return eig_vectors_ * eig_inv_values_.cwiseProduct(eig_vectors_.transpose() * r);
}

Vector AffineMeasurementSet::project(const Vector& x) const {
  if (!consistent_) {
    throw InfeasibleError("AffineMeasurementSet: singular Gram matrix and inconsistent rhs");
  }
  return x - adjoint(gram_solve(apply(x) - rhs_));
}

Matrix AffineMeasurementSet::project(const Matrix& X) const {
  if (X.rows() != rows_ || X.cols() != cols_) {
    throw UsageError("AffineMeasurementSet::project: shape mismatch");
  }
  const Vector flat = Eigen::Map<const Vector>(X.data(), X.size());
  const Vector p = project(flat);
  return Eigen::Map<const Matrix>(p.data(), rows_, cols_);
}

double AffineMeasurementSet::sq_distance(const Vector& x) const {
  if (!consistent_) {
    throw InfeasibleError("AffineMeasurementSet: singular Gram matrix and inconsistent rhs");
  }
  const Vector r = apply(x) - rhs_;
  return std::max(r.dot(gram_solve(r)), 0.0);
}

// ---------------------------------------------------------------------------

RankSet::RankSet(Eigen::Index rank_bound, Eigen::Index rows, Eigen::Index cols)
    : rank_(rank_bound), rows_(rows), cols_(cols) {
  if (rank_bound <= 0) throw UsageError("RankSet: rank bound must be positive");
  if (rows < 0 || cols < 0) throw UsageError("RankSet: negative shape");
}

std::pair<Matrix, double> RankSet::project_with_half_sq_distance(const Matrix& X) const {
  const Eigen::Index k = std::min(X.rows(), X.cols());
  if (rank_ >= k) return {X, 0.0};
  const Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Matrix P = svd.matrixU().leftCols(rank_) * s.head(rank_).asDiagonal() *
             svd.matrixV().leftCols(rank_).transpose();
  return {std::move(P), 0.5 * s.tail(k - rank_).squaredNorm()};
}

Matrix RankSet::project(const Matrix& X) const { return project_with_half_sq_distance(X).first; }

Vector RankSet::project(const Vector& x) const {
  if (rows_ * cols_ != x.size() || rows_ == 0) {
    throw UsageError("RankSet::project: flat vector does not match the declared shape");
  }
  const Matrix P = project(Matrix(Eigen::Map<const Matrix>(x.data(), rows_, cols_)));
  return Eigen::Map<const Vector>(P.data(), P.size());
}

double RankSet::sq_distance(const Matrix& X) const {
  return 2.0 * project_with_half_sq_distance(X).second;
}

}  // namespace iprox
