#pragma once

#include "iprox/types.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace iprox {

/// Differentiable part f of a composite objective.
///
/// Oracles are pure: `eval` and `grad` must not mutate captured state, so a
/// single oracle can be shared by concurrent solver runs.
struct SmoothOracle {
  std::function<double(const Vector&)> eval;
  std::function<Vector(const Vector&)> grad;
  /// Global (or, for prox-regular envelopes, local) Lipschitz constant of grad.
  std::optional<double> lipschitz_hint;
  /// Optional fused evaluation; used when value and gradient share work.
  std::function<std::pair<double, Vector>(const Vector&)> value_and_grad;

  std::pair<double, Vector> evaluate_both(const Vector& x) const {
    if (value_and_grad) return value_and_grad(x);
    return {eval(x), grad(x)};
  }
};

struct ConvexityClass {
  enum class Kind { convex, semiconvex, nonconvex };
  Kind kind = Kind::convex;
  /// Semi-convexity modulus m (g - m/2 |.|^2 convex). Zero unless semiconvex.
  double modulus = 0.0;

  static ConvexityClass convex() { return {Kind::convex, 0.0}; }
  static ConvexityClass semiconvex(double m) { return {Kind::semiconvex, m}; }
  static ConvexityClass nonconvex() { return {Kind::nonconvex, 0.0}; }
};

/// Non-smooth part g, accessed through its value and a proximal mapping.
struct ProxOracle {
  std::function<ExtendedReal(const Vector&)> eval;
  /// One global minimizer of g(x) + |x - v|^2 / (2 step); empty when none exists.
  std::function<std::optional<Vector>(double step, const Vector& v)> prox;
  ConvexityClass convexity = ConvexityClass::convex();
  /// Set for indicator functions: prox outputs lie in the set, so g vanishes there
  /// and solvers may skip evaluating it.
  bool indicator = false;

  /// prox that reports an empty result as InfeasibleError.
  Vector prox_point(double step, const Vector& v) const;
  /// g at a point returned by `prox`.
  ExtendedReal value_at_prox(const Vector& p) const {
    return indicator ? ExtendedReal(0.0) : eval(p);
  }
};

/// h = f + g on R^dimension.
struct CompositeProblem {
  SmoothOracle f;
  ProxOracle g;
  Eigen::Index dimension = 0;
};

/// H_kappa(x, y) = h(x) + kappa |x - y|^2.
struct LyapunovH {
  CompositeProblem problem;
  double kappa = 1.0;
};

ExtendedReal composite_value(const CompositeProblem& p, const Vector& x);

ExtendedReal lyapunov_value(const LyapunovH& H, const Vector& x, const Vector& y);

/// Element of the limiting subdifferential of h at x_next obtained from the
/// optimality condition of the forward-backward step that produced it:
///   grad f(x_next) + (y_extrap - alpha grad f(grad_point) - x_next) / alpha.
Vector ipiano_subgradient_residual(const CompositeProblem& p, double alpha, const Vector& y_extrap,
                                   const Vector& grad_point, const Vector& x_next);

/// Same residual when grad f at both points is already known.
Vector ipiano_subgradient_residual(double alpha, const Vector& y_extrap, const Vector& grad_at_point,
                                   const Vector& x_next, const Vector& grad_at_next);

}  // namespace iprox
