#include "iprox/oracles.hpp"

namespace iprox {

Vector ProxOracle::prox_point(double step, const Vector& v) const {
  auto p = prox(step, v);
  if (!p) throw InfeasibleError("proximal mapping is empty at the requested point");
  return std::move(*p);
}

ExtendedReal composite_value(const CompositeProblem& p, const Vector& x) {
  if (x.size() != p.dimension) {
    throw UsageError("composite_value: point has length " + std::to_string(x.size()) +
                     ", problem dimension is " + std::to_string(p.dimension));
  }
  const ExtendedReal gx = p.g.eval(x);
  if (gx.is_infinite()) return ExtendedReal::infinity();
  return ExtendedReal(p.f.eval(x)) + gx;
}

ExtendedReal lyapunov_value(const LyapunovH& H, const Vector& x, const Vector& y) {
  require_same_size(x, y, "lyapunov_value");
  return composite_value(H.problem, x) + ExtendedReal(H.kappa * (x - y).squaredNorm());
}

Vector ipiano_subgradient_residual(const CompositeProblem& p, double alpha, const Vector& y_extrap,
                                   const Vector& grad_point, const Vector& x_next) {
  if (!(alpha > 0.0)) throw UsageError("ipiano_subgradient_residual: step must be positive");
  require_same_size(y_extrap, x_next, "ipiano_subgradient_residual");
  require_same_size(grad_point, x_next, "ipiano_subgradient_residual");
  return ipiano_subgradient_residual(alpha, y_extrap, p.f.grad(grad_point), x_next,
                                     p.f.grad(x_next));
}

Vector ipiano_subgradient_residual(double alpha, const Vector& y_extrap, const Vector& grad_at_point,
                                   const Vector& x_next, const Vector& grad_at_next) {
  if (!(alpha > 0.0)) throw UsageError("ipiano_subgradient_residual: step must be positive");
  return grad_at_next + (y_extrap - alpha * grad_at_point - x_next) / alpha;
}

}  // namespace iprox
