#include "iprox/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace iprox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDivergenceNorm = 1e12;

using Clock = std::chrono::steady_clock;

/// Owns the trace of one run: timing, residual hook, divergence guard and the
/// stopping rule.
class Recorder {
 public:
  Recorder(const SolverConfig& cfg, const RunHooks& hooks)
      : cfg_(cfg), hooks_(hooks), start_(Clock::now()) {}

  /// Appends the record for x^k. Returns true when the run must stop.
  bool record(const Vector& x, IterationRecord r) {
    r.iter = static_cast<int>(trace_.size());
    if (hooks_.residual) {
      const auto t0 = Clock::now();
      r.residual = hooks_.residual(x);
      excluded_ += Clock::now() - t0;
    }
    r.time_s = std::chrono::duration<double>(Clock::now() - start_ - excluded_).count();
    const bool bad = !x.allFinite() || x.norm() > kDivergenceNorm ||
                     (r.objective && !std::isfinite(*r.objective)) ||
                     (r.lyapunov && !std::isfinite(*r.lyapunov));
    if (cfg_.record_iterates) trace_.append_iterate(x);
    trace_.append(r);
    if (bad) return finish(RunStatus::diverged);
    if (r.residual) {
      if (*r.residual <= cfg_.tol) return finish(RunStatus::converged);
    } else if (r.iter > 0 && r.step_norm <= cfg_.tol &&
               (!r.subgrad_norm || *r.subgrad_norm <= cfg_.tol)) {
      return finish(RunStatus::converged);
    }
    if (r.iter >= cfg_.max_iters) return finish(RunStatus::max_iters);
    return false;
  }

  IterationTrace take(Vector final_point) {
    trace_.final_point = std::move(final_point);
    return std::move(trace_);
  }

 private:
  bool finish(RunStatus s) {
    trace_.status = s;
    return true;
  }

  const SolverConfig& cfg_;
  const RunHooks& hooks_;
  Clock::time_point start_;
  Clock::duration excluded_{};
  IterationTrace trace_;
};

/// Norm of (v + 2 kappa d, -2 kappa d), the subgradient of H_kappa at
/// (x^{k+1}, x^k) built from a subgradient v of h at x^{k+1} and d = x^{k+1} - x^k.
double lifted_subgradient_norm(const Vector& v, const Vector& d, double kappa) {
  const double s = 2.0 * kappa;
  return std::sqrt((v + s * d).squaredNorm() + s * s * d.squaredNorm());
}

void check_config_basics(const SolverConfig& cfg) {
  if (cfg.max_iters < 0) throw UsageError("max_iters must be nonnegative");
  if (!(cfg.tol > 0.0)) throw UsageError("tol must be positive");
  if (cfg.backtracking) {
    const auto& bt = *cfg.backtracking;
    if (!(bt.eta_up > 1.0) || !(bt.eta_down > 0.0 && bt.eta_down <= 1.0) || !(bt.L_init > 0.0) ||
        bt.max_probes < 1) {
      throw UsageError("backtracking parameters out of range");
    }
  }
}

/// Share of the previous step's decrease constant that a backtracking step
/// keeps as guaranteed decrease; the rest may absorb growth of L_k.
constexpr double kKeptDecrease = 0.5;

/// Step selection shared by the forward-backward loops.
///
/// With backtracking, the inertia of step k is lowered when needed so that
/// beta_k / (2 alpha_k) stays below the Lyapunov weight of the previous step;
/// this keeps h(x) + kappa_k |x - y|^2 decreasing while L_k moves up and down.
class StepRule {
 public:
  struct Trial {
    double alpha;
    double beta;
  };

  StepRule(const SolverConfig& cfg, const ConvexityClass& g_class, std::optional<double> hint)
      : cfg_(cfg), class_(g_class) {
    if (cfg.backtracking) {
      L_ = cfg.backtracking->L_init;
      if (!cfg.skip_admissibility) validate_parameters(alpha_for(L_, cfg.beta), cfg.beta, g_class, L_);
      return;
    }
    if (cfg.alpha > 0.0) {
      alpha_ = cfg.alpha;
    } else {
      if (!hint) throw UsageError("constant step needs alpha or a Lipschitz hint");
      alpha_ = cfg.alpha_safety * admissible_step_bound(g_class, *hint, cfg.beta);
      if (!std::isfinite(alpha_)) throw UsageError("cannot derive a finite step from the hint");
    }
    if (hint) {
      L_ = *hint;
      if (!cfg.skip_admissibility) validate_parameters(alpha_, cfg.beta, g_class, *hint);
    } else if (!cfg.skip_admissibility && !(cfg.beta >= 0.0 && cfg.beta < 1.0)) {
      throw UsageError("beta must lie in [0, 1)");
    }
    known_L_ = hint.has_value();
  }

  bool backtracking() const { return cfg_.backtracking.has_value(); }
  double alpha() const { return alpha_; }
  double start_L() const { return L_; }

  /// Step and inertia for a trial Lipschitz estimate (backtracking only).
  Trial trial(double L) const {
    double beta = cfg_.beta;
    if (carry_limit_ && carry(L, beta) > *carry_limit_) {
      double lo = 0.0, hi = beta;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (carry(L, mid) > *carry_limit_ ? hi : lo) = mid;
      }
      beta = lo;
    }
    return {alpha_for(L, beta), beta};
  }

  /// Records the accepted trial and returns its Lyapunov weight.
  double accepted(double L, const Trial& t, bool shrink) {
    L_ = shrink ? L * cfg_.backtracking->eta_down : L;
    const auto dc = ipiano_decrease_constants(t.alpha, t.beta, L, class_);
    const double kappa = cfg_.kappa ? *cfg_.kappa : dc.kappa;
    carry_limit_ = kappa - kKeptDecrease * std::max(kappa - t.beta / (2.0 * t.alpha), 0.0);
    return kappa;
  }

  double constant_kappa() const {
    if (cfg_.kappa) return *cfg_.kappa;
    if (!known_L_) return 1.0;
    return ipiano_decrease_constants(alpha_, cfg_.beta, L_, class_).kappa;
  }

 private:
  double alpha_for(double L, double beta) const {
    return cfg_.alpha_safety * admissible_step_bound(class_, L, beta);
  }
  double carry(double L, double beta) const { return beta / (2.0 * alpha_for(L, beta)); }

  const SolverConfig& cfg_;
  ConvexityClass class_;
  double alpha_ = 0.0;
  double L_ = 0.0;
  bool known_L_ = false;
  std::optional<double> carry_limit_;
};

enum class Probe { rejected, accepted, unresolved };

/// Descent-lemma test for a trial L. A pass is unresolved when the curvature
/// term is below the rounding slack: the test then says nothing about L, and
/// shrinking L on such passes makes the estimate collapse near a solution.
Probe descent_probe(double f_new, double f_old, const Vector& grad_old, const Vector& d, double L) {
  const double curvature = 0.5 * L * d.squaredNorm();
  const double model = f_old + grad_old.dot(d) + curvature;
  const double slack = 10.0 * std::numeric_limits<double>::epsilon() *
                       (std::abs(f_old) + std::abs(f_new));
  if (f_new > model + slack) return Probe::rejected;
  return curvature <= slack ? Probe::unresolved : Probe::accepted;
}

}  // namespace

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters: return "max_iters";
    case RunStatus::diverged: return "diverged";
    case RunStatus::unknown: return "unknown";
  }
  return "unknown";
}

double admissible_step_bound(const ConvexityClass& g_class, double L, double beta) {
  if (L < 0.0) throw UsageError("Lipschitz constant must be nonnegative");
  switch (g_class.kind) {
    case ConvexityClass::Kind::convex:
      return L == 0.0 ? kInf : 2.0 * (1.0 - beta) / L;
    case ConvexityClass::Kind::semiconvex: {
      const double gap = L - g_class.modulus;
      return gap <= 0.0 ? kInf : 2.0 * (1.0 - beta) / gap;
    }
    case ConvexityClass::Kind::nonconvex:
      return L == 0.0 ? kInf : (1.0 - 2.0 * beta) / L;
  }
  return 0.0;
}

void validate_parameters(double alpha, double beta, const ConvexityClass& g_class, double L) {
  const double beta_cap = g_class.kind == ConvexityClass::Kind::nonconvex ? 0.5 : 1.0;
  if (!(beta >= 0.0 && beta < beta_cap)) {
    throw UsageError("beta = " + std::to_string(beta) + " outside [0, " +
                     std::to_string(beta_cap) + ") for this class of g");
  }
  if (!(alpha > 0.0)) throw UsageError("step size must be positive");
  const double bound = admissible_step_bound(g_class, L, beta);
  if (!(alpha < bound)) {
    throw UsageError("step size " + std::to_string(alpha) + " is not below the admissible bound " +
                     std::to_string(bound));
  }
}

DecreaseConstants ipiano_decrease_constants(double alpha, double beta, double L,
                                            const ConvexityClass& g_class) {
  if (!(alpha > 0.0)) throw UsageError("step size must be positive");
  double kappa = 0.0;
  if (g_class.kind == ConvexityClass::Kind::nonconvex) {
    kappa = (1.0 - beta) / (2.0 * alpha) - L / 2.0;
  } else {
    kappa = 1.0 / alpha + g_class.modulus / 2.0 - L / 2.0 - beta / (2.0 * alpha);
  }
  return {kappa, kappa - beta / (2.0 * alpha)};
}

void IterationTrace::append(IterationRecord r) {
  if (r.iter != static_cast<int>(records_.size())) {
    throw UsageError("trace records must be indexed consecutively from 0");
  }
  records_.push_back(r);
}

// ---------------------------------------------------------------------------

Vector ipiano_step(const CompositeProblem& p, const SolverConfig& cfg, const Vector& x_k,
                   const Vector& x_km1) {
  if (x_k.size() != p.dimension) throw UsageError("ipiano_step: dimension mismatch");
  require_same_size(x_k, x_km1, "ipiano_step");
  double alpha = cfg.alpha;
  if (!(alpha > 0.0)) {
    if (!p.f.lipschitz_hint) throw UsageError("ipiano_step: need alpha or a Lipschitz hint");
    alpha = cfg.alpha_safety * admissible_step_bound(p.g.convexity, *p.f.lipschitz_hint, cfg.beta);
  }
  if (!cfg.skip_admissibility && !cfg.backtracking && p.f.lipschitz_hint) {
    validate_parameters(alpha, cfg.beta, p.g.convexity, *p.f.lipschitz_hint);
  }
  const Vector y = x_k + cfg.beta * (x_k - x_km1);
  return p.g.prox_point(alpha, y - alpha * p.f.grad(x_k));
}

IterationTrace ipiano_run(const CompositeProblem& p, const SolverConfig& cfg, const Vector& x0,
                          const RunHooks& hooks) {
  check_config_basics(cfg);
  if (x0.size() != p.dimension) throw UsageError("ipiano_run: x0 has the wrong dimension");
  const ExtendedReal g0 = p.g.eval(x0);
  if (g0.is_infinite()) throw UsageError("ipiano_run: x0 must lie in dom g");

  StepRule rule(cfg, p.g.convexity, p.f.lipschitz_hint);
  Recorder rec(cfg, hooks);

  Vector x = x0;
  Vector x_prev = x0;
  auto [fx, grad_x] = p.f.evaluate_both(x);
  {
    IterationRecord r;
    r.objective = fx + g0.value();
    r.lyapunov = r.objective;
    if (rec.record(x, r)) return rec.take(x);
  }

  while (true) {
    double alpha = rule.alpha();
    double kappa = 0.0;
    Vector y;
    Vector x_next;
    double f_next = 0.0;
    Vector grad_next;
    if (rule.backtracking()) {
      const auto& bt = *cfg.backtracking;
      double L = rule.start_L();
      StepRule::Trial t{};
      Probe outcome = Probe::rejected;
      for (int probe = 0;; ++probe) {
        t = rule.trial(L);
        alpha = t.alpha;
        y = x + t.beta * (x - x_prev);
        x_next = p.g.prox_point(alpha, y - alpha * grad_x);
        std::tie(f_next, grad_next) = p.f.evaluate_both(x_next);
        outcome = descent_probe(f_next, fx, grad_x, x_next - x, L);
        if (outcome != Probe::rejected || probe + 1 >= bt.max_probes) break;
        L *= bt.eta_up;
      }
      kappa = rule.accepted(L, t, outcome == Probe::accepted);
    } else {
      y = x + cfg.beta * (x - x_prev);
      x_next = p.g.prox_point(alpha, y - alpha * grad_x);
      std::tie(f_next, grad_next) = p.f.evaluate_both(x_next);
      kappa = rule.constant_kappa();
    }

    const ExtendedReal g_next = p.g.value_at_prox(x_next);
    const Vector d = x_next - x;
    const Vector v = ipiano_subgradient_residual(alpha, y, grad_x, x_next, grad_next);

    IterationRecord r;
    r.objective = g_next.is_infinite() ? kInf : f_next + g_next.value();
    r.lyapunov = *r.objective + kappa * d.squaredNorm();
    r.step_norm = d.norm();
    r.subgrad_norm = lifted_subgradient_norm(v, d, kappa);

    x_prev = std::move(x);
    x = std::move(x_next);
    fx = f_next;
    grad_x = std::move(grad_next);
    if (rec.record(x, r)) break;
  }
  return rec.take(x);
}

IterationTrace heavy_ball_run(const SmoothOracle& f, const SolverConfig& cfg, const Vector& x0,
                              const RunHooks& hooks) {
  check_config_basics(cfg);
  StepRule rule(cfg, ConvexityClass::convex(), f.lipschitz_hint);
  Recorder rec(cfg, hooks);

  Vector x = x0;
  Vector x_prev = x0;
  auto [fx, grad_x] = f.evaluate_both(x);
  {
    IterationRecord r;
    r.objective = fx;
    r.lyapunov = fx;
    if (rec.record(x, r)) return rec.take(x);
  }

  while (true) {
    double alpha = rule.alpha();
    double kappa = 0.0;
    Vector x_next;
    double f_next = 0.0;
    Vector grad_next;
    if (rule.backtracking()) {
      const auto& bt = *cfg.backtracking;
      double L = rule.start_L();
      StepRule::Trial t{};
      Probe outcome = Probe::rejected;
      for (int probe = 0;; ++probe) {
        t = rule.trial(L);
        alpha = t.alpha;
        x_next = x + t.beta * (x - x_prev) - alpha * grad_x;
        std::tie(f_next, grad_next) = f.evaluate_both(x_next);
        outcome = descent_probe(f_next, fx, grad_x, x_next - x, L);
        if (outcome != Probe::rejected || probe + 1 >= bt.max_probes) break;
        L *= bt.eta_up;
      }
      kappa = rule.accepted(L, t, outcome == Probe::accepted);
    } else {
      x_next = x + cfg.beta * (x - x_prev) - alpha * grad_x;
      std::tie(f_next, grad_next) = f.evaluate_both(x_next);
      kappa = rule.constant_kappa();
    }

    const Vector d = x_next - x;
    IterationRecord r;
    r.objective = f_next;
    r.lyapunov = f_next + kappa * d.squaredNorm();
    r.step_norm = d.norm();
    // x_next = y - alpha grad f(x), so the prox residual reduces to grad f(x_next).
    r.subgrad_norm = lifted_subgradient_norm(grad_next, d, kappa);

    x_prev = std::move(x);
    x = std::move(x_next);
    fx = f_next;
    grad_x = std::move(grad_next);
    if (rec.record(x, r)) break;
  }
  return rec.take(x);
}

IterationTrace inertial_averaged_prox_run(std::span<const ProxOracle> oracles,
                                          const SolverConfig& cfg, const Vector& x0,
                                          const RunHooks& hooks) {
  check_config_basics(cfg);
  if (oracles.empty()) throw UsageError("inertial_averaged_prox_run: need at least one oracle");
  const double lambda = cfg.lambda;
  if (!(lambda > 0.0)) throw UsageError("lambda must be positive");
  const double L = 1.0 / lambda;
  double alpha = cfg.alpha > 0.0 ? cfg.alpha
                                 : cfg.alpha_safety * 2.0 * (1.0 - cfg.beta) * lambda;
  if (!cfg.skip_admissibility) validate_parameters(alpha, cfg.beta, ConvexityClass::convex(), L);
  const double M = static_cast<double>(oracles.size());
  // The update is the Heavy-ball method on the average of the envelopes; the
  // recorded objective is their sum, so the Lyapunov weight scales by M.
  const double kappa =
      cfg.kappa ? *cfg.kappa
                : M * ipiano_decrease_constants(alpha, cfg.beta, L, ConvexityClass::convex()).kappa;
  Recorder rec(cfg, hooks);

  Vector x = x0;
  Vector x_prev = x0;
  while (true) {
    Vector prox_sum = Vector::Zero(x.size());
    double h = 0.0;
    for (const auto& o : oracles) {
      const Vector p = o.prox_point(lambda, x);
      const ExtendedReal gp = o.value_at_prox(p);
      if (gp.is_infinite()) throw InfeasibleError("prox point outside dom f_i");
      h += gp.value() + (p - x).squaredNorm() / (2.0 * lambda);
      prox_sum += p;
    }
    const Vector d = x - x_prev;
    IterationRecord r;
    r.objective = h;
    r.lyapunov = h + kappa * d.squaredNorm();
    r.step_norm = d.norm();
    r.subgrad_norm = lifted_subgradient_norm((M * x - prox_sum) / lambda, d, kappa);
    if (rec.record(x, r)) break;

    Vector x_next = (1.0 - alpha / lambda) * x + (alpha / M) / lambda * prox_sum +
                    cfg.beta * (x - x_prev);
    x_prev = std::move(x);
    x = std::move(x_next);
  }
  return rec.take(x);
}

IterationTrace inertial_alternating_prox_run(const ProxOracle& g, const ProxOracle& f,
                                             const SolverConfig& cfg, const Vector& x0,
                                             const RunHooks& hooks) {
  check_config_basics(cfg);
  const double lambda = cfg.lambda;
  if (!(lambda > 0.0)) throw UsageError("lambda must be positive");
  const double L = 1.0 / lambda;
  const double alpha = cfg.alpha > 0.0
                           ? cfg.alpha
                           : cfg.alpha_safety * admissible_step_bound(g.convexity, L, cfg.beta);
  if (!cfg.skip_admissibility) validate_parameters(alpha, cfg.beta, g.convexity, L);
  const double kappa =
      cfg.kappa ? *cfg.kappa : ipiano_decrease_constants(alpha, cfg.beta, L, g.convexity).kappa;
  const ExtendedReal g0 = g.eval(x0);
  if (g0.is_infinite()) throw UsageError("inertial_alternating_prox_run: x0 must lie in dom g");
  Recorder rec(cfg, hooks);

  Vector x = x0;
  Vector x_prev = x0;
  ExtendedReal gx = g0;
  Vector y_prev;      // extrapolated point of the previous step
  Vector grad_prev;   // envelope gradient at x^{k-1}
  while (true) {
    const Vector p = f.prox_point(lambda, x);
    const ExtendedReal fp = f.value_at_prox(p);
    if (fp.is_infinite()) throw InfeasibleError("prox point outside dom f");
    const double envelope = fp.value() + (p - x).squaredNorm() / (2.0 * lambda);
    const Vector grad = (x - p) / lambda;
    const Vector d = x - x_prev;

    IterationRecord r;
    r.objective = gx.is_infinite() ? kInf : gx.value() + envelope;
    r.lyapunov = *r.objective + kappa * d.squaredNorm();
    r.step_norm = d.norm();
    if (y_prev.size() > 0) {
      const Vector v = ipiano_subgradient_residual(alpha, y_prev, grad_prev, x, grad);
      r.subgrad_norm = lifted_subgradient_norm(v, d, kappa);
    }
    if (rec.record(x, r)) break;

    Vector y = x + cfg.beta * (x - x_prev);
    Vector arg = (1.0 - alpha / lambda) * x + (alpha / lambda) * p + cfg.beta * (x - x_prev);
    Vector x_next = g.prox_point(alpha, arg);
    gx = g.value_at_prox(x_next);
    y_prev = std::move(y);
    grad_prev = grad;
    x_prev = std::move(x);
    x = std::move(x_next);
  }
  return rec.take(x);
}

IterationTrace alternating_projection_run(const Projection& P1, const Projection& P2,
                                          const SolverConfig& cfg, const Vector& x0,
                                          const RunHooks& hooks) {
  check_config_basics(cfg);
  Recorder rec(cfg, hooks);
  Vector x = x0;
  Vector x_prev = x0;
  while (true) {
    const Vector p2 = P2(x);
    IterationRecord r;
    r.objective = 0.5 * (x - p2).squaredNorm();
    r.step_norm = (x - x_prev).norm();
    if (rec.record(x, r)) break;
    x_prev = std::move(x);
    x = P1(p2);
  }
  return rec.take(x);
}

IterationTrace averaged_projection_run(const Projection& P1, const Projection& P2,
                                       const SolverConfig& cfg, const Vector& x0,
                                       const RunHooks& hooks) {
  check_config_basics(cfg);
  Recorder rec(cfg, hooks);
  Vector x = x0;
  Vector x_prev = x0;
  while (true) {
    const Vector p1 = P1(x);
    const Vector p2 = P2(x);
    IterationRecord r;
    r.objective = 0.5 * ((x - p1).squaredNorm() + (x - p2).squaredNorm());
    r.step_norm = (x - x_prev).norm();
    if (rec.record(x, r)) break;
    x_prev = std::move(x);
    x = 0.5 * (p1 + p2);
  }
  return rec.take(x);
}

IterationTrace relaxed_alternating_projection_run(const Projection& P_nonconvex,
                                                  const Projection& P_convex,
                                                  const SolverConfig& cfg, const Vector& x0,
                                                  const RunHooks& hooks) {
  check_config_basics(cfg);
  const double alpha = cfg.alpha;
  const double beta = cfg.beta;
  if (!cfg.skip_admissibility) {
    if (!(beta >= 0.0 && beta < 0.5)) throw UsageError("relaxed projection: beta must be in [0, 1/2)");
    if (!(alpha > 0.0 && alpha < 1.0 - 2.0 * beta)) {
      throw UsageError("relaxed projection: alpha must be in (0, 1 - 2 beta)");
    }
  }
  Recorder rec(cfg, hooks);
  Vector x = x0;
  Vector x_prev = x0;
  while (true) {
    const Vector pc = P_convex(x);
    IterationRecord r;
    r.objective = 0.5 * (x - pc).squaredNorm();
    r.step_norm = (x - x_prev).norm();
    if (rec.record(x, r)) break;
    Vector x_next = P_nonconvex((1.0 - alpha) * x + alpha * pc + beta * (x - x_prev));
    x_prev = std::move(x);
    x = std::move(x_next);
  }
  return rec.take(x);
}

double douglas_rachford_gamma0() { return std::sqrt(1.5) - 1.0; }

IterationTrace douglas_rachford_run(const Projection& P_convex, const Projection& P_other,
                                    double gamma,
                                    const std::optional<DouglasRachfordHeuristic>& heuristic,
                                    const SolverConfig& cfg, const Vector& x0,
                                    const RunHooks& hooks) {
  check_config_basics(cfg);
  if (!(gamma > 0.0)) throw UsageError("douglas_rachford_run: gamma must be positive");
  const double gamma0 = douglas_rachford_gamma0();
  if (heuristic) {
    if (!(heuristic->gamma_mult > 0.0) || !(heuristic->t > 0.0)) {
      throw UsageError("douglas_rachford_run: heuristic parameters must be positive");
    }
    gamma = heuristic->gamma_mult * gamma0;
  }
  Recorder rec(cfg, hooks);
  Vector x = x0;
  Vector y = x0;
  Vector y_prev = x0;
  for (int k = 0;; ++k) {
    IterationRecord r;
    r.step_norm = (y - y_prev).norm();
    if (rec.record(y, r)) break;
    if (heuristic && k > 0 && r.step_norm > heuristic->t / k) {
      gamma = std::max(gamma / 2.0, 0.9999 * gamma0);
    }
    y_prev = y;
    y = (x + gamma * P_convex(x)) / (1.0 + gamma);
    const Vector z = P_other(2.0 * y - x);
    x += z - y;
  }
  return rec.take(y);
}

}  // namespace iprox
