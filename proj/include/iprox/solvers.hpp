#pragma once

#include "iprox/prox.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iprox {

struct BacktrackingConfig {
  double eta_up = 2.0;
  double eta_down = 0.5;
  double L_init = 1.0;
  int max_probes = 50;
};

struct SolverConfig {
  /// Step size. Zero means "alpha_safety times the admissible bound" (constant
  /// steps need a Lipschitz hint for that).
  double alpha = 0.0;
  double beta = 0.0;
  /// Moreau/prox scale of the envelope-based methods.
  double lambda = 1.0;
  int max_iters = 1000;
  /// Stopping threshold: on the residual hook when one is given, otherwise on
  /// both the step norm and the subgradient norm.
  double tol = 1e-10;
  std::optional<BacktrackingConfig> backtracking;
  std::uint64_t seed = 0;
  double alpha_safety = 0.99;
  /// Lyapunov weight; defaults to the decrease constant of the method when the
  /// Lipschitz constant is known, else 1.
  std::optional<double> kappa;
  /// Keep every iterate in the trace (needed for containment checks).
  bool record_iterates = false;
  /// Disables the step-size admissibility check. Only the explicitly unsafe
  /// benchmark heuristics set this.
  bool skip_admissibility = false;
};

/// Supremum of admissible step sizes for the given class of g, Lipschitz
/// constant L of grad f and inertia beta (+inf when L <= m or L == 0).
double admissible_step_bound(const ConvexityClass& g_class, double L, double beta);

/// Throws UsageError when (alpha, beta) violate the parameter table for g_class.
void validate_parameters(double alpha, double beta, const ConvexityClass& g_class, double L);

/// Weight kappa for which h(x) + kappa |x - y|^2 decreases along the iterates,
/// together with the guaranteed decrease constant a (both may be <= 0 when the
/// parameters are inadmissible).
struct DecreaseConstants {
  double kappa;
  double a;
};
DecreaseConstants ipiano_decrease_constants(double alpha, double beta, double L,
                                            const ConvexityClass& g_class);

enum class RunStatus { converged, max_iters, diverged, unknown };
std::string to_string(RunStatus s);

/// One row of a trace. Record k describes x^k; step_norm is |x^k - x^{k-1}|.
struct IterationRecord {
  int iter = 0;
  std::optional<double> objective;
  std::optional<double> lyapunov;
  double step_norm = 0.0;
  std::optional<double> subgrad_norm;
  std::optional<double> residual;
  double time_s = 0.0;
};

class IterationTrace {
 public:
  /// Appends a record; its index must equal the current size.
  void append(IterationRecord r);
  void append_iterate(Vector x) { iterates_.push_back(std::move(x)); }

  const std::vector<IterationRecord>& records() const { return records_; }
  const std::vector<Vector>& iterates() const { return iterates_; }
  bool has_iterates() const { return !iterates_.empty(); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const IterationRecord& back() const { return records_.back(); }

  RunStatus status = RunStatus::unknown;
  /// Last iterate of the run.
  Vector final_point;

 private:
  std::vector<IterationRecord> records_;
  std::vector<Vector> iterates_;
};

/// Optional per-run instrumentation.
struct RunHooks {
  /// Problem-specific residual recorded for every iterate; drives stopping.
  std::function<double(const Vector&)> residual;
};

Vector ipiano_step(const CompositeProblem& p, const SolverConfig& cfg, const Vector& x_k,
                   const Vector& x_km1);

IterationTrace ipiano_run(const CompositeProblem& p, const SolverConfig& cfg, const Vector& x0,
                          const RunHooks& hooks = {});

IterationTrace heavy_ball_run(const SmoothOracle& f, const SolverConfig& cfg, const Vector& x0,
                              const RunHooks& hooks = {});

IterationTrace inertial_averaged_prox_run(std::span<const ProxOracle> oracles,
                                          const SolverConfig& cfg, const Vector& x0,
                                          const RunHooks& hooks = {});

IterationTrace inertial_alternating_prox_run(const ProxOracle& g, const ProxOracle& f,
                                             const SolverConfig& cfg, const Vector& x0,
                                             const RunHooks& hooks = {});

/// X <- P1(P2(X)).
IterationTrace alternating_projection_run(const Projection& P1, const Projection& P2,
                                          const SolverConfig& cfg, const Vector& x0,
                                          const RunHooks& hooks = {});

/// X <- (P1(X) + P2(X)) / 2.
IterationTrace averaged_projection_run(const Projection& P1, const Projection& P2,
                                       const SolverConfig& cfg, const Vector& x0,
                                       const RunHooks& hooks = {});

/// X <- P_S1((1 - alpha) X + alpha P_S2(X) + beta (X - X_prev)) with
/// alpha = cfg.alpha, beta = cfg.beta.
IterationTrace relaxed_alternating_projection_run(const Projection& P_nonconvex,
                                                  const Projection& P_convex,
                                                  const SolverConfig& cfg, const Vector& x0,
                                                  const RunHooks& hooks = {});

/// sqrt(3/2) - 1, the largest parameter covered by the convergence theory of
/// the non-convex Douglas-Rachford scheme.
double douglas_rachford_gamma0();

struct DouglasRachfordHeuristic {
  double gamma_mult = 150.0;
  double t = 75.0;
};

/// Douglas-Rachford splitting for min 0.5 dist(x, C)^2 + indicator_D(x):
///   y = prox_{gamma f}(x), z = P_D(2y - x), x <- x + z - y.
/// The recorded iterate is y. With a heuristic, gamma starts at
/// gamma_mult * gamma0 and becomes max(gamma / 2, 0.9999 gamma0) whenever
/// |y^k - y^{k-1}| > t / k.
IterationTrace douglas_rachford_run(const Projection& P_convex, const Projection& P_other,
                                    double gamma,
                                    const std::optional<DouglasRachfordHeuristic>& heuristic,
                                    const SolverConfig& cfg, const Vector& x0,
                                    const RunHooks& hooks = {});

// ---------------------------------------------------------------------------
// Columnar trace format: iter,objective,lyapunov,step_norm,subgrad_norm,residual,time_s
// Missing values are empty cells.

void write_trace_csv(std::ostream& out, const IterationTrace& trace);
/// Throws UsageError on malformed input. Absent optional columns stay missing.
IterationTrace read_trace_csv(std::istream& in);

}  // namespace iprox
