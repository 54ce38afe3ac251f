#pragma once

#include "iprox/solvers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

namespace iprox {

/// Largest a with F[k+1] + a * steps[k]^2 <= F[k] for every k, where steps[k]
/// is |x^k - x^{k-1}| and F[k] the Lyapunov value at z^k = (x^k, x^{k-1}).
/// Steps below 1e-14 are skipped; an increase of F across such a step gives
/// -inf. Pairs where both |F[k] - F[k+1]| and steps[k]^2 are below the
/// rounding level 10 eps (|F[k]| + |F[k+1]|) are skipped too. Returns +inf
/// when no step qualifies.
double check_h1(std::span<const double> lyapunov, std::span<const double> steps);
/// Trace overload; throws UsageError when the Lyapunov column is missing.
double check_h1(const IterationTrace& trace);

/// Smallest b with |w^{k+1}| <= b/2 (steps[k] + steps[k+1]); w[k] holds |w^{k+1}|.
double check_h2(std::span<const double> subgrad_norms, std::span<const double> steps);
/// Trace overload; missing subgradient data yields +inf.
double check_h2(const IterationTrace& trace);

struct FiniteLength {
  double sum = 0.0;
  /// The last quarter of the steps contributes less than 10% of the sum.
  bool tail_decay = false;
};
FiniteLength check_finite_length(std::span<const double> steps);
FiniteLength check_finite_length(const IterationTrace& trace);

/// First iteration whose iterate leaves the closed ball, if any. Throws
/// UsageError when the trace did not record iterates.
std::optional<int> check_containment(const IterationTrace& trace, const Vector& center,
                                     double radius);

/// Point (x, y) of the doubled space on which the Lyapunov function lives.
struct LiftedPoint {
  Vector x;
  Vector y;
};
using LiftedFunction = std::function<double(const Vector& x, const Vector& y)>;

/// Sampling probe of the growth condition
///   F(w) >= F(z*) - (a / 16) |w_y - z*_y|^2  for w_y outside B_delta(z*_y).
/// Draws n_samples points around z* with Gaussian spread; the sample set only
/// depends on seed, so the outcome is monotone in a. A `true` is evidence, not proof.
bool sample_growth_condition(const LiftedFunction& F, const LiftedPoint& z_star, double a,
                             double delta, int n_samples, std::uint64_t seed = 0,
                             double spread = 1.0);

enum class RateClass { finite, linear, sublinear };
std::string to_string(RateClass c);

struct RateEstimate {
  RateClass rate_class = RateClass::linear;
  /// 1 for finite termination, the inverted exponent for sublinear decay; the
  /// linear regime only pins theta to [1/2, 1) and reports none.
  std::optional<double> theta;
};

/// Classifies the decay of values[k] - f_limit. Refuses (returns nullopt) when
/// the sequence increases by more than 1e-12 or too few informative points remain.
std::optional<RateEstimate> fit_kl_exponent(std::span<const double> values, double f_limit);
/// Uses the Lyapunov column when complete, otherwise the objective column.
std::optional<RateEstimate> fit_kl_exponent(const IterationTrace& trace, double f_limit);

struct ContainmentResult {
  Vector center;
  double radius = 0.0;
  std::optional<int> violated_at;
};

struct CertificateReport {
  double h1_max_a = 0.0;
  double h2_min_b = 0.0;
  double finite_length_sum = 0.0;
  bool tail_decay = false;
  std::optional<ContainmentResult> containment;
  std::optional<RateClass> rate_class;
  std::optional<double> theta_estimate;

  /// Flat `key=value` lines.
  std::string to_key_value() const;
};

/// Runs every trace-level check. (H3) is not checked: it concerns limits of
/// subsequences and follows from convergence of iterates and values.
CertificateReport certify(const IterationTrace& trace, double f_limit,
                          const std::optional<TrustBall>& containment = std::nullopt);

}  // namespace iprox
