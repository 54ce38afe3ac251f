#include "iprox/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

namespace iprox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroStep = 1e-14;

std::vector<double> step_column(const IterationTrace& trace) {
  std::vector<double> s;
  s.reserve(trace.size());
  for (const auto& r : trace.records()) s.push_back(r.step_norm);
  return s;
}

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double check_h1(std::span<const double> lyapunov, std::span<const double> steps) {
  if (lyapunov.size() < 2) throw UsageError("check_h1: need at least two Lyapunov values");
  if (steps.size() + 1 < lyapunov.size()) throw UsageError("check_h1: missing step norms");
  double a = kInf;
  for (std::size_t k = 0; k + 1 < lyapunov.size(); ++k) {
    const double decrease = lyapunov[k] - lyapunov[k + 1];
    // When both the change of F and the squared step are below the rounding
    // level of F, the pair cannot resolve any a of order one.
    const double noise = 10.0 * std::numeric_limits<double>::epsilon() *
                         (std::abs(lyapunov[k]) + std::abs(lyapunov[k + 1]));
    if (std::abs(decrease) <= noise && steps[k] * steps[k] <= noise) continue;
    if (steps[k] < kZeroStep) {
      if (decrease < 0.0) return -kInf;
      continue;
    }
    a = std::min(a, decrease / (steps[k] * steps[k]));
  }
  return a;
}

double check_h1(const IterationTrace& trace) {
  std::vector<double> F;
  F.reserve(trace.size());
  for (const auto& r : trace.records()) {
    if (!r.lyapunov) throw UsageError("check_h1: trace has no Lyapunov values");
    F.push_back(*r.lyapunov);
  }
  return check_h1(F, step_column(trace));
}

double check_h2(std::span<const double> subgrad_norms, std::span<const double> steps) {
  if (subgrad_norms.empty() || steps.size() < subgrad_norms.size() + 1) return kInf;
  double b = 0.0;
  for (std::size_t k = 0; k < subgrad_norms.size(); ++k) {
    const double w = subgrad_norms[k];
    if (!std::isfinite(w)) return kInf;
    const double denom = steps[k] + steps[k + 1];
    if (denom < kZeroStep) {
      if (w > 0.0) return kInf;
      continue;
    }
    b = std::max(b, 2.0 * w / denom);
  }
  return b;
}

double check_h2(const IterationTrace& trace) {
  if (trace.size() < 2) return kInf;
  std::vector<double> w;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const auto& s = trace.records()[k].subgrad_norm;
    if (!s) return kInf;
    w.push_back(*s);
  }
  return check_h2(w, step_column(trace));
}

FiniteLength check_finite_length(std::span<const double> steps) {
  FiniteLength out;
  for (double s : steps) out.sum += s;
  const std::size_t tail_start = steps.size() - steps.size() / 4;
  double tail = 0.0;
  for (std::size_t k = tail_start; k < steps.size(); ++k) tail += steps[k];
  out.tail_decay = out.sum == 0.0 || tail < 0.1 * out.sum;
  return out;
}

FiniteLength check_finite_length(const IterationTrace& trace) {
  return check_finite_length(step_column(trace));
}

std::optional<int> check_containment(const IterationTrace& trace, const Vector& center,
                                     double radius) {
  if (!trace.has_iterates()) throw UsageError("check_containment: trace has no stored iterates");
  const auto& xs = trace.iterates();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    require_same_size(xs[k], center, "check_containment");
    if ((xs[k] - center).norm() > radius) return static_cast<int>(k);
  }
  return std::nullopt;
}

bool sample_growth_condition(const LiftedFunction& F, const LiftedPoint& z_star, double a,
                             double delta, int n_samples, std::uint64_t seed, double spread) {
  require_same_size(z_star.x, z_star.y, "sample_growth_condition");
  if (delta < 0.0 || spread <= 0.0) throw UsageError("sample_growth_condition: bad radii");
  const double F_star = F(z_star.x, z_star.y);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = z_star.x.size();
  for (int s = 0; s < n_samples; ++s) {
    Vector wx(n), dir(n);
    for (Eigen::Index i = 0; i < n; ++i) wx(i) = z_star.x(i) + spread * normal(rng);
    for (Eigen::Index i = 0; i < n; ++i) dir(i) = normal(rng);
    if (dir.norm() == 0.0) dir(0) = 1.0;
    const double dist = delta * (1.0 + 1e-9) + spread * std::abs(normal(rng));
    const Vector wy = z_star.y + dist * dir.normalized();
    if (F(wx, wy) < F_star - a / 16.0 * (wy - z_star.y).squaredNorm()) return false;
  }
  return true;
}

std::string to_string(RateClass c) {
  switch (c) {
    case RateClass::finite: return "finite";
    case RateClass::linear: return "linear";
    case RateClass::sublinear: return "sublinear";
  }
  return "unknown";
}

std::optional<RateEstimate> fit_kl_exponent(std::span<const double> values, double f_limit) {
  std::vector<double> r(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) r[k] = values[k] - f_limit;
  for (std::size_t k = 0; k + 1 < r.size(); ++k) {
    if (!(r[k + 1] <= r[k] + 1e-12)) return std::nullopt;
  }
  for (double v : r) {
    if (v <= 0.0) return RateEstimate{RateClass::finite, 1.0};
  }

  const double floor = 1e2 * std::numeric_limits<double>::epsilon();
  std::vector<std::size_t> informative;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] > floor) informative.push_back(k);
  }
  const std::size_t start = informative.size() / 2;
  if (informative.size() - start < 3) return std::nullopt;

  std::vector<double> ks, log_ks, log_r;
  for (std::size_t i = start; i < informative.size(); ++i) {
    const auto k = static_cast<double>(informative[i]);
    ks.push_back(k);
    log_ks.push_back(std::log(k + 1.0));
    log_r.push_back(std::log(r[informative[i]]));
  }
  const LineFit geometric = least_squares(ks, log_r);
  const LineFit power = least_squares(log_ks, log_r);
  if (geometric.r2 >= 0.99 && geometric.r2 >= power.r2) {
    return RateEstimate{RateClass::linear, std::nullopt};
  }
  // F(z^k) - F* ~ k^s with s = 1 / (2 theta - 1).
  const double s = power.slope;
  double theta = s < 0.0 ? (1.0 + s) / (2.0 * s) : 0.0;
  theta = std::clamp(theta, std::nextafter(0.0, 1.0), std::nextafter(0.5, 0.0));
  return RateEstimate{RateClass::sublinear, theta};
}

std::optional<RateEstimate> fit_kl_exponent(const IterationTrace& trace, double f_limit) {
  std::vector<double> lyap, obj;
  bool lyap_ok = true, obj_ok = true;
  for (const auto& rec : trace.records()) {
    if (rec.lyapunov) lyap.push_back(*rec.lyapunov); else lyap_ok = false;
    if (rec.objective) obj.push_back(*rec.objective); else obj_ok = false;
  }
  if (lyap_ok && !lyap.empty()) return fit_kl_exponent(lyap, f_limit);
  if (obj_ok && !obj.empty()) return fit_kl_exponent(obj, f_limit);
  return std::nullopt;
}

std::string CertificateReport::to_key_value() const {
  std::ostringstream out;
  out << "h1_max_a=" << fmt(h1_max_a) << '\n';
  out << "h2_min_b=" << fmt(h2_min_b) << '\n';
  out << "finite_length_sum=" << fmt(finite_length_sum) << '\n';
  out << "tail_decay=" << (tail_decay ? "true" : "false") << '\n';
  if (containment) {
    out << "containment_radius=" << fmt(containment->radius) << '\n';
    out << "containment_violated_at="
        << (containment->violated_at ? std::to_string(*containment->violated_at) : "none") << '\n';
  }
  out << "rate_class=" << (rate_class ? to_string(*rate_class) : "unclassified") << '\n';
  out << "theta_estimate=" << (theta_estimate ? fmt(*theta_estimate) : "none") << '\n';
  return out.str();
}

CertificateReport certify(const IterationTrace& trace, double f_limit,
                          const std::optional<TrustBall>& containment) {
  CertificateReport rep;
  rep.h1_max_a = check_h1(trace);
  rep.h2_min_b = check_h2(trace);
  const auto fl = check_finite_length(trace);
  rep.finite_length_sum = fl.sum;
  rep.tail_decay = fl.tail_decay;
  if (containment) {
    rep.containment = ContainmentResult{containment->center, containment->radius,
                                        check_containment(trace, containment->center,
                                                          containment->radius)};
  }
  if (const auto rate = fit_kl_exponent(trace, f_limit)) {
    rep.rate_class = rate->rate_class;
    rep.theta_estimate = rate->theta;
  }
  return rep;
}

}  // namespace iprox
