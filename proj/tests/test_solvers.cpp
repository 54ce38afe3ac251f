#include <doctest.h>

#include "iprox/certificates.hpp"
#include "iprox/lowrank.hpp"
#include "test_support.hpp"

#include <sstream>

using namespace iprox;
using namespace testing_support;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }
Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

SolverConfig constant_step(double alpha, double beta, int iters = 200) {
  SolverConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.max_iters = iters;
  c.tol = 1e-14;
  c.record_iterates = true;
  return c;
}

/// Projection onto the line through the origin with direction (cos t, sin t).
Projection line(double t) {
  const Vector u = vec2(std::cos(t), std::sin(t));
  return [u](const Vector& x) { return (u * u.dot(x)).eval(); };
}

double max_iterate_gap(const IterationTrace& a, const IterationTrace& b) {
  REQUIRE(a.iterates().size() == b.iterates().size());
  double gap = 0.0;
  for (std::size_t k = 0; k < a.iterates().size(); ++k) {
    gap = std::max(gap, (a.iterates()[k] - b.iterates()[k]).cwiseAbs().maxCoeff());
  }
  return gap;
}

}  // namespace

TEST_CASE("step-size table") {
  CHECK(admissible_step_bound(ConvexityClass::convex(), 2.0, 0.5) == doctest::Approx(0.5));
  CHECK(admissible_step_bound(ConvexityClass::nonconvex(), 1.0, 0.45) == doctest::Approx(0.1));
  CHECK(admissible_step_bound(ConvexityClass::semiconvex(1.0), 3.0, 0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(validate_parameters(0.2, 0.5, ConvexityClass::nonconvex(), 1.0), UsageError);
  CHECK_THROWS_AS(validate_parameters(1.0, 0.0, ConvexityClass::convex(), 2.0), UsageError);
  CHECK_NOTHROW(validate_parameters(0.099, 0.45, ConvexityClass::nonconvex(), 1.0));
  const auto dc = ipiano_decrease_constants(0.099, 0.45, 1.0, ConvexityClass::nonconvex());
  CHECK(dc.kappa > 0.0);
  CHECK(dc.a > 0.0);
}

TEST_CASE("solvers validate parameters against the declared class") {
  CompositeProblem p{quadratic_smooth(1.0, Vector::Zero(1)), zero_prox(), 1};
  CHECK_THROWS_AS(ipiano_run(p, constant_step(1.9, 0.5), scalar(1)), UsageError);
  CompositeProblem nc{quadratic_smooth(1.0, Vector::Zero(1)),
                      indicator_prox([](const Vector& x) { return x; }, ConvexityClass::nonconvex()), 1};
  CHECK_THROWS_AS(ipiano_run(nc, constant_step(0.01, 0.6), scalar(1)), UsageError);
  CompositeProblem ind{zero_smooth(), nonnegative_indicator(), 1};
  CHECK_THROWS_AS(ipiano_run(ind, constant_step(1.0, 0.0), scalar(-1)), UsageError);
}

TEST_CASE("ipiano_step examples") {
  CompositeProblem p{quadratic_smooth(1.0, Vector::Zero(1)), zero_prox(), 1};
  CHECK(ipiano_step(p, constant_step(0.5, 0.0), scalar(2), scalar(2))(0) == doctest::Approx(1.0));
  CHECK(ipiano_step(p, constant_step(0.5, 0.5), scalar(2), scalar(1))(0) == doctest::Approx(1.5));
  CompositeProblem half_line{zero_smooth(), nonnegative_indicator(), 1};
  CHECK(ipiano_step(half_line, constant_step(1.0, 0.0), scalar(-1), scalar(-1))(0) == 0.0);
}

TEST_CASE("ipiano on a quadratic decays geometrically with a nonincreasing Lyapunov trace") {
  CompositeProblem p{quadratic_smooth(1.0, Vector::Zero(1)), zero_prox(), 1};
  const auto tr = ipiano_run(p, constant_step(0.5, 0.0, 50), scalar(4));
  for (std::size_t k = 1; k < tr.iterates().size(); ++k) {
    CHECK(std::abs(tr.iterates()[k](0)) == doctest::Approx(0.5 * std::abs(tr.iterates()[k - 1](0))));
  }
  const auto inertial = ipiano_run(p, constant_step(0.9, 0.4, 300), scalar(4));
  CHECK(check_h1(inertial) > 0.0);
  for (std::size_t k = 1; k < inertial.size(); ++k) {
    CHECK(*inertial.records()[k].lyapunov <= *inertial.records()[k - 1].lyapunov + 1e-15);
  }
}

TEST_CASE("ipiano on a shifted quadratic plus absolute value finds the grid minimizer") {
  CompositeProblem p{quadratic_smooth(1.0, scalar(1.0)), l1_prox(), 1};
  auto cfg = constant_step(1.0, 0.3, 500);
  cfg.record_iterates = false;
  const auto tr = ipiano_run(p, cfg, scalar(3));
  double best = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (int i = -40000; i <= 40000; ++i) {
    const double x = i * 1e-4;
    const double v = 0.5 * (x - 1) * (x - 1) + std::abs(x);
    if (v < best_val) best_val = v, best = x;
  }
  CHECK(std::abs(tr.final_point(0) - best) <= 1e-4);
}

TEST_CASE("heavy ball special cases and equality with ipiano") {
  auto gd_cfg = constant_step(1.0, 0.0, 3);
  const auto tr = heavy_ball_run(quadratic_smooth(1.0, Vector::Zero(1)), gd_cfg, scalar(5));
  CHECK(tr.iterates()[1](0) == 0.0);

  std::mt19937_64 rng(21);
  for (int i = 0; i < 10; ++i) {
    const Matrix B = random_matrix(rng, 4, 4);
    const auto f = quadratic_form_smooth(B.transpose() * B + Matrix::Identity(4, 4), random_vector(rng, 4));
    const double L = *f.lipschitz_hint;
    const double beta = i % 2 ? 0.0 : 0.6;
    auto cfg = constant_step(0.9 * 2 * (1 - beta) / L, beta, 100);
    const Vector x0 = random_vector(rng, 4);
    const auto hb = heavy_ball_run(f, cfg, x0);
    const auto ip = ipiano_run({f, zero_prox(), 4}, cfg, x0);
    CHECK(max_iterate_gap(hb, ip) <= 1e-12);
    if (beta == 0.0) {
      Vector x = x0;
      double gap = 0.0;
      for (std::size_t k = 1; k < hb.iterates().size(); ++k) {
        x = x - cfg.alpha * f.grad(x);
        gap = std::max(gap, (x - hb.iterates()[k]).cwiseAbs().maxCoeff());
      }
      CHECK(gap <= 1e-12);
    }
  }
}

TEST_CASE("projected iteration is the forward-backward special case") {
  CompositeProblem p{zero_smooth(), nonnegative_indicator(), 3};
  const Vector x0 = (Vector(3) << 1.0, 2.0, 0.5).finished();
  const auto tr = ipiano_run(p, constant_step(0.7, 0.0, 5), x0);
  for (const auto& x : tr.iterates()) CHECK((x - x0).norm() == 0.0);
}

TEST_CASE("backtracking ipiano decreases its Lyapunov function") {
  std::mt19937_64 rng(7);
  const Matrix B = random_matrix(rng, 5, 5);
  const auto f = quadratic_form_smooth(B.transpose() * B, random_vector(rng, 5));
  SolverConfig cfg;
  cfg.beta = 0.75;
  cfg.backtracking = BacktrackingConfig{};
  cfg.max_iters = 400;
  cfg.tol = 1e-12;
  const auto tr = ipiano_run({f, l1_prox(0.5), 5}, cfg, random_vector(rng, 5));
  CHECK(check_h1(tr) > 0.0);
  CHECK(std::isfinite(check_h2(tr)));
}

TEST_CASE("run status and stopping") {
  CompositeProblem p{quadratic_smooth(1.0, Vector::Zero(1)), zero_prox(), 1};
  auto cfg = constant_step(0.5, 0.0, 5);
  CHECK(ipiano_run(p, cfg, scalar(4)).status == RunStatus::max_iters);
  cfg.max_iters = 1000;
  cfg.tol = 1e-8;
  const auto tr = ipiano_run(p, cfg, scalar(4));
  CHECK(tr.status == RunStatus::converged);
  CHECK(tr.back().step_norm <= 1e-8);

  // A divergent run (step beyond the bound, checks disabled) is cut off.
  auto bad = constant_step(3.0, 0.0, 1000);
  bad.skip_admissibility = true;
  CHECK(ipiano_run(p, bad, scalar(1)).status == RunStatus::diverged);

  RunHooks hooks{[](const Vector& x) { return std::abs(x(0)); }};
  cfg.tol = 1e-3;
  const auto hooked = ipiano_run(p, cfg, scalar(4), hooks);
  CHECK(hooked.status == RunStatus::converged);
  CHECK(*hooked.back().residual <= 1e-3);
}

TEST_CASE("trace records are consecutive") {
  IterationTrace t;
  t.append({});
  IterationRecord r;
  r.iter = 2;
  CHECK_THROWS_AS(t.append(r), UsageError);
}

TEST_CASE("inertial averaged prox examples") {
  const std::vector<ProxOracle> point{zero_point_indicator()};
  auto cfg = constant_step(1.0, 0.0, 3);
  const auto tr = inertial_averaged_prox_run(point, cfg, scalar(4));
  CHECK(tr.iterates()[1](0) == 0.0);

  const std::vector<ProxOracle> halfline{nonnegative_indicator()};
  const auto fixed = inertial_averaged_prox_run(halfline, constant_step(1.0, 0.0, 5), scalar(2));
  for (const auto& x : fixed.iterates()) CHECK(x(0) == 2.0);

  // Two lines through (1, 2): y = 2x and y = 3 - x/2... both pass (1, 2).
  const Vector c = vec2(1.0, 2.0);
  const auto shifted = [c](double t) {
    const Projection P = line(t);
    return [P, c](const Vector& x) { return (c + P(x - c)).eval(); };
  };
  const std::vector<ProxOracle> lines{
      indicator_prox(shifted(0.3), ConvexityClass::convex()),
      indicator_prox(shifted(1.4), ConvexityClass::convex())};
  auto lc = constant_step(0.0, 0.3, 5000);
  lc.alpha = 0.99 * 2 * (1 - 0.3);
  lc.tol = 1e-12;
  const auto conv = inertial_averaged_prox_run(lines, lc, vec2(5.0, -3.0));
  CHECK((conv.final_point - c).norm() <= 1e-8);
}

TEST_CASE("inertial alternating prox examples") {
  const auto zero = zero_point_indicator();
  auto cfg = constant_step(0.5, 0.0, 3);
  const auto tr = inertial_alternating_prox_run(zero, zero, cfg, scalar(0.0));
  CHECK(tr.iterates()[0](0) == 0.0);
  // x0 must lie in dom g; starting at 3 is rejected.
  CHECK_THROWS_AS(inertial_alternating_prox_run(zero, zero, cfg, scalar(3.0)), UsageError);

  // x-axis and y-axis: prox_g of (1 - a) x + a P_y(x) keeps x_1 (1 - a).
  const auto xaxis = indicator_prox(line(0.0), ConvexityClass::convex());
  const auto yaxis = indicator_prox(line(M_PI / 2), ConvexityClass::convex());
  auto ac = constant_step(0.8, 0.0, 400);
  const auto run = inertial_alternating_prox_run(xaxis, yaxis, ac, vec2(3.0, 0.0));
  for (std::size_t k = 0; k < run.iterates().size(); ++k) {
    CHECK(run.iterates()[k](0) == doctest::Approx(3.0 * std::pow(0.2, static_cast<double>(k))));
  }
}

TEST_CASE("alternating and averaged projections on two lines") {
  const double theta = 0.4;
  const auto P1 = line(0.0), P2 = line(theta);
  auto cfg = constant_step(0.0, 0.0, 60);
  const auto alt = alternating_projection_run(P1, P2, cfg, vec2(2.0, 0.0));
  // From a point on line 1, each sweep scales by cos^2(theta).
  for (std::size_t k = 0; k < alt.iterates().size(); ++k) {
    CHECK(alt.iterates()[k].norm() ==
          doctest::Approx(2.0 * std::pow(std::cos(theta), 2.0 * static_cast<double>(k))));
  }

  cfg.max_iters = 5000;
  RunHooks to_origin{[](const Vector& x) { return x.norm(); }};
  cfg.tol = 1e-6;
  const auto a = alternating_projection_run(P1, P2, cfg, vec2(2.0, 1.0), to_origin);
  const auto b = averaged_projection_run(P1, P2, cfg, vec2(2.0, 1.0), to_origin);
  CHECK(a.status == RunStatus::converged);
  CHECK(b.status == RunStatus::converged);
  CHECK(b.size() > a.size());

  // Fixed points and collapses.
  const auto id = [](const Vector& x) { return x; };
  const auto stay = alternating_projection_run(P1, P2, constant_step(0, 0, 5), vec2(0, 0));
  for (const auto& x : stay.iterates()) CHECK(x.norm() == 0.0);
  const auto once = alternating_projection_run(id, P2, constant_step(0, 0, 5), vec2(3, 1));
  for (std::size_t k = 1; k < once.iterates().size(); ++k) {
    CHECK((once.iterates()[k] - P2(vec2(3, 1))).norm() <= 1e-15);
  }
  const auto same = averaged_projection_run(P2, P2, constant_step(0, 0, 5), vec2(3, 1));
  CHECK((same.iterates()[1] - P2(vec2(3, 1))).norm() <= 1e-15);
}

TEST_CASE("relaxed alternating projection") {
  const auto P = line(0.7);
  auto cfg = constant_step(0.99, 0.0, 5);
  const auto tr = relaxed_alternating_projection_run(P, P, cfg, vec2(1.0, 3.0));
  for (std::size_t k = 2; k < tr.iterates().size(); ++k) {
    CHECK((tr.iterates()[k] - tr.iterates()[1]).norm() <= 1e-15);
  }
  cfg.beta = 0.5;
  CHECK_THROWS_AS(relaxed_alternating_projection_run(P, P, cfg, vec2(1, 3)), UsageError);
  cfg.beta = 0.3;
  cfg.alpha = 0.5;
  CHECK_THROWS_AS(relaxed_alternating_projection_run(P, P, cfg, vec2(1, 3)), UsageError);

  const auto inst = std::make_shared<const FeasibilityInstance>(gen_instance(3, {6, 7, 1, 20}));
  MethodOptions opts;
  opts.max_iters = 3000;
  opts.tol = 1e-8;
  const auto m = make_method("glob-altproj", inst, opts);
  CHECK(m.config.alpha == doctest::Approx(0.99));
  CHECK(m.config.beta == 0.0);
  const auto run = m.run();
  CHECK(*run.back().residual <= 1e-8);
}

TEST_CASE("douglas rachford constants and fixed points") {
  CHECK(douglas_rachford_gamma0() == doctest::Approx(0.22474).epsilon(1e-4));
  const DouglasRachfordHeuristic h;
  CHECK(h.gamma_mult == 150.0);
  CHECK(h.t == 75.0);
  const auto P = line(0.2);
  const Vector x0 = P(vec2(2.0, 1.0));
  const auto tr = douglas_rachford_run(P, P, douglas_rachford_gamma0(), std::nullopt,
                                       constant_step(0, 0, 10), x0);
  for (const auto& x : tr.iterates()) CHECK((x - x0).norm() <= 1e-15);
  const auto heur = douglas_rachford_run(P, line(1.0), douglas_rachford_gamma0(), h,
                                         constant_step(0, 0, 300), vec2(2.0, 1.0));
  CHECK(heur.final_point.norm() <= 1e-6);
}

TEST_CASE("trace CSV round trip and degradation") {
  CompositeProblem p{quadratic_smooth(1.0, Vector::Zero(2)), l1_prox(0.1), 2};
  const auto tr = ipiano_run(p, constant_step(0.5, 0.4, 30), vec2(1.0, -2.0),
                             RunHooks{[](const Vector& x) { return x.norm(); }});
  std::stringstream ss;
  write_trace_csv(ss, tr);
  const auto back = read_trace_csv(ss);
  REQUIRE(back.size() == tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto &a = tr.records()[k], &b = back.records()[k];
    CHECK(a.iter == b.iter);
    CHECK(a.step_norm == b.step_norm);
    CHECK(a.lyapunov == b.lyapunov);
    CHECK(a.subgrad_norm == b.subgrad_norm);
    CHECK(a.residual == b.residual);
  }
  std::stringstream partial("iter,step_norm,lyapunov\n0,0,3\n1,0.5,2\n");
  const auto pt = read_trace_csv(partial);
  CHECK(pt.size() == 2);
  CHECK_FALSE(pt.records()[1].subgrad_norm.has_value());
  std::stringstream bad("iter,step_norm\n0,abc\n");
  CHECK_THROWS_AS(read_trace_csv(bad), UsageError);
  std::stringstream gap("iter,step_norm\n0,0\n2,1\n");
  CHECK_THROWS_AS(read_trace_csv(gap), UsageError);
  std::stringstream nostep("iter,objective\n0,1\n");
  CHECK_THROWS_AS(read_trace_csv(nostep), UsageError);
}
