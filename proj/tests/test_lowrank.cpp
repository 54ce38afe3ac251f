#include <doctest.h>

#include "iprox/lowrank.hpp"
#include "test_support.hpp"

#include <Eigen/SVD>

#include <sstream>

using namespace iprox;
using namespace testing_support;

namespace {

const FeasibilityDims kSmall{8, 9, 2, 40};

std::shared_ptr<const FeasibilityInstance> small_instance(std::uint64_t seed) {
  return std::make_shared<const FeasibilityInstance>(gen_instance(seed, kSmall));
}

}  // namespace

TEST_CASE("generated instances are feasible and deterministic") {
  const auto a = gen_instance(5, kSmall), b = gen_instance(5, kSmall);
  CHECK(a.rhs() == b.rhs());
  CHECK(a.affine->operators() == b.affine->operators());
  CHECK(residual(a, a.x_star) <= 1e-10 * (1 + a.rhs().norm()));
  const Eigen::JacobiSVD<Matrix> svd(a.x_star);
  CHECK(svd.singularValues()(kSmall.R) <= 1e-10 * svd.singularValues()(0));
  CHECK(svd.singularValues()(kSmall.R - 1) > 1e-3);
  CHECK(gen_instance(6, kSmall).rhs() != a.rhs());
}

TEST_CASE("paper dimensions construct") {
  const auto inst = gen_instance(1, FeasibilityDims{});
  CHECK(inst.dims.N == 100);
  CHECK(inst.affine->measurements() == 450);
  CHECK(residual(inst, inst.x_star) <= 1e-10 * inst.rhs().norm());
}

TEST_CASE("invalid dimensions are usage errors") {
  CHECK_THROWS_AS(gen_instance(1, {3, 4, 5, 2}), UsageError);
  CHECK_THROWS_AS(gen_instance(1, {3, 4, 1, 12}), UsageError);
  CHECK_THROWS_AS(gen_instance(1, {3, 4, 1, 0}), UsageError);
}

TEST_CASE("measurement operator examples") {
  AffineMeasurementSet::OperatorMatrix ops(1, 4);
  ops << 1, 0, 0, 1;
  const auto inst = make_instance(ops, Vector::Constant(1, 2.0), {2, 2, 1, 1},
                                  Matrix::Identity(2, 2));
  CHECK(apply_A(inst, Matrix::Identity(2, 2))(0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(apply_A(inst, Matrix::Identity(3, 3)), UsageError);
  CHECK_THROWS_AS(apply_A_adjoint(inst, Vector::Zero(2)), UsageError);

  const auto big = gen_instance(2, kSmall);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const Matrix X = random_matrix(rng, kSmall.N, kSmall.M);
    const Vector y = random_vector(rng, kSmall.D);
    const double lhs = apply_A(big, X).dot(y);
    const double rhs = (X.array() * apply_A_adjoint(big, y).array()).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), 1.0) * 10);
  }
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Matrix Ai = apply_A_adjoint(big, Vector::Unit(kSmall.D, i));
    const Vector row = big.affine->operators().row(i).transpose();
    CHECK(Eigen::Map<const Vector>(Ai.data(), Ai.size()) == row);
  }
}

TEST_CASE("gram matrix agrees with operator inner products") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = gen_instance(seed, kSmall);
    Matrix G(kSmall.D, kSmall.D);
    for (Eigen::Index i = 0; i < kSmall.D; ++i) {
      G.row(i) = apply_A(inst, apply_A_adjoint(inst, Vector::Unit(kSmall.D, i))).transpose();
    }
    CHECK((G - inst.affine->gram()).norm() <= 1e-10 * G.norm());
    CHECK((inst.affine->reconstructed_gram() - G).norm() <= 1e-10 * G.norm());
  }
}

TEST_CASE("residual projects to the rank set first") {
  const auto inst = gen_instance(3, {4, 4, 1, 3});
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) {
    const Matrix X = random_matrix(rng, 4, 4);
    const Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix P = svd.singularValues()(0) * svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
    Vector direct(3);
    for (Eigen::Index k = 0; k < 3; ++k) {
      const Vector a = inst.affine->operators().row(k).transpose();
      direct(k) = (Eigen::Map<const Matrix>(a.data(), 4, 4).array() * P.array()).sum();
    }
    CHECK(residual(inst, X) == doctest::Approx((direct - inst.rhs()).norm()).epsilon(1e-10));
    CHECK(residual(inst, X) == doctest::Approx(residual(inst, inst.rank_set.project(X))).epsilon(1e-10));
  }
}

TEST_CASE("instance files round trip") {
  const auto inst = gen_instance(4, kSmall);
  for (bool embed : {false, true}) {
    std::stringstream ss;
    write_instance(ss, inst, embed);
    const std::string text = ss.str();
    std::stringstream again;
    write_instance(again, inst, embed);
    CHECK(again.str() == text);
    const auto back = read_instance(ss);
    CHECK(back.seed == 4);
    CHECK(back.rhs() == inst.rhs());
    CHECK(back.affine->operators() == inst.affine->operators());
    CHECK(back.x_star == inst.x_star);
  }
  std::stringstream bad("{\"format\": \"something-else\"}");
  CHECK_THROWS_AS(read_instance(bad), UsageError);
  std::stringstream junk("not json");
  CHECK_THROWS_AS(read_instance(junk), UsageError);
}

TEST_CASE("method wiring follows the published configurations") {
  const auto inst = small_instance(1);
  const auto glob = make_method("glob-ipiano-altproj", inst);
  CHECK(glob.config.beta == 0.45);
  CHECK(glob.config.alpha == doctest::Approx(0.099));
  CHECK_FALSE(glob.config.backtracking.has_value());
  const auto glob_bt = make_method("glob-ipiano-altproj-bt", inst);
  CHECK(glob_bt.config.beta == 0.45);
  CHECK(glob_bt.config.backtracking.has_value());
  const auto dr = make_method("dr", inst);
  CHECK(dr.config.alpha == doctest::Approx(std::sqrt(1.5) - 1.0));
  const auto ga = make_method("glob-altproj", inst);
  CHECK(ga.config.alpha == doctest::Approx(0.99));
  CHECK(ga.config.beta == 0.0);
  const auto loc = make_method("loc-ipiano-altproj-bt", inst);
  CHECK(loc.config.beta == 0.75);
  CHECK(loc.local_start);
  CHECK(loc.config.backtracking.has_value());
  const auto hb = make_method("loc-heavyball-avrgproj-bt", inst);
  CHECK(hb.config.beta == 0.75);
  CHECK(hb.local_start);
  CHECK((hb.x0.reshaped(kSmall.N, kSmall.M) - inst->x_star).norm() ==
        doctest::Approx(0.1 * inst->x_star.norm()));

  CHECK_THROWS_AS(make_method("nope", inst), UsageError);
  CHECK_THROWS_AS(make_method("heur-ipiano-altproj", inst), UsageError);
  MethodOptions unsafe;
  unsafe.unsafe_heuristic = true;
  const auto heur = make_method("heur-ipiano-altproj", inst, unsafe);
  CHECK(heur.config.alpha == 1.0);
  CHECK(heur.config.beta == 0.75);
  CHECK(method_names().size() == 10);
}

TEST_CASE("every method terminates with finite residuals on a small instance") {
  MethodOptions opts;
  opts.unsafe_heuristic = true;
  opts.max_iters = 150;
  for (std::uint64_t seed : {1, 2}) {
    const auto inst = small_instance(seed);
    for (const auto& name : method_names()) {
      const auto tr = make_method(name, inst, opts).run();
      CAPTURE(name);
      CHECK(tr.size() <= 151);
      CHECK(tr.status != RunStatus::unknown);
      for (const auto& r : tr.records()) {
        REQUIRE(r.residual.has_value());
        CHECK(std::isfinite(*r.residual));
      }
    }
  }
}

TEST_CASE("identical seeds give identical traces") {
  MethodOptions opts;
  opts.max_iters = 40;
  for (const char* name : {"altproj", "glob-ipiano-altproj-bt", "dr-75"}) {
    const auto a = make_method(name, small_instance(9), opts).run();
    const auto b = make_method(name, small_instance(9), opts).run();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a.records()[k].residual == b.records()[k].residual);
      CHECK(a.records()[k].step_norm == b.records()[k].step_norm);
    }
  }
}
