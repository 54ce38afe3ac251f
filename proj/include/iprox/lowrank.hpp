#pragma once

#include "iprox/solvers.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace iprox {

struct FeasibilityDims {
  Eigen::Index N = 100;
  Eigen::Index M = 110;
  Eigen::Index R = 4;
  Eigen::Index D = 450;
};

/// Find X (N x M) with A(X) = B and rank(X) <= R. Immutable after generation.
struct FeasibilityInstance {
  FeasibilityDims dims;
  std::uint64_t seed = 0;
  std::shared_ptr<const AffineMeasurementSet> affine;
  RankSet rank_set{1};
  /// Planted rank-R solution, B = A(x_star).
  Matrix x_star;

  const Vector& rhs() const { return affine->rhs(); }
};

/// Draws A_i and the factors U (N x R), V (M x R) with i.i.d. standard normal
/// entries from mt19937_64(seed), in that order, and sets B = A(U V^T).
FeasibilityInstance gen_instance(std::uint64_t seed, const FeasibilityDims& dims);

/// Builds an instance from explicit data (used by instance files and tests).
FeasibilityInstance make_instance(AffineMeasurementSet::OperatorMatrix operators, Vector rhs,
                                  const FeasibilityDims& dims, Matrix x_star,
                                  std::uint64_t seed = 0);

Vector apply_A(const FeasibilityInstance& inst, const Matrix& X);
Matrix apply_A_adjoint(const FeasibilityInstance& inst, const Vector& y);

/// |A(P_R(X)) - B|_2.
double residual(const FeasibilityInstance& inst, const Matrix& X);

// ---------------------------------------------------------------------------
// Instance files: JSON with dimensions and seed; operators, rhs and the planted
// solution are embedded on request, otherwise regenerated from the seed.

void write_instance(std::ostream& out, const FeasibilityInstance& inst, bool embed_operators);
FeasibilityInstance read_instance(std::istream& in);

// ---------------------------------------------------------------------------
// Benchmark methods.

struct MethodOptions {
  /// Overrides the inertia of every inertial method.
  std::optional<double> beta;
  double alpha_safety = 0.99;
  bool unsafe_heuristic = false;
  /// Relative distance |X0 - X*| / |X*| of the local starts.
  double local_offset = 0.1;
  int max_iters = 1000;
  /// Stop once the relative residual |A(P_R X) - B| / |B| drops below this.
  double tol = 1e-12;
  bool record_iterates = false;
};

struct MethodRun {
  std::string name;
  SolverConfig config;
  Vector x0;
  bool local_start = false;
  /// Runs the configured solver; the trace residual column holds the relative residual.
  std::function<IterationTrace()> run;
};

const std::vector<std::string>& method_names();
/// True for names only available with `unsafe_heuristic`.
bool method_is_unsafe(const std::string& name);

/// Wires one benchmark method to an instance. Unknown names, and unsafe
/// heuristics without the flag, raise UsageError.
MethodRun make_method(const std::string& name, std::shared_ptr<const FeasibilityInstance> inst,
                      const MethodOptions& opts = {});

/// Starting point of the local methods: X* + sigma G, |sigma G| = offset |X*|.
Matrix local_start_point(const FeasibilityInstance& inst, double offset);

}  // namespace iprox
