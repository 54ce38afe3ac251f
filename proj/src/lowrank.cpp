#include "iprox/lowrank.hpp"

#include <json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>
#include <limits>
#include <random>

namespace iprox {

namespace {

constexpr const char* kInstanceFormat = "iprox-feasibility-instance";
constexpr const char* kGenerator = "mt19937_64/normal_distribution";
/// Mixed into the instance seed for the local starting point.
constexpr std::uint64_t kLocalStartSalt = 0x9e3779b97f4a7c15ULL;

void check_dims(const FeasibilityDims& d) {
  if (d.N < 1 || d.M < 1 || d.R < 1 || d.D < 1) throw UsageError("dimensions must be positive");
  if (d.R > std::min(d.N, d.M)) throw UsageError("rank bound R exceeds min(N, M)");
  if (d.D >= d.N * d.M) throw UsageError("need D < N*M measurements");
}

Vector flat(const Matrix& X) { return Eigen::Map<const Vector>(X.data(), X.size()); }

Matrix unflat(const Vector& x, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(x.data(), rows, cols);
}

using InstancePtr = std::shared_ptr<const FeasibilityInstance>;

/// |A(X) - B| / |B| for flat X already of rank <= R.
std::function<double(const Vector&)> low_rank_residual(InstancePtr inst) {
  const double scale = std::max(inst->rhs().norm(), std::numeric_limits<double>::min());
  return [inst, scale](const Vector& x) {
    return (inst->affine->apply(x) - inst->rhs()).norm() / scale;
  };
}

/// |A(P_R(X)) - B| / |B| for arbitrary flat X.
std::function<double(const Vector&)> full_residual(InstancePtr inst) {
  const double scale = std::max(inst->rhs().norm(), std::numeric_limits<double>::min());
  return [inst, scale](const Vector& x) {
    return residual(*inst, unflat(x, inst->dims.N, inst->dims.M)) / scale;
  };
}

Projection affine_projection(InstancePtr inst) {
  return [inst](const Vector& x) { return inst->affine->project(x); };
}

Projection rank_projection(InstancePtr inst) {
  return [inst](const Vector& x) { return inst->rank_set.project(x); };
}

/// 0.5 dist(., A)^2 evaluated from the measurement residual.
SmoothOracle half_sq_dist_affine(InstancePtr inst) {
  SmoothOracle f;
  f.eval = [inst](const Vector& x) { return 0.5 * inst->affine->sq_distance(x); };
  f.grad = [inst](const Vector& x) { return (x - inst->affine->project(x)).eval(); };
  f.value_and_grad = [inst](const Vector& x) {
    const auto& A = *inst->affine;
    const Vector r = A.apply(x) - A.rhs();
    const Vector s = A.gram_solve(r);
    return std::pair<double, Vector>(0.5 * std::max(r.dot(s), 0.0), A.adjoint(s));
  };
  f.lipschitz_hint = 1.0;
  return f;
}

/// 0.5 dist(., R)^2; its gradient X - P_R(X) is 1-Lipschitz near the rank-R manifold.
SmoothOracle half_sq_dist_rank(InstancePtr inst) {
  SmoothOracle f;
  const auto N = inst->dims.N, M = inst->dims.M;
  f.value_and_grad = [inst, N, M](const Vector& x) {
    auto [P, half] = inst->rank_set.project_with_half_sq_distance(unflat(x, N, M));
    return std::pair<double, Vector>(half, x - flat(P));
  };
  f.eval = [inst, N, M](const Vector& x) {
    return 0.5 * inst->rank_set.sq_distance(unflat(x, N, M));
  };
  f.grad = [inst](const Vector& x) { return (x - inst->rank_set.project(x)).eval(); };
  f.lipschitz_hint = 1.0;
  return f;
}

/// dist(., A)^2 + dist(., R)^2.
SmoothOracle sum_sq_dist(InstancePtr inst) {
  const SmoothOracle fa = half_sq_dist_affine(inst);
  const SmoothOracle fr = half_sq_dist_rank(inst);
  SmoothOracle f;
  f.value_and_grad = [fa, fr](const Vector& x) {
    auto [va, ga] = fa.value_and_grad(x);
    auto [vr, gr] = fr.value_and_grad(x);
    return std::pair<double, Vector>(2.0 * (va + vr), 2.0 * (ga + gr));
  };
  f.eval = [f](const Vector& x) { return f.value_and_grad(x).first; };
  f.grad = [f](const Vector& x) { return f.value_and_grad(x).second; };
  f.lipschitz_hint = 4.0;
  return f;
}

ProxOracle affine_indicator(InstancePtr inst) {
  return indicator_prox(affine_projection(inst), ConvexityClass::convex(), 1e-9);
}

ProxOracle rank_indicator(InstancePtr inst) {
  return indicator_prox(rank_projection(inst), ConvexityClass::nonconvex(), 1e-10);
}

BacktrackingConfig default_backtracking() { return BacktrackingConfig{}; }

const std::vector<std::string> kMethodNames = {
    "altproj",
    "avrgproj",
    "dr",
    "dr-75",
    "glob-altproj",
    "glob-ipiano-altproj",
    "glob-ipiano-altproj-bt",
    "heur-ipiano-altproj",
    "loc-heavyball-avrgproj-bt",
    "loc-ipiano-altproj-bt",
};

}  // namespace

FeasibilityInstance make_instance(AffineMeasurementSet::OperatorMatrix operators, Vector rhs,
                                  const FeasibilityDims& dims, Matrix x_star, std::uint64_t seed) {
  check_dims(dims);
  if (operators.rows() != dims.D) throw UsageError("instance: operator count differs from D");
  if (x_star.rows() != dims.N || x_star.cols() != dims.M) {
    throw UsageError("instance: planted solution has the wrong shape");
  }
  FeasibilityInstance inst;
  inst.dims = dims;
  inst.seed = seed;
  inst.affine = std::make_shared<const AffineMeasurementSet>(std::move(operators), std::move(rhs),
                                                             dims.N, dims.M);
  inst.rank_set = RankSet(dims.R, dims.N, dims.M);
  inst.x_star = std::move(x_star);
  return inst;
}

FeasibilityInstance gen_instance(std::uint64_t seed, const FeasibilityDims& dims) {
  check_dims(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  AffineMeasurementSet::OperatorMatrix ops(dims.D, dims.N * dims.M);
  for (Eigen::Index i = 0; i < ops.rows(); ++i) {
    for (Eigen::Index j = 0; j < ops.cols(); ++j) ops(i, j) = normal(rng);
  }
  Matrix U(dims.N, dims.R), V(dims.M, dims.R);
  for (Eigen::Index j = 0; j < U.size(); ++j) U.data()[j] = normal(rng);
  for (Eigen::Index j = 0; j < V.size(); ++j) V.data()[j] = normal(rng);
  Matrix x_star = U * V.transpose();
  Vector rhs = ops * flat(x_star);
  return make_instance(std::move(ops), std::move(rhs), dims, std::move(x_star), seed);
}

Vector apply_A(const FeasibilityInstance& inst, const Matrix& X) {
  if (X.rows() != inst.dims.N || X.cols() != inst.dims.M) throw UsageError("apply_A: shape mismatch");
  return inst.affine->apply(flat(X));
}

Matrix apply_A_adjoint(const FeasibilityInstance& inst, const Vector& y) {
  if (y.size() != inst.dims.D) throw UsageError("apply_A_adjoint: expected D entries");
  return unflat(inst.affine->adjoint(y), inst.dims.N, inst.dims.M);
}

double residual(const FeasibilityInstance& inst, const Matrix& X) {
  return (apply_A(inst, inst.rank_set.project(X)) - inst.rhs()).norm();
}

// ---------------------------------------------------------------------------

void write_instance(std::ostream& out, const FeasibilityInstance& inst, bool embed_operators) {
  nlohmann::json j;
  j["format"] = kInstanceFormat;
  j["version"] = 1;
  j["generator"] = kGenerator;
  j["distribution"] = "standard normal entries; X* = U V^T";
  j["seed"] = inst.seed;
  j["N"] = inst.dims.N;
  j["M"] = inst.dims.M;
  j["R"] = inst.dims.R;
  j["D"] = inst.dims.D;
  if (embed_operators) {
    const auto& ops = inst.affine->operators();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < ops.rows(); ++i) {
      rows.push_back(std::vector<double>(ops.row(i).data(), ops.row(i).data() + ops.cols()));
    }
    j["operators"] = std::move(rows);
    j["rhs"] = std::vector<double>(inst.rhs().data(), inst.rhs().data() + inst.rhs().size());
    j["x_star"] = std::vector<double>(inst.x_star.data(), inst.x_star.data() + inst.x_star.size());
  }
  out << j.dump(embed_operators ? -1 : 2) << '\n';
}

FeasibilityInstance read_instance(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("instance file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kInstanceFormat) {
      throw UsageError("instance file: unknown format tag");
    }
    FeasibilityDims dims{j.at("N").get<Eigen::Index>(), j.at("M").get<Eigen::Index>(),
                         j.at("R").get<Eigen::Index>(), j.at("D").get<Eigen::Index>()};
    const auto seed = j.at("seed").get<std::uint64_t>();
    if (!j.contains("operators")) {
      if (j.value("generator", std::string()) != kGenerator) {
        throw UsageError("instance file: generator tag does not match this build");
      }
      return gen_instance(seed, dims);
    }
    check_dims(dims);
    const auto& rows = j.at("operators");
    if (rows.size() != static_cast<std::size_t>(dims.D)) throw UsageError("instance file: D mismatch");
    AffineMeasurementSet::OperatorMatrix ops(dims.D, dims.N * dims.M);
    for (Eigen::Index i = 0; i < dims.D; ++i) {
      const auto row = rows.at(i).get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(ops.cols())) {
        throw UsageError("instance file: operator has the wrong size");
      }
      ops.row(i) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), ops.cols());
    }
    const auto rhs = j.at("rhs").get<std::vector<double>>();
    const auto xs = j.at("x_star").get<std::vector<double>>();
    if (rhs.size() != static_cast<std::size_t>(dims.D) ||
        xs.size() != static_cast<std::size_t>(dims.N * dims.M)) {
      throw UsageError("instance file: rhs or x_star has the wrong size");
    }
    return make_instance(std::move(ops), Eigen::Map<const Vector>(rhs.data(), dims.D), dims,
                         Eigen::Map<const Matrix>(xs.data(), dims.N, dims.M), seed);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("instance file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& method_names() { return kMethodNames; }

bool method_is_unsafe(const std::string& name) { return name == "heur-ipiano-altproj"; }

Matrix local_start_point(const FeasibilityInstance& inst, double offset) {
  std::mt19937_64 rng(inst.seed ^ kLocalStartSalt);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(inst.dims.N, inst.dims.M);
  for (Eigen::Index j = 0; j < G.size(); ++j) G.data()[j] = normal(rng);
  return inst.x_star + (offset * inst.x_star.norm() / G.norm()) * G;
}

MethodRun make_method(const std::string& name, std::shared_ptr<const FeasibilityInstance> inst,
                      const MethodOptions& opts) {
  if (std::find(kMethodNames.begin(), kMethodNames.end(), name) == kMethodNames.end()) {
    throw UsageError("unknown method '" + name + "'");
  }
  if (method_is_unsafe(name) && !opts.unsafe_heuristic) {
    throw UsageError("method '" + name + "' violates the step-size theory; pass --unsafe-heuristic");
  }

  MethodRun m;
  m.name = name;
  SolverConfig& cfg = m.config;
  cfg.max_iters = opts.max_iters;
  cfg.tol = opts.tol;
  cfg.alpha_safety = opts.alpha_safety;
  cfg.record_iterates = opts.record_iterates;
  cfg.seed = inst->seed;
  cfg.lambda = 1.0;
  const Eigen::Index n = inst->dims.N * inst->dims.M;
  m.x0 = Vector::Zero(n);

  const Projection PA = affine_projection(inst);
  const Projection PR = rank_projection(inst);
  RunHooks low_rank_hooks{low_rank_residual(inst)};
  RunHooks full_hooks{full_residual(inst)};

  if (name == "altproj") {
    m.run = [PA, PR, cfg, x0 = m.x0, low_rank_hooks] {
      return alternating_projection_run(PR, PA, cfg, x0, low_rank_hooks);
    };
  } else if (name == "avrgproj") {
    m.run = [PA, PR, cfg, x0 = m.x0, full_hooks] {
      return averaged_projection_run(PA, PR, cfg, x0, full_hooks);
    };
  } else if (name == "dr" || name == "dr-75") {
    std::optional<DouglasRachfordHeuristic> heur;
    if (name == "dr-75") heur = DouglasRachfordHeuristic{150.0, 75.0};
    cfg.alpha = douglas_rachford_gamma0();
    m.run = [PA, PR, heur, cfg, x0 = m.x0, full_hooks] {
      return douglas_rachford_run(PA, PR, douglas_rachford_gamma0(), heur, cfg, x0, full_hooks);
    };
  } else if (name == "glob-altproj") {
    cfg.beta = 0.0;
    cfg.alpha = opts.alpha_safety * (1.0 - 2.0 * cfg.beta);
    m.run = [PA, PR, cfg, x0 = m.x0, low_rank_hooks] {
      return relaxed_alternating_projection_run(PR, PA, cfg, x0, low_rank_hooks);
    };
  } else if (name == "glob-ipiano-altproj" || name == "glob-ipiano-altproj-bt") {
    cfg.beta = opts.beta.value_or(0.45);
    if (name == "glob-ipiano-altproj-bt") {
      cfg.backtracking = default_backtracking();
    } else {
      cfg.alpha = opts.alpha_safety * admissible_step_bound(ConvexityClass::nonconvex(), 1.0, cfg.beta);
    }
    CompositeProblem p{half_sq_dist_affine(inst), rank_indicator(inst), n};
    m.run = [p, cfg, x0 = m.x0, low_rank_hooks] { return ipiano_run(p, cfg, x0, low_rank_hooks); };
  } else if (name == "heur-ipiano-altproj") {
    cfg.beta = opts.beta.value_or(0.75);
    cfg.alpha = 1.0;  // alpha / lambda = 1
    cfg.skip_admissibility = true;
    const ProxOracle g = rank_indicator(inst);
    const ProxOracle f = affine_indicator(inst);
    m.run = [g, f, cfg, x0 = m.x0, low_rank_hooks] {
      return inertial_alternating_prox_run(g, f, cfg, x0, low_rank_hooks);
    };
  } else if (name == "loc-heavyball-avrgproj-bt") {
    cfg.beta = opts.beta.value_or(0.75);
    cfg.backtracking = default_backtracking();
    m.local_start = true;
    m.x0 = flat(local_start_point(*inst, opts.local_offset));
    const SmoothOracle f = sum_sq_dist(inst);
    m.run = [f, cfg, x0 = m.x0, full_hooks] { return heavy_ball_run(f, cfg, x0, full_hooks); };
  } else if (name == "loc-ipiano-altproj-bt") {
    cfg.beta = opts.beta.value_or(0.75);
    cfg.backtracking = default_backtracking();
    m.local_start = true;
    // The iteration needs x0 in dom g, the affine set.
    m.x0 = inst->affine->project(flat(local_start_point(*inst, opts.local_offset)));
    CompositeProblem p{half_sq_dist_rank(inst), affine_indicator(inst), n};
    m.run = [p, cfg, x0 = m.x0, full_hooks] { return ipiano_run(p, cfg, x0, full_hooks); };
  }
  return m;
}

}  // namespace iprox
