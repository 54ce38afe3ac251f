#include "iprox/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace iprox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigFile = "run_config.json";

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string precision_label(double p) { return fmt("%.0e", p); }

FeasibilityInstance load_instance(const InstanceSource& src) {
  if (!src.file) return gen_instance(src.seed, src.dims);
  std::ifstream in(*src.file);
  if (!in) throw std::runtime_error("cannot open instance file " + src.file->string());
  return read_instance(in);
}

json config_to_json(const BenchConfig& cfg) {
  json j;
  j["methods"] = cfg.methods;
  j["precisions"] = cfg.precisions;
  j["max_iters"] = cfg.options.max_iters;
  j["tol"] = cfg.options.tol;
  j["alpha_safety"] = cfg.options.alpha_safety;
  j["beta_override"] = cfg.options.beta ? json(*cfg.options.beta) : json(nullptr);
  j["unsafe_heuristic"] = cfg.options.unsafe_heuristic;
  j["local_offset"] = cfg.options.local_offset;
  const BacktrackingConfig bt;
  j["backtracking"] = {{"eta_up", bt.eta_up},
                       {"eta_down", bt.eta_down},
                       {"L_init", bt.L_init},
                       {"max_probes", bt.max_probes}};
  j["design"] = {
      {"distribution", "i.i.d. standard normal operators and factors, X* = U V^T"},
      {"x0_global", "0"},
      {"x0_local", "X* + sigma G, |sigma G| = local_offset |X*|; projected onto A when g is its indicator"},
      {"residual", "|A(P_R X) - B| / |B|"},
      {"timing", "solver wall time, residual evaluation excluded"},
  };
  json insts = json::array();
  for (const auto& s : cfg.instances) {
    json e;
    e["seed"] = s.seed;
    e["file"] = s.file ? json(s.file->string()) : json(nullptr);
    e["dims"] = {s.dims.N, s.dims.M, s.dims.R, s.dims.D};
    insts.push_back(e);
  }
  j["instances"] = insts;
  return j;
}

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> default_precisions() { return {1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12}; }

fs::path trace_path(const fs::path& out_dir, const std::string& method, std::uint64_t seed) {
  return out_dir / "traces" / method / ("seed-" + std::to_string(seed) + ".csv");
}

RunSummary summarize_trace(const IterationTrace& trace, const std::string& method,
                           std::uint64_t seed, const std::vector<double>& precisions) {
  RunSummary s;
  s.method = method;
  s.seed = seed;
  s.status = trace.status;
  s.iterations = trace.empty() ? 0 : trace.back().iter;
  s.hit_iter.assign(precisions.size(), std::nullopt);
  s.hit_time.assign(precisions.size(), std::nullopt);
  for (const auto& r : trace.records()) {
    if (!r.residual) continue;
    for (std::size_t j = 0; j < precisions.size(); ++j) {
      if (!s.hit_iter[j] && *r.residual <= precisions[j]) {
        s.hit_iter[j] = r.iter;
        s.hit_time[j] = r.time_s;
      }
    }
  }
  return s;
}

BenchmarkReport aggregate(const std::vector<RunSummary>& runs, const std::vector<std::string>& methods,
                          const std::vector<double>& precisions, int max_iters,
                          std::size_t instance_count) {
  BenchmarkReport rep;
  rep.precisions = precisions;
  rep.max_iters = max_iters;
  rep.instance_count = instance_count;
  rep.runs = runs;
  std::sort(rep.runs.begin(), rep.runs.end(), [](const RunSummary& a, const RunSummary& b) {
    return std::tie(a.method, a.seed) < std::tie(b.method, b.seed);
  });
  rep.representative_seed = runs.empty() ? 0 : runs.front().seed;
  for (const auto& r : runs) rep.representative_seed = std::min(rep.representative_seed, r.seed);

  for (const auto& m : methods) {
    MethodRow row;
    row.method = m;
    for (std::size_t j = 0; j < precisions.size(); ++j) {
      std::vector<double> iters, times;
      for (const auto& r : rep.runs) {
        if (r.method != m || !r.hit_iter[j]) continue;
        iters.push_back(*r.hit_iter[j]);
        times.push_back(*r.hit_time[j]);
      }
      row.mean_iter.push_back(mean(iters));
      row.mean_time.push_back(mean(times));
      row.success_rate.push_back(
          instance_count == 0 ? 0.0
                              : 100.0 * static_cast<double>(iters.size()) /
                                    static_cast<double>(instance_count));
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::vector<RunSummary> run_benchmark(const BenchConfig& cfg, const std::optional<fs::path>& out_dir) {
  for (const auto& m : cfg.methods) {
    const auto& known = method_names();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw UsageError("unknown method '" + m + "'");
    }
    if (method_is_unsafe(m) && !cfg.options.unsafe_heuristic) {
      throw UsageError("method '" + m + "' requires --unsafe-heuristic");
    }
  }
  if (cfg.precisions.empty()) throw UsageError("need at least one precision");
  MethodOptions opts = cfg.options;
  opts.tol = *std::min_element(cfg.precisions.begin(), cfg.precisions.end());

  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream(*out_dir / kConfigFile) << config_to_json(cfg).dump(2) << '\n';
    for (const auto& m : cfg.methods) fs::create_directories(*out_dir / "traces" / m);
  }

  struct Slot {
    std::mutex mu;
    std::shared_ptr<const FeasibilityInstance> inst;
    std::size_t remaining = 0;
  };
  std::vector<Slot> slots(cfg.instances.size());
  for (auto& s : slots) s.remaining = cfg.methods.size();

  const std::size_t n_jobs = cfg.instances.size() * cfg.methods.size();
  std::vector<RunSummary> results(n_jobs);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t job = next.fetch_add(1);
      if (job >= n_jobs) return;
      const std::size_t i = job / cfg.methods.size();
      const std::string& method = cfg.methods[job % cfg.methods.size()];
      Slot& slot = slots[i];
      try {
        std::shared_ptr<const FeasibilityInstance> inst;
        {
          std::lock_guard lock(slot.mu);
          if (!slot.inst) {
            slot.inst = std::make_shared<const FeasibilityInstance>(load_instance(cfg.instances[i]));
          }
          inst = slot.inst;
        }
        const MethodRun run = make_method(method, inst, opts);
        const IterationTrace trace = run.run();
        results[job] = summarize_trace(trace, method, inst->seed, cfg.precisions);
        if (out_dir) {
          std::ofstream out(trace_path(*out_dir, method, inst->seed));
          write_trace_csv(out, trace);
          if (!out) throw std::runtime_error("cannot write trace for " + method);
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
      std::lock_guard lock(slot.mu);
      if (--slot.remaining == 0) slot.inst.reset();
    }
  };

  unsigned n_workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, std::max<std::size_t>(n_jobs, 1)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

BenchmarkReport write_reports(const fs::path& out_dir) {
  std::ifstream cfg_in(out_dir / kConfigFile);
  if (!cfg_in) throw UsageError("no " + std::string(kConfigFile) + " in " + out_dir.string());
  json cfg;
  try {
    cfg_in >> cfg;
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed run configuration: ") + e.what());
  }
  const auto methods = cfg.at("methods").get<std::vector<std::string>>();
  const auto precisions = cfg.at("precisions").get<std::vector<double>>();
  const int max_iters = cfg.at("max_iters").get<int>();
  std::vector<std::uint64_t> seeds;
  for (const auto& e : cfg.at("instances")) seeds.push_back(e.at("seed").get<std::uint64_t>());

  std::vector<RunSummary> runs;
  std::map<std::string, IterationTrace> representative;
  const std::uint64_t rep_seed = seeds.empty() ? 0 : *std::min_element(seeds.begin(), seeds.end());
  for (const auto& m : methods) {
    for (auto seed : seeds) {
      const fs::path p = trace_path(out_dir, m, seed);
      std::ifstream in(p);
      if (!in) throw std::runtime_error("missing trace " + p.string());
      IterationTrace trace = read_trace_csv(in);
      // The trace file does not store the stop reason; recover it from the data.
      if (!trace.empty()) {
        const auto& last = trace.back();
        trace.status = last.residual && *last.residual <= *std::min_element(precisions.begin(),
                                                                              precisions.end())
                           ? RunStatus::converged
                           : (last.iter >= max_iters ? RunStatus::max_iters : RunStatus::diverged);
      }
      runs.push_back(summarize_trace(trace, m, seed, precisions));
      if (seed == rep_seed) representative.emplace(m, std::move(trace));
    }
  }
  BenchmarkReport rep = aggregate(runs, methods, precisions, max_iters, seeds.size());

  {
    std::ofstream out(out_dir / "report.txt");
    out << format_report(rep);
    out << "\nconfiguration\n" << cfg.dump(2) << '\n';
    for (const auto& m : methods) {
      const auto& tr = representative.at(m);
      bool has_lyapunov = !tr.empty();
      for (const auto& r : tr.records()) has_lyapunov = has_lyapunov && r.lyapunov.has_value();
      if (!has_lyapunov) continue;
      out << "\ncertificates " << m << " seed " << rep_seed << '\n' << certify(tr, 0.0).to_key_value();
    }
  }
  {
    std::ofstream out(out_dir / "results.csv");
    out << "method,seed,precision,iterations,time_s,status\n";
    for (const auto& r : rep.runs) {
      for (std::size_t j = 0; j < precisions.size(); ++j) {
        out << r.method << ',' << r.seed << ',' << precision_label(precisions[j]) << ','
            << (r.hit_iter[j] ? std::to_string(*r.hit_iter[j]) : "null") << ','
            << (r.hit_time[j] ? fmt("%.6f", *r.hit_time[j]) : "null") << ',' << to_string(r.status)
            << '\n';
      }
    }
  }
  {
    std::ofstream out(out_dir / "convergence.csv");
    out << "iter";
    std::size_t longest = 0;
    for (const auto& m : methods) {
      out << ',' << m;
      longest = std::max(longest, representative.at(m).size());
    }
    out << '\n';
    for (std::size_t k = 0; k < longest; ++k) {
      out << k;
      for (const auto& m : methods) {
        const auto& recs = representative.at(m).records();
        out << ',';
        if (k < recs.size() && recs[k].residual) out << fmt("%.6e", *recs[k].residual);
      }
      out << '\n';
    }
  }
  return rep;
}

std::string format_report(const BenchmarkReport& report) {
  std::ostringstream out;
  const auto& P = report.precisions;
  std::size_t width = 6;
  for (const auto& row : report.rows) width = std::max(width, row.method.size());

  auto rule = [&] { out << std::string(width + 3 * (P.size() * 9 + 3), '-') << '\n'; };
  out << "instances: " << report.instance_count << ", iteration cap: " << report.max_iters
      << ", representative seed: " << report.representative_seed << "\n";
  rule();
  out << std::string(width, ' ');
  for (const char* block : {" | iterations", " | time [s]", " | success [%]"}) {
    std::string h = block;
    h.resize(P.size() * 9 + 3, ' ');
    out << h;
  }
  out << '\n' << std::string(width, ' ');
  for (int b = 0; b < 3; ++b) {
    out << " |";
    for (double p : P) out << fmt("%9.0e", p);
    out << ' ';
  }
  out << '\n';
  rule();
  for (const auto& row : report.rows) {
    std::string name = row.method;
    name.resize(width, ' ');
    out << name << " |";
    for (const auto& v : row.mean_iter) out << (v ? fmt("%9.0f", *v) : std::string(6, ' ') + "---");
    out << "  |";
    for (const auto& v : row.mean_time) out << (v ? fmt("%9.2f", *v) : std::string(6, ' ') + "---");
    out << "  |";
    for (double v : row.success_rate) out << fmt("%9.1f", v);
    out << '\n';
  }
  rule();
  return out.str();
}

}  // namespace iprox
