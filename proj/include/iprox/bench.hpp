#pragma once

#include "iprox/certificates.hpp"
#include "iprox/lowrank.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iprox {

std::vector<double> default_precisions();

/// Where an instance comes from: a file, or regeneration from its seed.
struct InstanceSource {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> file;
  FeasibilityDims dims;
};

struct BenchConfig {
  std::vector<std::string> methods;
  std::vector<InstanceSource> instances;
  std::vector<double> precisions = default_precisions();
  MethodOptions options;
  /// Zero means one worker per hardware thread.
  unsigned workers = 0;
};

/// Iterations-to-precision of one run; nullopt marks a miss (cap exceeded).
struct RunSummary {
  std::string method;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::unknown;
  int iterations = 0;
  std::vector<std::optional<int>> hit_iter;
  std::vector<std::optional<double>> hit_time;
};

/// First record whose residual is at most each precision.
RunSummary summarize_trace(const IterationTrace& trace, const std::string& method,
                           std::uint64_t seed, const std::vector<double>& precisions);

struct MethodRow {
  std::string method;
  /// Means over the successful runs only.
  std::vector<std::optional<double>> mean_iter;
  std::vector<std::optional<double>> mean_time;
  /// Percent of instances reaching the precision within the cap.
  std::vector<double> success_rate;
};

struct BenchmarkReport {
  std::vector<double> precisions;
  int max_iters = 0;
  std::size_t instance_count = 0;
  std::vector<MethodRow> rows;
  std::vector<RunSummary> runs;
  /// Seed whose traces form the convergence plot.
  std::uint64_t representative_seed = 0;
};

BenchmarkReport aggregate(const std::vector<RunSummary>& runs, const std::vector<std::string>& methods,
                          const std::vector<double>& precisions, int max_iters,
                          std::size_t instance_count);

/// Runs every (method, instance) job on a bounded worker pool. Instances are
/// loaded lazily and released once all of their jobs are done. With an output
/// directory, writes run_config.json and traces/<method>/seed-<seed>.csv.
/// Unknown methods are rejected before any job starts.
std::vector<RunSummary> run_benchmark(const BenchConfig& cfg,
                                      const std::optional<std::filesystem::path>& out_dir);

/// Re-aggregates an output directory: reads run_config.json and the traces,
/// writes report.txt, results.csv and convergence.csv. Output bytes depend
/// only on those inputs.
BenchmarkReport write_reports(const std::filesystem::path& out_dir);

/// Human-readable table in the layout of the paper's comparison table.
std::string format_report(const BenchmarkReport& report);

std::filesystem::path trace_path(const std::filesystem::path& out_dir, const std::string& method,
                                 std::uint64_t seed);

}  // namespace iprox
