#pragma once

// Corpus x mode experiment runner and CSV reporting.

#include "psopt/bench/corpus.hpp"
#include "psopt/bench/profiles.hpp"
#include "psopt/run_record.hpp"
#include "psopt/solver.hpp"

#include <string>
#include <vector>

namespace psopt::bench {

/// "structured", "single" (whole objective as one element) or "unstructured" (shared radius).
const std::vector<std::string>& known_modes();

struct ExperimentConfig {
  std::vector<CorpusProblem> problems;
  std::vector<std::string> modes = {"structured", "single", "unstructured"};
  std::vector<double> eps = {1e-1, 1e-4, 1e-7};
  /// Multiplies the default per-element budget max(1000 n, 10000).
  double budget_mult = 1.0;
  std::uint64_t seed = 0;
  SolverOptions options;
  /// Output directory; empty means nothing is written.
  std::string out_dir;
  bool record_iterations = true;

  /// Throws ConfigError for empty selections, unknown modes or bad values.
  void validate() const;
};

/// One solver run; exceptions are caught and reported as reason "error: ...".
RunRecord run_mode(const CorpusProblem& problem, const std::string& mode, const SolverOptions& options);

struct SummaryRow {
  std::string problem;
  std::string mode;
  double eps = 0.0;
  double t_wst = kNever;
  double t_avg = kNever;
  double t_single = kNever;
  std::size_t n = 0;
  std::size_t q = 0;
  std::size_t max_ni = 0;
  /// NaN for the single mode itself, when no single run exists, or when both fail.
  double c_p = 0.0;
};

struct ProfileReport {
  std::vector<SummaryRow> summary;
  std::string performance_csv;
  std::string data_csv;
  std::string speedup_csv;
  std::string summary_csv;
};

/// Profiles from stored runs. Problem/mode order follows first appearance.
/// The structured problem dimensions come from the "structured" or
/// "unstructured" run of each problem, falling back to the run itself.
ProfileReport build_report(const std::vector<RunRecord>& runs, const std::vector<double>& eps);

struct ExperimentResult {
  std::vector<RunRecord> runs;
  ProfileReport report;
  std::vector<std::string> files;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes runs/<problem>__<mode>.json and the four CSV files under dir.
std::vector<std::string> write_outputs(const std::string& dir, const std::vector<RunRecord>& runs,
                                       const ProfileReport& report);
/// Writes only the CSV files.
std::vector<std::string> write_report(const std::string& dir, const ProfileReport& report);

/// Reads every *.json under dir (sorted by file name).
std::vector<RunRecord> load_runs(const std::string& dir);

/// %.12g, with "inf", "-inf" and "nan" for non-finite values.
std::string format_value(double v);

}  // namespace psopt::bench
