#pragma once

// Benchmark metrics: convergence test, performance, data and speed-up profiles.

#include "psopt/run_record.hpp"

#include <limits>
#include <string>
#include <vector>

namespace psopt::bench {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct ConvergencePoint {
  /// kNever when the threshold is never reached.
  double t_wst = kNever;
  double t_avg = kNever;
};

/// First trajectory entry with f <= f_best + eps (f_start - f_best).
ConvergencePoint convergence_point(const std::vector<TrajectoryPoint>& trajectory, double eps, double f_start,
                                   double f_best);

/// Worst-case evaluation index of convergence_point, or kNever.
double converged(const std::vector<TrajectoryPoint>& trajectory, double eps, double f_start, double f_best);

/// Costs t[p][s] for every problem p and solver mode s (kNever for failures).
struct ProfileTable {
  std::vector<std::string> problems;
  std::vector<std::string> solvers;
  /// Problem dimensions n_p.
  std::vector<std::size_t> dims;
  std::vector<std::vector<double>> cost;

  /// Throws std::invalid_argument on ragged or inconsistent tables.
  void validate() const;
};

struct ProfileCurve {
  std::string solver;
  /// One value per entry of the alpha grid.
  std::vector<double> values;
};

/// Performance ratios r[p][s] = t[p][s] / min_u t[p][u]; kNever when unsolved.
std::vector<std::vector<double>> performance_ratios(const ProfileTable& table);

std::vector<ProfileCurve> performance_profile(const ProfileTable& table, const std::vector<double>& alphas);
std::vector<ProfileCurve> data_profile(const ProfileTable& table, const std::vector<double>& alphas);

struct SpeedupEntry {
  std::string problem;
  double t_wst = kNever;
  double t_single = kNever;
  std::size_t n = 0;
  std::size_t max_ni = 0;
};

/// (t_single / t_wst) / (n / max_ni). One-sided failures: t_single = inf gives
/// +inf, t_wst = inf gives 0; both infinite gives NaN (excluded).
double relative_speedup(double t_wst, double t_single, std::size_t n, std::size_t max_ni);

struct SpeedupProfile {
  std::vector<double> alphas;
  std::vector<double> values;
  /// Per-problem c_p in input order (NaN when excluded).
  std::vector<double> c;
  std::size_t excluded = 0;
  /// Fraction with c_p >= 1 (including +inf) and fraction with c_p < 1.
  double above = 0.0;
  double below = 0.0;
};

/// su(alpha) over all problems; alpha may be +inf.
double speedup_value(const std::vector<double>& c, double alpha);
SpeedupProfile speedup_profile(const std::vector<SpeedupEntry>& entries, const std::vector<double>& alphas);

/// Default grids: powers of two for ratios, a linear range for data profiles.
std::vector<double> ratio_grid();
std::vector<double> data_grid();
std::vector<double> speedup_grid();

}  // namespace psopt::bench
