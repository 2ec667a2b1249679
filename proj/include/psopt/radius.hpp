#pragma once

// Per-element trust-region radius management by scoring.
//
// Every long step receives a global score tau in {0,1,2} from the overall
// reduction ratio and a local score per element from where the pair
// (model reduction, actual reduction) falls relative to two slope-limited
// acceptance regions. The sum tau_i in {0..4} selects the radius multiplier.

#include "psopt/common.hpp"

#include <cmath>

namespace psopt {

struct RadiusConfig {
  double theta1 = 0.5;
  double theta2 = 1.0 / std::sqrt(2.0);
  double theta3 = std::sqrt(2.0);
  double theta4 = 2.0;
  double mu1 = 0.1;
  double mu2 = 0.7;

  /// Throws ConfigError unless theta1 < theta2 < 1 < theta3 < theta4 and 0 < mu1 < mu2 < 1.
  void validate() const;
};

struct IterationScore {
  std::vector<double> model_reductions;   // delta m_i
  std::vector<double> actual_reductions;  // delta f_i
  std::vector<double> ratios;             // r_i
  double model_reduction = 0.0;           // delta m
  double actual_reduction = 0.0;          // delta f
  double ratio = 0.0;                     // r
  double zeta = 0.0;
  double eta[2] = {0.0, 0.0};
  double alpha[2] = {0.0, 0.0};
  int global = 0;
  std::vector<int> local;
  std::vector<int> total;
  /// Element forced to score 0 by the prevent-enlarge rule, if any.
  std::ptrdiff_t forced = -1;
};

/// Cancellation measure zeta = (sum of negative dm_i) / (sum of nonnegative dm_i);
/// 0 when no dm_i is nonnegative or the positive sum vanishes.
double cancellation_ratio(const std::vector<double>& model_reductions);

/// Scores one iteration. `model_reduction` is the overall delta m (which may
/// include terms outside the elements), `ratio` the overall r.
IterationScore score(const std::vector<double>& model_reductions, const std::vector<double>& actual_reductions,
                     const std::vector<double>& ratios, double model_reduction, double ratio,
                     const std::vector<double>& radii, double rho, const RadiusConfig& config = {});

/// Radius multipliers by total score; step_norms are |s^{I_i}|. Scores 3 and 4
/// only enlarge a radius whose block step reached at least half of it.
std::vector<double> update_radii(const IterationScore& score, const std::vector<double>& radii,
                                 const std::vector<double>& step_norms, double rho, const RadiusConfig& config = {});

/// Reduction ratio delta_f / delta_m with the conventions used for elements:
/// 0/0 -> 1, x/0 -> +-inf by the sign of x.
double reduction_ratio(double actual, double predicted);

}  // namespace psopt
