#pragma once

// Structured trust regions
//
//   S(D) = { s in R^n : |s^{I_i}|_2 <= D_i for every element i }
//
// an intersection of cylinders. This header provides the geometry (violation
// ratios, SHRINK, Steinmetz projection, averaged projections, Dykstra as an
// exact oracle) and the modified projected gradient solver for
// min m(x + s) over S(D).

#include "psopt/common.hpp"

#include <functional>
#include <optional>

namespace psopt {

class CylinderRegion {
 public:
  CylinderRegion() = default;
  CylinderRegion(std::size_t dimension, std::vector<IndexSet> index_sets, std::vector<double> radii);

  std::size_t dimension() const { return dimension_; }
  std::size_t element_count() const { return index_sets_.size(); }
  const IndexSet& index_set(std::size_t i) const { return index_sets_[i]; }
  const std::vector<IndexSet>& index_sets() const { return index_sets_; }
  double radius(std::size_t i) const { return radii_[i]; }
  const std::vector<double>& radii() const { return radii_; }
  void set_radii(std::vector<double> radii);

  double block_norm(const Vector& s, std::size_t i) const;
  /// |s^{I_i}| / D_i
  double violation_ratio(const Vector& s, std::size_t i) const;
  double max_violation_ratio(const Vector& s) const;
  /// Membership with relative slack tol on every constraint.
  bool contains(const Vector& s, double tol = 1e-12) const;
  /// sqrt(min(n, q)) * max_i D_i; S(D) lies inside the ball of this radius.
  double truncation_radius() const;

 private:
  std::size_t dimension_ = 0;
  std::vector<IndexSet> index_sets_;
  std::vector<double> radii_;
};

double violation_ratio(const Vector& s, const CylinderRegion& region, std::size_t i);

/// Relative tolerance used to compare violation ratios for ties.
inline constexpr double kRatioTieTolerance = 1e-12;

struct ShrinkResult {
  Vector point;
  /// Elements that reached the common ratio (empty when the shrink is terminal).
  std::vector<std::size_t> joined;
  /// Common violation ratio of the shrinking set after the step.
  double ratio = 1.0;
};

/// One SHRINK step with shrinking set G. Requires s outside S(D) and all
/// members of G tied at the strictly largest violation ratio.
ShrinkResult shrink(const Vector& s, const CylinderRegion& region, const std::vector<std::size_t>& shrinking_set);

struct ProjectionResult {
  Vector point;
  std::size_t shrink_calls = 0;
  /// Number of elements with violation ratio <= 1 at the input (excluded).
  std::size_t satisfied_at_start = 0;
};

ProjectionResult steinmetz_project(const Vector& s0, const CylinderRegion& region);

/// One averaged-projection step; coordinates are averaged over the elements
/// whose index sets contain them.
Vector averaged_project_step(const Vector& s, const CylinderRegion& region);

inline constexpr int kDefaultAveragedSteps = 4;

/// k_avg averaged steps followed by a Steinmetz projection.
Vector hybrid_project(const Vector& s, const CylinderRegion& region, int k_avg = kDefaultAveragedSteps);

struct DykstraResult {
  Vector point;
  std::size_t cycles = 0;
  bool converged = false;
};

/// Euclidean projection onto S(D) by Dykstra's alternating scheme.
DykstraResult dykstra_project(const Vector& s, const CylinderRegion& region, double tol = 1e-10,
                              std::size_t max_cycles = 200000);

/// Objective of the trust-region subproblem as a function of the step s.
struct SubproblemObjective {
  /// Returns m(x + s) and writes its gradient.
  std::function<double(const Vector& s, Vector& gradient)> evaluate;
  /// Quadratic objectives get a closed-form line search.
  bool quadratic = true;
};

struct SubproblemOptions {
  /// 0 means 10 * n.
  std::size_t max_iter = 0;
  int k_avg_even = 0;
  int k_avg_odd = 4;
};

struct SubproblemResult {
  Vector step;
  double value = 0.0;
  double initial_value = 0.0;
  std::size_t iterations = 0;
  /// Model value after each iteration, starting with m(x).
  std::vector<double> history;
  bool aborted = false;
};

/// Modified projected gradient: conjugate directions while feasible, hybrid
/// projection plus exact line search on [0, 1] when a trial leaves S(D).
SubproblemResult solve_subproblem(const SubproblemObjective& objective, const CylinderRegion& region,
                                  double truncation_radius, const SubproblemOptions& options = {});

}  // namespace psopt
