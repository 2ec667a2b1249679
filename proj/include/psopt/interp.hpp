#pragma once

// Underdetermined quadratic interpolation with least Frobenius norm updates.
//
// Each element keeps N interpolation points y_1..y_N in its own subspace and a
// quadratic model interpolating the element values there. The free parameters
// left after interpolation are fixed by making the change of the Hessian as
// small as possible in the Frobenius norm (symmetric Broyden update). The
// inverse of the KKT matrix
//
//       W = [ A   X^T ]      A_ij = (y_i.y_j)^2 / 2
//           [ X   0   ]      X    = [1 ... 1 ; y_1 ... y_N]
//
// is held explicitly and modified by a rank-two formula when one point is
// swapped for another; the formula's denominator sigma = alpha*beta + tau^2
// measures how safely the swap keeps the system nonsingular.

#include "psopt/common.hpp"

#include <limits>
#include <optional>
#include <string>

namespace psopt {

class InterpolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// m(x) = c + g.(x - center) + 0.5 (x - center).H.(x - center)
struct QuadraticModel {
  Vector center;
  double c = 0.0;
  Vector g;
  Matrix H;

  static QuadraticModel zero(const Vector& center);
  std::size_t dimension() const { return static_cast<std::size_t>(center.size()); }
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  /// Re-expresses the same quadratic about a new center.
  void recenter(const Vector& new_center);
};

struct SigmaReport {
  double sigma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double tau = 0.0;
  /// alpha*beta < -0.5 tau^2: rounding has pushed the denominator the wrong way.
  bool unstable = false;
};

enum class UpdateStatus { kOk, kRebuilt, kBreakdown };

class InterpolationSet {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  /// Full dense refactorization after this many rank updates per point.
  static constexpr std::size_t kRebuildPeriodPerPoint = 50;

  InterpolationSet() = default;
  InterpolationSet(Vector base, Matrix points);

  std::size_t dimension() const { return static_cast<std::size_t>(offsets_.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(offsets_.cols()); }
  const Vector& base() const { return base_; }
  double scale() const { return scale_; }

  Vector point(std::size_t j) const { return base_ + offsets_.col(static_cast<Eigen::Index>(j)); }
  double value(std::size_t j) const { return values_[j]; }
  const std::vector<double>& values() const { return values_; }
  void set_value(std::size_t j, double v) { values_[j] = v; }

  /// Index of the stored point equal to x, or npos.
  std::size_t find(const Vector& x) const;
  double distance(std::size_t j, const Vector& x) const;

  /// Rebuilds the inverse KKT matrix by dense factorization. Returns false
  /// when the interpolation system is singular.
  bool factorize();
  bool factorized() const { return omega_.size() > 0; }

  /// Denominator of the rank update for swapping point `drop` with x.
  SigmaReport sigma(const Vector& x, std::size_t drop) const;
  /// Denominators for every possible drop index.
  std::vector<SigmaReport> sigma_all(const Vector& x) const;

  /// Swaps point `drop` for x and updates the inverse KKT matrix.
  UpdateStatus replace(std::size_t drop, const Vector& x, double fx);
  /// Overwrites a point without touching the factorization (call factorize()).
  void overwrite(std::size_t drop, const Vector& x, double fx);

  /// Moves the base point; the factorization is rebuilt.
  bool shift_base(const Vector& new_base);

  /// Applies the minimal-Frobenius-change correction that makes `model`
  /// interpolate every stored value.
  void correct(QuadraticModel& model) const;
  /// max_j |m(y_j) - f_j|
  double residual(const QuadraticModel& model) const;

  /// Coefficients of the Lagrange function of point t in scaled coordinates:
  /// (lambda in R^N, constant, gradient in R^n).
  Vector lagrange_coefficients(std::size_t t) const;
  double lagrange_value(std::size_t t, const Vector& x) const;
  Vector lagrange_gradient(std::size_t t, const Vector& x) const;

  const Matrix& inverse_kkt() const { return omega_; }
  /// Dense KKT matrix W in unscaled offsets from base (test oracles).
  Matrix kkt_matrix() const;

 private:
  Vector scaled_offset(const Vector& x) const { return (x - base_) / scale_; }
  Vector w_vector(const Vector& xs) const;

  Vector base_;
  Matrix offsets_;  // n x N, unscaled y_j - base
  std::vector<double> values_;
  double scale_ = 1.0;
  Matrix omega_;  // inverse KKT in scaled coordinates
  std::size_t updates_since_rebuild_ = 0;
};

struct InitialSet {
  InterpolationSet set;
  /// Indices of points whose values still have to be evaluated (all of them).
  std::vector<std::size_t> pending;
};

/// Coordinate-perturbation initial pattern: center, center + radius*e_i,
/// center - radius*e_i, then center + radius*(e_a + e_b) for a < b.
InitialSet init_set(const Vector& center, double radius, std::size_t capacity);

/// Valid capacity range [n + 2, (n + 1)(n + 2) / 2]; n = 1 allows 3.
bool capacity_valid(std::size_t n, std::size_t capacity);
std::size_t default_capacity(std::size_t n);

/// Minimum Frobenius norm Hessian interpolant of the stored values.
/// Throws InterpolationError when the system is singular.
QuadraticModel build_initial_model(InterpolationSet& set);

SigmaReport propose_update(const InterpolationSet& set, const Vector& new_point, std::size_t drop);

UpdateStatus apply_update(InterpolationSet& set, QuadraticModel& model, const Vector& new_point,
                          double new_value, std::size_t drop);

/// Drop index maximizing |sigma_j| * max(1, (|y_j - incumbent| / delta)^4),
/// never the incumbent's own point.
std::size_t select_drop_index(const InterpolationSet& set, const Vector& incumbent,
                              const Vector& new_point, double delta);

/// True iff some stored point lies strictly farther than 2*delta from the incumbent.
bool geometry_improvement_needed(const InterpolationSet& set, const Vector& incumbent, double delta);

struct GeometryStep {
  Vector point;
  std::size_t drop = 0;
  SigmaReport report;
};

/// Point within delta of the incumbent maximizing |sigma| for replacing the
/// farthest stored point. Empty when no candidate's sigma exceeds threshold.
std::optional<GeometryStep> geometry_step(const InterpolationSet& set, const Vector& incumbent,
                                          double delta, double threshold = 0.0);

/// JSON text snapshot of a set and its model for test fixtures.
std::string dump_snapshot(const InterpolationSet& set, const QuadraticModel& model);

}  // namespace psopt
