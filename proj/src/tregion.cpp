#include "psopt/tregion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace psopt {

namespace {

bool ratio_tied(double a, double b) {
  return std::abs(a - b) <= kRatioTieTolerance * std::max(std::abs(a), std::abs(b));
}

// Scales the I_G block of s by t.
Vector scale_block(const Vector& s, const std::vector<bool>& in_group, double t) {
  Vector out = s;
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (in_group[static_cast<std::size_t>(j)]) out[j] *= t;
  return out;
}

// SHRINK restricted to the `active` elements; the remaining elements are
// known to stay inside their cylinders and cannot affect t_*.
ShrinkResult shrink_active(const Vector& s, const CylinderRegion& region, const std::vector<std::size_t>& active,
                           const std::vector<std::size_t>& group) {
  const double u = region.violation_ratio(s, group.front());
  ShrinkResult out;
  if (group.size() == active.size()) {
    out.point = s / u;
    out.ratio = 1.0;
    return out;
  }
  std::vector<bool> in_group(region.dimension(), false);
  std::vector<bool> is_member(region.element_count(), false);
  for (std::size_t i : group) {
    is_member[i] = true;
    for (std::size_t j : region.index_set(i)) in_group[j] = true;
  }
  const double t_group = 1.0 / u;
  double t_star = t_group;
  std::vector<std::pair<std::size_t, double>> candidates;
  for (std::size_t i : active) {
    if (is_member[i]) continue;
    double outside = 0.0;
    double inside = 0.0;
    for (std::size_t j : region.index_set(i)) {
      const double v = s[static_cast<Eigen::Index>(j)];
      (in_group[j] ? inside : outside) += v * v;
    }
    const double r = region.radius(i);
    const double denom = u * u * r * r - inside;
    if (!(denom > 0.0)) throw ContractError("shrink: element ratio not below the shrinking set ratio");
    const double t_i = std::max(t_group, std::sqrt(outside) / std::sqrt(denom));
    candidates.emplace_back(i, t_i);
    t_star = std::max(t_star, t_i);
  }
  out.point = scale_block(s, in_group, t_star);
  if (t_star > t_group && !ratio_tied(t_star, t_group)) {
    for (const auto& [i, t_i] : candidates)
      if (ratio_tied(t_i, t_star)) out.joined.push_back(i);
    out.ratio = t_star * u;
  } else {
    out.ratio = 1.0;
  }
  return out;
}

}  // namespace

// --- CylinderRegion -------------------------------------------------------

CylinderRegion::CylinderRegion(std::size_t dimension, std::vector<IndexSet> index_sets, std::vector<double> radii)
    : dimension_(dimension), index_sets_(std::move(index_sets)) {
  if (index_sets_.empty()) throw StructureError("CylinderRegion: no index sets");
  for (const auto& idx : index_sets_)
    for (std::size_t j : idx)
      if (j >= dimension_) throw StructureError("CylinderRegion: index out of range");
  set_radii(std::move(radii));
}

void CylinderRegion::set_radii(std::vector<double> radii) {
  if (radii.size() != index_sets_.size()) throw StructureError("CylinderRegion: one radius per index set");
  for (double r : radii)
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("CylinderRegion: radii must be positive");
  radii_ = std::move(radii);
}

double CylinderRegion::block_norm(const Vector& s, std::size_t i) const {
  double sq = 0.0;
  for (std::size_t j : index_sets_[i]) sq += s[static_cast<Eigen::Index>(j)] * s[static_cast<Eigen::Index>(j)];
  return std::sqrt(sq);
}

double CylinderRegion::violation_ratio(const Vector& s, std::size_t i) const {
  return block_norm(s, i) / radii_[i];
}

double CylinderRegion::max_violation_ratio(const Vector& s) const {
  double m = 0.0;
  for (std::size_t i = 0; i < element_count(); ++i) m = std::max(m, violation_ratio(s, i));
  return m;
}

bool CylinderRegion::contains(const Vector& s, double tol) const {
  for (std::size_t i = 0; i < element_count(); ++i)
    if (block_norm(s, i) > radii_[i] * (1.0 + tol)) return false;
  return true;
}

double CylinderRegion::truncation_radius() const {
  const double count = static_cast<double>(std::min(dimension_, element_count()));
  return std::sqrt(count) * *std::max_element(radii_.begin(), radii_.end());
}

double violation_ratio(const Vector& s, const CylinderRegion& region, std::size_t i) {
  return region.violation_ratio(s, i);
}

// --- projections ----------------------------------------------------------

ShrinkResult shrink(const Vector& s, const CylinderRegion& region, const std::vector<std::size_t>& shrinking_set) {
  if (shrinking_set.empty()) throw ContractError("shrink: empty shrinking set");
  if (region.contains(s, 0.0)) throw ContractError("shrink: point already inside the region");
  const double u = region.violation_ratio(s, shrinking_set.front());
  std::vector<bool> member(region.element_count(), false);
  for (std::size_t i : shrinking_set) {
    if (i >= region.element_count()) throw ContractError("shrink: element index out of range");
    if (!ratio_tied(region.violation_ratio(s, i), u)) throw ContractError("shrink: shrinking set ratios differ");
    member[i] = true;
  }
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < region.element_count(); ++i) {
    if (!member[i] && region.violation_ratio(s, i) >= u)
      throw ContractError("shrink: shrinking set must hold the strictly largest ratio");
    all.push_back(i);
  }
  return shrink_active(s, region, all, shrinking_set);
}

ProjectionResult steinmetz_project(const Vector& s0, const CylinderRegion& region) {
  ProjectionResult out{s0, 0, 0};
  std::vector<std::size_t> active;
  std::vector<double> ratio(region.element_count());
  double top = 0.0;
  for (std::size_t i = 0; i < region.element_count(); ++i) {
    ratio[i] = region.violation_ratio(s0, i);
    if (ratio[i] > 1.0) {
      active.push_back(i);
      top = std::max(top, ratio[i]);
    }
  }
  out.satisfied_at_start = region.element_count() - active.size();
  if (active.empty()) return out;

  std::vector<std::size_t> group;
  for (std::size_t i : active)
    if (ratio_tied(ratio[i], top)) group.push_back(i);

  Vector s = s0;
  std::vector<bool> member(region.element_count(), false);
  for (std::size_t i : group) member[i] = true;
  while (true) {
    // Rounding can leave a non-member at the common ratio; it belongs in G.
    const double u = region.violation_ratio(s, group.front());
    for (std::size_t i : active) {
      if (member[i]) continue;
      const double v = region.violation_ratio(s, i);
      if (v >= u || ratio_tied(v, u)) {
        member[i] = true;
        group.push_back(i);
      }
    }
    ShrinkResult step = shrink_active(s, region, active, group);
    ++out.shrink_calls;
    s = std::move(step.point);
    if (step.joined.empty()) break;
    for (std::size_t i : step.joined) {
      member[i] = true;
      group.push_back(i);
    }
  }
  out.point = std::move(s);
  return out;
}

Vector averaged_project_step(const Vector& s, const CylinderRegion& region) {
  const auto n = region.dimension();
  std::vector<double> factor_sum(n, 0.0);
  std::vector<int> count(n, 0);
  bool any = false;
  for (std::size_t i = 0; i < region.element_count(); ++i) {
    const double norm = region.block_norm(s, i);
    double f = 1.0;
    if (norm > region.radius(i)) {
      f = region.radius(i) / norm;
      any = true;
    }
    for (std::size_t j : region.index_set(i)) {
      factor_sum[j] += f;
      ++count[j];
    }
  }
  if (!any) return s;
  Vector out = s;
  for (std::size_t j = 0; j < n; ++j)
    if (count[j] > 0) out[static_cast<Eigen::Index>(j)] *= factor_sum[j] / count[j];
  return out;
}

Vector hybrid_project(const Vector& s, const CylinderRegion& region, int k_avg) {
  Vector x = s;
  for (int k = 0; k < k_avg; ++k) x = averaged_project_step(x, region);
  return steinmetz_project(x, region).point;
}

DykstraResult dykstra_project(const Vector& s, const CylinderRegion& region, double tol, std::size_t max_cycles) {
  const std::size_t q = region.element_count();
  std::vector<Vector> corrections(q, Vector::Zero(s.size()));
  Vector x = s;
  DykstraResult out;
  for (std::size_t cycle = 0; cycle < max_cycles; ++cycle) {
    const Vector start = x;
    double correction_change = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      const Vector y = x + corrections[i];
      Vector p = y;
      const double norm = region.block_norm(y, i);
      if (norm > region.radius(i)) {
        const double f = region.radius(i) / norm;
        for (std::size_t j : region.index_set(i)) p[static_cast<Eigen::Index>(j)] *= f;
      }
      const Vector next = y - p;
      correction_change += (next - corrections[i]).squaredNorm();
      corrections[i] = next;
      x = std::move(p);
    }
    out.cycles = cycle + 1;
    if ((x - start).norm() < tol && std::sqrt(correction_change) < tol) {
      out.converged = true;
      break;
    }
  }
  out.point = std::move(x);
  return out;
}

// --- subproblem -----------------------------------------------------------

namespace {

// argmin of phi(a) = m(s + a p) over [0, a_max]
double line_minimize(const SubproblemObjective& obj, const Vector& s, const Vector& g0, const Vector& p,
                     double a_max, Vector& scratch) {
  const double slope0 = g0.dot(p);
  if (!(a_max > 0.0) || !(slope0 < 0.0)) return 0.0;
  if (obj.quadratic) {
    // Curvature p.Hp from the gradient difference across a unit step.
    obj.evaluate(s + p, scratch);
    const double curv = (scratch - g0).dot(p);
    if (!(curv > 0.0)) return a_max;
    return std::min(a_max, -slope0 / curv);
  }
  auto slope = [&](double a) {
    obj.evaluate(s + a * p, scratch);
    return scratch.dot(p);
  };
  if (slope(a_max) <= 0.0) return a_max;
  double lo = 0.0;
  double hi = a_max;
  while (hi - lo > 1e-10 * std::max(1.0, a_max)) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ball_step_limit(const Vector& s, const Vector& p, double radius) {
  const double pp = p.squaredNorm();
  if (pp == 0.0) return 0.0;
  const double sp = s.dot(p);
  const double room = std::max(0.0, radius * radius - s.squaredNorm());
  return (-sp + std::sqrt(sp * sp + pp * room)) / pp;
}

}  // namespace

SubproblemResult solve_subproblem(const SubproblemObjective& objective, const CylinderRegion& region,
                                  double truncation_radius, const SubproblemOptions& options) {
  const auto n = static_cast<Eigen::Index>(region.dimension());
  const std::size_t max_iter = options.max_iter > 0 ? options.max_iter : 10 * region.dimension();
  SubproblemResult out;
  Vector s = Vector::Zero(n);
  Vector g(n);
  Vector scratch(n);
  double value = objective.evaluate(s, g);
  out.initial_value = value;
  out.history.push_back(value);
  if (!std::isfinite(value) || !g.allFinite()) {
    out.step = s;
    out.value = value;
    out.aborted = true;
    return out;
  }
  Vector p = -g;
  int stalls = 0;
  for (std::size_t k = 0; k < max_iter; ++k) {
    const double gnorm2 = g.squaredNorm();
    if (gnorm2 == 0.0 || g.dot(p) >= 0.0) break;

    const double a_max = ball_step_limit(s, p, truncation_radius);
    const double alpha = line_minimize(objective, s, g, p, a_max, scratch);
    const Vector trial = s + alpha * p;

    Vector next;
    bool projected = false;
    if (!region.contains(trial)) {
      const int k_avg = (k % 2 == 0) ? options.k_avg_even : options.k_avg_odd;
      const Vector target = hybrid_project(trial, region, k_avg);
      const Vector dir = target - s;
      const double a_hat = line_minimize(objective, s, g, dir, 1.0, scratch);
      next = s + a_hat * dir;
      projected = true;
    } else {
      next = trial;
    }

    Vector g_next(n);
    const double v_next = objective.evaluate(next, g_next);
    if (!std::isfinite(v_next) || !g_next.allFinite()) {
      out.aborted = true;
      break;
    }
    out.iterations = k + 1;
    const double moved = (next - s).norm();
    if (v_next > value) {
      // Rounding in the line search; keep the better iterate and restart.
      p = -g;
      out.history.push_back(value);
      if (++stalls >= 2) break;
      continue;
    }
    if (projected) {
      p = -g_next;
    } else {
      const double beta = g_next.squaredNorm() / gnorm2;
      p = -g_next + beta * p;
    }
    s = std::move(next);
    g = std::move(g_next);
    value = v_next;
    out.history.push_back(value);
    if (moved <= 1e-14 * truncation_radius) {
      if (++stalls >= 2) break;
    } else {
      stalls = 0;
    }
  }
  out.step = std::move(s);
  out.value = value;
  return out;
}

}  // namespace psopt
