#include "psopt/bench/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psopt::bench {

ConvergencePoint convergence_point(const std::vector<TrajectoryPoint>& trajectory, double eps, double f_start,
                                   double f_best) {
  const double threshold = f_best + eps * (f_start - f_best);
  for (const auto& p : trajectory) {
    if (p.f_best <= threshold) return {static_cast<double>(p.t_wst), p.t_avg};
  }
  return {};
}

double converged(const std::vector<TrajectoryPoint>& trajectory, double eps, double f_start, double f_best) {
  return convergence_point(trajectory, eps, f_start, f_best).t_wst;
}

void ProfileTable::validate() const {
  if (dims.size() != problems.size() || cost.size() != problems.size())
    throw std::invalid_argument("profile table: one row and one dimension per problem required");
  for (const auto& row : cost) {
    if (row.size() != solvers.size()) throw std::invalid_argument("profile table: ragged cost row");
    for (double t : row) {
      if (std::isnan(t) || t < 1.0) throw std::invalid_argument("profile table: costs must be >= 1 or inf");
    }
  }
}

std::vector<std::vector<double>> performance_ratios(const ProfileTable& table) {
  table.validate();
  std::vector<std::vector<double>> ratios;
  for (const auto& row : table.cost) {
    const double best = row.empty() ? kNever : *std::min_element(row.begin(), row.end());
    std::vector<double> r;
    for (double t : row) r.push_back(std::isfinite(t) ? t / best : kNever);
    ratios.push_back(std::move(r));
  }
  return ratios;
}

namespace {

std::vector<ProfileCurve> count_curves(const ProfileTable& table, const std::vector<std::vector<double>>& scaled,
                                       const std::vector<double>& alphas) {
  const double total = static_cast<double>(table.problems.size());
  std::vector<ProfileCurve> curves;
  for (std::size_t s = 0; s < table.solvers.size(); ++s) {
    ProfileCurve curve{table.solvers[s], {}};
    for (double a : alphas) {
      std::size_t hits = 0;
      for (const auto& row : scaled) {
        if (std::isfinite(row[s]) && row[s] <= a) ++hits;
      }
      curve.values.push_back(total > 0 ? static_cast<double>(hits) / total : 0.0);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace

std::vector<ProfileCurve> performance_profile(const ProfileTable& table, const std::vector<double>& alphas) {
  return count_curves(table, performance_ratios(table), alphas);
}

std::vector<ProfileCurve> data_profile(const ProfileTable& table, const std::vector<double>& alphas) {
  table.validate();
  std::vector<std::vector<double>> scaled;
  for (std::size_t p = 0; p < table.problems.size(); ++p) {
    std::vector<double> row;
    for (double t : table.cost[p]) row.push_back(t / static_cast<double>(table.dims[p] + 1));
    scaled.push_back(std::move(row));
  }
  return count_curves(table, scaled, alphas);
}

double relative_speedup(double t_wst, double t_single, std::size_t n, std::size_t max_ni) {
  if (n == 0 || max_ni == 0) throw std::invalid_argument("relative_speedup: dimensions must be positive");
  const bool wst_ok = std::isfinite(t_wst);
  const bool single_ok = std::isfinite(t_single);
  if (!wst_ok && !single_ok) return std::numeric_limits<double>::quiet_NaN();
  if (!wst_ok) return 0.0;
  if (!single_ok) return kNever;
  const double predicted = static_cast<double>(n) / static_cast<double>(max_ni);
  return (t_single / t_wst) / predicted;
}

double speedup_value(const std::vector<double>& c, double alpha) {
  if (c.empty()) return 0.0;
  std::size_t hits = 0;
  for (double v : c) {
    if (std::isnan(v)) continue;
    const bool counted = alpha >= 1.0 ? (v >= 1.0 && v <= alpha) : (v >= alpha && v < 1.0);
    if (counted) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(c.size());
}

SpeedupProfile speedup_profile(const std::vector<SpeedupEntry>& entries, const std::vector<double>& alphas) {
  SpeedupProfile out;
  out.alphas = alphas;
  for (const auto& e : entries) {
    const double c = relative_speedup(e.t_wst, e.t_single, e.n, e.max_ni);
    if (std::isnan(c)) ++out.excluded;
    out.c.push_back(c);
  }
  for (double a : alphas) {
    if (a < 0.0 || std::isnan(a)) throw std::invalid_argument("speedup_profile: alpha must be >= 0");
    out.values.push_back(speedup_value(out.c, a));
  }
  out.above = speedup_value(out.c, kNever);
  out.below = speedup_value(out.c, 0.0);
  return out;
}

std::vector<double> ratio_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 40; ++k) g.push_back(std::pow(2.0, 0.25 * k));
  return g;
}

std::vector<double> data_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 100; ++k) g.push_back(10.0 * k);
  return g;
}

std::vector<double> speedup_grid() {
  std::vector<double> g;
  for (int k = -16; k <= 16; ++k) g.push_back(std::pow(2.0, 0.5 * k));
  g.insert(g.begin(), 0.0);
  return g;
}

}  // namespace psopt::bench
