#pragma once

#include "psopt/common.hpp"

#include <string>

namespace psopt {

struct TrajectoryPoint {
  std::size_t t_wst = 0;
  double t_avg = 0.0;
  double f_best = 0.0;
};

struct IterationRecord {
  std::size_t iteration = 0;
  /// "long" or "short"
  std::string kind;
  double rho = 0.0;
  std::vector<double> radii;
  double step_norm = 0.0;
  double f = 0.0;
  double ratio = 0.0;
  int global_score = 0;
  std::vector<int> scores;
  std::vector<int> accepted;
  std::size_t geometry_steps = 0;
  bool rho_reduced = false;
};

struct EventRecord {
  std::size_t iteration = 0;
  std::string kind;
  std::string detail;
};

struct RunRecord {
  std::string problem;
  std::string mode;
  std::size_t n = 0;
  std::size_t q = 0;
  std::vector<std::size_t> element_dims;
  std::vector<double> x_start;
  double f_start = 0.0;
  std::vector<double> best_x;
  double best_f = 0.0;
  std::vector<std::size_t> evaluations;
  std::size_t t_wst = 0;
  double t_avg = 0.0;
  std::string reason;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  double final_rho = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<IterationRecord> history;
  std::vector<EventRecord> events;

  std::size_t max_element_dimension() const;
  /// Deterministic JSON text (no timestamps); infinities are written as "inf"/"-inf", NaN as null.
  std::string to_json(int indent = 1) const;
  static RunRecord from_json(const std::string& text);
};

}  // namespace psopt
