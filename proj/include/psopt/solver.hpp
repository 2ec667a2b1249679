#pragma once

// Trust-region driver for partially separable objectives.

#include "psopt/common.hpp"
#include "psopt/interp.hpp"
#include "psopt/problem.hpp"
#include "psopt/radius.hpp"
#include "psopt/run_record.hpp"
#include "psopt/tregion.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>

namespace psopt {

struct SolverOptions {
  /// Initial trust-region resolution; also the initial radius of every element.
  double rho_begin = 0.5;
  double rho_end = 1e-8;
  /// Per-element evaluation budget; 0 means max(1000 n, 10000).
  std::size_t max_element_evals = 0;
  /// Threshold on the penalized update denominator.
  double xi = 1e-5;
  std::size_t restarts = 0;
  /// Off: every radius stays equal and the region is a ball.
  bool structured = true;
  /// Interpolation points per element; 0 means 2 n_i + 1.
  std::size_t capacity = 0;
  std::uint64_t seed = 0;
  /// Safety cap on outer iterations; 0 means unlimited.
  std::size_t max_iterations = 0;
  /// Consecutive short steps that force a resolution decrease.
  std::size_t short_step_limit = 3;
  /// Maximum number of solutions explored by the starting-point search (0 disables it).
  std::size_t start_search_limit = 100;
  /// Keep per-iteration records in the RunRecord.
  bool record_iterations = true;
  RadiusConfig radius;
  SubproblemOptions subproblem;

  std::size_t budget(std::size_t n) const;
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// String-keyed option overrides; booleans are 0/1 and counts must be integral.
using OptionMap = std::map<std::string, double>;

/// Applies overrides, rejecting unknown keys and invalid values with ConfigError.
void apply_options(SolverOptions& options, const OptionMap& overrides);
SolverOptions options_from_map(const OptionMap& overrides);
/// Every key accepted by apply_options.
std::vector<std::string> option_keys();

/// Read-only snapshot handed to the per-iteration callback.
struct IterationView {
  std::size_t iteration = 0;
  const Vector* x = nullptr;
  double f = 0.0;
  double rho = 0.0;
  const std::vector<double>* radii = nullptr;
  const EvaluationLedger* ledger = nullptr;
  const std::vector<double>* weights = nullptr;
};

/// New weights and/or transforms; empty vectors leave that part unchanged.
struct WeightUpdate {
  std::vector<double> weights;
  std::vector<std::optional<Transform>> transforms;
  std::string label;
};

struct CallbackResult {
  std::optional<WeightUpdate> update;
  bool stop = false;
};

using IterationCallback = std::function<CallbackResult(const IterationView&)>;

struct ElementState {
  InterpolationSet set;
  QuadraticModel model;
};

struct SolverState {
  Vector x;
  double f = 0.0;
  /// Raw element values at the incumbent.
  std::vector<double> raw;
  std::vector<ElementState> elements;
  std::vector<double> radii;
  double rho = 0.0;
  std::size_t short_steps = 0;
  EvaluationLedger ledger;
  std::size_t restarts_used = 0;
  std::size_t iteration = 0;
};

/// Objective of the trust-region subproblem at the incumbent x:
/// s -> T2[f0](x + s) + sum_i w_i h_i(m_i(x^{I_i} + s^{I_i})).
SubproblemObjective compose_model_eval(const ProblemSpec& problem, const std::vector<QuadraticModel>& models,
                                       const Vector& x);

struct SelectiveCandidate {
  std::size_t drop = InterpolationSet::npos;
  SigmaReport report;
  double gamma = 0.0;
  double penalty = 1.0;
  /// penalty-adjusted gamma * sigma
  double merit = 0.0;
};

/// Penalized acceptance value for adding new_point to an element set.
SelectiveCandidate selective_candidate(const InterpolationSet& set, const Vector& incumbent,
                                       const Vector& new_point, double step_norm, double delta, double rho);

/// Indices of accepted candidates: merit > xi, or, when every candidate is
/// negative, the one closest to zero.
std::vector<std::size_t> select_updates(const std::vector<std::optional<SelectiveCandidate>>& candidates, double xi);

struct StartSearchResult {
  Vector x;
  double f = 0.0;
  /// Index of the matching stored point in every element set.
  std::vector<std::size_t> point_index;
  std::size_t solutions = 0;
};

/// Explores up to `limit` points whose element projections are all stored
/// interpolation points and returns the one with the least objective.
StartSearchResult search_starting_point(const ProblemSpec& problem, const std::vector<InterpolationSet>& sets,
                                        const Vector& x_start, std::size_t limit = 100);

/// Applies new weights/transforms; stored raw values are reused.
void update_weights(ProblemSpec& problem, SolverState& state, const WeightUpdate& update);

/// Resets the resolution and radii and resamples part of each interpolation set.
/// Returns false when the budget ran out or a set could not be refactorized.
bool soft_restart(const ProblemSpec& problem, SolverState& state, const SolverOptions& options,
                  std::mt19937_64& rng, std::size_t budget);

RunRecord minimize(const ProblemSpec& problem, const Vector& x_start, const SolverOptions& options = {},
                   const IterationCallback& callback = {});

}  // namespace psopt
