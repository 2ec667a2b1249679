#pragma once

// Synthetic partially separable test problems.

#include "psopt/problem.hpp"

#include <optional>
#include <string>

namespace psopt::bench {

struct CorpusProblem {
  std::string name;
  std::string formula;
  std::size_t n = 0;
  ProblemSpec spec;
  Vector start;
  std::optional<double> reference_min;
  std::optional<Vector> minimizer;
};

struct GeneratorInfo {
  std::string name;
  std::size_t default_n = 0;
  /// Smallest admissible n and the step n must be a multiple of.
  std::size_t min_n = 1;
  std::size_t multiple = 1;
  std::string formula;
};

const std::vector<GeneratorInfo>& generators();

/// Builds a problem by generator name; n = 0 picks the default size.
/// Throws StructureError for unknown names or inadmissible sizes.
CorpusProblem make_problem(const std::string& name, std::size_t n = 0);

/// Every generator at its default size.
std::vector<CorpusProblem> corpus();

}  // namespace psopt::bench
