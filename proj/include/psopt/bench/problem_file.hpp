#pragma once

// Declarative problem files (JSON). The schema is described in docs/problem_file.md.

#include "psopt/bench/corpus.hpp"

#include <string>

namespace psopt::bench {

/// Builtin element formula names accepted in the "formula" field.
const std::vector<std::string>& builtin_formulas();

/// Throws StructureError on malformed input (bad JSON, unknown keys or
/// formulas, out-of-range indices, wrong parameter sizes).
CorpusProblem parse_problem_file(const std::string& text);
CorpusProblem load_problem_file(const std::string& path);

}  // namespace psopt::bench
