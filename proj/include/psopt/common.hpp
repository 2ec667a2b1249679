#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace psopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered, strictly increasing list of coordinate indices an element depends on.
using IndexSet = std::vector<std::size_t>;

/// Malformed problem structure (bad index sets, dimension mismatches).
class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid solver or algorithm configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an algorithm step was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace psopt
