#pragma once

// Partially separable objectives
//
//   f(x) = f0(x) + sum_i w_i h_i( f_i(x^{I_i}) )
//
// where each black-box element f_i only sees the coordinates listed in its
// index set I_i, f0 is an optional white-box term with known derivatives and
// h_i is an optional scalar transform (identity by default).

#include "psopt/common.hpp"

#include <functional>
#include <optional>
#include <string>

namespace psopt {

/// Black-box element callback; receives the element's own coordinates.
using ElementFunction = std::function<double(const Vector&)>;

/// Scalar transform h with its first and second derivatives.
struct Transform {
  std::function<double(double)> value;
  std::function<double(double)> first;
  std::function<double(double)> second;

  static Transform identity();
  static Transform square();
};

struct ElementSpec {
  IndexSet index_set;
  ElementFunction evaluator;
  double weight = 1.0;
  std::optional<Transform> transform;

  std::size_t dimension() const { return index_set.size(); }
  double apply_transform(double raw) const;
  double transform_derivative(double raw) const;
};

/// White-box term f0 with gradient and Hessian-vector product.
struct WhiteBox {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  /// (x, v) -> Hess f0(x) * v
  std::function<Vector(const Vector&, const Vector&)> hessian_vector;
};

struct ProblemSpec {
  std::size_t dimension = 0;
  std::vector<ElementSpec> elements;
  std::optional<WhiteBox> whitebox;

  std::size_t element_count() const { return elements.size(); }
  std::size_t max_element_dimension() const;

  /// Throws StructureError when an invariant is broken.
  void validate() const;
};

/// Per-element evaluation counters.
class EvaluationLedger {
 public:
  EvaluationLedger() = default;
  explicit EvaluationLedger(std::size_t element_count) : counts_(element_count, 0) {}

  void record(std::size_t element) { counts_.at(element) += 1; }
  std::size_t count(std::size_t element) const { return counts_.at(element); }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t size() const { return counts_.size(); }

  /// Worst-case count t^wst = max_i t^(i).
  std::size_t worst() const;
  /// Average count t^avg.
  double average() const;

 private:
  std::vector<std::size_t> counts_;
};

struct FullEvaluation {
  double value = 0.0;
  /// Untransformed element values f_i(x^{I_i}).
  std::vector<double> raw;
  bool finite = true;
};

/// Coordinates of x at idx, in idx order.
Vector project_point(const Vector& x, const IndexSet& idx);

/// Adds block into x at coordinates idx (x^{I} += block).
void scatter_add(Vector& x, const IndexSet& idx, const Vector& block);

/// Evaluates a single element at a point of its own subspace and records it.
double evaluate_element(const ProblemSpec& problem, std::size_t element, const Vector& point,
                        EvaluationLedger& ledger);

/// Evaluates every element once at x. Non-finite element values poison the
/// overall value to +inf.
FullEvaluation evaluate_full(const ProblemSpec& problem, const Vector& x, EvaluationLedger& ledger);

/// f0(x) + sum_i w_i h_i(raw_i) from already known raw element values.
double combine_values(const ProblemSpec& problem, const Vector& x, const std::vector<double>& raw);

/// Folds the whole black-box part into one element spanning every coordinate.
/// Used as the "single" baseline that ignores the partially separable structure.
ProblemSpec make_single_element(const ProblemSpec& problem);

/// Convenience: build the identity index set {0, ..., n-1}.
IndexSet full_index_set(std::size_t n);

}  // namespace psopt
