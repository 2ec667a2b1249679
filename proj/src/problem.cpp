#include "psopt/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace psopt {

Transform Transform::identity() {
  return Transform{[](double t) { return t; }, [](double) { return 1.0; },
                   [](double) { return 0.0; }};
}

Transform Transform::square() {
  return Transform{[](double t) { return t * t; }, [](double t) { return 2.0 * t; },
                   [](double) { return 2.0; }};
}

double ElementSpec::apply_transform(double raw) const {
  return transform ? transform->value(raw) : raw;
}

double ElementSpec::transform_derivative(double raw) const {
  return transform ? transform->first(raw) : 1.0;
}

std::size_t ProblemSpec::max_element_dimension() const {
  std::size_t m = 0;
  for (const auto& e : elements) m = std::max(m, e.dimension());
  return m;
}

void ProblemSpec::validate() const {
  if (dimension == 0) throw StructureError("problem dimension must be positive");
  if (elements.empty()) throw StructureError("problem needs at least one element");
  std::vector<bool> covered(dimension, false);
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const auto& e = elements[i];
    const std::string tag = "element " + std::to_string(i) + ": ";
    if (e.index_set.empty()) throw StructureError(tag + "empty index set");
    for (std::size_t k = 0; k < e.index_set.size(); ++k) {
      if (e.index_set[k] >= dimension) throw StructureError(tag + "index out of range");
      if (k > 0 && e.index_set[k] <= e.index_set[k - 1])
        throw StructureError(tag + "index set must be strictly increasing");
      covered[e.index_set[k]] = true;
    }
    if (!e.evaluator) throw StructureError(tag + "missing evaluator");
    if (!std::isfinite(e.weight)) throw StructureError(tag + "weight must be finite");
    if (e.transform && (!e.transform->value || !e.transform->first))
      throw StructureError(tag + "transform needs value and first derivative");
  }
  for (std::size_t j = 0; j < dimension; ++j)
    if (!covered[j])
      throw StructureError("coordinate " + std::to_string(j) + " is not used by any element");
  if (whitebox && (!whitebox->value || !whitebox->gradient || !whitebox->hessian_vector))
    throw StructureError("white-box term needs value, gradient and Hessian-vector product");
}

std::size_t EvaluationLedger::worst() const {
  return counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end());
}

double EvaluationLedger::average() const {
  if (counts_.empty()) return 0.0;
  const double total = std::accumulate(counts_.begin(), counts_.end(), 0.0);
  return total / static_cast<double>(counts_.size());
}

Vector project_point(const Vector& x, const IndexSet& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= static_cast<std::size_t>(x.size()))
      throw StructureError("project_point: index out of range");
    out[static_cast<Eigen::Index>(k)] = x[static_cast<Eigen::Index>(idx[k])];
  }
  return out;
}

void scatter_add(Vector& x, const IndexSet& idx, const Vector& block) {
  for (std::size_t k = 0; k < idx.size(); ++k)
    x[static_cast<Eigen::Index>(idx[k])] += block[static_cast<Eigen::Index>(k)];
}

double evaluate_element(const ProblemSpec& problem, std::size_t element, const Vector& point,
                        EvaluationLedger& ledger) {
  ledger.record(element);
  return problem.elements[element].evaluator(point);
}

FullEvaluation evaluate_full(const ProblemSpec& problem, const Vector& x, EvaluationLedger& ledger) {
  FullEvaluation out;
  out.raw.resize(problem.elements.size());
  for (std::size_t i = 0; i < problem.elements.size(); ++i) {
    out.raw[i] = evaluate_element(problem, i, project_point(x, problem.elements[i].index_set), ledger);
    if (!std::isfinite(out.raw[i])) out.finite = false;
  }
  out.value = combine_values(problem, x, out.raw);
  return out;
}

double combine_values(const ProblemSpec& problem, const Vector& x, const std::vector<double>& raw) {
  double total = problem.whitebox ? problem.whitebox->value(x) : 0.0;
  for (std::size_t i = 0; i < problem.elements.size(); ++i) {
    if (!std::isfinite(raw[i])) return std::numeric_limits<double>::infinity();
    const auto& e = problem.elements[i];
    total += e.weight * e.apply_transform(raw[i]);
  }
  return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

ProblemSpec make_single_element(const ProblemSpec& problem) {
  ProblemSpec single;
  single.dimension = problem.dimension;
  single.whitebox = problem.whitebox;
  ElementSpec whole;
  whole.index_set = full_index_set(problem.dimension);
  // Copy the element list so the folded evaluator does not dangle.
  whole.evaluator = [elements = problem.elements](const Vector& x) {
    double total = 0.0;
    for (const auto& e : elements) total += e.weight * e.apply_transform(e.evaluator(project_point(x, e.index_set)));
    return total;
  };
  single.elements.push_back(std::move(whole));
  return single;
}

IndexSet full_index_set(std::size_t n) {
  IndexSet idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace psopt
