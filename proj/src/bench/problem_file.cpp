#include "psopt/bench/problem_file.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace psopt::bench {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw StructureError(where + ": unknown key '" + item.key() + "'");
  }
}

double number_field(const json& obj, const std::string& key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw StructureError(where + ": '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw StructureError(where + ": '" + key + "' must be finite");
  return x;
}

Vector vector_field(const json& v, const std::string& where) {
  if (!v.is_array()) throw StructureError(where + " must be an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw StructureError(where + " must be an array of numbers");
    out[static_cast<Eigen::Index>(k)] = v[k].get<double>();
  }
  return out;
}

ElementFunction build_formula(const std::string& formula, const json& params, std::size_t dim,
                              const std::string& where) {
  if (formula == "shifted_square" || formula == "quartic") {
    reject_unknown(params, {"center", "scale"}, where + ".params");
    Vector center = Vector::Zero(static_cast<Eigen::Index>(dim));
    if (params.contains("center")) {
      center = vector_field(params.at("center"), where + ".params.center");
      if (static_cast<std::size_t>(center.size()) != dim)
        throw StructureError(where + ".params.center must have one entry per index");
    }
    const double scale = number_field(params, "scale", 1.0, where + ".params");
    const int power = formula == "quartic" ? 4 : 2;
    return [center, scale, power](const Vector& u) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < u.size(); ++k) sum += std::pow(u[k] - center[k], power);
      return scale * sum;
    };
  }
  if (formula == "rosenbrock") {
    reject_unknown(params, {"a"}, where + ".params");
    if (dim != 2) throw StructureError(where + ": rosenbrock needs exactly 2 indices");
    const double a = number_field(params, "a", 100.0, where + ".params");
    return [a](const Vector& u) {
      const double r = u[0] * u[0] - u[1];
      return a * r * r + (u[0] - 1.0) * (u[0] - 1.0);
    };
  }
  if (formula == "arrowhead") {
    reject_unknown(params, {}, where + ".params");
    if (dim != 2) throw StructureError(where + ": arrowhead needs exactly 2 indices");
    return [](const Vector& u) {
      const double s = u[0] * u[0] + u[1] * u[1];
      return s * s - 4.0 * u[0] + 3.0;
    };
  }
  throw StructureError(where + ": unknown formula '" + formula + "'");
}

}  // namespace

const std::vector<std::string>& builtin_formulas() {
  static const std::vector<std::string> names = {"shifted_square", "quartic", "rosenbrock", "arrowhead"};
  return names;
}

CorpusProblem parse_problem_file(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw StructureError(std::string("problem file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw StructureError("problem file must be a JSON object");
  reject_unknown(root, {"name", "dimension", "start", "elements", "reference_min"}, "problem");

  CorpusProblem p;
  p.name = root.value("name", std::string("custom"));
  if (!root.contains("dimension") || !root.at("dimension").is_number_unsigned())
    throw StructureError("problem: 'dimension' must be a positive integer");
  p.n = root.at("dimension").get<std::size_t>();
  if (p.n == 0) throw StructureError("problem: 'dimension' must be a positive integer");
  p.spec.dimension = p.n;

  if (root.contains("start")) {
    p.start = vector_field(root.at("start"), "problem.start");
    if (static_cast<std::size_t>(p.start.size()) != p.n)
      throw StructureError("problem.start must have 'dimension' entries");
  } else {
    p.start = Vector::Zero(static_cast<Eigen::Index>(p.n));
  }
  if (root.contains("reference_min")) p.reference_min = number_field(root, "reference_min", 0.0, "problem");

  if (!root.contains("elements") || !root.at("elements").is_array() || root.at("elements").empty())
    throw StructureError("problem: 'elements' must be a non-empty array");

  std::ostringstream formula_text;
  const auto& elements = root.at("elements");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const std::string where = "elements[" + std::to_string(i) + "]";
    const auto& e = elements[i];
    if (!e.is_object()) throw StructureError(where + " must be an object");
    reject_unknown(e, {"indices", "formula", "params", "weight", "transform"}, where);
    if (!e.contains("indices") || !e.at("indices").is_array())
      throw StructureError(where + ": 'indices' must be an array");
    ElementSpec spec;
    for (const auto& idx : e.at("indices")) {
      if (!idx.is_number_unsigned()) throw StructureError(where + ": indices must be non-negative integers");
      spec.index_set.push_back(idx.get<std::size_t>());
    }
    if (!e.contains("formula") || !e.at("formula").is_string())
      throw StructureError(where + ": 'formula' must be a string");
    const auto formula = e.at("formula").get<std::string>();
    const json params = e.value("params", json::object());
    if (!params.is_object()) throw StructureError(where + ": 'params' must be an object");
    spec.evaluator = build_formula(formula, params, spec.index_set.size(), where);
    spec.weight = number_field(e, "weight", 1.0, where);
    const auto transform = e.value("transform", std::string("identity"));
    if (transform == "square") {
      spec.transform = Transform::square();
    } else if (transform != "identity") {
      throw StructureError(where + ": unknown transform '" + transform + "'");
    }
    if (i > 0) formula_text << "; ";
    formula_text << formula;
    p.spec.elements.push_back(std::move(spec));
  }
  p.formula = formula_text.str();
  p.spec.validate();
  return p;
}

CorpusProblem load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructureError("cannot open problem file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem_file(buf.str());
}

}  // namespace psopt::bench
