#include "psopt/bench/corpus.hpp"

#include <cmath>

namespace psopt::bench {

namespace {

ElementSpec element(IndexSet idx, ElementFunction fn) {
  ElementSpec e;
  e.index_set = std::move(idx);
  e.evaluator = std::move(fn);
  return e;
}

CorpusProblem chained_rosenbrock(std::size_t n) {
  CorpusProblem p;
  p.start = Vector(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) p.start[static_cast<Eigen::Index>(i)] = (i % 2 == 0) ? -1.2 : 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p.spec.elements.push_back(element({i, i + 1}, [](const Vector& u) {
      const double a = u[0] * u[0] - u[1];
      const double b = u[0] - 1.0;
      return 100.0 * a * a + b * b;
    }));
  }
  p.reference_min = 0.0;
  p.minimizer = Vector::Ones(static_cast<Eigen::Index>(n));
  return p;
}

CorpusProblem separable_quartic(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Zero(static_cast<Eigen::Index>(n));
  Vector xmin(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double c = static_cast<double>(i + 1) / static_cast<double>(n);
    xmin[static_cast<Eigen::Index>(i)] = c;
    p.spec.elements.push_back(element({i}, [c](const Vector& u) { return std::pow(u[0] - c, 4); }));
  }
  p.reference_min = 0.0;
  p.minimizer = xmin;
  return p;
}

CorpusProblem arrowhead(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Ones(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p.spec.elements.push_back(element({i, n - 1}, [](const Vector& u) {
      const double a = u[0] * u[0] + u[1] * u[1];
      return a * a - 4.0 * u[0] + 3.0;
    }));
  }
  Vector xmin = Vector::Ones(static_cast<Eigen::Index>(n));
  xmin[static_cast<Eigen::Index>(n - 1)] = 0.0;
  p.reference_min = 0.0;
  p.minimizer = xmin;
  return p;
}

CorpusProblem broyden_tridiagonal(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Constant(static_cast<Eigen::Index>(n), -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    IndexSet idx;
    if (i > 0) idx.push_back(i - 1);
    idx.push_back(i);
    if (i + 1 < n) idx.push_back(i + 1);
    const bool has_left = i > 0;
    const bool has_right = i + 1 < n;
    p.spec.elements.push_back(element(idx, [has_left, has_right](const Vector& u) {
      Eigen::Index k = 0;
      const double left = has_left ? u[k++] : 0.0;
      const double mid = u[k++];
      const double right = has_right ? u[k] : 0.0;
      const double r = (3.0 - 2.0 * mid) * mid - left - 2.0 * right + 1.0;
      return r * r;
    }));
  }
  return p;
}

CorpusProblem engval1(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Constant(static_cast<Eigen::Index>(n), 2.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p.spec.elements.push_back(element({i, i + 1}, [](const Vector& u) {
      const double a = u[0] * u[0] + u[1] * u[1];
      return a * a - 4.0 * u[0] + 3.0;
    }));
  }
  return p;
}

CorpusProblem tridia(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Ones(static_cast<Eigen::Index>(n));
  p.spec.elements.push_back(element({0}, [](const Vector& u) { return (u[0] - 1.0) * (u[0] - 1.0); }));
  for (std::size_t i = 1; i < n; ++i) {
    const double weight = static_cast<double>(i + 1);
    p.spec.elements.push_back(element({i - 1, i}, [weight](const Vector& u) {
      const double r = 2.0 * u[1] - u[0];
      return weight * r * r;
    }));
  }
  Vector xmin(static_cast<Eigen::Index>(n));
  xmin[0] = 1.0;
  for (Eigen::Index i = 1; i < xmin.size(); ++i) xmin[i] = 0.5 * xmin[i - 1];
  p.reference_min = 0.0;
  p.minimizer = xmin;
  return p;
}

CorpusProblem separable_quadratic(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    p.spec.elements.push_back(element({i}, [](const Vector& u) { return (u[0] - 1.0) * (u[0] - 1.0); }));
  p.reference_min = 0.0;
  p.minimizer = Vector::Ones(static_cast<Eigen::Index>(n));
  return p;
}

CorpusProblem dqdrtic(std::size_t n) {
  CorpusProblem p;
  p.start = Vector::Constant(static_cast<Eigen::Index>(n), 3.0);
  for (std::size_t i = 0; i + 2 < n; ++i) {
    p.spec.elements.push_back(element({i, i + 1, i + 2}, [](const Vector& u) {
      return u[0] * u[0] + 100.0 * u[1] * u[1] + 100.0 * u[2] * u[2];
    }));
  }
  p.reference_min = 0.0;
  p.minimizer = Vector::Zero(static_cast<Eigen::Index>(n));
  return p;
}

CorpusProblem extended_powell(std::size_t n) {
  CorpusProblem p;
  p.start = Vector(static_cast<Eigen::Index>(n));
  const double pattern[4] = {3.0, -1.0, 0.0, 1.0};
  for (std::size_t i = 0; i < n; ++i) p.start[static_cast<Eigen::Index>(i)] = pattern[i % 4];
  for (std::size_t b = 0; b < n; b += 4) {
    p.spec.elements.push_back(element({b, b + 1}, [](const Vector& u) {
      const double r = u[0] + 10.0 * u[1];
      return r * r;
    }));
    p.spec.elements.push_back(element({b + 2, b + 3}, [](const Vector& u) {
      const double r = u[0] - u[1];
      return 5.0 * r * r;
    }));
    p.spec.elements.push_back(element({b + 1, b + 2}, [](const Vector& u) { return std::pow(u[0] - 2.0 * u[1], 4); }));
    p.spec.elements.push_back(
        element({b, b + 3}, [](const Vector& u) { return 10.0 * std::pow(u[0] - u[1], 4); }));
  }
  p.reference_min = 0.0;
  p.minimizer = Vector::Zero(static_cast<Eigen::Index>(n));
  return p;
}

using Builder = CorpusProblem (*)(std::size_t);

struct Entry {
  GeneratorInfo info;
  Builder build;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> list = {
      {{"chained_rosenbrock", 10, 2, 1, "f_i = 100 (x_i^2 - x_{i+1})^2 + (x_i - 1)^2, I_i = {i, i+1}"},
       chained_rosenbrock},
      {{"separable_quartic", 20, 1, 1, "f_i = (x_i - (i+1)/n)^4, I_i = {i}"}, separable_quartic},
      {{"arrowhead", 10, 2, 1, "f_i = (x_i^2 + x_{n-1}^2)^2 - 4 x_i + 3, I_i = {i, n-1}"}, arrowhead},
      {{"broyden_tridiagonal", 10, 2, 1, "f_i = ((3 - 2 x_i) x_i - x_{i-1} - 2 x_{i+1} + 1)^2, I_i = {i-1, i, i+1}"},
       broyden_tridiagonal},
      {{"engval1", 10, 2, 1, "f_i = (x_i^2 + x_{i+1}^2)^2 - 4 x_i + 3, I_i = {i, i+1}"}, engval1},
      {{"tridia", 10, 2, 1, "f_0 = (x_0 - 1)^2, f_i = (i+1) (2 x_i - x_{i-1})^2, I_i = {i-1, i}"}, tridia},
      {{"separable_quadratic", 10, 1, 1, "f_i = (x_i - 1)^2, I_i = {i}"}, separable_quadratic},
      {{"dqdrtic", 10, 3, 1, "f_i = x_i^2 + 100 x_{i+1}^2 + 100 x_{i+2}^2, I_i = {i, i+1, i+2}"}, dqdrtic},
      {{"extended_powell", 8, 4, 4,
        "per block of 4: (x0 + 10 x1)^2, 5 (x2 - x3)^2, (x1 - 2 x2)^4, 10 (x0 - x3)^4"},
       extended_powell},
  };
  return list;
}

}  // namespace

const std::vector<GeneratorInfo>& generators() {
  static const std::vector<GeneratorInfo> infos = [] {
    std::vector<GeneratorInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

CorpusProblem make_problem(const std::string& name, std::size_t n) {
  for (const auto& e : entries()) {
    if (e.info.name != name) continue;
    if (n == 0) n = e.info.default_n;
    if (n < e.info.min_n || n % e.info.multiple != 0)
      throw StructureError("problem '" + name + "' does not admit n=" + std::to_string(n));
    CorpusProblem p = e.build(n);
    p.name = name;
    p.formula = e.info.formula;
    p.n = n;
    p.spec.dimension = n;
    p.spec.validate();
    return p;
  }
  throw StructureError("unknown problem '" + name + "'");
}

std::vector<CorpusProblem> corpus() {
  std::vector<CorpusProblem> out;
  for (const auto& e : entries()) out.push_back(make_problem(e.info.name));
  return out;
}

}  // namespace psopt::bench
