#include "psopt/interp.hpp"

#include <json.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace psopt {

namespace {

constexpr double kResidualTolerance = 1e-10;

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

// --- QuadraticModel -------------------------------------------------------

QuadraticModel QuadraticModel::zero(const Vector& center) {
  const auto n = center.size();
  return QuadraticModel{center, 0.0, Vector::Zero(n), Matrix::Zero(n, n)};
}

double QuadraticModel::value(const Vector& x) const {
  const Vector d = x - center;
  return c + g.dot(d) + 0.5 * d.dot(H * d);
}

Vector QuadraticModel::gradient(const Vector& x) const { return g + H * (x - center); }

void QuadraticModel::recenter(const Vector& new_center) {
  c = value(new_center);
  g = gradient(new_center);
  center = new_center;
}

// --- InterpolationSet -----------------------------------------------------

InterpolationSet::InterpolationSet(Vector base, Matrix points)
    : base_(std::move(base)), offsets_(points.colwise() - base_),
      values_(static_cast<std::size_t>(points.cols()), std::numeric_limits<double>::quiet_NaN()) {}

std::size_t InterpolationSet::find(const Vector& x) const {
  const Vector d = x - base_;
  for (std::size_t j = 0; j < size(); ++j)
    if (offsets_.col(static_cast<Eigen::Index>(j)) == d) return j;
  return npos;
}

double InterpolationSet::distance(std::size_t j, const Vector& x) const {
  return (point(j) - x).norm();
}

bool InterpolationSet::factorize() {
  const auto n = offsets_.rows();
  const auto npt = offsets_.cols();
  double h = 0.0;
  for (Eigen::Index j = 0; j < npt; ++j) h = std::max(h, offsets_.col(j).norm());
  scale_ = h > 0.0 ? h : 1.0;

  const Matrix ys = offsets_ / scale_;
  const Eigen::Index dim = npt + n + 1;
  Matrix w = Matrix::Zero(dim, dim);
  const Matrix gram = ys.transpose() * ys;
  w.topLeftCorner(npt, npt) = 0.5 * gram.array().square().matrix();
  w.block(npt, 0, 1, npt).setOnes();
  w.block(0, npt, npt, 1).setOnes();
  w.block(npt + 1, 0, n, npt) = ys;
  w.block(0, npt + 1, npt, n) = ys.transpose();

  Eigen::FullPivLU<Matrix> lu(w);
  lu.setThreshold(1e-13);
  updates_since_rebuild_ = 0;
  if (!lu.isInvertible()) {
    omega_.resize(0, 0);
    return false;
  }
  Matrix inv = lu.inverse();
  if (!inv.allFinite()) {
    omega_.resize(0, 0);
    return false;
  }
  omega_ = 0.5 * (inv + inv.transpose());
  return true;
}

Vector InterpolationSet::w_vector(const Vector& xs) const {
  const auto n = offsets_.rows();
  const auto npt = offsets_.cols();
  Vector w(npt + n + 1);
  const Vector proj = (offsets_.transpose() * xs) / scale_;
  w.head(npt) = 0.5 * proj.array().square().matrix();
  w[npt] = 1.0;
  w.tail(n) = xs;
  return w;
}

SigmaReport InterpolationSet::sigma(const Vector& x, std::size_t drop) const {
  const Vector xs = scaled_offset(x);
  const Vector w = w_vector(xs);
  const Vector hw = omega_ * w;
  const auto t = static_cast<Eigen::Index>(drop);
  SigmaReport r;
  r.alpha = omega_(t, t);
  r.beta = 0.5 * std::pow(xs.squaredNorm(), 2) - w.dot(hw);
  r.tau = hw[t];
  r.sigma = r.alpha * r.beta + r.tau * r.tau;
  r.unstable = r.alpha * r.beta < -0.5 * r.tau * r.tau;
  return r;
}

std::vector<SigmaReport> InterpolationSet::sigma_all(const Vector& x) const {
  const Vector xs = scaled_offset(x);
  const Vector w = w_vector(xs);
  const Vector hw = omega_ * w;
  const double beta = 0.5 * std::pow(xs.squaredNorm(), 2) - w.dot(hw);
  std::vector<SigmaReport> out(size());
  for (std::size_t j = 0; j < size(); ++j) {
    auto& r = out[j];
    const auto t = static_cast<Eigen::Index>(j);
    r.alpha = omega_(t, t);
    r.beta = beta;
    r.tau = hw[t];
    r.sigma = r.alpha * r.beta + r.tau * r.tau;
    r.unstable = r.alpha * r.beta < -0.5 * r.tau * r.tau;
  }
  return out;
}

UpdateStatus InterpolationSet::replace(std::size_t drop, const Vector& x, double fx) {
  const Vector xs = scaled_offset(x);
  const Vector w = w_vector(xs);
  const Vector hw = omega_ * w;
  const auto t = static_cast<Eigen::Index>(drop);
  const double alpha = omega_(t, t);
  const double beta = 0.5 * std::pow(xs.squaredNorm(), 2) - w.dot(hw);
  const double tau = hw[t];
  const double sigma = alpha * beta + tau * tau;
  const bool unstable = alpha * beta < -0.5 * tau * tau;

  offsets_.col(t) = x - base_;
  values_[drop] = fx;
  ++updates_since_rebuild_;

  bool rebuild = unstable || !std::isfinite(sigma) || std::abs(sigma) < 1e-14 ||
                 updates_since_rebuild_ >= kRebuildPeriodPerPoint * size();
  if (!rebuild) {
    Vector u = -hw;
    u[t] += 1.0;
    const Vector v = omega_.col(t);
    omega_ += (alpha * u * u.transpose() - beta * v * v.transpose() +
               tau * (v * u.transpose() + u * v.transpose())) /
              sigma;
    omega_ = 0.5 * (omega_ + omega_.transpose()).eval();
    if (!omega_.allFinite()) rebuild = true;
  }
  if (rebuild) return factorize() ? UpdateStatus::kRebuilt : UpdateStatus::kBreakdown;
  return UpdateStatus::kOk;
}

void InterpolationSet::overwrite(std::size_t drop, const Vector& x, double fx) {
  offsets_.col(static_cast<Eigen::Index>(drop)) = x - base_;
  values_[drop] = fx;
}

bool InterpolationSet::shift_base(const Vector& new_base) {
  offsets_.colwise() += base_ - new_base;
  base_ = new_base;
  return factorize();
}

void InterpolationSet::correct(QuadraticModel& model) const {
  const auto npt = offsets_.cols();
  const auto n = offsets_.rows();
  Vector r(npt);
  for (Eigen::Index j = 0; j < npt; ++j)
    r[j] = values_[static_cast<std::size_t>(j)] - model.value(point(static_cast<std::size_t>(j)));
  const Vector coef = omega_.leftCols(npt) * r;
  const Matrix ys = offsets_ / scale_;
  const Vector lambda = coef.head(npt);
  const Vector ghat = coef.tail(n);
  // Correction quadratic in unscaled offsets d = x - base.
  const Matrix dh = (ys * lambda.asDiagonal() * ys.transpose()) / (scale_ * scale_);
  const Vector dg = ghat / scale_;
  const Vector d = model.center - base_;
  model.c += coef[npt] + dg.dot(d) + 0.5 * d.dot(dh * d);
  model.g += dg + dh * d;
  model.H += dh;
  model.H = 0.5 * (model.H + model.H.transpose()).eval();
}

double InterpolationSet::residual(const QuadraticModel& model) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < size(); ++j)
    worst = std::max(worst, std::abs(model.value(point(j)) - values_[j]));
  return worst;
}

Vector InterpolationSet::lagrange_coefficients(std::size_t t) const {
  return omega_.col(static_cast<Eigen::Index>(t));
}

double InterpolationSet::lagrange_value(std::size_t t, const Vector& x) const {
  const Vector coef = lagrange_coefficients(t);
  const auto npt = offsets_.cols();
  const Vector xs = scaled_offset(x);
  const Vector proj = (offsets_.transpose() * xs) / scale_;
  return coef[npt] + coef.tail(offsets_.rows()).dot(xs) +
         0.5 * coef.head(npt).dot(proj.array().square().matrix());
}

Vector InterpolationSet::lagrange_gradient(std::size_t t, const Vector& x) const {
  const Vector coef = lagrange_coefficients(t);
  const auto npt = offsets_.cols();
  const Vector xs = scaled_offset(x);
  const Matrix ys = offsets_ / scale_;
  const Vector proj = ys.transpose() * xs;
  const Vector grad = coef.tail(offsets_.rows()) + ys * (coef.head(npt).array() * proj.array()).matrix();
  return grad / scale_;
}

Matrix InterpolationSet::kkt_matrix() const {
  const auto n = offsets_.rows();
  const auto npt = offsets_.cols();
  Matrix w = Matrix::Zero(npt + n + 1, npt + n + 1);
  const Matrix gram = offsets_.transpose() * offsets_;
  w.topLeftCorner(npt, npt) = 0.5 * gram.array().square().matrix();
  w.block(npt, 0, 1, npt).setOnes();
  w.block(0, npt, npt, 1).setOnes();
  w.block(npt + 1, 0, n, npt) = offsets_;
  w.block(0, npt + 1, npt, n) = offsets_.transpose();
  return w;
}

// --- free operations --------------------------------------------------------

bool capacity_valid(std::size_t n, std::size_t capacity) {
  return n >= 1 && capacity >= n + 2 && capacity <= (n + 1) * (n + 2) / 2;
}

std::size_t default_capacity(std::size_t n) { return 2 * n + 1; }

InitialSet init_set(const Vector& center, double radius, std::size_t capacity) {
  const auto n = static_cast<std::size_t>(center.size());
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("init_set: radius must be positive");
  if (!capacity_valid(n, capacity))
    throw ConfigError("init_set: capacity " + std::to_string(capacity) + " outside [n+2, (n+1)(n+2)/2] for n=" +
                      std::to_string(n));
  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(capacity));
  std::size_t k = 0;
  pts.col(k++) = center;
  for (std::size_t i = 0; i < n && k < capacity; ++i, ++k) {
    pts.col(static_cast<Eigen::Index>(k)) = center;
    pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += radius;
  }
  for (std::size_t i = 0; i < n && k < capacity; ++i, ++k) {
    pts.col(static_cast<Eigen::Index>(k)) = center;
    pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) -= radius;
  }
  for (std::size_t a = 0; a < n && k < capacity; ++a) {
    for (std::size_t b = a + 1; b < n && k < capacity; ++b, ++k) {
      pts.col(static_cast<Eigen::Index>(k)) = center;
      pts(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) += radius;
      pts(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) += radius;
    }
  }
  InitialSet out{InterpolationSet(center, pts), {}};
  out.pending.resize(capacity);
  for (std::size_t j = 0; j < capacity; ++j) out.pending[j] = j;
  return out;
}

QuadraticModel build_initial_model(InterpolationSet& set) {
  for (double v : set.values())
    if (!std::isfinite(v)) throw InterpolationError("build_initial_model: missing or non-finite value");
  if (!set.factorize()) throw InterpolationError("build_initial_model: singular interpolation system");
  QuadraticModel model = QuadraticModel::zero(set.base());
  set.correct(model);
  if (set.residual(model) > kResidualTolerance * (1.0 + max_abs(set.values()))) set.correct(model);
  return model;
}

SigmaReport propose_update(const InterpolationSet& set, const Vector& new_point, std::size_t drop) {
  return set.sigma(new_point, drop);
}

UpdateStatus apply_update(InterpolationSet& set, QuadraticModel& model, const Vector& new_point,
                          double new_value, std::size_t drop) {
  if (!new_point.allFinite() || !std::isfinite(new_value)) return UpdateStatus::kBreakdown;
  UpdateStatus status = set.replace(drop, new_point, new_value);
  if (status == UpdateStatus::kBreakdown) return status;
  set.correct(model);
  const double tol = kResidualTolerance * (1.0 + max_abs(set.values()));
  if (set.residual(model) > tol) {
    set.correct(model);
    if (set.residual(model) > tol) {
      if (!set.factorize()) return UpdateStatus::kBreakdown;
      set.correct(model);
      status = UpdateStatus::kRebuilt;
    }
  }
  if (!std::isfinite(model.c) || !model.g.allFinite() || !model.H.allFinite()) return UpdateStatus::kBreakdown;
  return status;
}

std::size_t select_drop_index(const InterpolationSet& set, const Vector& incumbent,
                              const Vector& new_point, double delta) {
  const auto reports = set.sigma_all(new_point);
  const std::size_t keep = set.find(incumbent);
  std::size_t best = InterpolationSet::npos;
  double best_merit = -1.0;
  for (std::size_t j = 0; j < set.size(); ++j) {
    if (j == keep) continue;
    const double ratio = set.distance(j, incumbent) / delta;
    double merit = std::abs(reports[j].sigma) * std::max(1.0, std::pow(ratio, 4));
    if (!std::isfinite(merit)) merit = 0.0;
    if (merit > best_merit) {
      best_merit = merit;
      best = j;
    }
  }
  return best;
}

bool geometry_improvement_needed(const InterpolationSet& set, const Vector& incumbent, double delta) {
  for (std::size_t j = 0; j < set.size(); ++j)
    if (set.distance(j, incumbent) > 2.0 * delta) return true;
  return false;
}

std::optional<GeometryStep> geometry_step(const InterpolationSet& set, const Vector& incumbent,
                                          double delta, double threshold) {
  const std::size_t keep = set.find(incumbent);
  std::size_t t = InterpolationSet::npos;
  double far = -1.0;
  for (std::size_t j = 0; j < set.size(); ++j) {
    if (j == keep) continue;
    const double d = set.distance(j, incumbent);
    if (d > far) {
      far = d;
      t = j;
    }
  }
  if (t == InterpolationSet::npos) return std::nullopt;

  const auto n = static_cast<Eigen::Index>(set.dimension());
  std::vector<Vector> directions;
  const Vector grad = set.lagrange_gradient(t, incumbent);
  if (grad.norm() > 0.0) directions.push_back(grad.normalized());
  const Vector away = set.point(t) - incumbent;
  if (away.norm() > 0.0) directions.push_back(away.normalized());
  for (Eigen::Index i = 0; i < n; ++i) directions.push_back(Vector::Unit(n, i));

  // Curvature of the Lagrange function along d, for its stationary point.
  const Vector coef = set.lagrange_coefficients(t);
  const auto npt = static_cast<Eigen::Index>(set.size());
  auto curvature = [&](const Vector& d) {
    double c2 = 0.0;
    for (Eigen::Index j = 0; j < npt; ++j) {
      const double p = (set.point(static_cast<std::size_t>(j)) - set.base()).dot(d) / (set.scale() * set.scale());
      c2 += coef[j] * p * p;
    }
    return c2;
  };

  std::optional<GeometryStep> best;
  auto consider = [&](const Vector& x) {
    const SigmaReport r = set.sigma(x, t);
    if (!std::isfinite(r.sigma)) return;
    if (!best || std::abs(r.sigma) > std::abs(best->report.sigma)) best = GeometryStep{x, t, r};
  };
  for (const Vector& d : directions) {
    for (double a : {delta, 0.5 * delta, -0.5 * delta, -delta}) consider(incumbent + a * d);
    const double c2 = curvature(d);
    if (c2 != 0.0) {
      const double a = -grad.dot(d) / c2;
      if (std::abs(a) <= delta && std::abs(a) > 1e-3 * delta) consider(incumbent + a * d);
    }
  }
  if (!best || !(best->report.sigma > threshold)) return std::nullopt;
  return best;
}

std::string dump_snapshot(const InterpolationSet& set, const QuadraticModel& model) {
  using nlohmann::json;
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["base"] = vec(set.base());
  j["scale"] = set.scale();
  json pts = json::array();
  for (std::size_t k = 0; k < set.size(); ++k) pts.push_back(vec(set.point(k)));
  j["points"] = pts;
  j["values"] = set.values();
  json m;
  m["center"] = vec(model.center);
  m["c"] = model.c;
  m["g"] = vec(model.g);
  json h = json::array();
  for (Eigen::Index r = 0; r < model.H.rows(); ++r) h.push_back(vec(model.H.row(r).transpose()));
  m["H"] = h;
  j["model"] = m;
  j["residual"] = set.residual(model);
  return j.dump(2);
}

}  // namespace psopt
