#include "psopt/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

namespace psopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
/// The base moves to the incumbent once it is this many set diameters away.
constexpr double kBaseShiftRatio = 5.0;

bool is_integral(double v) { return std::isfinite(v) && v >= 0.0 && std::floor(v) == v; }

std::size_t clamp_capacity(std::size_t requested, std::size_t n) {
  if (requested == 0) return default_capacity(n);
  const std::size_t lo = n + 2;
  const std::size_t hi = (n + 1) * (n + 2) / 2;
  return std::clamp(requested, std::min(lo, hi), hi);
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::size_t SolverOptions::budget(std::size_t n) const {
  if (max_element_evals > 0) return max_element_evals;
  return std::max<std::size_t>(1000 * n, 10000);
}

void SolverOptions::validate() const {
  if (!(rho_end > 0.0) || !(rho_begin > rho_end) || !std::isfinite(rho_begin))
    throw ConfigError("resolutions must satisfy rho_begin > rho_end > 0");
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw ConfigError("xi must be finite and nonnegative");
  if (short_step_limit == 0) throw ConfigError("short_step_limit must be positive");
  radius.validate();
  if (subproblem.k_avg_even < 0 || subproblem.k_avg_odd < 0) throw ConfigError("averaged step counts must be >= 0");
}

std::vector<std::string> option_keys() {
  return {"rho_begin",  "rho_end",       "max_element_evals", "xi",
          "restarts",   "structured",    "capacity",          "seed",
          "max_iterations", "short_step_limit", "start_search_limit", "record_iterations",
          "mu1",        "mu2",           "theta1",            "theta2",
          "theta3",     "theta4",        "subproblem_max_iter", "k_avg_even",
          "k_avg_odd"};
}

void apply_options(SolverOptions& o, const OptionMap& overrides) {
  for (const auto& [key, value] : overrides) {
    auto count = [&]() {
      if (!is_integral(value)) throw ConfigError("option '" + key + "' must be a nonnegative integer");
      return static_cast<std::size_t>(value);
    };
    auto flag = [&]() {
      if (value != 0.0 && value != 1.0) throw ConfigError("option '" + key + "' must be 0 or 1");
      return value == 1.0;
    };
    auto real = [&]() {
      if (!std::isfinite(value)) throw ConfigError("option '" + key + "' must be finite");
      return value;
    };
    if (key == "rho_begin") o.rho_begin = real();
    else if (key == "rho_end") o.rho_end = real();
    else if (key == "max_element_evals") o.max_element_evals = count();
    else if (key == "xi") o.xi = real();
    else if (key == "restarts") o.restarts = count();
    else if (key == "structured") o.structured = flag();
    else if (key == "capacity") o.capacity = count();
    else if (key == "seed") o.seed = static_cast<std::uint64_t>(count());
    else if (key == "max_iterations") o.max_iterations = count();
    else if (key == "short_step_limit") o.short_step_limit = count();
    else if (key == "start_search_limit") o.start_search_limit = count();
    else if (key == "record_iterations") o.record_iterations = flag();
    else if (key == "mu1") o.radius.mu1 = real();
    else if (key == "mu2") o.radius.mu2 = real();
    else if (key == "theta1") o.radius.theta1 = real();
    else if (key == "theta2") o.radius.theta2 = real();
    else if (key == "theta3") o.radius.theta3 = real();
    else if (key == "theta4") o.radius.theta4 = real();
    else if (key == "subproblem_max_iter") o.subproblem.max_iter = count();
    else if (key == "k_avg_even") o.subproblem.k_avg_even = static_cast<int>(count());
    else if (key == "k_avg_odd") o.subproblem.k_avg_odd = static_cast<int>(count());
    else throw ConfigError("unknown option '" + key + "'");
  }
  o.validate();
}

SolverOptions options_from_map(const OptionMap& overrides) {
  SolverOptions o;
  apply_options(o, overrides);
  return o;
}

SubproblemObjective compose_model_eval(const ProblemSpec& problem, const std::vector<QuadraticModel>& models,
                                       const Vector& x) {
  struct Block {
    IndexSet idx;
    double c;
    Vector g;
    Matrix H;
    double weight;
    std::optional<Transform> transform;
  };
  struct Data {
    std::size_t n;
    std::vector<Block> blocks;
    bool has_f0 = false;
    double f0 = 0.0;
    Vector g0;
    Vector x;
    std::function<Vector(const Vector&, const Vector&)> hv;
  };
  if (models.size() != problem.element_count()) throw ContractError("compose_model_eval: one model per element");
  auto data = std::make_shared<Data>();
  data->n = problem.dimension;
  data->x = x;
  bool quadratic = true;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& e = problem.elements[i];
    const Vector xi = project_point(x, e.index_set);
    const auto& m = models[i];
    data->blocks.push_back({e.index_set, m.value(xi), m.gradient(xi), m.H, e.weight, e.transform});
    if (e.transform) quadratic = false;
  }
  if (problem.whitebox) {
    data->has_f0 = true;
    data->f0 = problem.whitebox->value(x);
    data->g0 = problem.whitebox->gradient(x);
    data->hv = problem.whitebox->hessian_vector;
  }
  SubproblemObjective obj;
  obj.quadratic = quadratic;
  obj.evaluate = [data](const Vector& s, Vector& grad) {
    grad = Vector::Zero(static_cast<Eigen::Index>(data->n));
    double value = 0.0;
    if (data->has_f0) {
      const Vector hs = data->hv ? data->hv(data->x, s) : Vector::Zero(s.size());
      value += data->f0 + data->g0.dot(s) + 0.5 * s.dot(hs);
      grad += data->g0 + hs;
    }
    for (const auto& b : data->blocks) {
      const Vector u = project_point(s, b.idx);
      const Vector hu = b.H * u;
      const double m = b.c + b.g.dot(u) + 0.5 * u.dot(hu);
      Vector gm = b.g + hu;
      if (b.transform) {
        value += b.weight * b.transform->value(m);
        gm *= b.weight * b.transform->first(m);
      } else {
        value += b.weight * m;
        gm *= b.weight;
      }
      scatter_add(grad, b.idx, gm);
    }
    return value;
  };
  return obj;
}

SelectiveCandidate selective_candidate(const InterpolationSet& set, const Vector& incumbent,
                                       const Vector& new_point, double step_norm, double delta, double rho) {
  SelectiveCandidate c;
  c.drop = select_drop_index(set, incumbent, new_point, delta);
  if (c.drop == InterpolationSet::npos) return c;
  c.report = propose_update(set, new_point, c.drop);
  c.gamma = std::min(step_norm / rho, 1.0);
  c.penalty = c.report.unstable ? 0.25 : 1.0;
  const double sigma = c.report.sigma;
  const double adjusted = sigma > 0.0 ? c.penalty * sigma : sigma / c.penalty;
  c.merit = c.gamma * adjusted;
  if (!std::isfinite(c.merit)) c.merit = -kInf;
  return c;
}

std::vector<std::size_t> select_updates(const std::vector<std::optional<SelectiveCandidate>>& candidates,
                                        double xi) {
  std::vector<std::size_t> accepted;
  bool any = false;
  bool all_negative = true;
  std::size_t closest = 0;
  double closest_merit = -kInf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c || c->drop == InterpolationSet::npos) continue;
    any = true;
    if (c->merit > xi) accepted.push_back(i);
    if (!(c->merit < 0.0)) all_negative = false;
    if (c->merit > closest_merit) {
      closest_merit = c->merit;
      closest = i;
    }
  }
  if (accepted.empty() && any && all_negative && std::isfinite(closest_merit)) accepted.push_back(closest);
  return accepted;
}

StartSearchResult search_starting_point(const ProblemSpec& problem, const std::vector<InterpolationSet>& sets,
                                        const Vector& x_start, std::size_t limit) {
  const std::size_t n = problem.dimension;
  const std::size_t q = problem.element_count();
  if (sets.size() != q) throw ContractError("search_starting_point: one set per element");

  std::vector<std::vector<Vector>> points(q);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < sets[i].size(); ++j) points[i].push_back(sets[i].point(j));

  StartSearchResult best;
  best.f = kInf;
  std::vector<double> value(n, 0.0);
  std::vector<char> assigned(n, 0);
  std::vector<std::size_t> choice(q, InterpolationSet::npos);
  std::size_t nodes = 0;
  const std::size_t node_cap = 100000;

  auto consistent = [&](std::size_t i, std::size_t j) {
    const auto& idx = problem.elements[i].index_set;
    const Vector& p = points[i][j];
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (assigned[idx[k]] && value[idx[k]] != p[static_cast<Eigen::Index>(k)]) return false;
    return true;
  };

  auto record = [&]() {
    ++best.solutions;
    Vector x(static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) x[static_cast<Eigen::Index>(c)] = value[c];
    std::vector<double> raw(q);
    for (std::size_t i = 0; i < q; ++i) raw[i] = sets[i].value(choice[i]);
    const double f = combine_values(problem, x, raw);
    if (f < best.f || best.point_index.empty()) {
      best.f = f;
      best.x = x;
      best.point_index = choice;
    }
  };

  std::function<void()> search = [&]() {
    if (best.solutions >= limit || nodes >= node_cap) return;
    ++nodes;
    // Minimum remaining values: the open element with the fewest consistent points.
    std::size_t pick = q;
    std::vector<std::size_t> options;
    for (std::size_t i = 0; i < q; ++i) {
      if (choice[i] != InterpolationSet::npos) continue;
      std::vector<std::size_t> ok;
      for (std::size_t j = 0; j < points[i].size(); ++j)
        if (consistent(i, j)) ok.push_back(j);
      if (pick == q || ok.size() < options.size()) {
        pick = i;
        options = std::move(ok);
        if (options.empty()) return;
      }
    }
    if (pick == q) {
      record();
      return;
    }
    const auto& idx = problem.elements[pick].index_set;
    for (std::size_t j : options) {
      std::vector<std::size_t> fresh;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (!assigned[idx[k]]) {
          assigned[idx[k]] = 1;
          value[idx[k]] = points[pick][j][static_cast<Eigen::Index>(k)];
          fresh.push_back(idx[k]);
        }
      }
      choice[pick] = j;
      search();
      choice[pick] = InterpolationSet::npos;
      for (std::size_t c : fresh) assigned[c] = 0;
      if (best.solutions >= limit || nodes >= node_cap) return;
    }
  };
  if (limit > 0) search();

  if (best.point_index.empty()) {
    best.x = x_start;
    best.point_index.assign(q, InterpolationSet::npos);
    std::vector<double> raw(q);
    for (std::size_t i = 0; i < q; ++i) {
      const std::size_t j = sets[i].find(project_point(x_start, problem.elements[i].index_set));
      if (j == InterpolationSet::npos) throw ContractError("search_starting_point: start point not in every set");
      best.point_index[i] = j;
      raw[i] = sets[i].value(j);
    }
    best.f = combine_values(problem, x_start, raw);
  }
  return best;
}

void update_weights(ProblemSpec& problem, SolverState& state, const WeightUpdate& update) {
  const std::size_t q = problem.element_count();
  if (!update.weights.empty() && update.weights.size() != q)
    throw ConfigError("update_weights: expected " + std::to_string(q) + " weights");
  if (!update.transforms.empty() && update.transforms.size() != q)
    throw ConfigError("update_weights: expected " + std::to_string(q) + " transforms");
  for (double w : update.weights)
    if (!std::isfinite(w)) throw ConfigError("update_weights: weights must be finite");
  for (std::size_t i = 0; i < q; ++i) {
    if (!update.weights.empty()) problem.elements[i].weight = update.weights[i];
    if (!update.transforms.empty()) problem.elements[i].transform = update.transforms[i];
  }
  if (!state.raw.empty()) state.f = combine_values(problem, state.x, state.raw);
}

bool soft_restart(const ProblemSpec& problem, SolverState& state, const SolverOptions& options,
                  std::mt19937_64& rng, std::size_t budget) {
  state.rho = options.rho_begin;
  std::fill(state.radii.begin(), state.radii.end(), options.rho_begin);
  state.short_steps = 0;
  ++state.restarts_used;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < state.elements.size(); ++i) {
    auto& el = state.elements[i];
    const Vector xi = project_point(state.x, problem.elements[i].index_set);
    const std::size_t keep = el.set.find(xi);
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < el.set.size(); ++j)
      if (j != keep) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return el.set.distance(a, xi) < el.set.distance(b, xi);
    });
    const std::size_t replace = std::min(order.size(), (el.set.size() + 2) / 3);
    for (std::size_t r = 0; r < replace; ++r) {
      bool placed = false;
      for (int attempt = 0; attempt < 5 && !placed; ++attempt) {
        if (state.ledger.count(i) + 1 > budget) return false;
        Vector d(xi.size());
        for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = normal(rng);
        if (!(d.norm() > 0.0)) continue;
        const Vector p = xi + options.rho_begin * d.normalized();
        const double v = evaluate_element(problem, i, p, state.ledger);
        if (!std::isfinite(v)) continue;
        el.set.overwrite(order[r], p, v);
        placed = true;
      }
      if (!placed) return false;
    }
    if (!el.set.shift_base(xi)) return false;
    try {
      el.model = build_initial_model(el.set);
    } catch (const InterpolationError&) {
      return false;
    }
  }
  return true;
}

namespace {

class Driver {
 public:
  Driver(const ProblemSpec& problem, const Vector& x_start, const SolverOptions& options,
         const IterationCallback& callback)
      : problem_(problem), options_(options), callback_(callback), rng_(options.seed) {
    problem_.validate();
    options_.validate();
    if (static_cast<std::size_t>(x_start.size()) != problem_.dimension)
      throw StructureError("minimize: start point has dimension " + std::to_string(x_start.size()) + ", expected " +
                           std::to_string(problem_.dimension));
    if (!x_start.allFinite()) throw StructureError("minimize: start point must be finite");
    x_start_ = x_start;
    n_ = problem_.dimension;
    q_ = problem_.element_count();
    budget_ = options_.budget(n_);
    errors_.assign(q_, std::deque<double>{});
  }

  RunRecord run() {
    record_.mode = options_.structured ? "structured" : "unstructured";
    record_.n = n_;
    record_.q = q_;
    for (const auto& e : problem_.elements) record_.element_dims.push_back(e.dimension());
    record_.x_start.assign(x_start_.data(), x_start_.data() + x_start_.size());
    state_.ledger = EvaluationLedger(q_);
    state_.rho = options_.rho_begin;
    state_.radii.assign(q_, options_.rho_begin);
    state_.x = x_start_;
    state_.f = kInf;

    if (!initialize()) return finish();
    while (reason_.empty()) iterate();
    return finish();
  }

 private:
  Vector block(const Vector& x, std::size_t i) const { return project_point(x, problem_.elements[i].index_set); }

  double element_term(std::size_t i, double raw) const {
    const auto& e = problem_.elements[i];
    return e.weight * e.apply_transform(raw);
  }

  void note_progress() {
    if (!record_.trajectory.empty() && !(state_.f < record_.trajectory.back().f_best)) return;
    record_.trajectory.push_back({state_.ledger.worst(), state_.ledger.average(), state_.f});
  }

  void event(const std::string& kind, const std::string& detail) {
    record_.events.push_back({state_.iteration, kind, detail});
  }

  bool has_budget(std::size_t i) const { return state_.ledger.count(i) + 1 <= budget_; }
  bool has_budget_all() const { return state_.ledger.worst() + 1 <= budget_; }

  bool initialize() {
    std::vector<InitialSet> init;
    init.reserve(q_);
    for (std::size_t i = 0; i < q_; ++i) {
      const std::size_t ni = problem_.elements[i].dimension();
      init.push_back(init_set(block(x_start_, i), options_.rho_begin, clamp_capacity(options_.capacity, ni)));
    }
    // The start point first, so the trajectory begins at f(x_start).
    std::vector<double> raw(q_);
    for (std::size_t i = 0; i < q_; ++i) {
      if (!has_budget(i)) {
        reason_ = "budget";
        return false;
      }
      raw[i] = evaluate_element(problem_, i, init[i].set.point(0), state_.ledger);
      init[i].set.set_value(0, raw[i]);
    }
    record_.f_start = combine_values(problem_, x_start_, raw);
    state_.raw = raw;
    state_.f = record_.f_start;
    note_progress();
    for (std::size_t i = 0; i < q_; ++i) {
      for (std::size_t j : init[i].pending) {
        if (j == 0) continue;
        if (!has_budget(i)) {
          reason_ = "budget";
          return false;
        }
        init[i].set.set_value(j, evaluate_element(problem_, i, init[i].set.point(j), state_.ledger));
      }
    }
    for (std::size_t i = 0; i < q_; ++i) {
      for (double v : init[i].set.values()) {
        if (!std::isfinite(v)) {
          reason_ = "nonfinite_init";
          return false;
        }
      }
    }
    state_.elements.resize(q_);
    for (std::size_t i = 0; i < q_; ++i) {
      state_.elements[i].set = std::move(init[i].set);
      try {
        state_.elements[i].model = build_initial_model(state_.elements[i].set);
      } catch (const InterpolationError&) {
        reason_ = "singular";
        return false;
      }
    }

    if (options_.start_search_limit > 0) {
      std::vector<InterpolationSet> sets;
      for (const auto& el : state_.elements) sets.push_back(el.set);
      const auto found = search_starting_point(problem_, sets, x_start_, options_.start_search_limit);
      if (found.f < state_.f) {
        state_.x = found.x;
        state_.f = found.f;
        for (std::size_t i = 0; i < q_; ++i) state_.raw[i] = state_.elements[i].set.value(found.point_index[i]);
        event("start_search", "solutions=" + std::to_string(found.solutions) + " f=" + format_number(found.f));
      }
    }
    for (std::size_t i = 0; i < q_; ++i) state_.elements[i].model.recenter(block(state_.x, i));
    note_progress();
    return true;
  }

  CylinderRegion region() const {
    if (options_.structured) {
      std::vector<IndexSet> sets;
      for (const auto& e : problem_.elements) sets.push_back(e.index_set);
      return CylinderRegion(n_, std::move(sets), state_.radii);
    }
    return CylinderRegion(n_, {full_index_set(n_)}, {state_.radii.front()});
  }

  // Largest recent |f_i - m_i| at trial points is negligible for a model at
  // the current resolution.
  bool model_accurate(std::size_t i) const {
    if (errors_[i].empty()) return true;
    const double worst = *std::max_element(errors_[i].begin(), errors_[i].end());
    const double curvature = state_.elements[i].model.H.norm();
    return worst <= 0.125 * curvature * state_.rho * state_.rho;
  }

  void record_error(std::size_t i, double err) {
    errors_[i].push_back(err);
    if (errors_[i].size() > 3) errors_[i].pop_front();
  }

  // Returns false when the run must stop.
  bool reduce_rho(IterationRecord& rec) {
    state_.short_steps = 0;
    if (state_.rho <= options_.rho_end * (1.0 + 1e-9)) return restart_or_stop("rho");
    state_.rho = std::max(0.1 * state_.rho, options_.rho_end);
    for (double& d : state_.radii) d = std::max(d, state_.rho);
    rec.rho_reduced = true;
    return true;
  }

  bool restart_or_stop(const std::string& why) {
    if (state_.restarts_used >= options_.restarts) {
      reason_ = why;
      return false;
    }
    const bool ok = soft_restart(problem_, state_, options_, rng_, budget_);
    event("restart", why + " restart=" + std::to_string(state_.restarts_used));
    if (!ok) {
      reason_ = has_budget_all() ? "singular" : "budget";
      return false;
    }
    for (auto& e : errors_) e.clear();
    return true;
  }

  // Fresh coordinate pattern around the incumbent for one element. Returns
  // false when the budget runs out or the new set is unusable.
  bool rebuild_element(std::size_t i) {
    const Vector xi = block(state_.x, i);
    const std::size_t ni = problem_.elements[i].dimension();
    InitialSet init = init_set(xi, state_.radii[i], clamp_capacity(options_.capacity, ni));
    init.set.set_value(0, state_.raw[i]);
    for (std::size_t j : init.pending) {
      if (j == 0) continue;
      if (!has_budget(i)) return false;
      const double v = evaluate_element(problem_, i, init.set.point(j), state_.ledger);
      if (!std::isfinite(v)) return false;
      init.set.set_value(j, v);
    }
    try {
      QuadraticModel model = build_initial_model(init.set);
      state_.elements[i].set = std::move(init.set);
      state_.elements[i].model = std::move(model);
    } catch (const InterpolationError&) {
      return false;
    }
    errors_[i].clear();
    return true;
  }

  // Recovery after a singular interpolation system in element i.
  bool recover(std::size_t i, const std::string& where) {
    event("singular", where + " element=" + std::to_string(i));
    if (rebuild_element(i)) return true;
    if (!has_budget(i)) {
      reason_ = "budget";
      return false;
    }
    return restart_or_stop("singular");
  }

  bool update_element(std::size_t i, const Vector& point, double value, std::size_t drop) {
    auto& el = state_.elements[i];
    const UpdateStatus status = apply_update(el.set, el.model, point, value, drop);
    if (status != UpdateStatus::kBreakdown) return true;
    return recover(i, "update");
  }

  std::optional<GeometryStep> plan_geometry(std::size_t i) {
    auto& el = state_.elements[i];
    const Vector xi = block(state_.x, i);
    if (!geometry_improvement_needed(el.set, xi, state_.radii[i])) return std::nullopt;
    auto step = geometry_step(el.set, xi, state_.radii[i]);
    if (step || el.set.base() == xi) return step;
    // Retry in a freshly factorized frame centred at the incumbent.
    if (!el.set.shift_base(xi)) return std::nullopt;
    el.model.recenter(xi);
    return geometry_step(el.set, xi, state_.radii[i]);
  }

  void iterate() {
    if (options_.max_iterations > 0 && state_.iteration >= options_.max_iterations) {
      reason_ = "max_iterations";
      return;
    }
    ++state_.iteration;
    IterationRecord rec;
    rec.iteration = state_.iteration;
    rec.rho = state_.rho;

    const CylinderRegion reg = region();
    std::vector<QuadraticModel> models;
    for (const auto& el : state_.elements) models.push_back(el.model);
    const SubproblemObjective objective = compose_model_eval(problem_, models, state_.x);
    const SubproblemResult sub = solve_subproblem(objective, reg, reg.truncation_radius(), options_.subproblem);
    const Vector& s = sub.step;

    std::vector<double> norms(q_);
    for (std::size_t i = 0; i < q_; ++i) norms[i] = project_point(s, problem_.elements[i].index_set).norm();
    const double step_norm = s.norm();
    const double longest = options_.structured ? *std::max_element(norms.begin(), norms.end()) : step_norm;
    rec.step_norm = step_norm;

    std::vector<std::optional<GeometryStep>> plans(q_);
    bool stop = false;
    if (longest <= 0.5 * state_.rho) {
      rec.kind = "short";
      rec.ratio = std::numeric_limits<double>::quiet_NaN();
      bool any = false;
      for (std::size_t i = 0; i < q_; ++i) {
        state_.radii[i] = std::max(0.5 * state_.radii[i], state_.rho);
        if (!model_accurate(i)) plans[i] = plan_geometry(i);
        any = any || plans[i].has_value();
      }
      ++state_.short_steps;
      if (state_.short_steps >= options_.short_step_limit || !any) {
        std::fill(plans.begin(), plans.end(), std::nullopt);
        stop = !reduce_rho(rec);
      }
    } else {
      rec.kind = "long";
      state_.short_steps = 0;
      if (!has_budget_all()) {
        reason_ = "budget";
        return;
      }
      const Vector x_hat = state_.x + s;
      const FullEvaluation fe = evaluate_full(problem_, x_hat, state_.ledger);

      std::vector<double> dm(q_), df(q_), ri(q_);
      for (std::size_t i = 0; i < q_; ++i) {
        const auto& m = state_.elements[i].model;
        const Vector xk = block(state_.x, i);
        const Vector xh = block(x_hat, i);
        const double mh = m.value(xh);
        dm[i] = element_term(i, m.value(xk)) - element_term(i, mh);
        df[i] = std::isfinite(fe.raw[i]) ? element_term(i, state_.raw[i]) - element_term(i, fe.raw[i]) : -kInf;
        if (std::isfinite(fe.raw[i])) record_error(i, std::abs(fe.raw[i] - mh));
        ri[i] = reduction_ratio(df[i], dm[i]);
      }
      const double model_reduction = sub.initial_value - sub.value;
      const double actual_reduction = state_.f - fe.value;
      const bool negligible = std::abs(model_reduction) <= 1e-14 * (1.0 + std::abs(sub.initial_value));
      double r;
      if (!fe.finite || !std::isfinite(fe.value)) {
        r = -kInf;
      } else if (negligible) {
        // Negligible predicted decrease: no global credit, element tests decide.
        r = actual_reduction > 0.0 ? 0.0 : -kInf;
      } else {
        r = actual_reduction / model_reduction;
      }
      rec.ratio = r;

      // Selective model updates.
      std::vector<std::optional<SelectiveCandidate>> candidates(q_);
      if (fe.finite) {
        for (std::size_t i = 0; i < q_; ++i) {
          if (!(norms[i] > 0.0)) continue;
          candidates[i] = selective_candidate(state_.elements[i].set, block(state_.x, i), block(x_hat, i), norms[i],
                                              std::max(0.1 * state_.radii[i], state_.rho), state_.rho);
        }
      }
      rec.accepted.assign(q_, 0);
      for (std::size_t i : select_updates(candidates, options_.xi)) {
        rec.accepted[i] = 1;
        if (!update_element(i, block(x_hat, i), fe.raw[i], candidates[i]->drop)) {
          stop = true;
          break;
        }
      }

      if (!stop) {
        IterationScore sc = score(dm, df, ri, model_reduction, r, state_.radii, state_.rho, options_.radius);
        std::vector<double> step_norms = norms;
        if (!options_.structured) {
          for (auto& t : sc.total) t = 2 * sc.global;
          std::fill(step_norms.begin(), step_norms.end(), step_norm);
        }
        state_.radii = update_radii(sc, state_.radii, step_norms, state_.rho, options_.radius);
        rec.global_score = sc.global;
        rec.scores = sc.total;

        if (fe.value < state_.f) {
          state_.x = x_hat;
          state_.f = fe.value;
          state_.raw = fe.raw;
          note_progress();
        }

        if (r <= 0.1) {
          const bool radii_at_floor = std::all_of(state_.radii.begin(), state_.radii.end(),
                                                  [&](double d) { return d <= state_.rho; });
          bool any = false;
          if (!(negligible && radii_at_floor)) {
            for (std::size_t i = 0; i < q_; ++i) {
              plans[i] = plan_geometry(i);
              any = any || plans[i].has_value();
            }
          }
          if (!any && radii_at_floor) stop = !reduce_rho(rec);
        }
      }
    }

    if (!stop) stop = !geometry_phase(plans, rec);
    if (!stop) stop = !maybe_shift_bases();
    rec.radii = state_.radii;
    rec.f = state_.f;
    if (options_.record_iterations) record_.history.push_back(std::move(rec));
    if (stop) return;
    if (!has_budget_all() && state_.ledger.worst() >= budget_) {
      reason_ = "budget";
      return;
    }
    run_callback();
  }

  bool geometry_phase(const std::vector<std::optional<GeometryStep>>& plans, IterationRecord& rec) {
    const std::size_t restarts = state_.restarts_used;
    for (std::size_t i = 0; i < q_; ++i) {
      if (!plans[i]) continue;
      if (!has_budget(i)) {
        reason_ = "budget";
        return false;
      }
      const double v = evaluate_element(problem_, i, plans[i]->point, state_.ledger);
      ++rec.geometry_steps;
      if (!std::isfinite(v)) continue;
      if (!update_element(i, plans[i]->point, v, plans[i]->drop)) return false;
      if (state_.restarts_used != restarts) break;
    }
    return true;
  }

  bool maybe_shift_bases() {
    for (std::size_t i = 0; i < q_; ++i) {
      auto& el = state_.elements[i];
      const Vector xi = block(state_.x, i);
      double spread = 0.0;
      for (std::size_t j = 0; j < el.set.size(); ++j) spread = std::max(spread, el.set.distance(j, xi));
      if ((xi - el.set.base()).norm() <= kBaseShiftRatio * spread) continue;
      if (!el.set.shift_base(xi)) {
        if (!recover(i, "shift")) return false;
        continue;
      }
      el.model.recenter(xi);
    }
    return true;
  }

  void run_callback() {
    if (!callback_) return;
    std::vector<double> weights;
    for (const auto& e : problem_.elements) weights.push_back(e.weight);
    IterationView view;
    view.iteration = state_.iteration;
    view.x = &state_.x;
    view.f = state_.f;
    view.rho = state_.rho;
    view.radii = &state_.radii;
    view.ledger = &state_.ledger;
    view.weights = &weights;
    const CallbackResult result = callback_(view);
    if (result.update) {
      update_weights(problem_, state_, *result.update);
      std::string detail = result.update->label.empty() ? "weights" : result.update->label;
      if (!result.update->weights.empty()) {
        detail += " w=[";
        for (std::size_t i = 0; i < result.update->weights.size(); ++i)
          detail += (i ? "," : "") + format_number(result.update->weights[i]);
        detail += "]";
      }
      if (!result.update->transforms.empty()) detail += " transforms";
      event("update_weights", detail);
    }
    if (result.stop) reason_ = "callback";
  }

  RunRecord finish() {
    record_.best_x.assign(state_.x.data(), state_.x.data() + state_.x.size());
    record_.best_f = state_.f;
    record_.evaluations = state_.ledger.counts();
    record_.t_wst = state_.ledger.worst();
    record_.t_avg = state_.ledger.average();
    record_.reason = reason_;
    record_.iterations = state_.iteration;
    record_.restarts = state_.restarts_used;
    record_.final_rho = state_.rho;
    return record_;
  }

  ProblemSpec problem_;
  SolverOptions options_;
  IterationCallback callback_;
  std::mt19937_64 rng_;
  Vector x_start_;
  std::size_t n_ = 0;
  std::size_t q_ = 0;
  std::size_t budget_ = 0;
  SolverState state_;
  RunRecord record_;
  std::string reason_;
  std::vector<std::deque<double>> errors_;
};

}  // namespace

RunRecord minimize(const ProblemSpec& problem, const Vector& x_start, const SolverOptions& options,
                   const IterationCallback& callback) {
  Driver driver(problem, x_start, options, callback);
  return driver.run();
}

}  // namespace psopt
