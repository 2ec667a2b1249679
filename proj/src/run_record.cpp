#include "psopt/run_record.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace psopt {

namespace {

using nlohmann::ordered_json;

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

double read_number(const ordered_json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("unexpected string in numeric field: " + s);
  }
  return j.get<double>();
}

ordered_json numbers(const std::vector<double>& v) {
  ordered_json out = ordered_json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

std::vector<double> read_numbers(const ordered_json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(read_number(x));
  return out;
}

}  // namespace

std::size_t RunRecord::max_element_dimension() const {
  std::size_t m = 0;
  for (auto d : element_dims) m = std::max(m, d);
  return m;
}

std::string RunRecord::to_json(int indent) const {
  ordered_json j;
  j["problem"] = problem;
  j["mode"] = mode;
  j["n"] = n;
  j["q"] = q;
  j["element_dims"] = element_dims;
  j["x_start"] = numbers(x_start);
  j["f_start"] = number(f_start);
  j["best_x"] = numbers(best_x);
  j["best_f"] = number(best_f);
  j["evaluations"] = evaluations;
  j["t_wst"] = t_wst;
  j["t_avg"] = t_avg;
  j["reason"] = reason;
  j["iterations"] = iterations;
  j["restarts"] = restarts;
  j["final_rho"] = number(final_rho);

  ordered_json traj = ordered_json::array();
  for (const auto& p : trajectory) traj.push_back(ordered_json::array({p.t_wst, p.t_avg, number(p.f_best)}));
  j["trajectory"] = std::move(traj);

  ordered_json hist = ordered_json::array();
  for (const auto& it : history) {
    ordered_json h;
    h["k"] = it.iteration;
    h["kind"] = it.kind;
    h["rho"] = number(it.rho);
    h["radii"] = numbers(it.radii);
    h["step_norm"] = number(it.step_norm);
    h["f"] = number(it.f);
    h["ratio"] = number(it.ratio);
    h["global_score"] = it.global_score;
    h["scores"] = it.scores;
    h["accepted"] = it.accepted;
    h["geometry_steps"] = it.geometry_steps;
    h["rho_reduced"] = it.rho_reduced;
    hist.push_back(std::move(h));
  }
  j["history"] = std::move(hist);

  ordered_json ev = ordered_json::array();
  for (const auto& e : events) ev.push_back({{"k", e.iteration}, {"kind", e.kind}, {"detail", e.detail}});
  j["events"] = std::move(ev);
  return j.dump(indent);
}

RunRecord RunRecord::from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  RunRecord r;
  r.problem = j.at("problem").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.n = j.at("n").get<std::size_t>();
  r.q = j.at("q").get<std::size_t>();
  r.element_dims = j.at("element_dims").get<std::vector<std::size_t>>();
  r.x_start = read_numbers(j.at("x_start"));
  r.f_start = read_number(j.at("f_start"));
  r.best_x = read_numbers(j.at("best_x"));
  r.best_f = read_number(j.at("best_f"));
  r.evaluations = j.at("evaluations").get<std::vector<std::size_t>>();
  r.t_wst = j.at("t_wst").get<std::size_t>();
  r.t_avg = j.at("t_avg").get<double>();
  r.reason = j.at("reason").get<std::string>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.restarts = j.value("restarts", std::size_t{0});
  r.final_rho = read_number(j.at("final_rho"));
  for (const auto& p : j.at("trajectory")) {
    r.trajectory.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>(), read_number(p.at(2))});
  }
  if (j.contains("history")) {
    for (const auto& h : j.at("history")) {
      IterationRecord it;
      it.iteration = h.at("k").get<std::size_t>();
      it.kind = h.at("kind").get<std::string>();
      it.rho = read_number(h.at("rho"));
      it.radii = read_numbers(h.at("radii"));
      it.step_norm = read_number(h.at("step_norm"));
      it.f = read_number(h.at("f"));
      it.ratio = read_number(h.at("ratio"));
      it.global_score = h.at("global_score").get<int>();
      it.scores = h.at("scores").get<std::vector<int>>();
      it.accepted = h.at("accepted").get<std::vector<int>>();
      it.geometry_steps = h.at("geometry_steps").get<std::size_t>();
      it.rho_reduced = h.at("rho_reduced").get<bool>();
      r.history.push_back(std::move(it));
    }
  }
  if (j.contains("events")) {
    for (const auto& e : j.at("events")) {
      r.events.push_back({e.at("k").get<std::size_t>(), e.at("kind").get<std::string>(),
                          e.at("detail").get<std::string>()});
    }
  }
  return r;
}

}  // namespace psopt
