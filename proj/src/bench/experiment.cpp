#include "psopt/bench/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace psopt::bench {

namespace fs = std::filesystem;

const std::vector<std::string>& known_modes() {
  static const std::vector<std::string> modes = {"structured", "single", "unstructured"};
  return modes;
}

void ExperimentConfig::validate() const {
  if (problems.empty()) throw ConfigError("no problems selected");
  if (modes.empty()) throw ConfigError("no modes selected");
  for (const auto& m : modes) {
    if (std::find(known_modes().begin(), known_modes().end(), m) == known_modes().end())
      throw ConfigError("unknown mode '" + m + "'");
  }
  if (eps.empty()) throw ConfigError("no tolerances given");
  for (double e : eps) {
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("tolerances must lie in (0, 1]");
  }
  if (!(budget_mult > 0.0) || !std::isfinite(budget_mult)) throw ConfigError("budget multiplier must be positive");
  options.validate();
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

RunRecord run_mode(const CorpusProblem& problem, const std::string& mode, const SolverOptions& options) {
  SolverOptions opts = options;
  ProblemSpec spec = problem.spec;
  if (mode == "single") {
    spec = make_single_element(problem.spec);
  } else if (mode == "unstructured") {
    opts.structured = false;
  } else if (mode != "structured") {
    throw ConfigError("unknown mode '" + mode + "'");
  }
  RunRecord record;
  try {
    record = minimize(spec, problem.start, opts);
  } catch (const std::exception& e) {
    record = RunRecord{};
    record.n = problem.n;
    record.q = spec.element_count();
    for (const auto& el : spec.elements) record.element_dims.push_back(el.dimension());
    record.x_start.assign(problem.start.data(), problem.start.data() + problem.start.size());
    record.f_start = std::numeric_limits<double>::quiet_NaN();
    record.best_f = kNever;
    record.final_rho = std::numeric_limits<double>::quiet_NaN();
    record.reason = std::string("error: ") + e.what();
  }
  record.problem = problem.name;
  record.mode = mode;
  return record;
}

namespace {

struct ProblemRuns {
  std::string name;
  std::map<std::string, const RunRecord*> by_mode;
};

const RunRecord* structure_source(const ProblemRuns& p) {
  for (const char* m : {"structured", "unstructured"}) {
    auto it = p.by_mode.find(m);
    if (it != p.by_mode.end() && !it->second->element_dims.empty()) return it->second;
  }
  return p.by_mode.begin()->second;
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k > 0) out += ',';
    out += cells[k];
  }
  out += '\n';
  return out;
}

int mode_rank(const std::string& mode) {
  if (mode == "structured") return 0;
  if (mode == "single") return 1;
  if (mode == "unstructured") return 2;
  return 3;
}

}  // namespace

ProfileReport build_report(const std::vector<RunRecord>& runs, const std::vector<double>& eps) {
  std::vector<ProblemRuns> problems;
  std::vector<std::string> modes;
  for (const auto& r : runs) {
    auto it = std::find_if(problems.begin(), problems.end(), [&](const ProblemRuns& p) { return p.name == r.problem; });
    if (it == problems.end()) {
      problems.push_back({r.problem, {}});
      it = problems.end() - 1;
    }
    if (it->by_mode.count(r.mode)) throw ConfigError("duplicate run for " + r.problem + "/" + r.mode);
    it->by_mode[r.mode] = &r;
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
  }
  std::sort(problems.begin(), problems.end(),
            [](const ProblemRuns& a, const ProblemRuns& b) { return a.name < b.name; });
  std::sort(modes.begin(), modes.end(), [](const std::string& a, const std::string& b) {
    return std::pair(mode_rank(a), a) < std::pair(mode_rank(b), b);
  });

  ProfileReport report;
  std::string perf = "eps,mode,alpha,value\n";
  std::string data = "eps,mode,alpha,value\n";
  std::string speed = "eps,alpha,value\n";
  std::string summary = "problem,mode,eps,t_wst,t_avg,t_single,n,q,max_ni,c_p\n";

  for (double e : eps) {
    ProfileTable table;
    table.solvers = modes;
    std::vector<SpeedupEntry> speedups;
    for (const auto& p : problems) {
      const RunRecord* src = structure_source(p);
      const std::size_t n = src->n;
      const std::size_t q = src->element_dims.size();
      const std::size_t max_ni = std::max<std::size_t>(src->max_element_dimension(), 1);

      double f_best = kNever;
      double f_start = std::numeric_limits<double>::quiet_NaN();
      for (const auto& [mode, r] : p.by_mode) {
        if (std::isfinite(r->best_f)) f_best = std::min(f_best, r->best_f);
        if (std::isnan(f_start) && std::isfinite(r->f_start)) f_start = r->f_start;
      }

      std::map<std::string, ConvergencePoint> conv;
      for (const auto& [mode, r] : p.by_mode) {
        if (std::isfinite(f_best) && std::isfinite(f_start))
          conv[mode] = convergence_point(r->trajectory, e, f_start, f_best);
        else
          conv[mode] = ConvergencePoint{};
      }

      table.problems.push_back(p.name);
      table.dims.push_back(n);
      std::vector<double> row;
      for (const auto& m : modes) row.push_back(conv.count(m) ? conv[m].t_wst : kNever);
      table.cost.push_back(std::move(row));

      const bool has_single = p.by_mode.count("single") > 0;
      const double t_single = has_single ? conv["single"].t_wst : kNever;
      if (has_single && p.by_mode.count("structured"))
        speedups.push_back({p.name, conv["structured"].t_wst, t_single, n, max_ni});

      for (const auto& m : modes) {
        if (!p.by_mode.count(m)) continue;
        SummaryRow row;
        row.problem = p.name;
        row.mode = m;
        row.eps = e;
        row.t_wst = conv[m].t_wst;
        row.t_avg = conv[m].t_avg;
        row.t_single = t_single;
        row.n = n;
        row.q = q;
        row.max_ni = max_ni;
        row.c_p = (has_single && m != "single") ? relative_speedup(row.t_wst, t_single, n, max_ni)
                                                : std::numeric_limits<double>::quiet_NaN();
        summary += join_row({row.problem, row.mode, format_value(e), format_value(row.t_wst),
                             format_value(row.t_avg), format_value(row.t_single), std::to_string(n),
                             std::to_string(q), std::to_string(max_ni), format_value(row.c_p)});
        report.summary.push_back(row);
      }
    }

    const auto perf_grid = ratio_grid();
    for (const auto& c : performance_profile(table, perf_grid)) {
      for (std::size_t k = 0; k < perf_grid.size(); ++k)
        perf += join_row({format_value(e), c.solver, format_value(perf_grid[k]), format_value(c.values[k])});
    }
    const auto d_grid = data_grid();
    for (const auto& c : data_profile(table, d_grid)) {
      for (std::size_t k = 0; k < d_grid.size(); ++k)
        data += join_row({format_value(e), c.solver, format_value(d_grid[k]), format_value(c.values[k])});
    }
    if (!speedups.empty()) {
      auto su_grid = speedup_grid();
      su_grid.push_back(kNever);
      const auto su = speedup_profile(speedups, su_grid);
      for (std::size_t k = 0; k < su_grid.size(); ++k)
        speed += join_row({format_value(e), format_value(su_grid[k]), format_value(su.values[k])});
    }
  }

  report.performance_csv = std::move(perf);
  report.data_csv = std::move(data);
  report.speedup_csv = std::move(speed);
  report.summary_csv = std::move(summary);
  return report;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<std::string> write_report(const std::string& dir, const ProfileReport& report) {
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, const std::string*>> files = {
      {"performance_profile.csv", &report.performance_csv},
      {"data_profile.csv", &report.data_csv},
      {"speedup_profile.csv", &report.speedup_csv},
      {"summary.csv", &report.summary_csv},
  };
  std::vector<std::string> written;
  for (const auto& [name, text] : files) {
    const fs::path path = fs::path(dir) / name;
    write_file(path, *text);
    written.push_back(path.string());
  }
  return written;
}

std::vector<std::string> write_outputs(const std::string& dir, const std::vector<RunRecord>& runs,
                                       const ProfileReport& report) {
  const fs::path run_dir = fs::path(dir) / "runs";
  fs::create_directories(run_dir);
  std::vector<std::string> written;
  for (const auto& r : runs) {
    const fs::path path = run_dir / (r.problem + "__" + r.mode + ".json");
    write_file(path, r.to_json() + "\n");
    written.push_back(path.string());
  }
  for (auto& f : write_report(dir, report)) written.push_back(std::move(f));
  return written;
}

std::vector<RunRecord> load_runs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<RunRecord> runs;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    runs.push_back(RunRecord::from_json(buf.str()));
  }
  return runs;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  for (const auto& problem : config.problems) {
    SolverOptions opts = config.options;
    opts.seed = config.seed;
    opts.record_iterations = config.record_iterations;
    opts.max_element_evals =
        static_cast<std::size_t>(std::ceil(config.budget_mult * static_cast<double>(opts.budget(problem.n))));
    for (const auto& mode : config.modes) result.runs.push_back(run_mode(problem, mode, opts));
  }
  result.report = build_report(result.runs, config.eps);
  if (!config.out_dir.empty()) result.files = write_outputs(config.out_dir, result.runs, result.report);
  return result;
}

}  // namespace psopt::bench
