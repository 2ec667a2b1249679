#include "psopt/bench/corpus.hpp"
#include "psopt/bench/experiment.hpp"
#include "psopt/bench/problem_file.hpp"
#include "psopt/bench/profiles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace psopt;
using namespace psopt::bench;

namespace {

constexpr double inf = kNever;

ProfileTable fixture() {
  ProfileTable t;
  t.problems = {"p1", "p2", "p3"};
  t.solvers = {"A", "B"};
  t.dims = {1, 2, 3};
  t.cost = {{10, 20}, {inf, 30}, {8, 4}};
  return t;
}

double value_at(const std::vector<ProfileCurve>& curves, std::size_t s, const std::vector<double>& alphas,
                double a) {
  for (std::size_t k = 0; k < alphas.size(); ++k)
    if (alphas[k] == a) return curves[s].values[k];
  ADD_FAILURE() << "alpha not in grid";
  return -1;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("psopt_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Converged, Examples) {
  const std::vector<TrajectoryPoint> traj = {{0, 0.0, 10.0}, {12, 10.0, 5.0}, {37, 30.0, 0.9}, {50, 41.0, 0.1}};
  EXPECT_EQ(converged(traj, 1.0, 10.0, 0.0), 0.0);
  EXPECT_EQ(converged(traj, 0.1, 10.0, 0.0), 37.0);
  EXPECT_EQ(converged(traj, 1e-3, 10.0, 0.0), inf);
  EXPECT_EQ(convergence_point(traj, 0.1, 10.0, 0.0).t_avg, 30.0);
}

TEST(Converged, MonotoneInEps) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TrajectoryPoint> traj;
    double f = 10.0;
    std::size_t t = 0;
    for (int k = 0; k < 30; ++k) {
      traj.push_back({t, static_cast<double>(t), f});
      t += 1 + static_cast<std::size_t>(10 * u(rng));
      f *= u(rng);
    }
    double prev = inf;
    for (double eps : {1e-12, 1e-9, 1e-6, 1e-3, 1e-1, 0.5, 1.0}) {
      const double c = converged(traj, eps, 10.0, 0.0);
      EXPECT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(PerformanceProfile, HandCounts) {
  const auto t = fixture();
  const auto r = performance_ratios(t);
  EXPECT_EQ(r[0], (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(r[1][0], inf);
  EXPECT_EQ(r[2], (std::vector<double>{2.0, 1.0}));
  const std::vector<double> alphas = {1.0, 1.5, 2.0, 1e9};
  const auto c = performance_profile(t, alphas);
  EXPECT_EQ(c[0].values, (std::vector<double>{1.0 / 3, 1.0 / 3, 2.0 / 3, 2.0 / 3}));
  EXPECT_EQ(c[1].values, (std::vector<double>{2.0 / 3, 2.0 / 3, 1.0, 1.0}));
}

TEST(PerformanceProfile, SingleSolverAndAllFailures) {
  ProfileTable t;
  t.problems = {"a", "b", "c", "d"};
  t.solvers = {"S"};
  t.dims = {1, 1, 1, 1};
  t.cost = {{5}, {inf}, {7}, {9}};
  EXPECT_EQ(performance_profile(t, {1.0})[0].values[0], 0.75);
  t.cost = {{inf}, {inf}, {inf}, {inf}};
  const auto none = performance_profile(t, ratio_grid());
  for (double v : none[0].values) EXPECT_EQ(v, 0.0);
}

TEST(PerformanceProfile, TwiceAsFast) {
  ProfileTable t;
  t.problems = {"a", "b"};
  t.solvers = {"A", "B"};
  t.dims = {2, 2};
  t.cost = {{10, 20}, {3, 6}};
  const auto c = performance_profile(t, {1.0, 1.99, 2.0});
  EXPECT_EQ(c[0].values, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(c[1].values, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(DataProfile, HandCounts) {
  const auto t = fixture();
  const std::vector<double> alphas = {0, 1, 2, 5, 10};
  const auto c = data_profile(t, alphas);
  EXPECT_EQ(c[0].values, (std::vector<double>{0, 0, 1.0 / 3, 2.0 / 3, 2.0 / 3}));
  EXPECT_EQ(c[1].values, (std::vector<double>{0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0}));
  ProfileTable exact;
  exact.problems = {"a"};
  exact.solvers = {"S"};
  exact.dims = {4};
  exact.cost = {{5}};
  const auto e = data_profile(exact, {0.999, 1.0});
  EXPECT_EQ(value_at(e, 0, {0.999, 1.0}, 0.999), 0.0);
  EXPECT_EQ(value_at(e, 0, {0.999, 1.0}, 1.0), 1.0);
}

TEST(ProfileTable, RejectsInvalidCosts) {
  auto t = fixture();
  t.cost[0][0] = 0.5;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = fixture();
  t.cost[1].pop_back();
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(Profiles, FuzzMonotoneAndInRange) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    ProfileTable t;
    const std::size_t np = 1 + static_cast<std::size_t>(trial) % 9;
    const std::size_t ns = 1 + static_cast<std::size_t>(trial) % 4;
    for (std::size_t s = 0; s < ns; ++s) t.solvers.push_back("s" + std::to_string(s));
    for (std::size_t p = 0; p < np; ++p) {
      t.problems.push_back("p" + std::to_string(p));
      t.dims.push_back(1 + static_cast<std::size_t>(20 * u(rng)));
      std::vector<double> row;
      for (std::size_t s = 0; s < ns; ++s) row.push_back(u(rng) < 0.2 ? inf : std::floor(1 + 500 * u(rng)));
      t.cost.push_back(row);
    }
    for (const auto& curves : {performance_profile(t, ratio_grid()), data_profile(t, data_grid())}) {
      for (const auto& c : curves) {
        for (std::size_t k = 0; k < c.values.size(); ++k) {
          EXPECT_GE(c.values[k], 0.0);
          EXPECT_LE(c.values[k], 1.0);
          if (k) {
            EXPECT_GE(c.values[k], c.values[k - 1]);
          }
        }
      }
    }
    EXPECT_EQ(data_profile(t, {0.0})[0].values[0], 0.0);
  }
}

TEST(Speedup, RelativeSpeedupConventions) {
  EXPECT_EQ(relative_speedup(40, 400, 20, 2), 1.0);
  EXPECT_EQ(relative_speedup(10, 200, 20, 1), 1.0);
  EXPECT_EQ(relative_speedup(10, inf, 20, 1), inf);
  EXPECT_EQ(relative_speedup(inf, 50, 20, 1), 0.0);
  EXPECT_TRUE(std::isnan(relative_speedup(inf, inf, 20, 1)));
  EXPECT_THROW(relative_speedup(1, 1, 0, 1), std::invalid_argument);
}

TEST(Speedup, HandCounts) {
  const std::vector<SpeedupEntry> entries = {
      {"a", 40, 400, 20, 2},   // 1
      {"b", 10, inf, 10, 1},   // +inf
      {"c", inf, 50, 10, 1},   // 0
      {"d", inf, inf, 10, 1},  // excluded
      {"e", 20, 100, 10, 1},   // 0.5
      {"f", 10, 300, 10, 1},   // 3
  };
  const std::vector<double> alphas = {0.0, 0.5, 0.75, 1.0, 2.0, 3.0, inf};
  const auto su = speedup_profile(entries, alphas);
  EXPECT_EQ(su.excluded, 1u);
  EXPECT_EQ(su.c[0], 1.0);
  EXPECT_EQ(su.c[4], 0.5);
  EXPECT_TRUE(std::isnan(su.c[3]));
  EXPECT_EQ(su.values, (std::vector<double>{2.0 / 6, 1.0 / 6, 0.0, 1.0 / 6, 1.0 / 6, 2.0 / 6, 3.0 / 6}));
  EXPECT_DOUBLE_EQ(su.above + su.below + 1.0 / 6, 1.0);
}

TEST(Speedup, FuzzSplitIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SpeedupEntry> entries;
    const std::size_t np = 1 + static_cast<std::size_t>(trial) % 12;
    for (std::size_t p = 0; p < np; ++p) {
      const double tw = u(rng) < 0.2 ? inf : std::floor(1 + 300 * u(rng));
      const double ts = u(rng) < 0.2 ? inf : std::floor(1 + 3000 * u(rng));
      entries.push_back({"p", tw, ts, 2 + static_cast<std::size_t>(20 * u(rng)), 1 + static_cast<std::size_t>(2 * u(rng))});
    }
    const auto su = speedup_profile(entries, speedup_grid());
    EXPECT_NEAR(su.above + su.below + static_cast<double>(su.excluded) / static_cast<double>(np), 1.0, 1e-12);
    for (std::size_t k = 0; k < su.values.size(); ++k) {
      EXPECT_GE(su.values[k], 0.0);
      EXPECT_LE(su.values[k], 1.0);
      // Above 1 the curve accumulates upward; below 1 it accumulates downward.
      if (k && su.alphas[k - 1] >= 1.0) {
        EXPECT_GE(su.values[k], su.values[k - 1]);
      }
      if (k && su.alphas[k] < 1.0) {
        EXPECT_LE(su.values[k], su.values[k - 1]);
      }
    }
  }
}

TEST(Grids, Shapes) {
  EXPECT_EQ(ratio_grid().front(), 1.0);
  EXPECT_EQ(ratio_grid().back(), 1024.0);
  EXPECT_EQ(data_grid().front(), 0.0);
  EXPECT_EQ(speedup_grid().front(), 0.0);
  EXPECT_EQ(speedup_grid()[17], 1.0);
}

TEST(Corpus, KnownMinimaAndCoverage) {
  const auto all = corpus();
  EXPECT_GE(all.size(), 8u);
  std::set<std::string> names;
  for (const auto& p : all) {
    names.insert(p.name);
    EXPECT_NO_THROW(p.spec.validate());
    EXPECT_EQ(static_cast<std::size_t>(p.start.size()), p.n);
    EXPECT_GE(p.n, 6u);
    EXPECT_LE(p.n, 30u);
    if (p.reference_min && p.minimizer) {
      EvaluationLedger ledger(p.spec.element_count());
      EXPECT_NEAR(evaluate_full(p.spec, *p.minimizer, ledger).value, *p.reference_min, 1e-10) << p.name;
    }
  }
  EXPECT_EQ(names.size(), all.size());
}

TEST(Corpus, DirectFormulaEvaluation) {
  const auto rosen = make_problem("chained_rosenbrock", 6);
  EvaluationLedger l1(rosen.spec.element_count());
  EXPECT_EQ(evaluate_full(rosen.spec, Vector::Ones(6), l1).value, 0.0);

  const auto quartic = make_problem("separable_quartic", 20);
  Vector x(20);
  for (Eigen::Index i = 0; i < 20; ++i) x[i] = static_cast<double>(i + 1) / 20.0;
  EvaluationLedger l2(20);
  EXPECT_EQ(evaluate_full(quartic.spec, x, l2).value, 0.0);

  // Arrowhead n = 3 at the all-ones start: two elements, each (1 + 1)^2 - 4 + 3 = 3.
  const auto arrow = make_problem("arrowhead", 3);
  EvaluationLedger l3(arrow.spec.element_count());
  EXPECT_EQ(evaluate_full(arrow.spec, arrow.start, l3).value, 6.0);
}

TEST(Corpus, UnknownOrInadmissible) {
  EXPECT_THROW(make_problem("no_such_problem"), StructureError);
  EXPECT_THROW(make_problem("extended_powell", 6), StructureError);
}

TEST(ProblemFile, ParsesDocumentedExample) {
  const std::string text = R"({
    "name": "rosen4", "dimension": 4, "start": [-1.2, 1.0, -1.2, 1.0], "reference_min": 0.0,
    "elements": [
      {"indices": [0, 1], "formula": "rosenbrock"},
      {"indices": [1, 2], "formula": "rosenbrock", "params": {"a": 100}},
      {"indices": [2, 3], "formula": "rosenbrock", "weight": 2.0, "transform": "square"}
    ]})";
  const auto p = parse_problem_file(text);
  EXPECT_EQ(p.name, "rosen4");
  EXPECT_EQ(p.n, 4u);
  EXPECT_EQ(p.spec.element_count(), 3u);
  EXPECT_EQ(p.spec.elements[2].weight, 2.0);
  EvaluationLedger ledger(3);
  EXPECT_EQ(evaluate_full(p.spec, Vector::Ones(4), ledger).value, 0.0);
  // (1 - 1)^2... element 0 at (-1.2, 1): 100 (1.44 - 1)^2 + 2.2^2
  EXPECT_NEAR(p.spec.elements[0].evaluator(Vector{{-1.2, 1.0}}), 100 * 0.44 * 0.44 + 2.2 * 2.2, 1e-12);
}

TEST(ProblemFile, FormulasWithParameters) {
  const auto p = parse_problem_file(R"({"dimension": 2, "elements": [
      {"indices": [0, 1], "formula": "shifted_square", "params": {"center": [1, 2], "scale": 3}},
      {"indices": [1], "formula": "quartic", "params": {"center": [0.5]}}]})");
  EXPECT_EQ(p.start, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(p.spec.elements[0].evaluator(Vector{{0.0, 0.0}}), 15.0);
  EXPECT_DOUBLE_EQ(p.spec.elements[1].evaluator(Vector{{1.5}}), 1.0);
}

TEST(ProblemFile, RejectsMalformedInput) {
  const std::vector<std::string> bad = {
      "not json",
      R"({"elements": [{"indices": [0], "formula": "quartic"}]})",
      R"({"dimension": 1, "elements": []})",
      R"({"dimension": 1, "extra": 1, "elements": [{"indices": [0], "formula": "quartic"}]})",
      R"({"dimension": 1, "elements": [{"indices": [0], "formula": "nope"}]})",
      R"({"dimension": 1, "elements": [{"indices": [1], "formula": "quartic"}]})",
      R"({"dimension": 2, "elements": [{"indices": [0], "formula": "quartic"}]})",
      R"({"dimension": 1, "elements": [{"indices": [0], "formula": "rosenbrock"}]})",
      R"({"dimension": 1, "elements": [{"indices": [0], "formula": "quartic", "params": {"center": [1, 2]}}]})",
      R"({"dimension": 1, "elements": [{"indices": [0], "formula": "quartic", "transform": "cube"}]})",
      R"({"dimension": 1, "start": [0, 0], "elements": [{"indices": [0], "formula": "quartic"}]})",
      R"({"dimension": 1, "elements": [{"indices": [0], "formula": "quartic", "colour": "red"}]})",
  };
  for (const auto& text : bad) EXPECT_THROW(parse_problem_file(text), StructureError) << text;
  EXPECT_THROW(load_problem_file("/nonexistent/problem.json"), StructureError);
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), ConfigError);
  c.problems.push_back(make_problem("separable_quadratic", 6));
  EXPECT_NO_THROW(c.validate());
  c.modes = {"fast"};
  EXPECT_THROW(c.validate(), ConfigError);
  c.modes = {"single"};
  c.budget_mult = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiment, OneProblemOneModeWritesFiles) {
  const auto dir = scratch_dir("one");
  ExperimentConfig c;
  c.problems.push_back(make_problem("separable_quadratic", 6));
  c.modes = {"structured"};
  c.out_dir = dir.string();
  const auto result = run_experiment(c);
  ASSERT_EQ(result.runs.size(), 1u);
  EXPECT_EQ(result.runs[0].mode, "structured");
  EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "separable_quadratic__structured.json"));
  for (const char* f : {"performance_profile.csv", "data_profile.csv", "speedup_profile.csv", "summary.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const std::string summary = read_file(dir / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "problem,mode,eps,t_wst,t_avg,t_single,n,q,max_ni,c_p");
  const auto loaded = load_runs((dir / "runs").string());
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].to_json(), result.runs[0].to_json());
  std::filesystem::remove_all(dir);
}

TEST(Experiment, RerunGivesIdenticalCsv) {
  ExperimentConfig c;
  c.problems.push_back(make_problem("separable_quartic", 6));
  c.problems.push_back(make_problem("arrowhead", 6));
  c.budget_mult = 0.2;
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  EXPECT_EQ(a.report.performance_csv, b.report.performance_csv);
  EXPECT_EQ(a.report.data_csv, b.report.data_csv);
  EXPECT_EQ(a.report.speedup_csv, b.report.speedup_csv);
  EXPECT_EQ(a.report.summary_csv, b.report.summary_csv);
}

TEST(Experiment, ReportFromStoredRuns) {
  RunRecord s, g;
  s.problem = g.problem = "toy";
  s.mode = "structured";
  g.mode = "single";
  s.n = g.n = 20;
  s.q = 20;
  g.q = 1;
  s.element_dims.assign(20, 1);
  g.element_dims = {20};
  s.f_start = g.f_start = 10.0;
  s.best_f = 0.0;
  g.best_f = 0.5;
  s.trajectory = {{3, 3.0, 10.0}, {40, 40.0, 0.0}};
  g.trajectory = {{21, 21.0, 10.0}, {800, 800.0, 0.5}};
  const auto rep = build_report({s, g}, {0.1});
  ASSERT_EQ(rep.summary.size(), 2u);
  const auto& row = rep.summary[0];
  EXPECT_EQ(row.mode, "structured");
  EXPECT_EQ(row.t_wst, 40.0);
  EXPECT_EQ(row.t_single, 800.0);
  EXPECT_EQ(row.max_ni, 1u);
  EXPECT_DOUBLE_EQ(row.c_p, (800.0 / 40.0) / 20.0);
  EXPECT_TRUE(std::isnan(rep.summary[1].c_p));
}

TEST(Experiment, ModeErrorsAreRecorded) {
  CorpusProblem p = make_problem("separable_quadratic", 6);
  p.start = Vector::Zero(3);
  const auto rec = run_mode(p, "structured", {});
  EXPECT_EQ(rec.reason.rfind("error:", 0), 0u);
}

TEST(FormatValue, NonFinite) {
  EXPECT_EQ(format_value(inf), "inf");
  EXPECT_EQ(format_value(-inf), "-inf");
  EXPECT_EQ(format_value(std::nan("")), "nan");
  EXPECT_EQ(format_value(0.25), "0.25");
}

TEST(RunRecordJson, RoundTrip) {
  const auto p = make_problem("tridia", 6);
  auto rec = minimize(p.spec, p.start);
  rec.final_rho = inf;
  const auto back = RunRecord::from_json(rec.to_json());
  EXPECT_EQ(back.to_json(), rec.to_json());
  EXPECT_EQ(back.final_rho, inf);
}
