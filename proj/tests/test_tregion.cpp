#include "psopt/tregion.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace psopt;

namespace {

struct RandomRegion {
  CylinderRegion region;
  Vector s;
};

std::vector<IndexSet> random_sets(std::mt19937_64& rng, std::size_t n, std::size_t q) {
  std::uniform_int_distribution<std::size_t> size_dist(1, std::min<std::size_t>(n, 4));
  std::vector<IndexSet> sets;
  for (std::size_t i = 0; i < q; ++i) {
    std::vector<std::size_t> all(n);
    for (std::size_t j = 0; j < n; ++j) all[j] = j;
    std::shuffle(all.begin(), all.end(), rng);
    IndexSet idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size_dist(rng)));
    std::sort(idx.begin(), idx.end());
    sets.push_back(idx);
  }
  return sets;
}

RandomRegion random_instance(std::mt19937_64& rng, std::size_t n_max, std::size_t q_max) {
  std::uniform_int_distribution<std::size_t> nd(1, n_max), qd(1, q_max);
  std::uniform_real_distribution<double> rd(0.1, 2.0);
  for (;;) {
    const std::size_t n = nd(rng);
    const std::size_t q = qd(rng);
    std::vector<double> radii(q);
    for (auto& r : radii) r = rd(rng);
    CylinderRegion region(n, random_sets(rng, n, q), radii);
    const Vector s = oracle::random_vector(rng, static_cast<Eigen::Index>(n), -4, 4);
    if (!region.contains(s, 0.0)) return {region, s};
  }
}

std::vector<std::size_t> top_group(const CylinderRegion& region, const Vector& s) {
  const double top = region.max_violation_ratio(s);
  std::vector<std::size_t> g;
  for (std::size_t i = 0; i < region.element_count(); ++i)
    if (std::abs(region.violation_ratio(s, i) - top) <= kRatioTieTolerance * top) g.push_back(i);
  return g;
}

bool in_group(const std::vector<std::size_t>& g, std::size_t i) { return std::find(g.begin(), g.end(), i) != g.end(); }

/// Either every member ratio equals 1 and the rest are at most 1, or some
/// non-member has joined the common ratio and the rest are at most it.
::testing::AssertionResult satisfies_shrink_optimality(const CylinderRegion& region, const std::vector<std::size_t>& g,
                                             const Vector& s_star, double tol) {
  const double u = region.violation_ratio(s_star, g.front());
  for (std::size_t i : g)
    if (std::abs(region.violation_ratio(s_star, i) - u) > tol * u)
      return ::testing::AssertionFailure() << "member ratios differ";
  if (std::abs(u - 1.0) <= tol) {
    for (std::size_t i = 0; i < region.element_count(); ++i)
      if (!in_group(g, i) && region.violation_ratio(s_star, i) > 1.0 + tol)
        return ::testing::AssertionFailure() << "terminal case with element " << i << " outside";
    return ::testing::AssertionSuccess();
  }
  bool joined = false;
  for (std::size_t i = 0; i < region.element_count(); ++i) {
    if (in_group(g, i)) continue;
    const double v = region.violation_ratio(s_star, i);
    if (v > u * (1 + tol)) return ::testing::AssertionFailure() << "element " << i << " above common ratio";
    if (std::abs(v - u) <= tol * u) joined = true;
  }
  if (!joined) return ::testing::AssertionFailure() << "no element joined at ratio " << u;
  return ::testing::AssertionSuccess();
}

/// KKT residual of x as the projection of s onto the region: s - x must be a
/// nonnegative combination of the outward normals of the active cylinders.
double kkt_residual(const CylinderRegion& region, const Vector& s, const Vector& x, double& min_multiplier) {
  std::vector<Vector> normals;
  for (std::size_t i = 0; i < region.element_count(); ++i) {
    if (region.violation_ratio(x, i) < 1.0 - 1e-7) continue;
    Vector nrm = Vector::Zero(x.size());
    for (std::size_t j : region.index_set(i)) nrm[static_cast<Eigen::Index>(j)] = x[static_cast<Eigen::Index>(j)];
    normals.push_back(nrm);
  }
  min_multiplier = 0.0;
  const Vector r = s - x;
  if (normals.empty()) return r.norm();
  Matrix A(x.size(), static_cast<Eigen::Index>(normals.size()));
  for (std::size_t k = 0; k < normals.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = normals[k];
  const Vector lambda = A.completeOrthogonalDecomposition().solve(r);
  min_multiplier = lambda.minCoeff();
  return (A * lambda - r).norm();
}

SubproblemObjective quadratic(const Vector& g, const Matrix& H) {
  SubproblemObjective obj;
  obj.evaluate = [g, H](const Vector& s, Vector& grad) {
    grad = g + H * s;
    return g.dot(s) + 0.5 * s.dot(H * s);
  };
  return obj;
}

Matrix random_spd(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix B = Matrix::NullaryExpr(n, n, [&]() { return std::uniform_real_distribution<double>(-1, 1)(rng); });
  return B * B.transpose() + 0.5 * Matrix::Identity(n, n);
}

}  // namespace

TEST(ViolationRatio, HandValues) {
  CylinderRegion region(3, {{0, 2}, {1, 2}}, {1.0, 1.0});
  EXPECT_EQ(region.violation_ratio(Vector::Zero(3), 0), 0.0);
  EXPECT_EQ(region.violation_ratio(Vector::Zero(3), 1), 0.0);
  EXPECT_DOUBLE_EQ(region.violation_ratio(Vector{{2.0, 0.0, 0.0}}, 0), 2.0);
  EXPECT_DOUBLE_EQ(region.violation_ratio(Vector{{3.0, 0.0, 2.0}}, 1), 2.0);
}

TEST(CylinderRegion, RejectsBadInput) {
  EXPECT_THROW(CylinderRegion(2, {{0, 2}}, {1.0}), StructureError);
  EXPECT_THROW(CylinderRegion(2, {{0, 1}}, {0.0}), ConfigError);
  EXPECT_THROW(CylinderRegion(2, {{0, 1}}, {1.0, 1.0}), StructureError);
}

TEST(Shrink, TerminalCase) {
  CylinderRegion region(3, {{0, 2}, {1, 2}}, {1.0, 1.0});
  const auto r = shrink(Vector{{2.0, 0.0, 0.0}}, region, {0});
  EXPECT_TRUE(r.joined.empty());
  EXPECT_LE((r.point - Vector{{1.0, 0.0, 0.0}}).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
}

TEST(Shrink, JoiningChain) {
  CylinderRegion region(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
  const auto first = shrink(Vector{{3.0, 0.0, 2.0}}, region, {0});
  EXPECT_LE((first.point - Vector{{2.0, 0.0, 2.0}}).norm(), 1e-14);
  ASSERT_EQ(first.joined, (std::vector<std::size_t>{1}));
  EXPECT_NEAR(first.ratio, 2.0, 1e-14);
  EXPECT_NEAR(region.violation_ratio(first.point, 0), 2.0, 1e-14);
  EXPECT_NEAR(region.violation_ratio(first.point, 1), 2.0, 1e-14);
  const auto second = shrink(first.point, region, {0, 1});
  EXPECT_TRUE(second.joined.empty());
  EXPECT_LE((second.point - Vector{{1.0, 0.0, 1.0}}).norm(), 1e-14);
}

TEST(Shrink, PreconditionViolationsAreContractErrors) {
  CylinderRegion region(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
  EXPECT_THROW(shrink(Vector{{3.0, 0.0, 2.0}}, region, {}), ContractError);
  EXPECT_THROW(shrink(Vector{{0.1, 0.0, 0.1}}, region, {0}), ContractError);
  EXPECT_THROW(shrink(Vector{{3.0, 0.0, 2.0}}, region, {1}), ContractError);
  EXPECT_THROW(shrink(Vector{{3.0, 0.0, 2.0}}, region, {0, 1}), ContractError);
}

TEST(Shrink, OptimalOnRandomInstances) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = random_instance(rng, 12, 6);
    std::vector<std::size_t> g = top_group(inst.region, inst.s);
    Vector s = inst.s;
    for (std::size_t step = 0; step <= inst.region.element_count(); ++step) {
      const auto r = shrink(s, inst.region, g);
      ASSERT_TRUE(satisfies_shrink_optimality(inst.region, g, r.point, 1e-10)) << "trial " << trial << " step " << step;
      if (r.joined.empty()) {
        EXPECT_TRUE(inst.region.contains(r.point, 1e-12));
        break;
      }
      s = r.point;
      for (std::size_t i : r.joined) g.push_back(i);
    }
  }
}

TEST(Steinmetz, InteriorPointUnchanged) {
  CylinderRegion region(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
  const Vector s{{0.2, 0.3, -0.1}};
  const auto r = steinmetz_project(s, region);
  EXPECT_EQ(r.point, s);
  EXPECT_EQ(r.shrink_calls, 0u);
}

TEST(Steinmetz, HandChain) {
  CylinderRegion region(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
  const auto r = steinmetz_project(Vector{{3.0, 0.0, 2.0}}, region);
  EXPECT_LE((r.point - Vector{{1.0, 0.0, 1.0}}).norm(), 1e-14);
  EXPECT_EQ(r.shrink_calls, 2u);
}

TEST(Steinmetz, SingleElementIsRadial) {
  CylinderRegion region(3, {{0, 1, 2}}, {1.5});
  const Vector s{{2.0, -1.0, 3.0}};
  EXPECT_LE((steinmetz_project(s, region).point - oracle::radial(s, 1.5)).norm(), 1e-14);
}

TEST(Steinmetz, MembershipAndCallBound) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 500; ++trial) {
    auto inst = random_instance(rng, 10, 6);
    const auto r = steinmetz_project(inst.s, inst.region);
    EXPECT_TRUE(inst.region.contains(r.point, 1e-12));
    EXPECT_LE(r.shrink_calls, inst.region.element_count() - r.satisfied_at_start);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < inst.region.element_count(); ++i)
      if (inst.region.violation_ratio(inst.s, i) <= 1.0) ++inside;
    EXPECT_EQ(r.satisfied_at_start, inside);
  }
}

TEST(Steinmetz, ScaleEquivariance) {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng, 8, 5);
    const double lambda = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    std::vector<double> scaled = inst.region.radii();
    for (auto& r : scaled) r *= lambda;
    CylinderRegion big(inst.region.dimension(), inst.region.index_sets(), scaled);
    const Vector a = steinmetz_project(lambda * inst.s, big).point;
    const Vector b = lambda * steinmetz_project(inst.s, inst.region).point;
    EXPECT_LE((a - b).norm(), 1e-12 * (1 + b.norm()));
  }
}

TEST(Region, InscribedBallAndTruncationRadius) {
  std::mt19937_64 rng(109);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 10, 6);
    const double rmin = *std::min_element(inst.region.radii().begin(), inst.region.radii().end());
    const Vector d = oracle::random_vector(rng, inst.s.size(), -1, 1);
    if (d.norm() == 0.0) continue;
    EXPECT_TRUE(inst.region.contains(d.normalized() * rmin * 0.999999));
    std::vector<bool> covered(inst.region.dimension(), false);
    for (const auto& idx : inst.region.index_sets())
      for (std::size_t j : idx) covered[j] = true;
    if (std::find(covered.begin(), covered.end(), false) != covered.end()) continue;
    const Vector member = steinmetz_project(inst.s * 5.0, inst.region).point;
    EXPECT_LE(member.norm(), inst.region.truncation_radius() * (1 + 1e-12));
  }
}

TEST(AveragedProjection, DisjointSetsExactInOneStep) {
  CylinderRegion region(4, {{0, 1}, {2, 3}}, {1.0, 0.5});
  const Vector s{{3.0, 4.0, 1.0, 0.0}};
  const Vector expected{{0.6, 0.8, 0.5, 0.0}};
  EXPECT_LE((averaged_project_step(s, region) - expected).norm(), 1e-14);
  EXPECT_LE((averaged_project_step(expected, region) - expected).norm(), 1e-15);
}

TEST(AveragedProjection, SingleElementIsBallProjection) {
  CylinderRegion region(2, {{0, 1}}, {1.0});
  const Vector s{{3.0, 4.0}};
  EXPECT_LE((averaged_project_step(s, region) - oracle::radial(s, 1.0)).norm(), 1e-14);
}

TEST(HybridProjection, ZeroAveragingIsSteinmetz) {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, 8, 5);
    EXPECT_EQ(hybrid_project(inst.s, inst.region, 0), steinmetz_project(inst.s, inst.region).point);
    for (int k : {1, 2, 4, 5}) EXPECT_TRUE(inst.region.contains(hybrid_project(inst.s, inst.region, k), 1e-12));
  }
}

TEST(Dykstra, TrivialCases) {
  CylinderRegion ball(3, {{0, 1, 2}}, {2.0});
  const Vector s{{3.0, 0.0, 4.0}};
  EXPECT_LE((dykstra_project(s, ball).point - oracle::radial(s, 2.0)).norm(), 1e-9);
  const Vector inner{{0.1, 0.2, 0.3}};
  EXPECT_LE((dykstra_project(inner, ball).point - inner).norm(), 1e-15);
}

TEST(Dykstra, SteinmetzSolidKkt) {
  CylinderRegion region(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
  for (const Vector& s : {Vector{{3.0, 0.5, 2.0}}, Vector{{1.2, 1.5, -0.3}}, Vector{{-2.0, 2.0, 2.0}}}) {
    const auto r = dykstra_project(s, region, 1e-12);
    ASSERT_TRUE(r.converged);
    EXPECT_TRUE(region.contains(r.point, 1e-9));
    double min_mult = 0.0;
    EXPECT_LE(kkt_residual(region, s, r.point, min_mult), 1e-6);
    EXPECT_GE(min_mult, -1e-6);
  }
}

TEST(Dykstra, KktOnRandomInstances) {
  std::mt19937_64 rng(127);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, 6, 4);
    const auto r = dykstra_project(inst.s, inst.region, 1e-12);
    ASSERT_TRUE(r.converged);
    double min_mult = 0.0;
    EXPECT_LE(kkt_residual(inst.region, inst.s, r.point, min_mult), 1e-6) << trial;
    EXPECT_GE(min_mult, -1e-6);
    // No point of the region found by Steinmetz is closer than the projection.
    const Vector st = steinmetz_project(inst.s, inst.region).point;
    EXPECT_LE((inst.s - r.point).norm(), (inst.s - st).norm() + 1e-8);
  }
}

TEST(Subproblem, LinearObjectiveReachesBoundary) {
  CylinderRegion region(3, {{0, 1, 2}}, {1.0});
  const Vector g{{-1.0, 0.0, 0.0}};
  const auto r = solve_subproblem(quadratic(g, Matrix::Zero(3, 3)), region, region.truncation_radius());
  EXPECT_LE((r.step - Vector{{1.0, 0.0, 0.0}}).norm(), 1e-12);
  EXPECT_NEAR(r.value, -1.0, 1e-12);
}

TEST(Subproblem, ZeroGradientReturnsZero) {
  CylinderRegion region(2, {{0}, {1}}, {1.0, 1.0});
  const auto r = solve_subproblem(quadratic(Vector::Zero(2), Matrix::Identity(2, 2)), region, region.truncation_radius());
  EXPECT_EQ(r.step, Vector::Zero(2));
  EXPECT_EQ(r.value, 0.0);
}

TEST(Subproblem, ConvexInteriorMinimizer) {
  std::mt19937_64 rng(131);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 5;
    const Matrix H = random_spd(rng, n);
    const Vector target = oracle::random_vector(rng, n, -0.3, 0.3);
    const Vector g = -H * target;
    const std::size_t q = 1 + static_cast<std::size_t>(trial) % 3;
    CylinderRegion region(static_cast<std::size_t>(n), random_sets(rng, static_cast<std::size_t>(n), q),
                          std::vector<double>(q, 1.0));
    SubproblemOptions opt;
    opt.max_iter = 5 * static_cast<std::size_t>(n + 1);
    const auto r = solve_subproblem(quadratic(g, H), region, region.truncation_radius(), opt);
    EXPECT_LE((r.step - oracle::quadratic_minimizer(g, H)).norm(), 1e-6) << trial;
    EXPECT_LE(r.iterations, opt.max_iter);
  }
}

TEST(Subproblem, MonotoneAndFeasibleIncludingNonconvex) {
  std::mt19937_64 rng(137);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + trial % 8;
    Matrix B = Matrix::NullaryExpr(n, n, [&]() { return std::uniform_real_distribution<double>(-1, 1)(rng); });
    const Matrix H = B + B.transpose();
    const Vector g = oracle::random_vector(rng, n, -1, 1);
    const std::size_t q = 1 + static_cast<std::size_t>(trial) % 4;
    std::vector<double> radii(q);
    for (auto& x : radii) x = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    CylinderRegion region(static_cast<std::size_t>(n), random_sets(rng, static_cast<std::size_t>(n), q), radii);
    const auto r = solve_subproblem(quadratic(g, H), region, region.truncation_radius());
    EXPECT_TRUE(region.contains(r.step, 1e-10));
    EXPECT_LE(r.value, r.initial_value);
    for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1]);
  }
}

TEST(Subproblem, NonFiniteModelAborts) {
  CylinderRegion region(1, {{0}}, {1.0});
  SubproblemObjective obj;
  obj.quadratic = false;
  obj.evaluate = [](const Vector& s, Vector& grad) {
    grad = Vector::Constant(1, -1.0);
    return s[0] > 0.25 ? std::numeric_limits<double>::quiet_NaN() : -s[0];
  };
  const auto r = solve_subproblem(obj, region, 1.0);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_LE(r.value, r.initial_value);
}
