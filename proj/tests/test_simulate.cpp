#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace sdetest;

TEST(Schedule, CubeRootHorizon) {
  auto s = observation_schedule(1000);
  EXPECT_NEAR(s.horizon, 10.0, 1e-12);
  EXPECT_NEAR(s.delta, 0.01, 1e-15);
  s = observation_schedule(50);
  EXPECT_NEAR(s.horizon, 3.684031498640387, 1e-12);
  EXPECT_NEAR(s.delta, 0.0736806299728, 1e-12);
  s = observation_schedule(8);
  EXPECT_NEAR(s.horizon, 2.0, 1e-14);
  EXPECT_NEAR(s.delta, 0.25, 1e-15);
  EXPECT_THROW(observation_schedule(1), Error);
}

TEST(Rng, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  EXPECT_NE(derive_seed(42, 7), derive_seed(43, 7));
}

TEST(Rng, NormalStreamMoments) {
  NormalStream z(123);
  const int n = 200000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = z();
    s1 += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(EulerMaruyama, SameSeedSamePath) {
  const Model ou = make_ou();
  const auto a = testing_support::simulate(ou, testing_support::ou_theta0(), 500, 99);
  const auto b = testing_support::simulate(ou, testing_support::ou_theta0(), 500, 99);
  const auto c = testing_support::simulate(ou, testing_support::ou_theta0(), 500, 100);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  EXPECT_EQ(a.values().size(), 501u);
  EXPECT_EQ(a[0], 1.0);
}

TEST(EulerMaruyama, NoiselessModelFollowsEulerRecursion) {
  Model m = make_ou();
  m.coefficients = nullptr;
  m.diff = [](const ParamVector&, double) { return 0.0; };
  const ParamVector theta({0.5, 0.5}, {0.25});
  const auto path = euler_maruyama(m, theta, SimConfig{20, 0.1, 1, 1.0, 5});
  double x = 1.0;
  for (std::size_t i = 1; i <= 20; ++i) {
    x = x + 0.1 * 0.5 * (0.5 - x);
    EXPECT_DOUBLE_EQ(path[i], x);
  }
}

TEST(EulerMaruyama, OuPathAveragesNearInvariantMean) {
  const Model ou = make_ou();
  const auto path = euler_maruyama(ou, testing_support::ou_theta0(), SimConfig{20000, 0.05, 30, 1.0, 2024});
  double mean = 0;
  for (double v : path.values()) mean += v;
  mean /= static_cast<double>(path.values().size());
  // Standard error of a time average: sqrt(2 var / (alpha1 * horizon)).
  const double se = std::sqrt(2.0 * 0.0625 / (0.5 * 1000.0));
  EXPECT_NEAR(mean, 0.5, 3.0 * se);
}

TEST(EulerMaruyama, RefinedStepMatchesExactOuTransition) {
  const Model ou = make_ou();
  const auto theta = testing_support::ou_theta0();
  const double delta = 0.1;
  const double x0 = 1.0;
  const int reps = 100000;
  double s1 = 0, s2 = 0;
  for (int r = 0; r < reps; ++r) {
    const auto p = euler_maruyama(ou, theta, SimConfig{2, delta, 30, x0, derive_seed(77, r)});
    s1 += p[1];
    s2 += p[1] * p[1];
  }
  const double mean = s1 / reps;
  const double var = s2 / reps - mean * mean;
  const double exact_mean = 0.5 + (x0 - 0.5) * std::exp(-0.5 * delta);
  const double exact_var = 0.0625 * (1 - std::exp(-2 * 0.5 * delta)) / (2 * 0.5);
  EXPECT_NEAR(mean, exact_mean, 0.02 * exact_mean);
  EXPECT_NEAR(var, exact_var, 0.02 * exact_var);
}

TEST(EulerMaruyama, CirStaysInsideItsDomain) {
  const Model cir = make_cir();
  const auto path = testing_support::simulate(cir, testing_support::cir_theta0(), 2000, 3);
  for (double v : path.values()) EXPECT_GT(v, 0.0);
}

TEST(EulerMaruyama, DomainGuardGivesUpWithStepIndex) {
  const Model cir = make_cir();
  const ParamVector wild({0.02, 0.02}, {4.0});
  try {
    euler_maruyama(cir, wild, SimConfig{400, 0.5, 30, 1.0, 11});
    FAIL() << "expected a simulation error";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.code(), ErrorCode::simulation);
    EXPECT_GE(e.step(), 1u);
  }
}

TEST(EulerMaruyama, RejectsBadConfig) {
  const Model ou = make_ou();
  const auto theta = testing_support::ou_theta0();
  EXPECT_THROW(euler_maruyama(ou, theta, SimConfig{1, 0.1, 30, 1.0, 1}), Error);
  EXPECT_THROW(euler_maruyama(ou, theta, SimConfig{10, 0.0, 30, 1.0, 1}), Error);
  EXPECT_THROW(euler_maruyama(ou, theta, SimConfig{10, 0.1, 0, 1.0, 1}), Error);
  EXPECT_THROW(euler_maruyama(make_cir(), theta, SimConfig{10, 0.1, 30, -1.0, 1}), Error);
  EXPECT_THROW(euler_maruyama(ou, ParamVector({0.5, 0.5}, {7.0}), SimConfig{10, 0.1, 30, 1.0, 1}), Error);
}

TEST(SamplePath, Invariants) {
  EXPECT_THROW(SamplePath(0.1, {1.0, 2.0}), Error);
  EXPECT_THROW(SamplePath(0.0, {1.0, 2.0, 3.0}), Error);
  EXPECT_THROW(SamplePath(0.1, {1.0, NAN, 3.0}), Error);
  const SamplePath p(0.25, {1.0, 2.0, 3.0});
  EXPECT_EQ(p.n(), 2u);
  EXPECT_DOUBLE_EQ(p.horizon(), 0.5);
}

TEST(SamplePathCsv, RoundTripIsExact) {
  const auto path = testing_support::simulate(make_ou(), testing_support::ou_theta0(), 300, 8);
  std::stringstream ss;
  write_path_csv(ss, path);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, 4), "t,x\n");
  const auto back = read_path_csv(ss);
  EXPECT_EQ(back, path);
}

TEST(SamplePathCsv, RejectsMalformedInput) {
  std::stringstream bad_header("time,x\n0,1\n1,2\n2,3\n");
  EXPECT_THROW(read_path_csv(bad_header), Error);
  std::stringstream uneven("t,x\n0,1\n0.1,2\n0.3,3\n");
  EXPECT_THROW(read_path_csv(uneven), Error);
  std::stringstream junk("t,x\n0,1\n0.1,abc\n0.2,3\n");
  EXPECT_THROW(read_path_csv(junk), Error);
  EXPECT_THROW(load_path_csv("/nonexistent/dir/path.csv"), Error);
}

TEST(MomentExpansion, SecondAndFourthConditionalMoments) {
  const Model ou = make_ou();
  const auto theta = testing_support::ou_theta0();
  const double delta = 0.01;
  const double x0 = 1.0;
  const double r1 = mean_expansion_r1(ou, theta, x0, delta);
  const double c = 0.0625;
  const int reps = 50000;
  double m2 = 0, m4 = 0;
  for (int r = 0; r < reps; ++r) {
    const auto p = euler_maruyama(ou, theta, SimConfig{2, delta, 30, x0, derive_seed(5, r)});
    const double y = p[1] - r1;
    m2 += y * y;
    m4 += y * y * y * y;
  }
  EXPECT_NEAR(m2 / reps / (delta * c), 1.0, 0.05);
  EXPECT_NEAR(m4 / reps / (3 * delta * delta * c * c), 1.0, 0.08);
}
