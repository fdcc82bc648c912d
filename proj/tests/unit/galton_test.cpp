#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "goldmine/error.hpp"
#include "goldmine/galton.hpp"
#include "goldmine/rng.hpp"
#include "oracles.hpp"
#include "simulator_oracles.hpp"

namespace goldmine::galton {
namespace {

using testing::enumerate_density;
using testing::rel_err;
using testing::trace_log_density;

TEST(NailProb, CenterNailIsFair) { EXPECT_DOUBLE_EQ(nail_prob_left(0.5, 0.7, -0.8), 0.5); }

TEST(NailProb, TopRowIsFair) { EXPECT_DOUBLE_EQ(nail_prob_left(0.3, 0.0, 1.0), 0.5); }

TEST(NailProb, MidRowEdgeIsSigmoid) {
  EXPECT_NEAR(nail_prob_left(1.0, 0.5, -0.8), 1.0 / (1.0 + std::exp(2.0)), 1e-15);
  EXPECT_NEAR(nail_prob_left(1.0, 0.5, -0.8), 0.11920292202211755, 1e-15);
}

TEST(NailProb, StrictlyInsideUnitIntervalOnTheBoard) {
  const Config cfg;
  for (double theta = -10.0; theta <= 10.0; theta += 0.25) {
    for (int row = 0; row < cfg.n_rows; ++row) {
      for (int k = 0; k <= row; ++k) {
        const auto [z_h, z_v] = nail_position(cfg, row, k);
        const double p = nail_prob_left(z_h, z_v, theta);
        ASSERT_GT(p, 0.0);
        ASSERT_LT(p, 1.0);
      }
    }
  }
}

TEST(NailProbDtheta, ZeroAtCenterAndTopRow) {
  EXPECT_EQ(nail_prob_left_dtheta(0.5, 0.3, 2.0), 0.0);
  EXPECT_EQ(nail_prob_left_dtheta(0.9, 0.0, -1.0), 0.0);
}

TEST(NailProbDtheta, MatchesFiniteDifference) {
  auto f = [](double t) { return nail_prob_left(1.0, 0.5, t); };
  const double fd = testing::central_diff(f, -0.8, 1e-5);
  EXPECT_LE(rel_err(nail_prob_left_dtheta(1.0, 0.5, -0.8), fd), 1e-6);
}

TEST(Simulate, EqualThetasGiveZeroLogRatio) {
  const Config cfg;
  for (std::uint64_t s = 0; s < 200; ++s) {
    EXPECT_EQ(simulate(cfg, -0.8, -0.8, -0.8, s).acc.log_joint_ratio, 0.0);
  }
}

TEST(Simulate, DeterministicGivenSeed) {
  const Config cfg;
  const auto a = simulate(cfg, -0.7, -0.8, -0.6, 1234, true);
  const auto b = simulate(cfg, -0.7, -0.8, -0.6, 1234, true);
  EXPECT_EQ(a.bin, b.bin);
  EXPECT_EQ(a.moves, b.moves);
  EXPECT_EQ(a.acc.log_joint_ratio, b.acc.log_joint_ratio);
  EXPECT_EQ(a.acc.joint_score, b.acc.joint_score);
}

TEST(Simulate, BinCountsRightMoves) {
  const Config cfg;
  const auto s = simulate(cfg, -0.8, -0.8, -0.6, 9, true);
  int rights = 0;
  for (bool m : s.moves) rights += m;
  EXPECT_EQ(s.bin, rights);
  EXPECT_GE(s.bin, 0);
  EXPECT_LE(s.bin, cfg.n_rows);
}

TEST(Simulate, FixedTraceConsistency) {
  const Config cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = simulate(cfg, -0.5, -0.9, -0.6, seed, true);
    const double replay = trace_log_density(cfg, s.moves, -0.9) - trace_log_density(cfg, s.moves, -0.6);
    EXPECT_NEAR(s.acc.log_joint_ratio, replay, 1e-13);
  }
}

TEST(Simulate, ScoreAtZeroMatchesFiniteDifference) {
  const Config cfg;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = simulate(cfg, 0.0, 0.0, -0.6, seed, true);
    auto f = [&](double t) { return trace_log_density(cfg, s.moves, t); };
    EXPECT_LE(rel_err(s.acc.joint_score, testing::central_diff(f, 0.0, 1e-4), 1e-8), 1e-5);
  }
}

TEST(Simulate, ScoreMatchesFiniteDifferenceAcrossTheta) {
  const Config cfg;
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.uniform(-1.0, -0.4);
    const auto s = simulate(cfg, theta, theta, -0.6, 1000 + i, true);
    auto f = [&](double t) { return trace_log_density(cfg, s.moves, t); };
    EXPECT_LE(rel_err(s.acc.joint_score, testing::central_diff(f, theta, 1e-4), 1e-8), 1e-5);
  }
}

TEST(Simulate, RejectsNonFiniteTheta) {
  try {
    simulate(Config{}, std::nan(""), 0.0, 0.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
}

TEST(Simulate, DegenerateStepIsReported) {
  // with 21 rows, row 10 sits at z_v = 1/2 where f = 1 and the step is a bare sigmoid
  const Config cfg{21, 5.0};
  try {
    for (std::uint64_t s = 0; s < 50; ++s) simulate(cfg, 0.0, 1e4, 0.0, s);
    FAIL() << "expected a DegenerateStep error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric);
  }
}

TEST(Simulate, JointRatioHasUnitMeanUnderDenominator) {
  const auto batch = simulate_batch(Config{}, -0.6, -0.8, -0.6, 500000, 100000);
  std::vector<double> r;
  r.reserve(batch.size());
  for (const auto& s : batch) r.push_back(std::exp(s.acc.log_joint_ratio));
  const auto est = testing::mean_se(r);
  EXPECT_NEAR(est.mean, 1.0, 3.0 * est.se);
}

TEST(Simulate, JointScoreHasZeroMeanAtGeneratingPoint) {
  const auto batch = simulate_batch(Config{}, -0.8, -0.8, -0.6, 700000, 100000);
  std::vector<double> t;
  for (const auto& s : batch) t.push_back(s.acc.joint_score);
  const auto est = testing::mean_se(t);
  EXPECT_NEAR(est.mean, 0.0, 3.0 * est.se);
}

TEST(Simulate, BinnedJointRatioConvergesToExactRatio) {
  const Config cfg;
  const auto batch = simulate_batch(cfg, -0.6, -0.8, -0.6, 900000, 100000);
  std::vector<double> sum(cfg.n_bins(), 0.0), count(cfg.n_bins(), 0.0);
  for (const auto& s : batch) {
    sum[s.bin] += std::exp(s.acc.log_joint_ratio);
    count[s.bin] += 1.0;
  }
  const auto lr = exact_log_ratio(cfg, -0.8, -0.6);
  for (int x = 5; x <= 15; ++x) {
    EXPECT_LE(rel_err(sum[x] / count[x], std::exp(lr[x])), 0.02) << "bin " << x;
  }
}

TEST(ExactDensity, ThetaZeroIsFairBinomial) {
  const Config cfg;
  const auto p = exact_density(cfg, 0.0);
  EXPECT_NEAR(p[10], 184756.0 / 1048576.0, 1e-15);
  double c = 1.0;  // C(20, x)
  for (int x = 0; x <= 20; ++x) {
    EXPECT_NEAR(p[x], c / 1048576.0, 1e-15) << x;
    c = c * (20 - x) / (x + 1);
  }
}

TEST(ExactDensity, Normalized) {
  for (double theta : {-10.0, -1.0, -0.8, 0.0, 0.37, 3.0, 10.0}) {
    double s = 0.0;
    for (double v : exact_density(Config{}, theta)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12) << theta;
  }
}

TEST(ExactDensity, MatchesPathEnumeration) {
  const Config cfg{12, 5.0};
  for (double theta : {-0.8, 0.45}) {
    const auto dp = exact_density(cfg, theta);
    const auto brute = enumerate_density(cfg, theta);
    for (int x = 0; x < cfg.n_bins(); ++x) EXPECT_NEAR(dp[x], brute[x], 1e-14);
  }
}

TEST(ExactDensity, MatchesSimulatedHistogram) {
  const Config cfg;
  const auto p = exact_density(cfg, -0.8);
  const auto batch = simulate_batch(cfg, -0.8, -0.8, -0.6, 31337, 100000);
  std::vector<double> hist(cfg.n_bins(), 0.0);
  for (const auto& s : batch) hist[s.bin] += 1.0 / static_cast<double>(batch.size());
  double worst = 0.0;
  for (int x = 0; x < cfg.n_bins(); ++x) worst = std::max(worst, std::abs(hist[x] - p[x]));
  EXPECT_LE(worst, 0.01);
}

TEST(ExactLogRatio, ZeroForEqualThetas) {
  for (double v : exact_log_ratio(Config{}, -0.7, -0.7)) EXPECT_EQ(v, 0.0);
}

TEST(ExactLogRatio, Antisymmetric) {
  const auto ab = exact_log_ratio(Config{}, -0.8, -0.6);
  const auto ba = exact_log_ratio(Config{}, -0.6, -0.8);
  for (std::size_t x = 0; x < ab.size(); ++x) EXPECT_EQ(ab[x], -ba[x]);
}

TEST(ExactLogRatio, FrozenFixtureBins5To15) {
  // full 2^20 path enumeration, computed once
  const double expected[] = {0.1836482459037465,   0.08645281278650119,  0.008128671778409924,
                             -0.04928448633584104, -0.08432078218353078, -0.096097745337971,
                             -0.08432078218369243, -0.049284486335901434, 0.008128671778391716,
                             0.08645281278649941,  0.18364824590377893};
  const auto lr = exact_log_ratio(Config{}, -0.8, -0.6);
  for (int x = 5; x <= 15; ++x) EXPECT_NEAR(lr[x], expected[x - 5], 1e-12) << x;
}

TEST(ExactLogRatio, UnderflowIsNonpositiveDensity) {
  // 2^-1100 underflows in the fair extreme bins
  const Config cfg{1100, 5.0};
  try {
    exact_log_ratio(cfg, 0.0, 0.1);
    FAIL() << "expected NonpositiveDensity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric);
  }
}

TEST(ExactScore, MatchesFiniteDifferenceOfDensity) {
  const Config cfg;
  const double theta = -0.7, h = 1e-5;
  const auto score = exact_score(cfg, theta);
  const auto up = exact_density(cfg, theta + h);
  const auto down = exact_density(cfg, theta - h);
  for (int x = 1; x < cfg.n_rows; ++x) {
    const double fd = (std::log(up[x]) - std::log(down[x])) / (2 * h);
    EXPECT_LE(rel_err(score[x], fd, 1e-6), 1e-6) << x;
  }
}

}  // namespace
}  // namespace goldmine::galton
