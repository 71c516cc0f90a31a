#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "zkmrta/channel.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {
namespace {

WorldConfig headline(std::uint64_t seed = 1) {
  WorldConfig c;
  c.seed = seed;
  return c;
}

int numerical_rank_of(const Matrix& m) {
  const Vector sv = singular_values(m);
  int r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-8 * sv(0)) ++r;
  return r;
}

// ------------------------------------------------------------------ block world

TEST(BlockWorld, HeadlineRankIsD) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto w = build_block_world(headline(seed));
    EXPECT_EQ(w.R.rows(), 30);
    EXPECT_EQ(w.R.cols(), 240);
    EXPECT_EQ(numerical_rank_of(w.R), 5);
    EXPECT_EQ(effective_rank(w.R, 1.0 - 1e-12), 5);
    // Four centered types leave two weak directions, which can fall under 1%.
    EXPECT_GE(effective_rank(w.R, 0.99), 3);
    EXPECT_LE(effective_rank(w.R, 0.99), 5);
  }
}

TEST(BlockWorld, FactorizesWithZeroMeanRows) {
  const auto w = build_block_world(headline(3));
  EXPECT_LE((w.R - w.P * w.U.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(w.R.rowwise().mean().cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(entry_std(w.R), 1.0, 1e-9);
  EXPECT_TRUE(std::isfinite(w.R.cwiseAbs().maxCoeff()));
}

TEST(BlockWorld, RewardScaleSetsStd) {
  auto cfg = headline(2);
  cfg.reward_scale = 0.376;
  EXPECT_NEAR(entry_std(build_block_world(cfg).R), 0.376, 1e-9);
}

TEST(BlockWorld, SameSeedBitwiseIdentical) {
  const auto a = build_block_world(headline(9));
  const auto b = build_block_world(headline(9));
  EXPECT_EQ(a.P, b.P);
  EXPECT_EQ(a.U, b.U);
  EXPECT_EQ(a.R, b.R);
  EXPECT_NE(a.R, build_block_world(headline(10)).R);
}

TEST(BlockWorld, SingleLatentDimensionIsRankOne) {
  auto cfg = headline(4);
  cfg.d = 1;
  const auto w = build_block_world(cfg);
  EXPECT_EQ(numerical_rank_of(w.R), 1);
  // Every row is a multiple of the task vector.
  const Vector u = w.U.col(0);
  for (int i = 0; i < w.robots(); ++i)
    EXPECT_LE((w.R.row(i).transpose() - w.P(i, 0) * u).norm(), 1e-10);
}

TEST(BlockWorld, IdenticalTypesGiveIdenticalRows) {
  auto cfg = headline(5);
  cfg.K = 1;
  cfg.mixture_sd = 0.0;
  cfg.n = 10;
  auto w = build_block_world(cfg);
  for (int i = 1; i < w.robots(); ++i) EXPECT_EQ(w.R.row(i), w.R.row(0));
}

TEST(BlockWorld, RejectsBadConfig) {
  auto cfg = headline();
  cfg.d = 0;
  EXPECT_THROW(build_block_world(cfg), ConfigError);
  cfg = headline();
  cfg.m = 1;
  EXPECT_THROW(build_block_world(cfg), ConfigError);
  cfg = headline();
  cfg.variant = WorldVariant::Sensing;
  EXPECT_THROW(build_block_world(cfg), ConfigError);
}

// ------------------------------------------------------------------ perturbation

TEST(Perturb, ZeroIsIdentity) {
  const auto w = build_block_world(headline(6));
  EXPECT_EQ(perturb_full_rank(w, 0.0, 6).R, w.R);
}

TEST(Perturb, PreservesStdAndRaisesRank) {
  const auto w = build_block_world(headline(7));
  int prev = effective_rank(w.R, 0.99);
  EXPECT_LE(prev, 5);
  for (const double e : {0.25, 0.5, 1.0}) {
    const auto p = perturb_full_rank(w, e, 7);
    EXPECT_NEAR(entry_std(p.R) / entry_std(w.R), 1.0, 0.02);
    const int r = effective_rank(p.R, 0.99);
    EXPECT_GE(r, prev) << "epsilon " << e;
    prev = r;
  }
}

TEST(Perturb, HalfEpsilonEffectiveRankNearTwentyEight) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto cfg = headline(seed);
    cfg.epsilon = 0.5;
    total += effective_rank(build_world(cfg).R, 0.99);
  }
  EXPECT_NEAR(total / 8.0, 28.0, 3.0);
}

TEST(EffectiveRank, Basics) {
  Vector a(4), b(6);
  a << 1, 2, 3, 4;
  b << 1, 0, -1, 2, 0.5, 1;
  EXPECT_EQ(effective_rank(a * b.transpose(), 0.99), 1);
  EXPECT_EQ(effective_rank(Matrix::Identity(5, 5), 0.99), 5);
  EXPECT_THROW(effective_rank(Matrix(), 0.99), InputError);
  EXPECT_THROW(effective_rank(Matrix::Identity(2, 2), 0.0), InputError);
}

// ------------------------------------------------------------------ sensing world

WorldConfig sensing(std::uint64_t seed = 1) {
  auto c = headline(seed);
  c.variant = WorldVariant::Sensing;
  return c;
}

TEST(SensingWorld, NonNegativeAndDeterministic) {
  const auto a = build_sensing_world(sensing(3));
  const auto b = build_sensing_world(sensing(3));
  EXPECT_GE(a.P.minCoeff(), 0.0);
  EXPECT_GE(a.U.minCoeff(), 0.0);
  EXPECT_EQ(a.R, b.R);
  ASSERT_EQ(a.positions.size(), 30u);
  for (std::size_t i = 0; i < a.positions.size(); ++i) {
    EXPECT_EQ(a.positions[i].x, b.positions[i].x);
    EXPECT_EQ(a.positions[i].y, b.positions[i].y);
    EXPECT_GE(a.positions[i].x, 0.0);
    EXPECT_LE(a.positions[i].x, 10.0);
  }
  EXPECT_LE((a.row_offset - a.R.rowwise().mean()).norm(), 1e-12);
}

TEST(SensingWorld, SharedProfileGivesProportionalRows) {
  // Robots differ only by their endurance scalar.
  auto cfg = sensing(4);
  cfg.K = 1;
  cfg.mixture_sd = 0.0;
  const auto w = build_sensing_world(cfg);
  for (int i = 1; i < w.robots(); ++i) {
    const double f = w.R(i, 0) / w.R(0, 0);
    EXPECT_LE((w.R.row(i) - f * w.R.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SensingWorld, RadiusMatchesVisibility) {
  for (const double rho : {0.1, 0.25, 0.5, 0.9}) {
    const double r = radius_for_visibility(rho, 10.0);
    EXPECT_NEAR(square_pair_within(r, 10.0), rho, 1e-9);
  }
  // Monte-Carlo check of the closed form.
  auto s = make_stream(5, StreamTag::Analysis);
  int hits = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const Point2 a{s.uniform(0, 10), s.uniform(0, 10)}, b{s.uniform(0, 10), s.uniform(0, 10)};
    if (distance(a, b) <= 4.0) ++hits;
  }
  EXPECT_NEAR(static_cast<double>(hits) / n, square_pair_within(4.0, 10.0), 0.005);
}

// ------------------------------------------------------------------ masks

TEST(Mask, PersistentExtremes) {
  const auto full = draw_persistent_mask(30, 1.0, 1);
  const auto none = draw_persistent_mask(30, 0.0, 1);
  for (int i = 0; i < 30; ++i)
    for (int k = 0; k < 30; ++k) {
      EXPECT_TRUE(full.visible(i, k));
      EXPECT_EQ(none.visible(i, k), i == k);
    }
  EXPECT_THROW(draw_persistent_mask(5, 1.5, 1), ConfigError);
}

TEST(Mask, PersistentDensityConcentrates) {
  const int m = 30;
  const double pairs = m * (m - 1);
  const double sd = std::sqrt(0.25 / pairs);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_NEAR(draw_persistent_mask(m, 0.5, seed).off_diagonal_density(), 0.5, 3 * sd);
  }
}

TEST(Mask, PerRoundRedraws) {
  const auto a = draw_iid_mask(30, 0.5, 2, 1);
  const auto b = draw_iid_mask(30, 0.5, 2, 2);
  EXPECT_FALSE(a == b);
  EXPECT_TRUE(a == draw_iid_mask(30, 0.5, 2, 1));
  const auto z = draw_iid_mask(30, 0.0, 2, 7);
  for (int i = 0; i < 30; ++i)
    for (int k = 0; k < 30; ++k) EXPECT_EQ(z.visible(i, k), i == k);
}

TEST(Mask, Geometry) {
  const std::vector<Point2> line{{0, 0}, {1, 0}, {2, 0}};
  const auto m = geometry_mask(line, 1.0);
  EXPECT_TRUE(m.visible(0, 1));
  EXPECT_TRUE(m.visible(1, 2));
  EXPECT_FALSE(m.visible(0, 2));
  EXPECT_FALSE(m.visible(2, 0));
  const auto zero = geometry_mask(line, 0.0);
  const auto all = geometry_mask(line, 100.0);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(zero.visible(i, k), i == k);
      EXPECT_TRUE(all.visible(i, k));
    }
}

// ------------------------------------------------------------------ observations

std::vector<Engagement> sample_events() {
  return {{0, 3, 0.5, false}, {1, 4, -0.2, false}, {2, 5, 1.0, true}, {3, 3, 0.0, true}};
}

TEST(Observe, NoiselessReadsTruth) {
  NoiseModel noise{0.0, 0.0};
  const auto mask = draw_persistent_mask(4, 1.0, 1);
  const auto recs = observe_round(sample_events(), 1, mask, noise, {}, 1, 1);
  ASSERT_EQ(recs.size(), 2u);  // collided engagements emit nothing
  EXPECT_EQ(recs[0].actor, 0);
  EXPECT_EQ(recs[0].value, 0.5);
  EXPECT_EQ(recs[1].actor, 1);
  EXPECT_EQ(recs[1].value, -0.2);
  for (const auto& r : recs) EXPECT_EQ(r.weight, 1.0);
}

TEST(Observe, ObserversReadDifferently) {
  NoiseModel noise;
  const auto mask = draw_persistent_mask(4, 1.0, 1);
  const auto a = observe_round(sample_events(), 2, mask, noise, {}, 1, 1);
  const auto b = observe_round(sample_events(), 3, mask, noise, {}, 1, 1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NE(a[k].value, b[k].value);
  // Pure function of its inputs.
  const auto again = observe_round(sample_events(), 2, mask, noise, {}, 1, 1);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].value, again[k].value);
}

TEST(Observe, RespectsMaskAndSelfVisibility) {
  NoiseModel noise;
  const auto mask = draw_persistent_mask(4, 0.0, 1);
  const auto own = observe_round(sample_events(), 0, mask, noise, {}, 1, 1);
  ASSERT_EQ(own.size(), 1u);
  EXPECT_EQ(own[0].actor, 0);
  EXPECT_TRUE(observe_round(sample_events(), 3, mask, noise, {}, 1, 1).empty());
}

TEST(Observe, OwnNoiseSmallerThanTeammateNoise) {
  NoiseModel noise{0.1, 0.3};
  const auto mask = draw_persistent_mask(2, 1.0, 1);
  const std::vector<Engagement> ev{{0, 0, 0.0, false}};
  double own = 0.0, other = 0.0;
  const int rounds = 20000;
  for (int t = 1; t <= rounds; ++t) {
    own += std::pow(observe_round(ev, 0, mask, noise, {}, t, 3)[0].value, 2);
    other += std::pow(observe_round(ev, 1, mask, noise, {}, t, 3)[0].value, 2);
  }
  EXPECT_NEAR(own / rounds, 0.01, 0.0005);
  EXPECT_NEAR(other / rounds, 0.09, 0.0045);
}

TEST(Observe, DistanceScaledVarianceDoublesAtRadius) {
  NoiseModel noise{0.1, 0.3, true, 2.0};
  const std::vector<Point2> pos{{0, 0}, {2, 0}};
  const auto mask = draw_persistent_mask(2, 1.0, 1);
  const std::vector<Engagement> ev{{0, 0, 0.0, false}};
  double sq = 0.0;
  const int draws = 100000;
  for (int t = 1; t <= draws; ++t) sq += std::pow(observe_round(ev, 1, mask, noise, pos, t, 5)[0].value, 2);
  EXPECT_NEAR(sq / draws, 2.0 * 0.09, 0.05 * 2.0 * 0.09);
  EXPECT_THROW(observe_round(ev, 1, mask, noise, {}, 1, 5), ConfigError);
}

TEST(Noise, Validation) {
  EXPECT_THROW((NoiseModel{0.5, 0.3}.validate()), ConfigError);
  EXPECT_THROW((NoiseModel{-0.1, 0.3}.validate()), ConfigError);
  EXPECT_NO_THROW((NoiseModel{0.1, 0.3}.validate()));
}

}  // namespace
}  // namespace zkmrta
