#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "floor_watch.hpp"
#include "zkmrta/engine.hpp"
#include "zkmrta/policies.hpp"

namespace zkmrta {
namespace {

WorldConfig world_cfg(std::uint64_t seed, int m = 30, int n = 240) {
  WorldConfig c;
  c.m = m;
  c.n = n;
  c.d = std::min({5, m, n});
  c.seed = seed;
  c.reward_scale = 0.376;
  return c;
}

TeamContext context(int m, int n, int d_hat, std::uint64_t seed = 1) {
  TeamContext ctx;
  ctx.m = m;
  ctx.n = n;
  ctx.d_hat = d_hat;
  ctx.horizon = 50;
  ctx.seed = seed;
  return ctx;
}

ObservationRecord record(int observer, int actor, int task, double value, int round = 1) {
  return {observer, actor, task, value, 1.0, round, false};
}

// ------------------------------------------------------------------ menus

TEST(Menu, FullAndDeterministic) {
  const auto all = draw_menu(12, 12, 0, 1, 3);
  ASSERT_EQ(all.size(), 12u);
  for (int j = 0; j < 12; ++j) EXPECT_EQ(all[static_cast<std::size_t>(j)], j);
  EXPECT_EQ(draw_menu(240, 20, 4, 7, 3), draw_menu(240, 20, 4, 7, 3));
  EXPECT_NE(draw_menu(240, 20, 4, 7, 3), draw_menu(240, 20, 4, 8, 3));
  EXPECT_THROW(draw_menu(10, 11, 0, 1, 3), ConfigError);
  EXPECT_THROW(draw_menu(10, 0, 0, 1, 3), ConfigError);
}

TEST(Menu, SingletonIsUniform) {
  const int n = 50;
  std::vector<int> counts(n, 0);
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const auto menu = draw_menu(n, 1, k % 100, k / 100 + 1, 11);
    ASSERT_EQ(menu.size(), 1u);
    ++counts[static_cast<std::size_t>(menu[0])];
  }
  const double expected = static_cast<double>(draws) / n;
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 74.92);  // chi-square, 49 dof, p = 0.01
}

// ------------------------------------------------------------------ contention

TEST(Resolve, NoContentionEarnsLookup) {
  const auto w = build_block_world(world_cfg(1, 5, 8));
  const std::vector<int> choice{1, 1, 1, 2, 7};
  const auto ev = resolve_round(choice, false, w, 1, 1);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(ev[static_cast<std::size_t>(i)].reward, w.R(i, choice[static_cast<std::size_t>(i)]));
    EXPECT_FALSE(ev[static_cast<std::size_t>(i)].collided);
  }
}

TEST(Resolve, CapacityOne) {
  const auto w = build_block_world(world_cfg(1, 6, 8));
  const auto same = resolve_round(std::vector<int>(6, 3), true, w, 1, 1);
  int winners = 0;
  for (const auto& e : same) {
    if (!e.collided) {
      ++winners;
      EXPECT_EQ(e.reward, w.R(e.actor, 3));
    } else {
      EXPECT_EQ(e.reward, 0.0);
    }
  }
  EXPECT_EQ(winners, 1);
  const auto distinct = resolve_round({0, 1, 2, 3, 4, 5}, true, w, 1, 1);
  for (const auto& e : distinct) EXPECT_FALSE(e.collided);
}

TEST(Resolve, WinnerIsUniform) {
  const auto w = build_block_world(world_cfg(1, 4, 8));
  std::vector<int> wins(4, 0);
  for (int t = 1; t <= 8000; ++t) {
    for (const auto& e : resolve_round(std::vector<int>(4, 0), true, w, t, 2))
      if (!e.collided) ++wins[static_cast<std::size_t>(e.actor)];
  }
  for (const int c : wins) EXPECT_NEAR(c / 8000.0, 0.25, 0.02);
}

// ------------------------------------------------------------------ missions

TEST(Mission, SingleRoundRandom) {
  const auto w = build_block_world(world_cfg(2));
  MissionConfig cfg;
  cfg.T = 1;
  cfg.seed = 2;
  const auto res = run_mission(w, cfg, "random");
  ASSERT_EQ(res.log.entries.size(), 30u);
  for (const auto& e : res.log.entries) {
    EXPECT_EQ(e.earned, w.R(e.robot, e.action));
    EXPECT_TRUE(std::binary_search(e.menu.begin(), e.menu.end(), e.action));
    EXPECT_EQ(e.menu.size(), 20u);
  }
}

TEST(Mission, HeadlineSwarmCFLogShape) {
  const auto w = build_block_world(world_cfg(3));
  MissionConfig cfg;
  cfg.seed = 3;
  const auto res = run_mission(w, cfg, "swarmcf");
  EXPECT_EQ(res.log.entries.size(), 1500u);
  EXPECT_GE(res.log.d_hat, 5);
  EXPECT_LE(res.log.d_hat, 10);
  EXPECT_TRUE(res.predictions.allFinite());
  EXPECT_EQ(res.predictions.rows(), 30);
  EXPECT_EQ(res.predictions.cols(), 240);
}

TEST(Mission, EveryPolicyStaysOnMenu) {
  const auto w = build_block_world(world_cfg(4, 12, 40));
  for (const auto& policy : policy_names()) {
    for (const bool contention : {false, true}) {
      MissionConfig cfg;
      cfg.T = 12;
      cfg.c = 6;
      cfg.contention = contention;
      cfg.seed = 4;
      MissionResult res;
      ASSERT_NO_THROW(res = run_mission(w, cfg, policy)) << policy;
      for (const auto& e : res.log.entries) {
        ASSERT_TRUE(std::binary_search(e.menu.begin(), e.menu.end(), e.action)) << policy;
        if (e.collided) EXPECT_EQ(e.earned, 0.0);
      }
      if (contention) {
        for (int t = 1; t <= cfg.T; ++t) {
          std::map<int, int> wins;
          for (int i = 0; i < 12; ++i)
            if (!res.log.at(t, i).collided) ++wins[res.log.at(t, i).action];
          for (const auto& [task, count] : wins) EXPECT_EQ(count, 1);
        }
      }
    }
  }
}

TEST(Mission, OffMenuActionIsRejected) {
  struct Rogue final : Team {
    std::vector<int> act(const std::vector<std::vector<int>>& menus, int) override {
      std::vector<int> out;
      for (const auto& menu : menus) out.push_back(menu.back() + 1 < 40 ? menu.back() + 1 : 0);
      return out;
    }
    void ingest(int, std::span<const ObservationRecord>, int) override {}
    double predict(int, int) const override { return 0.0; }
  };
  const auto w = build_block_world(world_cfg(5, 4, 40));
  MissionConfig cfg;
  cfg.c = 1;
  EXPECT_THROW(run_mission(w, cfg, [](const TeamContext&) { return std::make_unique<Rogue>(); }),
               ProtocolViolation);
}

TEST(Mission, ReproducibleFromSeed) {
  const auto w = build_block_world(world_cfg(6));
  MissionConfig cfg;
  cfg.T = 15;
  cfg.seed = 6;
  cfg.contention = true;
  const auto a = run_mission(w, cfg, "swarmcf");
  const auto b = run_mission(w, cfg, "swarmcf");
  EXPECT_EQ(a.predictions, b.predictions);
  for (std::size_t k = 0; k < a.log.entries.size(); ++k) {
    EXPECT_EQ(a.log.entries[k].action, b.log.entries[k].action);
    EXPECT_EQ(a.log.entries[k].earned, b.log.entries[k].earned);
  }
}

TEST(Mission, PersistentMaskBoundsObservedActors) {
  const auto w = build_block_world(world_cfg(7, 10, 30));
  MissionConfig cfg;
  cfg.T = 10;
  cfg.rho = 0.3;
  cfg.seed = 7;
  const auto mask = draw_persistent_mask(10, 0.3, 7);
  struct Spy final : Team {
    const Mask* mask;
    int* bad;
    std::unique_ptr<Team> inner;
    std::vector<int> act(const std::vector<std::vector<int>>& menus, int round) override {
      return inner->act(menus, round);
    }
    void ingest(int robot, std::span<const ObservationRecord> records, int round) override {
      bool self = false;
      for (const auto& r : records) {
        if (!mask->visible(robot, r.actor)) ++*bad;
        if (r.actor == robot) self = true;
      }
      if (!self) ++*bad;  // no contention, so the own outcome is always present
      inner->ingest(robot, records, round);
    }
    double predict(int i, int j) const override { return inner->predict(i, j); }
  };
  int bad = 0;
  run_mission(w, cfg, [&](const TeamContext& ctx) {
    auto s = std::make_unique<Spy>();
    s->mask = &mask;
    s->bad = &bad;
    s->inner = make_team("random", ctx);
    return s;
  });
  EXPECT_EQ(bad, 0);
}

TEST(Mission, GuessedRankRange) {
  MissionConfig cfg;
  cfg.d_hat_low = 3;
  cfg.d_hat_high = 3;
  EXPECT_EQ(draw_guessed_rank(5, cfg), 3);
  cfg.d_hat_low = 0;
  cfg.d_hat_high = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    cfg.seed = s;
    const int d = draw_guessed_rank(5, cfg);
    EXPECT_GE(d, 5);
    EXPECT_LE(d, 10);
  }
  cfg.d_hat_low = 4;
  cfg.d_hat_high = 2;
  EXPECT_THROW(cfg.validate(240), ConfigError);
}

// ------------------------------------------------------------------ structure-free floor

TEST(StructureFree, PredictIsPriorOnNeverEngagedTasks) {
  for (const std::string policy : {"ucb", "tabular", "random"}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto w = build_block_world(world_cfg(seed, 12, 60));
      MissionConfig cfg;
      cfg.T = 20;
      cfg.c = 8;
      cfg.seed = seed;
      cfg.rho = 1.0;
      cfg.contention = seed == 2;
      auto stats = std::make_shared<testing::FloorStats>();
      run_mission(w, cfg, testing::floor_watched(policy, stats));
      EXPECT_GT(stats->checks, 0);
      EXPECT_EQ(stats->violations, 0) << policy << " seed " << seed;
    }
  }
}

TEST(StructureFree, UcbTriesUnpulledLowestFirst) {
  IndependentUCB ucb(context(2, 10, 2), 0);
  const std::vector<int> menu{2, 5, 7};
  EXPECT_EQ(ucb.act(menu, 1), 2);
  const std::vector<ObservationRecord> recs{record(0, 0, 2, 0.4), record(0, 1, 5, 9.0)};
  ucb.ingest(recs, 1);
  EXPECT_EQ(ucb.pulls(2), 1);
  EXPECT_EQ(ucb.pulls(5), 0);  // teammates' outcomes are ignored
  EXPECT_EQ(ucb.act(menu, 2), 5);
  EXPECT_EQ(ucb.predict(2), 0.4);
  EXPECT_EQ(ucb.predict(5), 0.0);
}

TEST(StructureFree, UcbPrefersBetterArm) {
  IndependentUCB ucb(context(1, 2, 1), 0);
  const std::vector<int> menu{0, 1};
  auto noise = make_stream(1, StreamTag::Analysis);
  int late_best = 0;
  for (int t = 1; t <= 200; ++t) {
    const int a = ucb.act(menu, t);
    if (t > 150 && a == 0) ++late_best;
    const double mean = a == 0 ? 1.0 : 0.0;
    const std::vector<ObservationRecord> recs{record(0, 0, a, mean + 0.1 * noise.normal(), t)};
    ucb.ingest(recs, t);
  }
  EXPECT_GT(late_best / 50.0, 0.9);
}

TEST(StructureFree, TabularGreedyTieBreak) {
  auto ctx = context(2, 10, 2);
  ctx.exploration = {0.0, 1.0, 0.0};
  TabularGreedy tab(ctx, 1);
  const std::vector<int> menu{3, 4, 9};
  EXPECT_EQ(tab.act(menu, 1), 3);
  tab.ingest(std::vector<ObservationRecord>{record(1, 1, 9, 0.7)}, 1);
  EXPECT_EQ(tab.act(menu, 2), 9);
  EXPECT_EQ(tab.predict(4), 0.0);
}

TEST(StructureFree, CollidedPullCountsAsZero) {
  TabularGreedy tab(context(2, 10, 2), 0);
  std::vector<ObservationRecord> recs{{0, 0, 3, 0.0, 1.0, 1, true}};
  tab.ingest(recs, 1);
  EXPECT_EQ(tab.pulls(3), 1);
  EXPECT_EQ(tab.predict(3), 0.0);
}

// ------------------------------------------------------------------ SwarmCF

TEST(SwarmCF, ExplorationSchedule) {
  ExplorationSchedule e;
  EXPECT_DOUBLE_EQ(e.at(1), 0.5);
  EXPECT_NEAR(e.at(30), std::max(0.05, 0.5 * std::pow(0.93, 29)), 1e-15);
  EXPECT_NEAR(e.at(30), 0.061, 0.001);
  EXPECT_DOUBLE_EQ(e.at(200), 0.05);
}

TEST(SwarmCF, GreedyPicksLargestInnerProduct) {
  auto ctx = context(4, 12, 3);
  ctx.exploration = {0.0, 1.0, 0.0};
  SwarmCF policy(ctx, 1);
  const std::vector<int> menu{0, 4, 5, 11};
  const int chosen = policy.act(menu, 1);
  const int expected = argmax_menu(std::span<const int>(menu), [&](int j) { return policy.predict(j); });
  EXPECT_EQ(chosen, expected);
  for (const int j : menu) EXPECT_LE(policy.predict(j), policy.predict(chosen));
}

TEST(SwarmCF, FullExplorationIsUniform) {
  auto ctx = context(4, 12, 3);
  ctx.exploration = {1.0, 1.0, 1.0};
  SwarmCF policy(ctx, 2);
  const std::vector<int> menu{1, 3, 5, 7, 9};
  std::map<int, int> counts;
  for (int t = 1; t <= 10000; ++t) ++counts[policy.act(menu, t)];
  double chi2 = 0.0;
  for (const int j : menu) chi2 += std::pow(counts[j] - 2000.0, 2) / 2000.0;
  EXPECT_LT(chi2, 13.28);  // chi-square, 4 dof, p = 0.01
}

TEST(SwarmCF, RefitsEveryThirdRound) {
  const auto ctx = context(5, 8, 2);
  SwarmCF policy(ctx, 0);
  const Matrix U0 = policy.task_factors();
  for (int t = 1; t <= 3; ++t) {
    std::vector<ObservationRecord> recs;
    for (int k = 0; k < 5; ++k) recs.push_back(record(0, k, (k + t) % 8, 0.1 * (k - t), t));
    policy.ingest(recs, t);
    policy.end_round(t);
    if (t < 3) {
      EXPECT_EQ(policy.task_factors(), U0) << "round " << t;
    } else {
      EXPECT_NE(policy.task_factors(), U0);
    }
  }
}

TEST(SwarmCF, EmptyIngestChangesNothing) {
  const auto ctx = context(5, 8, 2);
  SwarmCF policy(ctx, 0);
  const Matrix P0 = policy.robot_factors(), U0 = policy.task_factors();
  policy.ingest({}, 1);
  for (int t = 1; t <= 6; ++t) policy.end_round(t);
  EXPECT_EQ(policy.store().size(), 0u);
  EXPECT_EQ(policy.robot_factors(), P0);
  EXPECT_EQ(policy.task_factors(), U0);
}

TEST(SwarmCF, DiscardsCollidedRecords) {
  SwarmCF policy(context(5, 8, 2), 0);
  std::vector<ObservationRecord> recs{{0, 0, 3, 0.0, 1.0, 1, true}, record(0, 1, 2, 0.3)};
  policy.ingest(recs, 1);
  EXPECT_EQ(policy.store().size(), 1u);
}

TEST(SwarmCF, PredictIsTotal) {
  const auto w = build_block_world(world_cfg(8, 10, 50));
  MissionConfig cfg;
  cfg.T = 9;
  cfg.c = 5;
  cfg.seed = 8;
  const auto res = run_mission(w, cfg, "swarmcf");
  EXPECT_TRUE(res.predictions.allFinite());
}

TEST(SwarmCF, NoiselessFullBroadcastRecovers) {
  // Scored on tasks engaged by enough distinct robots to pin their factor.
  const auto w = build_block_world(world_cfg(9));
  MissionConfig cfg;
  cfg.rho = 1.0;
  cfg.noise = {0.0, 0.0};
  cfg.seed = 9;
  const auto res = run_mission(w, cfg, "swarmcf");
  std::vector<std::set<int>> engagers(static_cast<std::size_t>(w.tasks()));
  for (const auto& e : res.log.entries) engagers[static_cast<std::size_t>(e.action)].insert(e.robot);
  const double sd = entry_std(w.R);
  double sq = 0.0;
  long cells = 0;
  for (int j = 0; j < w.tasks(); ++j) {
    if (static_cast<int>(engagers[static_cast<std::size_t>(j)].size()) < 2 * res.log.d_hat) continue;
    sq += (res.predictions.col(j) - w.R.col(j)).squaredNorm();
    cells += w.robots();
  }
  ASSERT_GT(cells, 0);
  EXPECT_LE(std::sqrt(sq / static_cast<double>(cells)), 0.2 * sd) << cells / w.robots() << " tasks";
}

TEST(SwarmCF, ArgmaxScaleInvariance) {
  auto s = make_stream(3, StreamTag::Analysis);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> score(20);
    for (auto& v : score) v = s.normal();
    const auto menu = s.subset(20, 6);
    const double k = s.uniform(0.01, 100.0);
    const int a = argmax_menu(std::span<const int>(menu), [&](int j) { return score[static_cast<std::size_t>(j)]; });
    const int b = argmax_menu(std::span<const int>(menu), [&](int j) { return k * score[static_cast<std::size_t>(j)]; });
    EXPECT_EQ(a, b);
  }
}

// ------------------------------------------------------------------ fold-in

TEST(FoldIn, ExactWithSpanningBasis) {
  const int d = 5;
  auto s = make_stream(4, StreamTag::Analysis);
  Matrix B(d, d);
  Vector x(d);
  for (int r = 0; r < d; ++r) {
    x(r) = s.normal();
    for (int c = 0; c < d; ++c) B(r, c) = s.normal();
  }
  const Vector xhat = fold_in(B, Vector::Ones(d), B * x, 1e-12);
  Vector q(d);
  for (int c = 0; c < d; ++c) q(c) = s.normal();
  EXPECT_NEAR(q.dot(xhat), q.dot(x), 1e-6);
  EXPECT_THROW(fold_in(Matrix(0, d), Vector(0), Vector(0), 1e-2), InputError);
}

TEST(FoldIn, MoreObservationsReduceNoiseError) {
  double err_small = 0.0, err_large = 0.0;
  const int d = 5;
  for (int trial = 0; trial < 64; ++trial) {
    auto s = make_stream(5, StreamTag::Analysis, static_cast<std::uint64_t>(trial));
    Vector x(d), q(d);
    for (int c = 0; c < d; ++c) {
      x(c) = s.normal();
      q(c) = s.normal();
    }
    for (const int k : {d, 4 * d}) {
      Matrix B(k, d);
      Vector y(k);
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < d; ++c) B(r, c) = s.normal();
        y(r) = B.row(r).dot(x) + 0.3 * s.normal();
      }
      const double e = std::abs(q.dot(fold_in(B, Vector::Ones(k), y, 1e-12)) - q.dot(x));
      (k == d ? err_small : err_large) += e;
    }
  }
  EXPECT_LT(err_large, err_small);
}

// ------------------------------------------------------------------ other learners

TEST(SwarmCFBatch, ExactOnCompleteLowRank) {
  const auto w = build_block_world(world_cfg(10, 12, 30));
  auto ctx = context(12, 30, 5);
  SwarmCFBatch policy(ctx, 3);
  std::vector<ObservationRecord> recs;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 30; ++j) recs.push_back(record(3, i, j, w.R(i, j)));
  policy.ingest(recs, 1);
  policy.fit();
  const Matrix done = *policy.completed_matrix();
  const double rmse = std::sqrt((done - w.R).squaredNorm() / static_cast<double>(w.R.size()));
  EXPECT_LE(rmse, 1e-6 * entry_std(w.R));
}

TEST(MFSGD, ZeroRateIsFrozen) {
  auto ctx = context(3, 4, 2);
  ctx.learner.sgd_rate = 0.0;
  MFSGD policy(ctx, 0);
  const Matrix before = *policy.completed_matrix();
  policy.ingest(std::vector<ObservationRecord>{record(0, 1, 2, 5.0)}, 1);
  EXPECT_EQ(*policy.completed_matrix(), before);
}

TEST(MFSGD, ConvergesOnRepeatedCell) {
  auto ctx = context(3, 4, 2);
  ctx.learner.lambda = 0.0;
  ctx.learner.init_scale = 1.0;
  MFSGD policy(ctx, 0);
  for (int k = 0; k < 1000; ++k) policy.step(1, 2, 0.8);
  EXPECT_NEAR(policy.predict_cell(1, 2), 0.8, 1e-2);
}

TEST(BiasModel, NoRecordsPredictsZero) {
  BiasModel b(context(3, 6, 2), 0);
  for (int j = 0; j < 6; ++j) EXPECT_EQ(b.predict(j), 0.0);
}

TEST(BiasModel, SharedOrderMatchesOracleRanking) {
  // Identical robots on a rank-one world: one popularity order.
  const int m = 6, n = 15;
  Vector u(n);
  for (int j = 0; j < n; ++j) u(j) = std::sin(1.7 * j);
  auto ctx = context(m, n, 1);
  BiasModel b(ctx, 0);
  std::vector<ObservationRecord> recs;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) recs.push_back(record(0, i, j, u(j)));
  b.ingest(recs, 1);
  b.end_round(1);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (u(j) > u(k)) EXPECT_GT(b.predict(j), b.predict(k));
}

TEST(ESTR, ProbeIsUniformThenGreedy) {
  auto ctx = context(3, 10, 2);
  ctx.horizon = 100000;
  ESTR policy(ctx, 0);
  ASSERT_EQ(policy.probe_rounds(), 40000);
  const std::vector<int> menu{0, 2, 4, 6};
  std::map<int, int> counts;
  for (int t = 1; t <= 8000; ++t) ++counts[policy.act(menu, t)];
  for (const int j : menu) EXPECT_NEAR(counts[j] / 8000.0, 0.25, 0.02);
}

// ------------------------------------------------------------------ references

TEST(Oracle, SingletonAndGreedy) {
  const auto w = build_block_world(world_cfg(11, 4, 10));
  const std::vector<int> one{7};
  EXPECT_EQ(oracle_act(w, 2, one), 7);
  MissionConfig cfg;
  cfg.T = 5;
  cfg.c = 4;
  cfg.seed = 11;
  const auto res = run_mission(w, cfg, "oracle");
  for (const auto& e : res.log.entries) {
    for (const int j : e.menu) EXPECT_GE(w.R(e.robot, e.action), w.R(e.robot, j));
  }
}

TEST(Oracle, GreedyCollidesWhereMatchingDoesNot) {
  Matrix R(2, 2);
  R << 1.0, 0.9, 1.0, 0.1;  // both robots like task 0 best
  const std::vector<std::vector<int>> menus{{0, 1}, {0, 1}};
  const auto hungarian = centralized_assignment(R, menus);
  EXPECT_EQ(hungarian, (std::vector<int>{1, 0}));
  LatentWorld w;
  w.R = R;
  EXPECT_EQ(oracle_act(w, 0, menus[0]), 0);
  EXPECT_EQ(oracle_act(w, 1, menus[1]), 0);
}

TEST(Ceiling, SingleRobotTakesGlobalBest) {
  auto cfg = world_cfg(12, 2, 20);
  const auto w = build_block_world(cfg);
  Matrix one = w.R.topRows(1);
  LatentWorld single;
  single.R = one;
  std::vector<int> all(20);
  for (int j = 0; j < 20; ++j) all[static_cast<std::size_t>(j)] = j;
  Eigen::Index best;
  one.row(0).maxCoeff(&best);
  EXPECT_EQ(centralized_ceiling(single, {all}, 1, false, 0.0, 1)[0], static_cast<int>(best));
}

TEST(Ceiling, RespectsMenusAndDistinctness) {
  const auto w = build_block_world(world_cfg(13, 8, 30));
  std::vector<std::vector<int>> menus;
  for (int i = 0; i < 8; ++i) menus.push_back(draw_menu(30, 5, i, 1, 13));
  const auto a = centralized_assignment(w.R, menus);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  for (int i = 0; i < 8; ++i)
    EXPECT_TRUE(std::binary_search(menus[static_cast<std::size_t>(i)].begin(),
                                   menus[static_cast<std::size_t>(i)].end(), a[static_cast<std::size_t>(i)]));
}

TEST(Policies, UnknownNameIsConfigError) {
  EXPECT_THROW(make_team("bogus", context(2, 4, 1)), ConfigError);
  EXPECT_THROW(make_team("oracle", context(2, 4, 1)), ConfigError);
}

}  // namespace
}  // namespace zkmrta
