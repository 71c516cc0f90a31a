#pragma once

// Evaluation quantities: skill normalization, unseen-pair skill, anytime
// trajectories, regret, collision rate, state uniqueness and percentile
// bootstrap intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "zkmrta/engine.hpp"
#include "zkmrta/numerics.hpp"
#include "zkmrta/policies.hpp"
#include "zkmrta/rng.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {

struct SkillSample {
  double earned = 0.0;
  double random_baseline = 0.0;
  double oracle_baseline = 0.0;
};

// (earned - random) / (oracle - random); empty when the normalizer vanishes.
inline std::optional<double> skill(const SkillSample& s) {
  const double span = s.oracle_baseline - s.random_baseline;
  if (!(std::abs(span) > 1e-15)) return std::nullopt;
  return (s.earned - s.random_baseline) / span;
}

enum class Normalizer { MenuMax, Matching };

// Team totals per round (index t - 1).
struct RoundBaselines {
  std::vector<double> random;
  std::vector<double> oracle;
  std::vector<double> menu_max;
};

inline constexpr int kRandomRollouts = 64;

// Random and oracle team totals for every round of a logged mission. Without
// contention the random value is the exact menu mean; under capacity-1 it is
// a Monte-Carlo average over random-policy rollouts. The oracle is the menu
// max, or the per-round Hungarian matching value when matching-normalized or
// under contention.
inline RoundBaselines compute_baselines(const LatentWorld& world, const MissionLog& log,
                                        Normalizer normalizer, std::uint64_t seed,
                                        int rollouts = kRandomRollouts) {
  RoundBaselines b;
  const bool matching = normalizer == Normalizer::Matching || log.contention;
  std::vector<std::vector<int>> menus(static_cast<std::size_t>(log.m));
  for (int t = 1; t <= log.T; ++t) {
    double rnd = 0.0;
    double mmax = 0.0;
    for (int i = 0; i < log.m; ++i) {
      const auto& menu = log.at(t, i).menu;
      double sum = 0.0;
      double best = -std::numeric_limits<double>::infinity();
      for (const int j : menu) {
        sum += world.R(i, j);
        best = std::max(best, world.R(i, j));
      }
      rnd += sum / static_cast<double>(menu.size());
      mmax += best;
      menus[static_cast<std::size_t>(i)] = menu;
    }
    if (log.contention) {
      double total = 0.0;
      std::vector<int> choice(static_cast<std::size_t>(log.m));
      for (int r = 0; r < rollouts; ++r) {
        auto s = make_stream(seed, StreamTag::RandomBaseline, static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(r));
        for (int i = 0; i < log.m; ++i) {
          const auto& menu = menus[static_cast<std::size_t>(i)];
          choice[static_cast<std::size_t>(i)] = menu[static_cast<std::size_t>(s.index(menu.size()))];
        }
        const auto events = resolve_round(choice, true, world, t, s.next_u64());
        for (const auto& ev : events) total += ev.reward;
      }
      rnd = total / static_cast<double>(rollouts);
    }
    double oracle = mmax;
    if (matching) {
      const auto assign = centralized_assignment(world.R, menus);
      oracle = 0.0;
      for (int i = 0; i < log.m; ++i) oracle += world.R(i, assign[static_cast<std::size_t>(i)]);
    }
    b.random.push_back(rnd);
    b.oracle.push_back(oracle);
    b.menu_max.push_back(mmax);
  }
  return b;
}

inline std::vector<double> earned_per_round(const MissionLog& log) {
  std::vector<double> out(static_cast<std::size_t>(log.T), 0.0);
  for (const auto& e : log.entries) out[static_cast<std::size_t>(e.round - 1)] += e.earned;
  return out;
}

// Cumulative skill after each round; NaN while the normalizer is zero.
inline std::vector<double> anytime_skill(const MissionLog& log, const RoundBaselines& b) {
  const auto earned = earned_per_round(log);
  std::vector<double> out;
  double e = 0.0, r = 0.0, o = 0.0;
  for (std::size_t t = 0; t < earned.size(); ++t) {
    e += earned[t];
    r += b.random[t];
    o += b.oracle[t];
    out.push_back(skill({e, r, o}).value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  return out;
}

inline double collision_rate(const MissionLog& log) {
  if (!log.contention || log.entries.empty()) return 0.0;
  const auto collided = std::count_if(log.entries.begin(), log.entries.end(),
                                      [](const LogEntry& e) { return e.collided; });
  return static_cast<double>(collided) / static_cast<double>(log.entries.size());
}

// Per-robot cumulative shortfall against the menu max.
inline double regret(const MissionLog& log, const RoundBaselines& b) {
  const auto earned = earned_per_round(log);
  double total = 0.0;
  for (std::size_t t = 0; t < earned.size(); ++t) total += b.menu_max[t] - earned[t];
  return total / static_cast<double>(log.m);
}

// First round (1-based) at which the series reaches `level`, or -1.
inline int rounds_to_reach(std::span<const double> series, double level) {
  for (std::size_t t = 0; t < series.size(); ++t)
    if (series[t] >= level) return static_cast<int>(t + 1);
  return -1;
}

inline std::vector<std::vector<char>> engaged_tasks(const MissionLog& log) {
  std::vector<std::vector<char>> engaged(static_cast<std::size_t>(log.m),
                                         std::vector<char>(static_cast<std::size_t>(log.n), 0));
  for (const auto& e : log.entries)
    engaged[static_cast<std::size_t>(e.robot)][static_cast<std::size_t>(e.action)] = 1;
  return engaged;
}

struct UnseenEvalConfig {
  int menus = 200;  // E
  int menu_size = 20;
};

// Skill of each robot's predictions on menus drawn from the tasks it never
// engaged, averaged over menus then robots.
inline std::optional<double> unseen_pair_skill(const Matrix& predictions,
                                               const std::vector<std::vector<char>>& engaged,
                                               const LatentWorld& world,
                                               const UnseenEvalConfig& eval, std::uint64_t seed) {
  const int m = world.robots();
  const int n = world.tasks();
  double total = 0.0;
  int evaluated = 0;
  for (int i = 0; i < m; ++i) {
    std::vector<int> pool;
    for (int j = 0; j < n; ++j)
      if (!engaged[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) pool.push_back(j);
    if (pool.size() < 2) continue;
    const int size = std::min<int>(eval.menu_size, static_cast<int>(pool.size()));
    const int count = size == static_cast<int>(pool.size()) ? 1 : eval.menus;
    auto s = make_stream(seed, StreamTag::UnseenEval, static_cast<std::uint64_t>(i));
    double robot_total = 0.0;
    int scored = 0;
    std::vector<int> menu;
    for (int e = 0; e < count; ++e) {
      menu.clear();
      if (size == static_cast<int>(pool.size())) {
        menu = pool;
      } else {
        for (const int k : s.subset(static_cast<int>(pool.size()), size))
          menu.push_back(pool[static_cast<std::size_t>(k)]);
      }
      const int chosen = argmax_menu(std::span<const int>(menu),
                                     [&](int j) { return predictions(i, j); });
      double mean = 0.0;
      double best = -std::numeric_limits<double>::infinity();
      for (const int j : menu) {
        mean += world.R(i, j);
        best = std::max(best, world.R(i, j));
      }
      mean /= static_cast<double>(menu.size());
      const auto sk = skill({world.R(i, chosen), mean, best});
      if (!sk) continue;
      robot_total += *sk;
      ++scored;
    }
    if (scored == 0) continue;
    total += robot_total / scored;
    ++evaluated;
  }
  if (evaluated == 0) return std::nullopt;
  return total / evaluated;
}

// Mean pairwise cosine distance between robots' completed matrices, in [0, 1].
inline double state_uniqueness(std::span<const Matrix> models) {
  if (models.size() < 2) throw InputError("state_uniqueness: needs at least two models");
  double total = 0.0;
  long pairs = 0;
  for (std::size_t a = 0; a < models.size(); ++a) {
    for (std::size_t b = a + 1; b < models.size(); ++b) {
      const double na = models[a].norm();
      const double nb = models[b].norm();
      double dist = 1.0;
      if (na > 0.0 && nb > 0.0) {
        const double cos = (models[a].array() * models[b].array()).sum() / (na * nb);
        dist = std::clamp(1.0 - cos, 0.0, 1.0);
      }
      total += dist;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap interval of the mean.
inline Interval bootstrap_ci(std::span<const double> values, double level = 0.95,
                             int resamples = 10000, std::uint64_t seed = 0) {
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  const double mu = mean_of(values);
  if (values.size() < 2) return {mu, mu};
  auto s = make_stream(seed, StreamTag::Bootstrap);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& out : means) {
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) acc += values[s.index(values.size())];
    out = acc / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 0.5 * (1.0 - level);
  auto pick = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - f) + means[hi] * f;
  };
  // Constant samples resample to the same sum; pin to the mean so the
  // interval is exactly degenerate.
  Interval ci{std::min(pick(alpha), mu), std::max(pick(1.0 - alpha), mu)};
  return ci;
}

}  // namespace zkmrta
