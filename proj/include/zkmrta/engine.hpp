#pragma once

// Mission engine: menus, simultaneous action, capacity-1 contention,
// per-observer broadcast, scheduled refits and the event log.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zkmrta/channel.hpp"
#include "zkmrta/errors.hpp"
#include "zkmrta/policies.hpp"
#include "zkmrta/policy.hpp"
#include "zkmrta/rng.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {

struct MissionConfig {
  int T = 50;
  int c = 20;  // menu size; 0 means every task
  bool contention = false;
  ExplorationSchedule exploration;
  LearnerConfig learner;
  MaskModel mask_model = MaskModel::Persistent;
  double rho = 0.25;
  NoiseModel noise;
  // Guessed-rank range; 0 means the default [d, 2d].
  int d_hat_low = 0;
  int d_hat_high = 0;
  std::uint64_t seed = 0;

  int menu_size(int n) const noexcept { return c <= 0 ? n : c; }

  void validate(int n) const {
    if (T < 1) throw ConfigError("mission: T must be >= 1");
    if (menu_size(n) < 1 || menu_size(n) > n) throw ConfigError("mission: c must lie in [1, n]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("mission: rho must lie in [0, 1]");
    if (learner.refit_period < 1) throw ConfigError("mission: refit period must be >= 1");
    if ((d_hat_low > 0) != (d_hat_high > 0) || d_hat_low > d_hat_high) {
      throw ConfigError("mission: guessed-rank range must be non-empty with d_hat_low >= 1");
    }
    noise.validate();
  }
};

struct LogEntry {
  int round = 0;
  int robot = 0;
  std::vector<int> menu;
  int action = 0;
  bool collided = false;
  double earned = 0.0;
  int observations = 0;
};

struct MissionLog {
  int m = 0;
  int n = 0;
  int T = 0;
  int d_hat = 0;
  bool contention = false;
  Mask mask;                      // persistent or geometry mask
  std::vector<Mask> round_masks;  // per-round masks (PerRound model)
  std::vector<LogEntry> entries;  // round-major, robot-minor

  const LogEntry& at(int round, int robot) const {
    return entries[static_cast<std::size_t>((round - 1) * m + robot)];
  }
  const Mask& mask_for(int round) const {
    return round_masks.empty() ? mask : round_masks[static_cast<std::size_t>(round - 1)];
  }
};

struct MissionResult {
  MissionLog log;
  Matrix predictions;                   // m x n, row i = robot i's predict()
  std::vector<Matrix> completed;        // per-robot completed matrices, when requested
};

// Uniform size-c task subset for (robot, round), sorted ascending.
inline std::vector<int> draw_menu(int n, int c, int robot, int round, std::uint64_t seed) {
  if (c < 1 || c > n) throw ConfigError("draw_menu: c must lie in [1, n]");
  if (c == n) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) all[static_cast<std::size_t>(j)] = j;
    return all;
  }
  auto s = make_stream(seed, StreamTag::Menu, static_cast<std::uint64_t>(robot),
                       static_cast<std::uint64_t>(round));
  return s.subset(n, c);
}

// Realizes the round's rewards. Under contention robots claim tasks in a
// uniformly random order; later claimants of a taken task collide and earn 0.
inline std::vector<Engagement> resolve_round(const std::vector<int>& choices, bool contention,
                                             const LatentWorld& world, int round,
                                             std::uint64_t seed) {
  const int m = static_cast<int>(choices.size());
  std::vector<Engagement> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int j = choices[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = {i, j, world.R(i, j), false};
  }
  if (!contention) return out;
  std::vector<int> order(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  auto s = make_stream(seed, StreamTag::Contention, static_cast<std::uint64_t>(round));
  s.shuffle(order);
  std::vector<char> taken(static_cast<std::size_t>(world.tasks()), 0);
  for (const int i : order) {
    auto& ev = out[static_cast<std::size_t>(i)];
    auto& t = taken[static_cast<std::size_t>(ev.task)];
    if (t) {
      ev.collided = true;
      ev.reward = 0.0;
    } else {
      t = 1;
    }
  }
  return out;
}

inline int draw_guessed_rank(int d, const MissionConfig& cfg) {
  const int lo = cfg.d_hat_low > 0 ? cfg.d_hat_low : d;
  const int hi = cfg.d_hat_high > 0 ? cfg.d_hat_high : 2 * d;
  auto s = make_stream(cfg.seed, StreamTag::GuessedRank);
  return lo + static_cast<int>(s.index(static_cast<std::uint64_t>(hi - lo + 1)));
}

inline Mask draw_mission_mask(const LatentWorld& world, const MissionConfig& cfg,
                              double geometry_radius) {
  switch (cfg.mask_model) {
    case MaskModel::Geometry:
      if (world.positions.empty()) throw ConfigError("geometry mask needs a world with positions");
      return geometry_mask(world.positions, geometry_radius);
    case MaskModel::PerRound:
    case MaskModel::Persistent:
      break;
  }
  return draw_persistent_mask(world.robots(), cfg.rho, cfg.seed);
}

using TeamFactory = std::function<std::unique_ptr<Team>(const TeamContext&)>;

struct RunOptions {
  bool keep_completed = false;
  double geometry_radius = 0.0;  // Geometry mask model
};

inline MissionResult run_mission(const LatentWorld& world, const MissionConfig& cfg,
                                 const TeamFactory& factory, const RunOptions& opts = {}) {
  const int m = world.robots();
  const int n = world.tasks();
  cfg.validate(n);
  const int c = cfg.menu_size(n);

  MissionResult result;
  MissionLog& log = result.log;
  log.m = m;
  log.n = n;
  log.T = cfg.T;
  log.contention = cfg.contention;
  log.d_hat = draw_guessed_rank(world.d, cfg);
  log.mask = draw_mission_mask(world, cfg, opts.geometry_radius);
  log.entries.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(cfg.T));

  TeamContext ctx;
  ctx.m = m;
  ctx.n = n;
  ctx.d_hat = log.d_hat;
  ctx.horizon = cfg.T;
  ctx.exploration = cfg.exploration;
  ctx.learner = cfg.learner;
  ctx.seed = cfg.seed;
  auto team = factory(ctx);

  std::vector<std::vector<int>> menus(static_cast<std::size_t>(m));
  for (int t = 1; t <= cfg.T; ++t) {
    for (int i = 0; i < m; ++i) menus[static_cast<std::size_t>(i)] = draw_menu(n, c, i, t, cfg.seed);

    const auto actions = team->act(menus, t);
    if (static_cast<int>(actions.size()) != m) {
      throw ProtocolViolation("team returned the wrong number of actions");
    }
    for (int i = 0; i < m; ++i) {
      const auto& menu = menus[static_cast<std::size_t>(i)];
      const int a = actions[static_cast<std::size_t>(i)];
      if (!std::binary_search(menu.begin(), menu.end(), a)) {
        throw ProtocolViolation("robot " + std::to_string(i) + " chose task " + std::to_string(a) +
                                " outside its menu in round " + std::to_string(t));
      }
    }

    const auto events = resolve_round(actions, cfg.contention, world, t, cfg.seed);
    if (cfg.mask_model == MaskModel::PerRound) {
      log.round_masks.push_back(draw_iid_mask(m, cfg.rho, cfg.seed, t));
    }
    const Mask& mask = log.mask_for(t);

    for (int i = 0; i < m; ++i) {
      auto records = observe_round(events, i, mask, cfg.noise, world.positions, t, cfg.seed);
      const auto& own = events[static_cast<std::size_t>(i)];
      if (own.collided) records.push_back({i, i, own.task, 0.0, 1.0, t, true});
      team->ingest(i, records, t);
      log.entries.push_back({t, i, menus[static_cast<std::size_t>(i)], own.task, own.collided,
                             own.reward, static_cast<int>(records.size())});
    }
    team->end_round(t);
  }
  team->finish(cfg.T);

  result.predictions.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) result.predictions(i, j) = team->predict(i, j);
  if (opts.keep_completed) {
    for (int i = 0; i < m; ++i) {
      auto cm = team->completed_matrix(i);
      if (cm) result.completed.push_back(std::move(*cm));
    }
  }
  return result;
}

inline MissionResult run_mission(const LatentWorld& world, const MissionConfig& cfg,
                                 std::string_view policy, const RunOptions& opts = {}) {
  return run_mission(
      world, cfg,
      [&](const TeamContext& ctx) {
        return make_team(policy, ctx, policy == "oracle" ? &world : nullptr);
      },
      opts);
}

}  // namespace zkmrta
