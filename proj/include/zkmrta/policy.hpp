#pragma once

// Interfaces between the mission engine and the learners.
//
// A Policy is one robot's learner. A Team is what the engine talks to: it
// maps the round's menus to actions and routes each robot's private records
// to that robot only. Decentralized methods are a Team of independent
// Policies; the centralized reference ceilings implement Team directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "zkmrta/channel.hpp"
#include "zkmrta/numerics.hpp"
#include "zkmrta/rng.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {

struct ExplorationSchedule {
  double eps0 = 0.5;
  double decay = 0.93;
  double eps_min = 0.05;

  // Rounds count from 1.
  double at(int round) const noexcept {
    return std::max(eps_min, eps0 * std::pow(decay, static_cast<double>(round - 1)));
  }
};

struct LearnerConfig {
  int refit_period = 3;
  int als_sweeps = 8;
  double lambda = 1e-2;
  int batch_refine_sweeps = 4;
  double init_scale = 0.1;       // factor init sd is init_scale / sqrt(d_hat)
  double sgd_rate = 0.05;
  double estr_probe_fraction = 0.4;
  double hybrid_probe_fraction = 0.2;
  double bias_damping = 1.0;
  double prior = 0.0;            // structure-free estimate of a never-engaged task
};

// Everything a team may know when it is built. The world itself is never
// part of it.
struct TeamContext {
  int m = 0;
  int n = 0;
  int d_hat = 1;
  int horizon = 1;
  ExplorationSchedule exploration;
  LearnerConfig learner;
  std::uint64_t seed = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  // Menu is sorted ascending and non-empty; result must be one of its items.
  virtual int act(std::span<const int> menu, int round) = 0;
  // Records whose observer is this robot.
  virtual void ingest(std::span<const ObservationRecord> records, int round) = 0;
  virtual void end_round(int /*round*/) {}
  virtual void finish(int /*horizon*/) {}
  // Evaluation-only estimate of this robot's reward on `task`.
  virtual double predict(int task) const = 0;
  // This robot's completed reward matrix, for learners that hold one.
  virtual std::optional<Matrix> completed_matrix() const { return std::nullopt; }
};

class Team {
 public:
  virtual ~Team() = default;
  virtual std::vector<int> act(const std::vector<std::vector<int>>& menus, int round) = 0;
  virtual void ingest(int robot, std::span<const ObservationRecord> records, int round) = 0;
  virtual void end_round(int /*round*/) {}
  virtual void finish(int /*horizon*/) {}
  virtual double predict(int robot, int task) const = 0;
  virtual std::optional<Matrix> completed_matrix(int /*robot*/) const { return std::nullopt; }
};

class DecentralizedTeam final : public Team {
 public:
  explicit DecentralizedTeam(std::vector<std::unique_ptr<Policy>> members)
      : members_(std::move(members)) {}

  std::vector<int> act(const std::vector<std::vector<int>>& menus, int round) override {
    std::vector<int> out(members_.size());
    for (std::size_t i = 0; i < members_.size(); ++i) out[i] = members_[i]->act(menus[i], round);
    return out;
  }
  void ingest(int robot, std::span<const ObservationRecord> records, int round) override {
    members_[static_cast<std::size_t>(robot)]->ingest(records, round);
  }
  void end_round(int round) override {
    for (auto& p : members_) p->end_round(round);
  }
  void finish(int horizon) override {
    for (auto& p : members_) p->finish(horizon);
  }
  double predict(int robot, int task) const override {
    return members_[static_cast<std::size_t>(robot)]->predict(task);
  }
  std::optional<Matrix> completed_matrix(int robot) const override {
    return members_[static_cast<std::size_t>(robot)]->completed_matrix();
  }

  Policy& member(int robot) { return *members_[static_cast<std::size_t>(robot)]; }

 private:
  std::vector<std::unique_ptr<Policy>> members_;
};

// Lowest-index maximizer of score(j) over the menu.
template <typename Score>
int argmax_menu(std::span<const int> menu, Score&& score) {
  int best = menu.front();
  double best_score = score(best);
  for (std::size_t k = 1; k < menu.size(); ++k) {
    const int j = menu[k];
    const double s = score(j);
    if (s > best_score || (s == best_score && j < best)) {
      best = j;
      best_score = s;
    }
  }
  return best;
}

// With probability eps a uniform menu item, else the greedy choice.
template <typename Score>
int epsilon_greedy(std::span<const int> menu, double eps, Stream& s, Score&& score) {
  if (s.uniform() < eps) return menu[static_cast<std::size_t>(s.index(menu.size()))];
  return argmax_menu(menu, std::forward<Score>(score));
}

inline Matrix small_random(int rows, int cols, double scale, Stream s) {
  const double sd = scale / std::sqrt(static_cast<double>(cols));
  Matrix F(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) F(i, c) = sd * s.normal();
  return F;
}

}  // namespace zkmrta
