#pragma once

// Post-hoc identifiability analysis over mission logs. These routines read
// the true factors and are never reachable from a policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "zkmrta/channel.hpp"
#include "zkmrta/engine.hpp"
#include "zkmrta/errors.hpp"
#include "zkmrta/metrics.hpp"
#include "zkmrta/numerics.hpp"
#include "zkmrta/policies.hpp"
#include "zkmrta/rng.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {

// E_i(j): the robots whose successful engagement of task j robot i sensed.
class EngagerSets {
 public:
  EngagerSets() = default;
  EngagerSets(int m, int n) : m_(m), n_(n), sets_(static_cast<std::size_t>(m) * n) {}

  int robots() const noexcept { return m_; }
  int tasks() const noexcept { return n_; }

  const std::vector<int>& at(int observer, int task) const { return sets_[index(observer, task)]; }

  void insert(int observer, int task, int actor) {
    auto& s = sets_[index(observer, task)];
    const auto it = std::lower_bound(s.begin(), s.end(), actor);
    if (it == s.end() || *it != actor) s.insert(it, actor);
  }

  double mean_size() const {
    double total = 0.0;
    for (const auto& s : sets_) total += static_cast<double>(s.size());
    return sets_.empty() ? 0.0 : total / static_cast<double>(sets_.size());
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int m_ = 0;
  int n_ = 0;
  std::vector<std::vector<int>> sets_;
};

// Uses the mask in force at each engagement's round; `up_to_round` limits the
// log prefix (0 means the whole mission).
inline EngagerSets compute_engager_sets(const MissionLog& log, int up_to_round = 0) {
  EngagerSets sets(log.m, log.n);
  const int last = up_to_round > 0 ? std::min(up_to_round, log.T) : log.T;
  for (const auto& e : log.entries) {
    if (e.round > last || e.collided) continue;
    const Mask& mask = log.mask_for(e.round);
    for (int i = 0; i < log.m; ++i)
      if (mask.visible(i, e.robot)) sets.insert(i, e.action, e.robot);
  }
  return sets;
}

inline EngagerSets compute_engager_sets(const MissionLog& log, const Mask& mask) {
  EngagerSets sets(log.m, log.n);
  for (const auto& e : log.entries) {
    if (e.collided) continue;
    for (int i = 0; i < log.m; ++i)
      if (mask.visible(i, e.robot)) sets.insert(i, e.action, e.robot);
  }
  return sets;
}

inline Matrix gather_rows(const Matrix& F, std::span<const int> rows) {
  Matrix B(static_cast<Eigen::Index>(rows.size()), F.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) B.row(static_cast<Eigen::Index>(r)) = F.row(rows[r]);
  return B;
}

inline constexpr double kSpanningTol = 1e-8;

// Residual of projecting p onto the row space of B, relative to |p|.
inline double spanning_residual(const Vector& p, const Matrix& B) {
  const double pn = p.norm();
  if (pn == 0.0) return 0.0;
  if (B.rows() == 0) return 1.0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(B.transpose());
  const Vector coef = cod.solve(p);
  return (B.transpose() * coef - p).norm() / pn;
}

inline bool spanning_check(const Vector& p, const Matrix& engagers, double tol = kSpanningTol) {
  return spanning_residual(p, engagers) <= tol;
}

inline int numerical_rank(const Matrix& B, double rel_tol = 1e-10) {
  if (B.rows() == 0 || B.cols() == 0) return 0;
  const Vector s = singular_values(B);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > rel_tol * s(0)) ++r;
  return r;
}

struct PairReconstruction {
  double prediction = 0.0;
  double error = 0.0;
};

// Minimum-norm least-squares estimate of the task factor from the engagers'
// observed rewards, read through p.
inline PairReconstruction reconstruct_pair(std::span<const double> observed, const Matrix& engagers,
                                           const Vector& p, double truth) {
  if (static_cast<Eigen::Index>(observed.size()) != engagers.rows()) {
    throw InputError("reconstruct_pair: one observation per engager row required");
  }
  double prediction = 0.0;
  if (engagers.rows() > 0) {
    const Eigen::Map<const Vector> y(observed.data(), static_cast<Eigen::Index>(observed.size()));
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(engagers);
    const Vector u = cod.solve(y);
    prediction = p.dot(u);
  }
  return {prediction, std::abs(prediction - truth)};
}

inline double theorem1_bound(int c, int T, int n) {
  if (c < 1 || T < 1 || n < 1) throw InputError("theorem1_bound: arguments must be positive");
  return static_cast<double>(c) * static_cast<double>(T - 1) / (2.0 * static_cast<double>(n));
}

struct PairOutcome {
  int robot = 0;
  int task = 0;
  int engagers = 0;
  int rank = 0;
  bool spans = false;
  double error = 0.0;        // least-squares reconstruction
  double prior_error = 0.0;  // |R_ij| against the zero prior
};

struct RecoveryReport {
  std::vector<PairOutcome> pairs;
  long exceptions = 0;  // spans != (error <= tol)
  double spanning_fraction = 0.0;
  double nonspanning_prior_error = 0.0;
  double nonspanning_ls_error = 0.0;
  std::vector<double> error_by_rank;  // index = engager rank 0..d, NaN if empty
  std::vector<long> count_by_rank;
};

// Per-pair reconstruction of R_ij from the noiseless entries robot i sensed
// for task j. Pairs the robot engaged itself are excluded.
inline RecoveryReport recovery_analysis(const LatentWorld& world, const MissionLog& log,
                                        double tol = kSpanningTol) {
  const auto sets = compute_engager_sets(log);
  const auto engaged = engaged_tasks(log);
  RecoveryReport rep;
  const int d = world.d;
  std::vector<double> sum(static_cast<std::size_t>(d + 1), 0.0);
  rep.count_by_rank.assign(static_cast<std::size_t>(d + 1), 0);
  long spanning = 0, nonspanning = 0;
  double prior_sum = 0.0, ls_sum = 0.0;
  std::vector<double> y;
  for (int i = 0; i < log.m; ++i) {
    const Vector p = world.P.row(i).transpose();
    for (int j = 0; j < log.n; ++j) {
      if (engaged[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      const auto& e = sets.at(i, j);
      const Matrix B = gather_rows(world.P, e);
      y.clear();
      for (const int k : e) y.push_back(world.R(k, j));
      const double truth = world.R(i, j);
      const auto rec = reconstruct_pair(y, B, p, truth);
      PairOutcome o;
      o.robot = i;
      o.task = j;
      o.engagers = static_cast<int>(e.size());
      o.rank = std::min(numerical_rank(B), d);
      o.spans = spanning_check(p, B, tol);
      o.error = rec.error;
      o.prior_error = std::abs(truth);
      if (o.spans != (o.error <= tol)) ++rep.exceptions;
      if (o.spans) {
        ++spanning;
      } else {
        ++nonspanning;
        prior_sum += o.prior_error;
        ls_sum += o.error;
      }
      sum[static_cast<std::size_t>(o.rank)] += o.error;
      ++rep.count_by_rank[static_cast<std::size_t>(o.rank)];
      rep.pairs.push_back(o);
    }
  }
  const auto total = static_cast<double>(rep.pairs.size());
  rep.spanning_fraction = total > 0 ? static_cast<double>(spanning) / total : 0.0;
  rep.nonspanning_prior_error = nonspanning > 0 ? prior_sum / static_cast<double>(nonspanning) : 0.0;
  rep.nonspanning_ls_error = nonspanning > 0 ? ls_sum / static_cast<double>(nonspanning) : 0.0;
  for (int r = 0; r <= d; ++r) {
    const long cnt = rep.count_by_rank[static_cast<std::size_t>(r)];
    rep.error_by_rank.push_back(cnt > 0 ? sum[static_cast<std::size_t>(r)] / static_cast<double>(cnt)
                                        : std::numeric_limits<double>::quiet_NaN());
  }
  return rep;
}

// Fraction of all (i, j) pairs whose spanning condition holds after `round`.
inline double spanning_fraction(const LatentWorld& world, const MissionLog& log, int round,
                                double tol = kSpanningTol) {
  const auto sets = compute_engager_sets(log, round);
  long ok = 0;
  for (int i = 0; i < log.m; ++i) {
    const Vector p = world.P.row(i).transpose();
    for (int j = 0; j < log.n; ++j)
      if (spanning_check(p, gather_rows(world.P, sets.at(i, j)), tol)) ++ok;
  }
  return static_cast<double>(ok) / (static_cast<double>(log.m) * log.n);
}

// Round at which each pair's spanning condition first holds (row-major
// m x n), or -1 if it never does within the log.
inline std::vector<int> first_spanning_rounds(const LatentWorld& world, const MissionLog& log,
                                              double tol = kSpanningTol) {
  // Engager additions per pair in round order.
  std::vector<std::vector<std::pair<int, int>>> adds(static_cast<std::size_t>(log.m) * log.n);
  std::vector<char> seen(adds.size() * static_cast<std::size_t>(log.m), 0);
  for (const auto& e : log.entries) {
    if (e.collided) continue;
    const Mask& mask = log.mask_for(e.round);
    for (int i = 0; i < log.m; ++i) {
      if (!mask.visible(i, e.robot)) continue;
      const std::size_t pair = static_cast<std::size_t>(i) * log.n + static_cast<std::size_t>(e.action);
      auto& flag = seen[pair * static_cast<std::size_t>(log.m) + static_cast<std::size_t>(e.robot)];
      if (flag) continue;
      flag = 1;
      adds[pair].push_back({e.round, e.robot});
    }
  }
  std::vector<int> first(adds.size(), -1);
  std::vector<int> members;
  for (int i = 0; i < log.m; ++i) {
    const Vector p = world.P.row(i).transpose();
    for (int j = 0; j < log.n; ++j) {
      const std::size_t pair = static_cast<std::size_t>(i) * log.n + static_cast<std::size_t>(j);
      auto& a = adds[pair];
      std::stable_sort(a.begin(), a.end(),
                       [](const auto& x, const auto& y) { return x.first < y.first; });
      members.clear();
      for (std::size_t k = 0; k < a.size(); ++k) {
        members.push_back(a[k].second);
        // Only test once every addition of this round is in.
        if (k + 1 < a.size() && a[k + 1].first == a[k].first) continue;
        if (spanning_check(p, gather_rows(world.P, members), tol)) {
          first[pair] = a[k].first;
          break;
        }
      }
    }
  }
  return first;
}

// Fraction of pairs spanned after each round 1..T.
inline std::vector<double> spanning_curve(std::span<const int> first_rounds, int T) {
  std::vector<double> curve(static_cast<std::size_t>(T), 0.0);
  for (const int r : first_rounds)
    if (r >= 1 && r <= T) curve[static_cast<std::size_t>(r - 1)] += 1.0;
  double acc = 0.0;
  for (auto& c : curve) {
    acc += c;
    c = acc / static_cast<double>(first_rounds.size());
  }
  return curve;
}

inline constexpr double kCoverageTarget = 0.95;

// First round at which the spanning condition holds for the target share of
// pairs, or -1.
inline int coverage_time(const LatentWorld& world, const MissionLog& log,
                         double target = kCoverageTarget) {
  const auto first = first_spanning_rounds(world, log);
  return rounds_to_reach(spanning_curve(first, log.T), target);
}

// Number of adjacent decreases violated (later value larger) in a sequence
// that should be non-increasing; sentinels count as +infinity.
inline int count_inversions(std::span<const double> seq) {
  auto key = [](double v) { return v < 0 ? std::numeric_limits<double>::infinity() : v; };
  int inv = 0;
  for (std::size_t k = 1; k < seq.size(); ++k)
    if (key(seq[k]) > key(seq[k - 1])) ++inv;
  return inv;
}

struct BoundReport {
  double bound = 0.0;
  double mean = 0.0;
  double half_width = 0.0;
  bool holds = false;
  double margin = 0.0;  // bound + 2 half-widths - mean
};

inline BoundReport check_anytime_bound(std::span<const double> anytime_skills, int c, int T, int n,
                                       std::uint64_t seed = 0) {
  BoundReport r;
  r.bound = theorem1_bound(c, T, n);
  r.mean = mean_of(anytime_skills);
  const auto ci = bootstrap_ci(anytime_skills, 0.95, 10000, seed);
  r.half_width = 0.5 * (ci.hi - ci.lo);
  r.margin = r.bound + 2.0 * r.half_width - r.mean;
  r.holds = r.margin >= 0.0;
  return r;
}

struct FoldinProfile {
  double mean_error = 0.0;
  double std_error = 0.0;  // standard error of the mean
};

// Monte-Carlo fold-in error: a unit-variance k x d basis perturbed by
// epsilon, noisy targets with sd sigma, ridge lambda; the error is measured
// on a fresh query factor against the true reward.
inline FoldinProfile foldin_error_profile(double epsilon, double sigma, double lambda, int k, int d,
                                          int trials, std::uint64_t seed) {
  if (k < 1 || d < 1 || trials < 1) throw InputError("foldin_error_profile: k, d, trials must be >= 1");
  std::vector<double> errs;
  errs.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    auto s = make_stream(seed, StreamTag::Analysis, static_cast<std::uint64_t>(t));
    Matrix B(k, d), E(k, d);
    Vector x(d), q(d), noise(k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < d; ++c) B(r, c) = s.normal();
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < d; ++c) E(r, c) = s.normal();
    for (int c = 0; c < d; ++c) x(c) = s.normal() / std::sqrt(static_cast<double>(d));
    for (int c = 0; c < d; ++c) q(c) = s.normal();
    for (int r = 0; r < k; ++r) noise(r) = s.normal();
    const Vector y = B * x + sigma * noise;
    const Matrix Bhat = B + epsilon * E;
    const Vector xhat = fold_in(Bhat, Vector::Ones(k), y, lambda);
    errs.push_back(std::abs(q.dot(xhat) - q.dot(x)));
  }
  FoldinProfile p;
  p.mean_error = mean_of(errs);
  if (errs.size() > 1) {
    double v = 0.0;
    for (const double e : errs) v += (e - p.mean_error) * (e - p.mean_error);
    v /= static_cast<double>(errs.size() - 1);
    p.std_error = std::sqrt(v / static_cast<double>(errs.size()));
  }
  return p;
}

}  // namespace zkmrta
