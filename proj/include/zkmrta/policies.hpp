#pragma once

// The policy roster.
//
// Low-rank learners: SwarmCF (online weighted ridge ALS over the private
// stream), SwarmCF-batch (zero-imputed spectral fit), MF-SGD, ESTR
// (explore-then-commit spectral) and the additive BiasModel.
// Structure-free learners: Independent-UCB, tabular epsilon-greedy, random.
// References: the true-reward oracle and the centralized Hungarian ceilings.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "zkmrta/errors.hpp"
#include "zkmrta/numerics.hpp"
#include "zkmrta/policy.hpp"

namespace zkmrta {

// Solve a new entity's factor from k observations against a known basis.
inline Vector fold_in(const Matrix& basis, const Vector& weights, const Vector& values,
                      double lambda) {
  if (basis.rows() < 1) throw InputError("fold_in: needs at least one observation");
  return ridge_solve(basis, weights, values, lambda);
}

namespace detail {

inline Stream explore_stream(const TeamContext& ctx, int robot, int round) {
  return make_stream(ctx.seed, StreamTag::PolicyExplore, static_cast<std::uint64_t>(robot),
                     static_cast<std::uint64_t>(round));
}

inline Matrix init_factors(const TeamContext& ctx, int rows, int robot, int side) {
  return small_random(rows, ctx.d_hat, ctx.learner.init_scale,
                      make_stream(ctx.seed, StreamTag::PolicyInit, static_cast<std::uint64_t>(robot),
                                  static_cast<std::uint64_t>(side)));
}

// Averages repeated readings of a cell; unobserved cells stay at zero.
class CellAverages {
 public:
  CellAverages(int m, int n) : sum_(Matrix::Zero(m, n)), count_(Matrix::Zero(m, n)) {}
  void add(int row, int col, double v) {
    sum_(row, col) += v;
    count_(row, col) += 1.0;
  }
  Matrix imputed() const {
    return (count_.array() > 0.0).select(sum_.array() / count_.array().max(1.0), 0.0).matrix();
  }
  bool empty() const { return count_.sum() == 0.0; }
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_mask() const {
    return count_.array() > 0.0;
  }
  // One unit-weight entry per observed cell, holding the cell average.
  ObservationStore observed() const {
    ObservationStore store(static_cast<int>(sum_.rows()), static_cast<int>(sum_.cols()));
    for (Eigen::Index j = 0; j < sum_.cols(); ++j)
      for (Eigen::Index i = 0; i < sum_.rows(); ++i)
        if (count_(i, j) > 0.0)
          store.add({static_cast<int>(i), static_cast<int>(j), sum_(i, j) / count_(i, j), 1.0});
    return store;
  }

 private:
  Matrix sum_;
  Matrix count_;
};

// Top-d_hat spectral factors of the zero-imputed matrix, refined by ridge ALS
// over every cell.
inline void spectral_fit(const Matrix& Y, int d_hat, double lambda, int refine, Matrix& P,
                         Matrix& U) {
  const int k = std::min<int>(d_hat, static_cast<int>(std::min(Y.rows(), Y.cols())));
  const auto svd = top_singular(Y, k);
  const Vector root = svd.values.cwiseSqrt();
  P = Matrix::Zero(Y.rows(), d_hat);
  U = Matrix::Zero(Y.cols(), d_hat);
  P.leftCols(k) = svd.left * root.asDiagonal();
  U.leftCols(k) = svd.right * root.asDiagonal();
  const Matrix eye = Matrix::Identity(d_hat, d_hat);
  for (int s = 0; s < refine; ++s) {
    U = (Y.transpose() * P) * (P.transpose() * P + lambda * eye).inverse();
    P = (Y * U) * (U.transpose() * U + lambda * eye).inverse();
  }
}

}  // namespace detail

class SwarmCF : public Policy {
 public:
  SwarmCF(const TeamContext& ctx, int robot, bool hybrid = false)
      : ctx_(ctx),
        robot_(robot),
        P_(detail::init_factors(ctx, ctx.m, robot, 1)),
        U_(detail::init_factors(ctx, ctx.n, robot, 2)),
        store_(ctx.m, ctx.n),
        probe_rounds_(hybrid ? static_cast<int>(std::ceil(ctx.learner.hybrid_probe_fraction *
                                                          ctx.horizon))
                             : 0) {}

  int act(std::span<const int> menu, int round) override {
    auto s = detail::explore_stream(ctx_, robot_, round);
    const double eps = round <= probe_rounds_ ? 1.0 : ctx_.exploration.at(round);
    return epsilon_greedy(menu, eps, s, [&](int j) { return predict(j); });
  }

  void ingest(std::span<const ObservationRecord> records, int /*round*/) override {
    for (const auto& r : records) {
      if (r.collided) continue;
      store_.add({r.actor, r.task, r.value, r.weight});
    }
  }

  void end_round(int round) override {
    if (round % ctx_.learner.refit_period == 0) refit();
  }

  void refit() { als_sweep(store_, P_, U_, ctx_.learner.lambda, ctx_.learner.als_sweeps); }

  double predict(int task) const override { return P_.row(robot_).dot(U_.row(task)); }

  std::optional<Matrix> completed_matrix() const override { return P_ * U_.transpose(); }

  const Matrix& robot_factors() const noexcept { return P_; }
  const Matrix& task_factors() const noexcept { return U_; }
  const ObservationStore& store() const noexcept { return store_; }

 private:
  TeamContext ctx_;
  int robot_;
  Matrix P_;
  Matrix U_;
  ObservationStore store_;
  int probe_rounds_;
};

class SwarmCFBatch : public Policy {
 public:
  SwarmCFBatch(const TeamContext& ctx, int robot)
      : ctx_(ctx),
        robot_(robot),
        P_(detail::init_factors(ctx, ctx.m, robot, 1)),
        U_(detail::init_factors(ctx, ctx.n, robot, 2)),
        cells_(ctx.m, ctx.n) {}

  int act(std::span<const int> menu, int round) override {
    auto s = detail::explore_stream(ctx_, robot_, round);
    return epsilon_greedy(menu, ctx_.exploration.at(round), s, [&](int j) { return predict(j); });
  }

  void ingest(std::span<const ObservationRecord> records, int /*round*/) override {
    for (const auto& r : records)
      if (!r.collided) cells_.add(r.actor, r.task, r.value);
  }

  void end_round(int round) override {
    if (round % ctx_.learner.refit_period == 0) fit();
  }
  void finish(int /*horizon*/) override { fit(); }

  void fit() {
    if (cells_.empty()) return;
    const Matrix Y = cells_.imputed();
    const auto seen = cells_.observed_mask();
    detail::spectral_fit(Y, ctx_.d_hat, ctx_.learner.lambda, 0, P_, U_);
    for (int s = 0; s < ctx_.learner.batch_refine_sweeps; ++s) {
      const Matrix filled = seen.select(Y, P_ * U_.transpose());
      detail::spectral_fit(filled, ctx_.d_hat, ctx_.learner.lambda, 0, P_, U_);
    }
  }

  double predict(int task) const override { return P_.row(robot_).dot(U_.row(task)); }
  std::optional<Matrix> completed_matrix() const override { return P_ * U_.transpose(); }

 private:
  TeamContext ctx_;
  int robot_;
  Matrix P_;
  Matrix U_;
  detail::CellAverages cells_;
};

class MFSGD : public Policy {
 public:
  MFSGD(const TeamContext& ctx, int robot)
      : ctx_(ctx),
        robot_(robot),
        P_(detail::init_factors(ctx, ctx.m, robot, 1)),
        U_(detail::init_factors(ctx, ctx.n, robot, 2)),
        row_visits_(static_cast<std::size_t>(ctx.m), 0) {}

  int act(std::span<const int> menu, int round) override {
    auto s = detail::explore_stream(ctx_, robot_, round);
    return epsilon_greedy(menu, ctx_.exploration.at(round), s, [&](int j) { return predict(j); });
  }

  void ingest(std::span<const ObservationRecord> records, int /*round*/) override {
    for (const auto& r : records)
      if (!r.collided) step(r.actor, r.task, r.value);
  }

  // One SGD step on (r - <p, u>)^2 + lambda (|p|^2 + |u|^2).
  void step(int row, int col, double value) {
    auto& visits = row_visits_[static_cast<std::size_t>(row)];
    ++visits;
    const double rate = ctx_.learner.sgd_rate / std::sqrt(1.0 + static_cast<double>(visits));
    const Vector p = P_.row(row).transpose();
    const Vector u = U_.row(col).transpose();
    const double err = value - p.dot(u);
    const double lambda = ctx_.learner.lambda;
    P_.row(row) = (p + rate * (err * u - lambda * p)).transpose();
    U_.row(col) = (u + rate * (err * p - lambda * u)).transpose();
  }

  double predict(int task) const override { return P_.row(robot_).dot(U_.row(task)); }
  double predict_cell(int row, int col) const { return P_.row(row).dot(U_.row(col)); }
  std::optional<Matrix> completed_matrix() const override { return P_ * U_.transpose(); }

 private:
  TeamContext ctx_;
  int robot_;
  Matrix P_;
  Matrix U_;
  std::vector<long> row_visits_;
};

// Explore-then-commit: uniform probing, one spectral fit, then greedy.
class ESTR : public Policy {
 public:
  ESTR(const TeamContext& ctx, int robot)
      : ctx_(ctx),
        robot_(robot),
        probe_rounds_(static_cast<int>(std::ceil(ctx.learner.estr_probe_fraction * ctx.horizon))),
        P_(Matrix::Zero(ctx.m, ctx.d_hat)),
        U_(Matrix::Zero(ctx.n, ctx.d_hat)),
        cells_(ctx.m, ctx.n) {}

  int act(std::span<const int> menu, int round) override {
    if (round <= probe_rounds_) {
      auto s = detail::explore_stream(ctx_, robot_, round);
      return menu[static_cast<std::size_t>(s.index(menu.size()))];
    }
    return argmax_menu(menu, [&](int j) { return predict(j); });
  }

  void ingest(std::span<const ObservationRecord> records, int round) override {
    if (round > probe_rounds_) return;
    for (const auto& r : records)
      if (!r.collided) cells_.add(r.actor, r.task, r.value);
  }

  void end_round(int round) override {
    if (round == probe_rounds_ && !cells_.empty()) {
      detail::spectral_fit(cells_.imputed(), ctx_.d_hat, ctx_.learner.lambda,
                           ctx_.learner.batch_refine_sweeps, P_, U_);
    }
  }

  int probe_rounds() const noexcept { return probe_rounds_; }
  double predict(int task) const override { return P_.row(robot_).dot(U_.row(task)); }
  std::optional<Matrix> completed_matrix() const override { return P_ * U_.transpose(); }

 private:
  TeamContext ctx_;
  int robot_;
  int probe_rounds_;
  Matrix P_;
  Matrix U_;
  detail::CellAverages cells_;
};

// Additive popularity model mu + b_i + c_j from every sensed record.
class BiasModel : public Policy {
 public:
  BiasModel(const TeamContext& ctx, int robot)
      : ctx_(ctx),
        robot_(robot),
        robot_bias_(Vector::Zero(ctx.m)),
        task_bias_(Vector::Zero(ctx.n)) {}

  int act(std::span<const int> menu, int round) override {
    auto s = detail::explore_stream(ctx_, robot_, round);
    return epsilon_greedy(menu, ctx_.exploration.at(round), s, [&](int j) { return predict(j); });
  }

  void ingest(std::span<const ObservationRecord> records, int /*round*/) override {
    for (const auto& r : records)
      if (!r.collided) records_.push_back({r.actor, r.task, r.value, 1.0});
  }

  void end_round(int /*round*/) override { refit(); }
  void finish(int /*horizon*/) override { refit(); }

  void refit() {
    if (records_.empty()) return;
    const double damping = ctx_.learner.bias_damping;
    double total = 0.0;
    for (const auto& e : records_) total += e.value;
    mean_ = total / static_cast<double>(records_.size());

    Vector sum = Vector::Zero(ctx_.n);
    Vector count = Vector::Zero(ctx_.n);
    for (const auto& e : records_) {
      sum[e.col] += e.value - mean_;
      count[e.col] += 1.0;
    }
    task_bias_ = sum.array() / (count.array() + damping);

    Vector rsum = Vector::Zero(ctx_.m);
    Vector rcount = Vector::Zero(ctx_.m);
    for (const auto& e : records_) {
      rsum[e.row] += e.value - mean_ - task_bias_[e.col];
      rcount[e.row] += 1.0;
    }
    robot_bias_ = rsum.array() / (rcount.array() + damping);
  }

  double predict(int task) const override {
    return mean_ + robot_bias_[robot_] + task_bias_[task];
  }

 private:
  TeamContext ctx_;
  int robot_;
  std::vector<Entry> records_;
  double mean_ = 0.0;
  Vector robot_bias_;
  Vector task_bias_;
};

// Per-task statistics from this robot's own engagements only. A collided
// engagement is a pull that returned nothing.
class OwnArmStats {
 public:
  explicit OwnArmStats(int n, double prior)
      : pulls_(static_cast<std::size_t>(n), 0), sums_(static_cast<std::size_t>(n), 0.0),
        prior_(prior) {}

  void ingest(int robot, std::span<const ObservationRecord> records) {
    for (const auto& r : records) {
      if (r.actor != robot) continue;
      const auto j = static_cast<std::size_t>(r.task);
      ++pulls_[j];
      sums_[j] += r.collided ? 0.0 : r.value;
      ++total_;
    }
  }

  long pulls(int j) const { return pulls_[static_cast<std::size_t>(j)]; }
  long total() const { return total_; }
  double estimate(int j) const {
    const auto k = static_cast<std::size_t>(j);
    return pulls_[k] > 0 ? sums_[k] / static_cast<double>(pulls_[k]) : prior_;
  }

 private:
  std::vector<long> pulls_;
  std::vector<double> sums_;
  long total_ = 0;
  double prior_;
};

// UCB1 over this robot's own per-task arms.
class IndependentUCB : public Policy {
 public:
  IndependentUCB(const TeamContext& ctx, int robot)
      : robot_(robot), arms_(ctx.n, ctx.learner.prior) {}

  int act(std::span<const int> menu, int /*round*/) override {
    for (const int j : menu)
      if (arms_.pulls(j) == 0) return j;
    const double log_total = std::log(static_cast<double>(arms_.total()));
    return argmax_menu(menu, [&](int j) {
      return arms_.estimate(j) + std::sqrt(2.0 * log_total / static_cast<double>(arms_.pulls(j)));
    });
  }

  void ingest(std::span<const ObservationRecord> records, int /*round*/) override {
    arms_.ingest(robot_, records);
  }

  double predict(int task) const override { return arms_.estimate(task); }
  long pulls(int task) const { return arms_.pulls(task); }

 private:
  int robot_;
  OwnArmStats arms_;
};

class TabularGreedy : public Policy {
 public:
  TabularGreedy(const TeamContext& ctx, int robot)
      : ctx_(ctx), robot_(robot), arms_(ctx.n, ctx.learner.prior) {}

  int act(std::span<const int> menu, int round) override {
    auto s = detail::explore_stream(ctx_, robot_, round);
    return epsilon_greedy(menu, ctx_.exploration.at(round), s,
                          [&](int j) { return arms_.estimate(j); });
  }

  void ingest(std::span<const ObservationRecord> records, int /*round*/) override {
    arms_.ingest(robot_, records);
  }

  double predict(int task) const override { return arms_.estimate(task); }
  long pulls(int task) const { return arms_.pulls(task); }

 private:
  TeamContext ctx_;
  int robot_;
  OwnArmStats arms_;
};

class RandomPolicy : public Policy {
 public:
  RandomPolicy(const TeamContext& ctx, int robot) : ctx_(ctx), robot_(robot) {}

  int act(std::span<const int> menu, int round) override {
    auto s = detail::explore_stream(ctx_, robot_, round);
    return menu[static_cast<std::size_t>(s.index(menu.size()))];
  }
  void ingest(std::span<const ObservationRecord>, int) override {}
  double predict(int /*task*/) const override { return ctx_.learner.prior; }

 private:
  TeamContext ctx_;
  int robot_;
};

// Greedy on the true reward row.
class OraclePolicy : public Policy {
 public:
  OraclePolicy(const LatentWorld& world, int robot) : world_(&world), robot_(robot) {}

  int act(std::span<const int> menu, int /*round*/) override {
    return argmax_menu(menu, [&](int j) { return predict(j); });
  }
  void ingest(std::span<const ObservationRecord>, int) override {}
  double predict(int task) const override { return world_->R(robot_, task); }

 private:
  const LatentWorld* world_;
  int robot_;
};

inline int oracle_act(const LatentWorld& world, int robot, std::span<const int> menu) {
  return argmax_menu(menu, [&](int j) { return world.R(robot, j); });
}

// Optimal one-to-one assignment of robots to distinct tasks, each robot
// restricted to its menu. Score is taken from `scores` (m x n).
inline std::vector<int> centralized_assignment(const Matrix& scores,
                                               const std::vector<std::vector<int>>& menus) {
  const auto m = scores.rows();
  const auto n = scores.cols();
  // Non-menu cells get a penalty below any achievable total.
  const double span = scores.size() ? (scores.maxCoeff() - scores.minCoeff()) : 0.0;
  const double penalty = -(1.0 + span) * static_cast<double>(m + 1) * 4.0;
  Matrix masked = Matrix::Constant(m, n, penalty);
  for (Eigen::Index i = 0; i < m; ++i)
    for (const int j : menus[static_cast<std::size_t>(i)]) masked(i, j) = scores(i, j);
  const auto assignment = assignment_max(masked);
  std::vector<int> out(static_cast<std::size_t>(m));
  for (const auto& [i, j] : assignment.pairs) {
    const auto& menu = menus[static_cast<std::size_t>(i)];
    const bool in_menu = std::binary_search(menu.begin(), menu.end(), j);
    out[static_cast<std::size_t>(i)] =
        in_menu ? j : argmax_menu(std::span<const int>(menu), [&](int t) { return scores(i, t); });
  }
  return out;
}

// Hungarian ceiling with full observability of R, optionally read through one
// noise draw per cell.
inline std::vector<int> centralized_ceiling(const LatentWorld& world,
                                            const std::vector<std::vector<int>>& menus, int round,
                                            bool noisy, double sigma, std::uint64_t seed) {
  if (!noisy || sigma <= 0.0) return centralized_assignment(world.R, menus);
  Matrix scores = world.R;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    auto s = make_stream(seed, StreamTag::CeilingNoise, static_cast<std::uint64_t>(round),
                         static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < scores.cols(); ++j) scores(i, j) += sigma * s.normal();
  }
  return centralized_assignment(scores, menus);
}

// Centralized full-communication learner: one rank-d_hat ALS model over every
// engagement of the team, assigning robots to distinct tasks by Hungarian
// matching on its completed matrix.
class CentralizedCeilingTeam final : public Team {
 public:
  explicit CentralizedCeilingTeam(const TeamContext& ctx)
      : ctx_(ctx),
        P_(detail::init_factors(ctx, ctx.m, -1, 1)),
        U_(detail::init_factors(ctx, ctx.n, -1, 2)),
        store_(ctx.m, ctx.n),
        pending_(static_cast<std::size_t>(ctx.m)) {}

  std::vector<int> act(const std::vector<std::vector<int>>& menus, int round) override {
    const Matrix scores = P_ * U_.transpose();
    auto out = centralized_assignment(scores, menus);
    const double eps = ctx_.exploration.at(round);
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto s = detail::explore_stream(ctx_, static_cast<int>(i), round);
      if (s.uniform() < eps) out[i] = menus[i][static_cast<std::size_t>(s.index(menus[i].size()))];
    }
    return out;
  }

  // Every robot forwards every reading it took; the coordinator averages
  // the readings of each engagement into one entry.
  void ingest(int /*robot*/, std::span<const ObservationRecord> records, int /*round*/) override {
    for (const auto& r : records) {
      if (r.collided) continue;
      auto& p = pending_[static_cast<std::size_t>(r.actor)];
      p.task = r.task;
      p.sum += r.weight * r.value;
      p.weight += r.weight;
    }
  }

  void end_round(int round) override {
    for (std::size_t k = 0; k < pending_.size(); ++k) {
      auto& p = pending_[k];
      if (p.weight > 0.0) store_.add({static_cast<int>(k), p.task, p.sum / p.weight, 1.0});
      p = {};
    }
    if (round % ctx_.learner.refit_period == 0)
      als_sweep(store_, P_, U_, ctx_.learner.lambda, ctx_.learner.als_sweeps);
  }

  double predict(int robot, int task) const override { return P_.row(robot).dot(U_.row(task)); }

 private:
  struct Pending {
    int task = 0;
    double sum = 0.0;
    double weight = 0.0;
  };

  TeamContext ctx_;
  Matrix P_;
  Matrix U_;
  ObservationStore store_;
  std::vector<Pending> pending_;
};

// Policy names accepted in configurations.
inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{
      "swarmcf", "swarmcf_batch", "mf_sgd", "estr",          "bias",          "ucb",
      "tabular", "random",        "oracle", "ceiling_clean", "ceiling_noisy", "swarmcf_hybrid"};
  return names;
}

inline bool is_structure_free(std::string_view name) {
  return name == "ucb" || name == "tabular" || name == "random";
}

inline bool is_ceiling(std::string_view name) {
  return name == "ceiling_clean" || name == "ceiling_noisy";
}

// `reference_world` is consulted only by the oracle.
inline std::unique_ptr<Team> make_team(std::string_view name, const TeamContext& ctx,
                                       const LatentWorld* reference_world = nullptr) {
  if (is_ceiling(name)) return std::make_unique<CentralizedCeilingTeam>(ctx);

  std::function<std::unique_ptr<Policy>(int)> make;
  if (name == "swarmcf") {
    make = [&](int i) { return std::make_unique<SwarmCF>(ctx, i); };
  } else if (name == "swarmcf_hybrid") {
    make = [&](int i) { return std::make_unique<SwarmCF>(ctx, i, true); };
  } else if (name == "swarmcf_batch") {
    make = [&](int i) { return std::make_unique<SwarmCFBatch>(ctx, i); };
  } else if (name == "mf_sgd") {
    make = [&](int i) { return std::make_unique<MFSGD>(ctx, i); };
  } else if (name == "estr") {
    make = [&](int i) { return std::make_unique<ESTR>(ctx, i); };
  } else if (name == "bias") {
    make = [&](int i) { return std::make_unique<BiasModel>(ctx, i); };
  } else if (name == "ucb") {
    make = [&](int i) { return std::make_unique<IndependentUCB>(ctx, i); };
  } else if (name == "tabular") {
    make = [&](int i) { return std::make_unique<TabularGreedy>(ctx, i); };
  } else if (name == "random") {
    make = [&](int i) { return std::make_unique<RandomPolicy>(ctx, i); };
  } else if (name == "oracle") {
    if (reference_world == nullptr) throw ConfigError("oracle policy needs the world");
    make = [&](int i) { return std::make_unique<OraclePolicy>(*reference_world, i); };
  } else {
    std::string known;
    for (const auto& n : policy_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown policy '" + std::string(name) + "' (known: " + known + ")");
  }
  std::vector<std::unique_ptr<Policy>> members;
  members.reserve(static_cast<std::size_t>(ctx.m));
  for (int i = 0; i < ctx.m; ++i) members.push_back(make(i));
  return std::make_unique<DecentralizedTeam>(std::move(members));
}

}  // namespace zkmrta
