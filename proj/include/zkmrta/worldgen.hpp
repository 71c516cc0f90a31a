#pragma once

// Latent reward worlds: the signed block-mixture world, its full-rank
// perturbation, and the non-negative sensing-modality world with 2-D
// patrol positions.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "zkmrta/errors.hpp"
#include "zkmrta/numerics.hpp"
#include "zkmrta/rng.hpp"

namespace zkmrta {

enum class WorldVariant { BlockModel, Sensing };

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct WorldConfig {
  int m = 30;
  int n = 240;
  int d = 5;
  int K = 4;
  std::uint64_t seed = 0;
  WorldVariant variant = WorldVariant::BlockModel;
  double epsilon = 0.0;
  // Sensing variant. A radius <= 0 means "derive from the visibility rate".
  double sensing_radius = 0.0;
  double arena_side = 10.0;
  double mixture_sd = 0.5;
  // Entrywise standard deviation of the normalized reward.
  double reward_scale = 1.0;

  void validate() const {
    if (m < 2) throw ConfigError("world: m must be >= 2");
    if (n < 2) throw ConfigError("world: n must be >= 2");
    if (d < 1 || d > std::min(m, n)) throw ConfigError("world: d must lie in [1, min(m, n)]");
    if (K < 1) throw ConfigError("world: K must be >= 1");
    if (epsilon < 0.0) throw ConfigError("world: epsilon must be >= 0");
    if (mixture_sd < 0.0) throw ConfigError("world: mixture_sd must be >= 0");
    if (reward_scale <= 0.0) throw ConfigError("world: reward_scale must be > 0");
    if (variant == WorldVariant::Sensing && arena_side <= 0.0) {
      throw ConfigError("world: arena_side must be > 0");
    }
  }
};

struct LatentWorld {
  Matrix P;  // m x d robot capability factors
  Matrix U;  // n x d task requirement factors
  Matrix R;  // m x n realized reward
  std::vector<Point2> positions;  // Sensing variant only
  Vector row_offset;              // per-robot mean reward (Sensing), zeros otherwise
  int d = 0;

  int robots() const noexcept { return static_cast<int>(R.rows()); }
  int tasks() const noexcept { return static_cast<int>(R.cols()); }
};

inline double entry_mean(const Matrix& m) { return m.mean(); }

// Population standard deviation over all entries.
inline double entry_std(const Matrix& m) {
  const double mu = m.mean();
  return std::sqrt((m.array() - mu).square().mean());
}

namespace detail {

struct Mixture {
  Matrix means;  // K x d
};

inline Mixture draw_mixture(const WorldConfig& cfg) {
  auto s = make_stream(cfg.seed, StreamTag::WorldTypes, 0);
  Mixture mix{Matrix(cfg.K, cfg.d)};
  for (int k = 0; k < cfg.K; ++k) {
    for (int c = 0; c < cfg.d; ++c) {
      const double magnitude = s.normal();
      const double sign = s.bernoulli(0.5) ? 1.0 : -1.0;
      mix.means(k, c) = sign * magnitude;
    }
  }
  return mix;
}

// side: 1 for robots, 2 for tasks
inline Matrix draw_factors(const WorldConfig& cfg, const Mixture& mix, int count, int side) {
  Matrix F(count, cfg.d);
  for (int e = 0; e < count; ++e) {
    auto ts = make_stream(cfg.seed, StreamTag::WorldTypes, static_cast<std::uint64_t>(side),
                          static_cast<std::uint64_t>(e));
    const auto type = static_cast<Eigen::Index>(ts.index(static_cast<std::uint64_t>(cfg.K)));
    auto fs = make_stream(cfg.seed, StreamTag::WorldFactors, static_cast<std::uint64_t>(side),
                          static_cast<std::uint64_t>(e));
    for (int c = 0; c < cfg.d; ++c) F(e, c) = mix.means(type, c) + cfg.mixture_sd * fs.normal();
  }
  return F;
}

// Scale P and U by a common constant so that std(P U^T) = target.
inline void rescale(Matrix& P, Matrix& U, double target) {
  const double sd = entry_std(P * U.transpose());
  if (sd <= 0.0) return;
  const double f = std::sqrt(target / sd);
  P *= f;
  U *= f;
}

}  // namespace detail

inline LatentWorld build_block_world(const WorldConfig& cfg) {
  cfg.validate();
  if (cfg.variant != WorldVariant::BlockModel) {
    throw ConfigError("build_block_world: variant must be BlockModel");
  }
  const auto mix = detail::draw_mixture(cfg);
  LatentWorld w;
  w.d = cfg.d;
  w.P = detail::draw_factors(cfg, mix, cfg.m, 1);
  w.U = detail::draw_factors(cfg, mix, cfg.n, 2);
  // Centering the task factors makes every reward row zero-mean.
  const Eigen::RowVectorXd mean_task = w.U.colwise().mean();
  w.U.rowwise() -= mean_task;
  detail::rescale(w.P, w.U, cfg.reward_scale);
  w.R = w.P * w.U.transpose();
  w.row_offset = Vector::Zero(cfg.m);
  return w;
}

// Probability that two uniform points of a square of side L lie within r.
inline double square_pair_within(double r, double side) {
  if (r <= 0.0) return 0.0;
  if (r >= side * std::numbers::sqrt2) return 1.0;
  const double x = r / side;
  if (x <= 1.0) return std::numbers::pi * x * x - 8.0 / 3.0 * x * x * x + 0.5 * x * x * x * x;
  // r in (L, sqrt2 L]
  const double s = std::sqrt(x * x - 1.0);
  return 1.0 / 3.0 + (std::numbers::pi - 2.0) * x * x - 0.5 * x * x * x * x +
         4.0 / 3.0 * (2.0 * x * x + 1.0) * s - 4.0 * x * x * std::acos(1.0 / x);
}

// Sensing radius at which the expected visible-neighbour fraction equals rho.
inline double radius_for_visibility(double rho, double side) {
  double lo = 0.0;
  double hi = side * std::numbers::sqrt2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (square_pair_within(mid, side) < rho ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline LatentWorld build_sensing_world(const WorldConfig& cfg) {
  cfg.validate();
  if (cfg.variant != WorldVariant::Sensing) {
    throw ConfigError("build_sensing_world: variant must be Sensing");
  }
  const auto mix = detail::draw_mixture(cfg);
  LatentWorld w;
  w.d = cfg.d;
  auto profile = [&](int count, int side) {
    Matrix F = detail::draw_factors(cfg, mix, count, side).cwiseAbs();
    for (int e = 0; e < count; ++e) {
      auto es = make_stream(cfg.seed, StreamTag::WorldFactors, static_cast<std::uint64_t>(side + 2),
                            static_cast<std::uint64_t>(e));
      const double total = F.row(e).sum();
      if (total > 0.0) F.row(e) /= total;
      F.row(e) *= es.uniform(0.5, 1.5);
    }
    return F;
  };
  w.P = profile(cfg.m, 1);
  w.U = profile(cfg.n, 2);
  detail::rescale(w.P, w.U, cfg.reward_scale);
  w.R = w.P * w.U.transpose();
  w.row_offset = w.R.rowwise().mean();

  w.positions.resize(static_cast<std::size_t>(cfg.m));
  for (int i = 0; i < cfg.m; ++i) {
    auto ps = make_stream(cfg.seed, StreamTag::WorldPositions, static_cast<std::uint64_t>(i));
    w.positions[static_cast<std::size_t>(i)] = {ps.uniform(0.0, cfg.arena_side),
                                                ps.uniform(0.0, cfg.arena_side)};
  }
  return w;
}

// R_eps = (R + eps s G) / sqrt(1 + eps^2), s = std(R) / std(G).
inline LatentWorld perturb_full_rank(const LatentWorld& world, double epsilon, std::uint64_t seed) {
  if (epsilon < 0.0) throw ConfigError("perturb_full_rank: epsilon must be >= 0");
  LatentWorld out = world;
  if (epsilon == 0.0) return out;
  auto s = make_stream(seed, StreamTag::Perturbation);
  Matrix G(world.R.rows(), world.R.cols());
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = s.normal();
  }
  const double scale = entry_std(world.R) / entry_std(G);
  out.R = (world.R + epsilon * scale * G) / std::sqrt(1.0 + epsilon * epsilon);
  if (!world.positions.empty()) out.row_offset = out.R.rowwise().mean();
  return out;
}

// Smallest k whose top-k squared singular values hold `energy_fraction` of
// the total.
inline int effective_rank(const Matrix& m, double energy_fraction) {
  if (m.size() == 0) throw InputError("effective_rank: empty matrix");
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
    throw InputError("effective_rank: energy fraction must lie in (0, 1]");
  }
  const Vector sv = singular_values(m);
  const double total = sv.squaredNorm();
  if (total <= 0.0) return 0;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    acc += sv[k] * sv[k];
    // relative slack absorbs rounding when the fraction is reached exactly
    if (acc >= energy_fraction * total * (1.0 - 1e-12)) return static_cast<int>(k + 1);
  }
  return static_cast<int>(sv.size());
}

// Builds the configured variant and applies the full-rank perturbation.
inline LatentWorld build_world(const WorldConfig& cfg) {
  LatentWorld w = cfg.variant == WorldVariant::BlockModel ? build_block_world(cfg)
                                                          : build_sensing_world(cfg);
  if (cfg.epsilon > 0.0) w = perturb_full_rank(w, cfg.epsilon, cfg.seed);
  return w;
}

}  // namespace zkmrta
