#pragma once

// The communication-free observation channel: who can sense whom, and the
// private noisy reading each observer takes of a teammate's outcome.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "zkmrta/errors.hpp"
#include "zkmrta/rng.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {

enum class MaskModel { Persistent, PerRound, Geometry };

class Mask {
 public:
  Mask() = default;
  Mask(int m, MaskModel model, double rho)
      : m_(m), model_(model), rho_(rho), visible_(static_cast<std::size_t>(m) * m, 0) {
    for (int i = 0; i < m; ++i) set(i, i, true);
  }

  int size() const noexcept { return m_; }
  MaskModel model() const noexcept { return model_; }
  double rho() const noexcept { return rho_; }

  bool visible(int observer, int actor) const noexcept {
    return visible_[index(observer, actor)] != 0;
  }
  void set(int observer, int actor, bool v) noexcept { visible_[index(observer, actor)] = v ? 1 : 0; }

  // Fraction of visible off-diagonal pairs.
  double off_diagonal_density() const noexcept {
    if (m_ < 2) return 0.0;
    long count = 0;
    for (int i = 0; i < m_; ++i)
      for (int k = 0; k < m_; ++k)
        if (i != k && visible(i, k)) ++count;
    return static_cast<double>(count) / (static_cast<double>(m_) * (m_ - 1));
  }

  friend bool operator==(const Mask& a, const Mask& b) noexcept {
    return a.m_ == b.m_ && a.visible_ == b.visible_;
  }

 private:
  std::size_t index(int i, int k) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(k);
  }

  int m_ = 0;
  MaskModel model_ = MaskModel::Persistent;
  double rho_ = 0.0;
  std::vector<std::uint8_t> visible_;
};

namespace detail {

inline void check_rate(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("mask: rho must lie in [0, 1]");
}

inline Mask bernoulli_mask(int m, double rho, MaskModel model, std::uint64_t seed, StreamTag tag,
                           std::uint64_t round) {
  check_rate(rho);
  Mask mask(m, model, rho);
  for (int i = 0; i < m; ++i) {
    auto s = make_stream(seed, tag, round, static_cast<std::uint64_t>(i));
    for (int k = 0; k < m; ++k) {
      const bool v = s.bernoulli(rho);
      if (k != i) mask.set(i, k, v);
    }
  }
  return mask;
}

}  // namespace detail

// Per-pair visibility drawn once for the whole mission.
inline Mask draw_persistent_mask(int m, double rho, std::uint64_t seed) {
  return detail::bernoulli_mask(m, rho, MaskModel::Persistent, seed, StreamTag::PersistentMask, 0);
}

// Visibility redrawn every round.
inline Mask draw_iid_mask(int m, double rho, std::uint64_t seed, int round) {
  return detail::bernoulli_mask(m, rho, MaskModel::PerRound, seed, StreamTag::RoundMask,
                                static_cast<std::uint64_t>(round));
}

// Range-limited visibility between 2-D positions.
inline Mask geometry_mask(std::span<const Point2> positions, double radius) {
  const int m = static_cast<int>(positions.size());
  Mask mask(m, MaskModel::Geometry, 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      if (i != k)
        mask.set(i, k, distance(positions[static_cast<std::size_t>(i)],
                                positions[static_cast<std::size_t>(k)]) <= radius);
  return mask;
}

struct NoiseModel {
  double sigma_own = 0.1;
  double sigma_obs = 0.3;
  bool distance_scaled = false;
  double sensing_radius = 1.0;  // R_s in the distance law
  bool inverse_variance_weights = false;

  void validate() const {
    if (sigma_own < 0.0 || sigma_obs < 0.0) throw ConfigError("noise: sigmas must be >= 0");
    if (sigma_own > sigma_obs) throw ConfigError("noise: sigma_own must not exceed sigma_obs");
    if (distance_scaled && sensing_radius <= 0.0) {
      throw ConfigError("noise: distance-scaled noise needs a positive sensing radius");
    }
  }

  // Std-dev of observer's reading of actor at distance r.
  double sigma(bool own, double r) const noexcept {
    if (own) return sigma_own;
    if (!distance_scaled) return sigma_obs;
    const double q = r / sensing_radius;
    return sigma_obs * std::sqrt(1.0 + q * q);
  }
};

// One resolved engagement of the round.
struct Engagement {
  int actor = 0;
  int task = 0;
  double reward = 0.0;
  bool collided = false;
};

struct ObservationRecord {
  int observer = 0;
  int actor = 0;
  int task = 0;
  double value = 0.0;
  double weight = 1.0;
  int round = 0;
  bool collided = false;  // own failed engagement; carries no outcome
};

// Readings taken by `observer` of the round's engagements. Collided
// engagements have no outcome and produce no record.
inline std::vector<ObservationRecord> observe_round(std::span<const Engagement> events, int observer,
                                                    const Mask& mask, const NoiseModel& noise,
                                                    std::span<const Point2> positions, int round,
                                                    std::uint64_t seed) {
  if (noise.distance_scaled && positions.empty()) {
    throw ConfigError("observe_round: distance-scaled noise requires positions");
  }
  std::vector<ObservationRecord> out;
  for (const auto& ev : events) {
    if (ev.collided) continue;
    if (!mask.visible(observer, ev.actor)) continue;
    const bool own = ev.actor == observer;
    const double r = noise.distance_scaled
                         ? distance(positions[static_cast<std::size_t>(observer)],
                                    positions[static_cast<std::size_t>(ev.actor)])
                         : 0.0;
    const double sd = noise.sigma(own, r);
    auto s = make_stream(seed, StreamTag::ObservationNoise, static_cast<std::uint64_t>(observer),
                         static_cast<std::uint64_t>(ev.actor), static_cast<std::uint64_t>(round));
    const double value = sd > 0.0 ? ev.reward + sd * s.normal() : ev.reward;
    const double weight = noise.inverse_variance_weights && sd > 0.0 ? 1.0 / (sd * sd) : 1.0;
    out.push_back({observer, ev.actor, ev.task, value, weight, round, false});
  }
  return out;
}

}  // namespace zkmrta
