#pragma once

// Experiment configuration, presets, parallel sweep execution and CSV output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "zkmrta/analysis.hpp"
#include "zkmrta/engine.hpp"
#include "zkmrta/errors.hpp"
#include "zkmrta/metrics.hpp"
#include "zkmrta/policies.hpp"
#include "zkmrta/worldgen.hpp"

namespace zkmrta {

using Json = nlohmann::ordered_json;

// Reward scale of the block world: entrywise std of R. Chosen so the mean
// absolute reward is about 0.3.
inline constexpr double kDefaultRewardScale = 0.376;

// Every tunable parameter, grouped as world / mission / eval. Overrides and
// sweep axes must name a path that exists here.
inline Json default_params() {
  Json p;
  p["world"] = {{"m", 30},
                {"n", 240},
                {"d", 5},
                {"K", 4},
                {"variant", "block"},
                {"epsilon", 0.0},
                {"mixture_sd", 0.5},
                {"reward_scale", kDefaultRewardScale},
                {"arena_side", 10.0},
                {"sensing_radius", 0.0}};
  p["mission"] = {{"T", 50},
                  {"c", 20},
                  {"contention", false},
                  {"rho", 0.25},
                  {"mask", "persistent"},
                  {"d_hat_low", 0},
                  {"d_hat_high", 0},
                  {"exploration", {{"eps0", 0.5}, {"decay", 0.93}, {"eps_min", 0.05}}},
                  {"learner",
                   {{"refit_period", 3},
                    {"als_sweeps", 8},
                    {"lambda", 1e-2},
                    {"batch_refine_sweeps", 4},
                    {"init_scale", 0.1},
                    {"sgd_rate", 0.05},
                    {"estr_probe_fraction", 0.4},
                    {"hybrid_probe_fraction", 0.2},
                    {"bias_damping", 1.0},
                    {"prior", 0.0}}},
                  {"noise",
                   {{"sigma_own", 0.1},
                    {"sigma_obs", 0.3},
                    {"distance_scaled", false},
                    {"inverse_variance_weights", false}}}};
  p["eval"] = {{"normalizer", "menu"},
               {"menus", 200},
               {"menu_size", 0},
               {"random_rollouts", kRandomRollouts},
               {"bootstrap_resamples", 10000},
               {"level", 0.95}};
  return p;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "unseen_pair_skill", "anytime_skill",    "regret",        "collision_rate",
      "rounds_to_quarter", "state_uniqueness", "effective_rank"};
  return names;
}

struct SweepAxis {
  std::string name;
  std::vector<std::string> paths;  // all set to the same value
  std::vector<Json> values;
};

struct ExperimentConfig {
  std::string preset;
  Json params = default_params();
  std::vector<std::string> policies;
  std::vector<SweepAxis> sweep;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> metrics{"unseen_pair_skill", "anytime_skill"};
  bool write_trajectory = false;
  bool write_log = false;
};

namespace detail {

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    parts.emplace_back(path.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

inline const Json* find_path(const Json& tree, std::string_view path) {
  const Json* node = &tree;
  for (const auto& key : split_path(path)) {
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
  }
  return node;
}

inline bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

template <typename T>
T read(const Json& tree, std::string_view path) {
  const Json* node = find_path(tree, path);
  if (node == nullptr) throw ConfigError("missing parameter '" + std::string(path) + "'");
  try {
    return node->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("parameter '" + std::string(path) + "' has the wrong type");
  }
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_value(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_number(v.get<double>());
  return v.dump();
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    auto item = s.substr(start, comma == std::string_view::npos ? s.npos : comma - start);
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::string> string_list(const Json& v, std::string_view what) {
  if (v.is_string()) return split_list(v.get<std::string>());
  if (!v.is_array()) throw ConfigError(std::string(what) + " must be a list of names");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) throw ConfigError(std::string(what) + " must be a list of names");
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline std::vector<std::uint64_t> seed_list(const Json& v) {
  std::vector<std::uint64_t> out;
  if (v.is_number_integer()) {
    const auto count = v.get<long long>();
    if (count < 1) throw ConfigError("seeds must be a positive count or a non-empty list");
    for (long long s = 0; s < count; ++s) out.push_back(static_cast<std::uint64_t>(s));
    return out;
  }
  if (!v.is_array()) throw ConfigError("seeds must be a positive count or a list of integers");
  for (const auto& s : v) {
    if (!s.is_number_integer()) throw ConfigError("seeds must be integers");
    out.push_back(s.get<std::uint64_t>());
  }
  return out;
}

// Parses an override value as JSON, falling back to a bare string.
inline Json parse_value(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return Json(std::string(text));
  }
}

}  // namespace detail

// Sets an existing parameter; unknown paths and type changes are errors.
inline void set_param(Json& params, std::string_view path, const Json& value) {
  const auto parts = detail::split_path(path);
  Json* node = &params;
  for (const auto& key : parts) {
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown parameter path '" + std::string(path) + "'");
    }
    node = &(*node)[key];
  }
  if (node->is_object()) throw ConfigError("parameter path '" + std::string(path) + "' is a section");
  if (!detail::same_kind(*node, value)) {
    throw ConfigError("parameter '" + std::string(path) + "' expects a " + node->type_name() +
                      ", got " + value.type_name());
  }
  *node = value;
}

inline WorldConfig world_config(const Json& params, std::uint64_t seed) {
  using detail::read;
  WorldConfig w;
  w.m = read<int>(params, "world.m");
  w.n = read<int>(params, "world.n");
  w.d = read<int>(params, "world.d");
  w.K = read<int>(params, "world.K");
  const auto variant = read<std::string>(params, "world.variant");
  if (variant == "block") w.variant = WorldVariant::BlockModel;
  else if (variant == "sensing") w.variant = WorldVariant::Sensing;
  else throw ConfigError("world.variant must be 'block' or 'sensing'");
  w.epsilon = read<double>(params, "world.epsilon");
  w.mixture_sd = read<double>(params, "world.mixture_sd");
  w.reward_scale = read<double>(params, "world.reward_scale");
  w.arena_side = read<double>(params, "world.arena_side");
  w.sensing_radius = read<double>(params, "world.sensing_radius");
  w.seed = seed;
  w.validate();
  return w;
}

inline MaskModel parse_mask(const std::string& s) {
  if (s == "persistent") return MaskModel::Persistent;
  if (s == "per_round") return MaskModel::PerRound;
  if (s == "geometry") return MaskModel::Geometry;
  throw ConfigError("mission.mask must be 'persistent', 'per_round' or 'geometry'");
}

inline MissionConfig mission_config(const Json& params, std::uint64_t seed) {
  using detail::read;
  MissionConfig m;
  m.T = read<int>(params, "mission.T");
  m.c = read<int>(params, "mission.c");
  m.contention = read<bool>(params, "mission.contention");
  m.rho = read<double>(params, "mission.rho");
  m.mask_model = parse_mask(read<std::string>(params, "mission.mask"));
  m.d_hat_low = read<int>(params, "mission.d_hat_low");
  m.d_hat_high = read<int>(params, "mission.d_hat_high");
  m.exploration.eps0 = read<double>(params, "mission.exploration.eps0");
  m.exploration.decay = read<double>(params, "mission.exploration.decay");
  m.exploration.eps_min = read<double>(params, "mission.exploration.eps_min");
  auto& l = m.learner;
  l.refit_period = read<int>(params, "mission.learner.refit_period");
  l.als_sweeps = read<int>(params, "mission.learner.als_sweeps");
  l.lambda = read<double>(params, "mission.learner.lambda");
  l.batch_refine_sweeps = read<int>(params, "mission.learner.batch_refine_sweeps");
  l.init_scale = read<double>(params, "mission.learner.init_scale");
  l.sgd_rate = read<double>(params, "mission.learner.sgd_rate");
  l.estr_probe_fraction = read<double>(params, "mission.learner.estr_probe_fraction");
  l.hybrid_probe_fraction = read<double>(params, "mission.learner.hybrid_probe_fraction");
  l.bias_damping = read<double>(params, "mission.learner.bias_damping");
  l.prior = read<double>(params, "mission.learner.prior");
  m.noise.sigma_own = read<double>(params, "mission.noise.sigma_own");
  m.noise.sigma_obs = read<double>(params, "mission.noise.sigma_obs");
  m.noise.distance_scaled = read<bool>(params, "mission.noise.distance_scaled");
  m.noise.inverse_variance_weights = read<bool>(params, "mission.noise.inverse_variance_weights");
  m.seed = seed;
  return m;
}

struct EvalSettings {
  Normalizer normalizer = Normalizer::MenuMax;
  int menus = 200;
  int menu_size = 0;  // 0: the mission's menu size
  int random_rollouts = kRandomRollouts;
  int bootstrap_resamples = 10000;
  double level = 0.95;
};

inline EvalSettings eval_settings(const Json& params) {
  using detail::read;
  EvalSettings e;
  const auto norm = read<std::string>(params, "eval.normalizer");
  if (norm == "menu") e.normalizer = Normalizer::MenuMax;
  else if (norm == "matching") e.normalizer = Normalizer::Matching;
  else throw ConfigError("eval.normalizer must be 'menu' or 'matching'");
  e.menus = read<int>(params, "eval.menus");
  e.menu_size = read<int>(params, "eval.menu_size");
  e.random_rollouts = read<int>(params, "eval.random_rollouts");
  e.bootstrap_resamples = read<int>(params, "eval.bootstrap_resamples");
  e.level = read<double>(params, "eval.level");
  if (e.menus < 1 || e.random_rollouts < 1 || e.bootstrap_resamples < 1) {
    throw ConfigError("eval: menus, random_rollouts and bootstrap_resamples must be >= 1");
  }
  if (!(e.level > 0.0 && e.level < 1.0)) throw ConfigError("eval.level must lie in (0, 1)");
  return e;
}

// Parameter tree of every sweep point, in config order (first axis slowest).
inline std::vector<Json> sweep_points(const ExperimentConfig& cfg) {
  std::vector<Json> points{cfg.params};
  for (const auto& axis : cfg.sweep) {
    std::vector<Json> next;
    for (const auto& base : points) {
      for (const auto& v : axis.values) {
        Json p = base;
        for (const auto& path : axis.paths) set_param(p, path, v);
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

// Axis values of point `index`, in axis order.
inline std::vector<Json> point_values(const ExperimentConfig& cfg, std::size_t index) {
  std::vector<Json> out(cfg.sweep.size());
  for (std::size_t a = cfg.sweep.size(); a-- > 0;) {
    const auto& values = cfg.sweep[a].values;
    out[a] = values[index % values.size()];
    index /= values.size();
  }
  return out;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.policies.empty()) throw ConfigError("policy list is empty");
  for (const auto& p : cfg.policies) {
    const auto& known = policy_names();
    if (std::find(known.begin(), known.end(), p) == known.end()) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError("unknown policy '" + p + "' (known: " + list + ")");
    }
  }
  if (cfg.seeds.empty()) throw ConfigError("seed list is empty");
  if (cfg.metrics.empty()) throw ConfigError("metric list is empty");
  for (const auto& m : cfg.metrics) {
    const auto& known = metric_names();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw ConfigError("unknown metric '" + m + "'");
    }
  }
  for (const auto& axis : cfg.sweep) {
    if (axis.name.empty()) throw ConfigError("sweep axis without a name");
    if (axis.paths.empty()) throw ConfigError("sweep axis '" + axis.name + "' sets no parameter");
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.name + "' has no values");
    for (const auto& path : axis.paths) {
      if (detail::find_path(cfg.params, path) == nullptr) {
        throw ConfigError("sweep axis '" + axis.name + "' references unknown path '" + path + "'");
      }
    }
  }
  for (const auto& point : sweep_points(cfg)) {
    const auto w = world_config(point, 0);
    const auto m = mission_config(point, 0);
    m.validate(w.n);
    if (m.mask_model == MaskModel::Geometry && w.variant != WorldVariant::Sensing) {
      throw ConfigError("the geometry mask needs the sensing world");
    }
    eval_settings(point);
  }
}

inline Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["preset"] = cfg.preset;
  j["policies"] = cfg.policies;
  j["seeds"] = cfg.seeds;
  j["metrics"] = cfg.metrics;
  j["outputs"] = {{"trajectory", cfg.write_trajectory}, {"log", cfg.write_log}};
  j["sweep"] = Json::array();
  for (const auto& a : cfg.sweep) {
    j["sweep"].push_back({{"name", a.name}, {"paths", a.paths}, {"values", a.values}});
  }
  for (const auto& [key, value] : cfg.params.items()) j[key] = value;
  return j;
}

inline ExperimentConfig from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be an object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") {
      cfg.preset = value.get<std::string>();
    } else if (key == "policies") {
      cfg.policies = detail::string_list(value, "policies");
    } else if (key == "seeds") {
      cfg.seeds = detail::seed_list(value);
    } else if (key == "metrics") {
      cfg.metrics = detail::string_list(value, "metrics");
    } else if (key == "outputs") {
      cfg.write_trajectory = value.value("trajectory", false);
      cfg.write_log = value.value("log", false);
    } else if (key == "sweep") {
      for (const auto& a : value) {
        SweepAxis axis;
        axis.name = a.at("name").get<std::string>();
        if (a.contains("paths")) axis.paths = detail::string_list(a["paths"], "sweep paths");
        else axis.paths = {a.at("path").get<std::string>()};
        for (const auto& v : a.at("values")) axis.values.push_back(v);
        cfg.sweep.push_back(std::move(axis));
      }
    } else if (key == "world" || key == "mission" || key == "eval") {
      std::function<void(const Json&, const std::string&)> merge = [&](const Json& node,
                                                                        const std::string& prefix) {
        for (const auto& [k, v] : node.items()) {
          const auto path = prefix + "." + k;
          if (v.is_object()) merge(v, path);
          else set_param(cfg.params, path, v);
        }
      };
      merge(value, key);
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  if (cfg.seeds.empty()) cfg.seeds = detail::seed_list(Json(16));
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open configuration '" + file.string() + "'");
  try {
    return from_json(Json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("configuration '" + file.string() + "': " + e.what());
  }
}

// `key=value` where key is a parameter path, one of seeds / policies /
// metrics / trajectory / log, or sweep.<axis> to replace an axis's values.
inline void apply_override(ExperimentConfig& cfg, std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(text) + "' is not of the form key=value");
  }
  const std::string key(text.substr(0, eq));
  const Json value = detail::parse_value(text.substr(eq + 1));
  if (key == "seeds") {
    cfg.seeds = detail::seed_list(value);
  } else if (key == "policies") {
    cfg.policies = detail::string_list(value, "policies");
  } else if (key == "metrics") {
    cfg.metrics = detail::string_list(value, "metrics");
  } else if (key == "trajectory" || key == "log") {
    if (!value.is_boolean()) throw ConfigError(key + " must be true or false");
    (key == "log" ? cfg.write_log : cfg.write_trajectory) = value.get<bool>();
  } else if (key.rfind("sweep.", 0) == 0) {
    const auto name = key.substr(6);
    auto it = std::find_if(cfg.sweep.begin(), cfg.sweep.end(),
                           [&](const SweepAxis& a) { return a.name == name; });
    if (it == cfg.sweep.end()) throw ConfigError("no sweep axis named '" + name + "'");
    it->values.clear();
    if (value.is_array()) {
      for (const auto& v : value) it->values.push_back(v);
    } else {
      it->values.push_back(value);
    }
  } else {
    set_param(cfg.params, key, value);
  }
}

// ---------------------------------------------------------------- presets

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{
      "table3", "table4", "fig2",  "fig3",  "fig4a",  "fig4b",  "fig5",     "fig6",    "fig7",
      "fig8",   "fig9",   "fig10", "fig11a", "fig11b", "fig12", "recovery", "coverage"};
  return names;
}

inline ExperimentConfig preset(std::string_view name) {
  ExperimentConfig cfg;
  cfg.preset = std::string(name);
  cfg.seeds = detail::seed_list(Json(16));
  auto set = [&](std::string_view path, const Json& v) { set_param(cfg.params, path, v); };
  auto axis = [&](std::string n, std::vector<std::string> paths, std::vector<Json> values) {
    cfg.sweep.push_back({std::move(n), std::move(paths), std::move(values)});
  };
  const std::vector<Json> rho_grid{0.1, 0.25, 0.5, 0.75, 1.0};
  auto contention_setup = [&] {
    set("mission.contention", true);
    set("mission.rho", 0.5);
    set("mission.c", 0);
    set("eval.normalizer", "matching");
  };

  if (name == "table3") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "mf_sgd", "estr", "bias", "ucb", "tabular", "random"};
    axis("rho", {"mission.rho"}, {0.25, 1.0});
    cfg.metrics = {"unseen_pair_skill", "anytime_skill", "regret", "rounds_to_quarter"};
    cfg.write_trajectory = true;
  } else if (name == "table4") {
    cfg.policies = {"ceiling_clean", "ceiling_noisy", "swarmcf", "ucb"};
    set("eval.normalizer", "matching");
    cfg.metrics = {"anytime_skill", "unseen_pair_skill"};
  } else if (name == "fig2") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "mf_sgd", "estr", "bias", "ucb", "tabular", "random"};
    axis("rho", {"mission.rho"}, rho_grid);
    cfg.metrics = {"unseen_pair_skill"};
  } else if (name == "fig3") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "mf_sgd", "estr", "ucb", "tabular", "random"};
    cfg.metrics = {"anytime_skill", "rounds_to_quarter"};
    cfg.write_trajectory = true;
  } else if (name == "fig4a") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "ucb", "tabular"};
    axis("rho", {"mission.rho"}, {0.0, 0.1, 0.25, 0.5, 0.75, 1.0});
    cfg.metrics = {"unseen_pair_skill"};
  } else if (name == "fig4b") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "ucb", "tabular"};
    set("mission.rho", 0.5);
    axis("m", {"world.m"}, {5, 10, 20, 40, 80});
    cfg.metrics = {"unseen_pair_skill"};
  } else if (name == "fig5") {
    cfg.policies = {"swarmcf", "mf_sgd", "ucb", "tabular", "random"};
    contention_setup();
    cfg.metrics = {"anytime_skill", "unseen_pair_skill", "collision_rate"};
  } else if (name == "fig6") {
    cfg.policies = {"swarmcf", "mf_sgd", "ucb", "tabular", "random"};
    contention_setup();
    axis("c", {"mission.c"}, {0, 20});
    cfg.metrics = {"collision_rate", "anytime_skill"};
  } else if (name == "fig7") {
    cfg.policies = {"swarmcf", "mf_sgd"};
    contention_setup();
    axis("d_hat", {"mission.d_hat_low", "mission.d_hat_high"}, {2, 3, 4, 5, 6, 8, 10, 12, 15});
    cfg.metrics = {"unseen_pair_skill", "anytime_skill"};
  } else if (name == "fig8") {
    cfg.policies = {"swarmcf", "mf_sgd", "ucb", "random"};
    contention_setup();
    set("world.variant", "sensing");
    set("mission.mask", "geometry");
    set("mission.noise.distance_scaled", true);
    cfg.metrics = {"anytime_skill", "unseen_pair_skill", "collision_rate"};
  } else if (name == "fig9") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "ucb", "tabular"};
    axis("c", {"mission.c"}, {20, 0});
    axis("rho", {"mission.rho"}, rho_grid);
    cfg.metrics = {"unseen_pair_skill", "anytime_skill"};
  } else if (name == "fig10") {
    cfg.policies = {"swarmcf"};
    axis("mask", {"mission.mask"}, {"persistent", "per_round"});
    cfg.metrics = {"unseen_pair_skill", "anytime_skill", "state_uniqueness"};
  } else if (name == "fig11a") {
    cfg.policies = {"swarmcf", "ucb", "tabular", "random"};
    set("mission.c", 3);
    cfg.metrics = {"anytime_skill"};
    cfg.write_trajectory = true;
  } else if (name == "fig11b") {
    cfg.policies = {"swarmcf", "swarmcf_hybrid", "swarmcf_batch", "ucb"};
    set("mission.c", 0);
    axis("rho", {"mission.rho"}, rho_grid);
    cfg.metrics = {"unseen_pair_skill"};
  } else if (name == "fig12") {
    cfg.policies = {"swarmcf", "swarmcf_batch", "ucb", "tabular"};
    axis("epsilon", {"world.epsilon"}, {0.0, 0.25, 0.5, 0.75, 1.0});
    cfg.metrics = {"unseen_pair_skill", "effective_rank"};
  } else if (name == "recovery") {
    cfg.policies = {"swarmcf"};
    set("mission.rho", 0.5);
    set("mission.noise.sigma_own", 0.0);
    set("mission.noise.sigma_obs", 0.0);
    cfg.metrics = {"unseen_pair_skill"};
    cfg.write_log = true;
  } else if (name == "coverage") {
    cfg.policies = {"random"};
    set("mission.rho", 0.5);
    set("mission.noise.sigma_own", 0.0);
    set("mission.noise.sigma_obs", 0.0);
    axis("m", {"world.m"}, {10, 20, 40, 80, 160});
    cfg.metrics = {"unseen_pair_skill"};
    cfg.write_log = true;
  } else {
    std::string list;
    for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + list + ")");
  }
  return cfg;
}

// ---------------------------------------------------------------- running

struct MethodRun {
  std::vector<std::optional<double>> metrics;  // aligned with cfg.metrics
  std::vector<double> trajectory;              // cumulative skill per round
  MissionLog log;                              // kept only when logging
};

struct JobResult {
  std::vector<MethodRun> methods;  // aligned with cfg.policies
};

struct MissionSetup {
  LatentWorld world;
  MissionConfig mission;
  EvalSettings eval;
  double geometry_radius = 0.0;
};

inline MissionSetup mission_setup(const Json& point, std::uint64_t seed) {
  MissionSetup s;
  const auto wc = world_config(point, seed);
  s.world = build_world(wc);
  s.mission = mission_config(point, seed);
  s.eval = eval_settings(point);
  if (wc.variant == WorldVariant::Sensing) {
    s.geometry_radius = wc.sensing_radius > 0.0 ? wc.sensing_radius
                                                : radius_for_visibility(s.mission.rho, wc.arena_side);
    s.mission.noise.sensing_radius = s.geometry_radius;
  }
  return s;
}

// Ceilings observe every engagement of the team: unmasked, and noiseless in
// the clean variant.
inline MissionConfig ceiling_mission(MissionConfig m, std::string_view policy) {
  m.rho = 1.0;
  m.mask_model = MaskModel::Persistent;
  if (policy == "ceiling_clean") {
    m.noise.sigma_own = 0.0;
    m.noise.sigma_obs = 0.0;
    m.noise.distance_scaled = false;
  }
  return m;
}

inline bool wants(const ExperimentConfig& cfg, std::string_view metric) {
  return std::find(cfg.metrics.begin(), cfg.metrics.end(), metric) != cfg.metrics.end();
}

inline JobResult run_job(const ExperimentConfig& cfg, const Json& point, std::uint64_t seed) {
  const auto setup = mission_setup(point, seed);
  const auto& world = setup.world;
  const int menu_size = setup.eval.menu_size > 0 ? setup.eval.menu_size
                                                 : setup.mission.menu_size(world.tasks());
  const bool need_uniqueness = wants(cfg, "state_uniqueness");
  JobResult job;
  std::optional<RoundBaselines> baselines;  // menus do not depend on the policy
  std::optional<double> eff_rank;
  for (const auto& policy : cfg.policies) {
    MissionConfig mc = is_ceiling(policy) ? ceiling_mission(setup.mission, policy) : setup.mission;
    RunOptions opts;
    opts.keep_completed = need_uniqueness;
    opts.geometry_radius = setup.geometry_radius;
    auto result = run_mission(world, mc, policy, opts);
    if (!baselines) {
      baselines = compute_baselines(world, result.log, setup.eval.normalizer, seed,
                                    setup.eval.random_rollouts);
    }
    MethodRun run;
    run.trajectory = anytime_skill(result.log, *baselines);
    for (const auto& metric : cfg.metrics) {
      std::optional<double> v;
      if (metric == "unseen_pair_skill") {
        v = unseen_pair_skill(result.predictions, engaged_tasks(result.log), world,
                              {setup.eval.menus, menu_size}, seed);
      } else if (metric == "anytime_skill") {
        if (!std::isnan(run.trajectory.back())) v = run.trajectory.back();
      } else if (metric == "regret") {
        v = regret(result.log, *baselines);
      } else if (metric == "collision_rate") {
        v = collision_rate(result.log);
      } else if (metric == "state_uniqueness") {
        if (result.completed.size() >= 2) v = state_uniqueness(result.completed);
      } else if (metric == "effective_rank") {
        if (!eff_rank) eff_rank = static_cast<double>(effective_rank(world.R, 0.99));
        v = eff_rank;
      }
      // rounds_to_quarter is computed from the seed-averaged trajectory.
      run.metrics.push_back(v);
    }
    if (cfg.write_log) run.log = std::move(result.log);
    job.methods.push_back(std::move(run));
  }
  return job;
}

inline int default_workers() {
  if (const char* env = std::getenv("ZKMRTA_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Runs `count` independent jobs on `workers` threads; results land by index.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, int workers, Fn&& fn) {
  std::vector<Result> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        out[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, workers));
  if (n == 1 || count <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(n, count); ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

struct SummaryRow {
  std::string method;
  std::size_t point = 0;
  std::string metric;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_seeds = 0;
};

struct TrajectoryRow {
  std::string method;
  std::size_t point = 0;
  int round = 0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_seeds = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Json> points;
  std::vector<SummaryRow> summary;
  std::vector<TrajectoryRow> trajectory;
  // [point][seed] job outputs, kept for logs and analysis.
  std::vector<std::vector<JobResult>> jobs;

  const SummaryRow* find(std::string_view method, std::size_t point, std::string_view metric) const {
    for (const auto& r : summary)
      if (r.method == method && r.point == point && r.metric == metric) return &r;
    return nullptr;
  }
};

struct RunSettings {
  int workers = 0;  // 0: default_workers()
  std::function<void(std::size_t done, std::size_t total)> progress;
};

inline std::uint64_t aggregate_seed(std::size_t point, std::size_t method, std::size_t metric) {
  return mix64(0x5eedULL ^ mix64(point * 1000003ULL + method * 1009ULL + metric));
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunSettings& settings = {}) {
  validate(cfg);
  ExperimentResult res;
  res.config = cfg;
  res.points = sweep_points(cfg);
  const std::size_t seeds = cfg.seeds.size();
  const std::size_t total = res.points.size() * seeds;
  std::atomic<std::size_t> done{0};
  const int workers = settings.workers > 0 ? settings.workers : default_workers();
  auto flat = parallel_map<JobResult>(total, workers, [&](std::size_t k) {
    auto r = run_job(cfg, res.points[k / seeds], cfg.seeds[k % seeds]);
    const auto d = ++done;
    if (settings.progress) settings.progress(d, total);
    return r;
  });
  res.jobs.resize(res.points.size());
  for (std::size_t k = 0; k < total; ++k) res.jobs[k / seeds].push_back(std::move(flat[k]));

  const auto eval = eval_settings(cfg.params);
  for (std::size_t p = 0; p < res.points.size(); ++p) {
    const auto& jobs = res.jobs[p];
    for (std::size_t mi = 0; mi < cfg.policies.size(); ++mi) {
      const auto& method = cfg.policies[mi];
      const int T = static_cast<int>(jobs.front().methods[mi].trajectory.size());
      std::vector<double> avg_traj(static_cast<std::size_t>(T), 0.0);
      for (int t = 0; t < T; ++t) {
        std::vector<double> vals;
        for (const auto& j : jobs) {
          const double v = j.methods[mi].trajectory[static_cast<std::size_t>(t)];
          if (!std::isnan(v)) vals.push_back(v);
        }
        avg_traj[static_cast<std::size_t>(t)] = mean_of(vals);
        if (cfg.write_trajectory) {
          const auto ci = bootstrap_ci(vals, eval.level, eval.bootstrap_resamples,
                                       aggregate_seed(p, mi, 1000 + static_cast<std::size_t>(t)));
          res.trajectory.push_back({method, p, t + 1, mean_of(vals), ci.lo, ci.hi,
                                    static_cast<int>(vals.size())});
        }
      }
      for (std::size_t k = 0; k < cfg.metrics.size(); ++k) {
        const auto& metric = cfg.metrics[k];
        if (metric == "rounds_to_quarter") {
          const double r = rounds_to_reach(avg_traj, 0.25);
          res.summary.push_back({method, p, metric, r, r, r, static_cast<int>(jobs.size())});
          continue;
        }
        std::vector<double> vals;
        for (const auto& j : jobs)
          if (j.methods[mi].metrics[k]) vals.push_back(*j.methods[mi].metrics[k]);
        const auto ci = bootstrap_ci(vals, eval.level, eval.bootstrap_resamples,
                                     aggregate_seed(p, mi, k));
        res.summary.push_back({method, p, metric, mean_of(vals), ci.lo, ci.hi,
                               static_cast<int>(vals.size())});
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------- output

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string param_header(const ExperimentConfig& cfg) {
  std::string h;
  for (const auto& a : cfg.sweep) h += a.name + ",";
  return h;
}

inline std::string param_cells(const ExperimentConfig& cfg, std::size_t point) {
  std::string s;
  for (const auto& v : point_values(cfg, point)) s += format_value(v) + ",";
  return s;
}

}  // namespace detail

inline std::string summary_csv(const ExperimentResult& r) {
  using detail::format_number;
  std::string out = "preset,method," + detail::param_header(r.config) +
                    "metric,mean,ci_lo,ci_hi,n_seeds\n";
  for (const auto& row : r.summary) {
    out += r.config.preset + "," + row.method + "," + detail::param_cells(r.config, row.point) +
           row.metric + "," + format_number(row.mean) + "," + format_number(row.ci_lo) + "," +
           format_number(row.ci_hi) + "," + std::to_string(row.n_seeds) + "\n";
  }
  return out;
}

inline std::string trajectory_csv(const ExperimentResult& r) {
  using detail::format_number;
  std::string out = "preset,method," + detail::param_header(r.config) +
                    "round,mean,ci_lo,ci_hi,n_seeds\n";
  for (const auto& row : r.trajectory) {
    out += r.config.preset + "," + row.method + "," + detail::param_cells(r.config, row.point) +
           std::to_string(row.round) + "," + format_number(row.mean) + "," +
           format_number(row.ci_lo) + "," + format_number(row.ci_hi) + "," +
           std::to_string(row.n_seeds) + "\n";
  }
  return out;
}

inline std::string log_csv(const ExperimentResult& r) {
  const auto& cfg = r.config;
  std::ostringstream out;
  out << "preset,method,point," << detail::param_header(cfg)
      << "seed,round,robot,action,collided,earned,observations\n";
  for (std::size_t p = 0; p < r.jobs.size(); ++p) {
    const auto cells = detail::param_cells(cfg, p);
    for (std::size_t s = 0; s < r.jobs[p].size(); ++s) {
      for (std::size_t mi = 0; mi < cfg.policies.size(); ++mi) {
        for (const auto& e : r.jobs[p][s].methods[mi].log.entries) {
          out << cfg.preset << ',' << cfg.policies[mi] << ',' << p << ',' << cells << cfg.seeds[s]
              << ',' << e.round << ',' << e.robot << ',' << e.action << ','
              << (e.collided ? 1 : 0) << ',' << detail::format_number(e.earned) << ','
              << e.observations << '\n';
        }
      }
    }
  }
  return out.str();
}

inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "config.json", to_json(r.config).dump(2) + "\n");
  detail::write_file(dir / "summary.csv", summary_csv(r));
  if (r.config.write_trajectory) detail::write_file(dir / "trajectory.csv", trajectory_csv(r));
  if (r.config.write_log) detail::write_file(dir / "log.csv", log_csv(r));
}

// ---------------------------------------------------------------- reading back

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<int>(k);
    throw InputError("csv: missing column '" + std::string(name) + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw InputError("csv: ragged row in '" + path.string() + "'");
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw InputError("csv: '" + path.string() + "' is empty");
  return t;
}

// Rebuilds one mission's log from log.csv rows plus the deterministic masks.
inline MissionLog rebuild_log(const MissionSetup& setup, const std::vector<LogEntry>& entries) {
  MissionLog log;
  log.m = setup.world.robots();
  log.n = setup.world.tasks();
  log.T = setup.mission.T;
  log.contention = setup.mission.contention;
  log.d_hat = draw_guessed_rank(setup.world.d, setup.mission);
  log.mask = draw_mission_mask(setup.world, setup.mission, setup.geometry_radius);
  if (setup.mission.mask_model == MaskModel::PerRound) {
    for (int t = 1; t <= log.T; ++t)
      log.round_masks.push_back(draw_iid_mask(log.m, setup.mission.rho, setup.mission.seed, t));
  }
  log.entries = entries;
  std::sort(log.entries.begin(), log.entries.end(), [](const LogEntry& a, const LogEntry& b) {
    return a.round != b.round ? a.round < b.round : a.robot < b.robot;
  });
  if (log.entries.size() != static_cast<std::size_t>(log.m) * static_cast<std::size_t>(log.T)) {
    throw InputError("log: mission has " + std::to_string(log.entries.size()) +
                     " entries, expected m*T");
  }
  return log;
}

struct LoggedMission {
  std::string method;
  std::size_t point = 0;
  std::uint64_t seed = 0;
  MissionSetup setup;
  MissionLog log;
};

inline std::vector<LoggedMission> read_logged_missions(const ExperimentConfig& cfg,
                                                       const std::filesystem::path& dir) {
  const auto table = read_csv(dir / "log.csv");
  const int c_method = table.column("method"), c_point = table.column("point");
  const int c_seed = table.column("seed"), c_round = table.column("round");
  const int c_robot = table.column("robot"), c_action = table.column("action");
  const int c_coll = table.column("collided"), c_earned = table.column("earned");
  std::map<std::tuple<std::size_t, std::uint64_t, std::string>, std::vector<LogEntry>> groups;
  std::vector<std::tuple<std::size_t, std::uint64_t, std::string>> order;
  for (const auto& row : table.rows) {
    const auto key = std::make_tuple(static_cast<std::size_t>(std::stoull(row[c_point])),
                                     static_cast<std::uint64_t>(std::stoull(row[c_seed])),
                                     row[c_method]);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    LogEntry e;
    e.round = std::stoi(row[c_round]);
    e.robot = std::stoi(row[c_robot]);
    e.action = std::stoi(row[c_action]);
    e.collided = row[c_coll] == "1";
    e.earned = std::stod(row[c_earned]);
    it->second.push_back(e);
  }
  const auto points = sweep_points(cfg);
  std::vector<LoggedMission> out;
  for (const auto& key : order) {
    const auto& [p, seed, method] = key;
    if (p >= points.size()) throw InputError("log: point index out of range");
    auto setup = mission_setup(points[p], seed);
    if (is_ceiling(method)) setup.mission = ceiling_mission(setup.mission, method);
    auto log = rebuild_log(setup, groups[key]);
    out.push_back({method, p, seed, std::move(setup), std::move(log)});
  }
  return out;
}

}  // namespace zkmrta
