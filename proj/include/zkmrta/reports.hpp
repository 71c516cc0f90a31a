#pragma once

// Analysis reports over a run directory (config.json + summary.csv +
// log.csv), written as CSV files.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "zkmrta/analysis.hpp"
#include "zkmrta/harness.hpp"

namespace zkmrta {

inline ExperimentConfig load_run_config(const std::filesystem::path& dir) {
  return load_config(dir / "config.json");
}

struct SpanningSummary {
  long pairs = 0;
  long exceptions = 0;
  double nonspanning_prior_error = 0.0;
  std::vector<double> error_by_rank;
  bool monotone = true;  // non-increasing across populated rank bins
};

// Recovery-condition report: per-mission table, pooled rank bins, and the
// spanning fraction per round.
inline SpanningSummary analyze_spanning(const std::filesystem::path& run_dir,
                                        const std::filesystem::path& out_dir) {
  using detail::format_number;
  const auto cfg = load_run_config(run_dir);
  const auto missions = read_logged_missions(cfg, run_dir);
  std::filesystem::create_directories(out_dir);

  std::string per_run =
      "method,point,seed,pairs,spanning_fraction,exceptions,nonspanning_prior_error,"
      "nonspanning_ls_error\n";
  std::string curve = "method,point,seed,round,spanning_fraction\n";
  SpanningSummary total;
  std::vector<double> bin_sum;
  std::vector<long> bin_count;
  double prior_sum = 0.0;
  long prior_count = 0;
  for (const auto& lm : missions) {
    const auto& world = lm.setup.world;
    const auto rep = recovery_analysis(world, lm.log);
    const auto prefix = lm.method + "," + std::to_string(lm.point) + "," + std::to_string(lm.seed) + ",";
    per_run += prefix + std::to_string(rep.pairs.size()) + "," + format_number(rep.spanning_fraction) +
               "," + std::to_string(rep.exceptions) + "," + format_number(rep.nonspanning_prior_error) +
               "," + format_number(rep.nonspanning_ls_error) + "\n";
    total.pairs += static_cast<long>(rep.pairs.size());
    total.exceptions += rep.exceptions;
    if (bin_sum.size() < rep.error_by_rank.size()) {
      bin_sum.resize(rep.error_by_rank.size(), 0.0);
      bin_count.resize(rep.error_by_rank.size(), 0);
    }
    for (const auto& o : rep.pairs) {
      bin_sum[static_cast<std::size_t>(o.rank)] += o.error;
      ++bin_count[static_cast<std::size_t>(o.rank)];
      if (!o.spans) {
        prior_sum += o.prior_error;
        ++prior_count;
      }
    }
    const auto first = first_spanning_rounds(world, lm.log);
    const auto frac = spanning_curve(first, lm.log.T);
    for (std::size_t t = 0; t < frac.size(); ++t)
      curve += prefix + std::to_string(t + 1) + "," + format_number(frac[t]) + "\n";
  }
  total.nonspanning_prior_error = prior_count > 0 ? prior_sum / static_cast<double>(prior_count) : 0.0;
  std::string bins = "rank,pairs,mean_error\n";
  double last = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < bin_sum.size(); ++r) {
    const double mean = bin_count[r] > 0 ? bin_sum[r] / static_cast<double>(bin_count[r])
                                         : std::numeric_limits<double>::quiet_NaN();
    total.error_by_rank.push_back(mean);
    if (!std::isnan(mean)) {
      if (mean > last) total.monotone = false;
      last = mean;
    }
    bins += std::to_string(r) + "," + std::to_string(bin_count[r]) + "," + format_number(mean) + "\n";
  }
  detail::write_file(out_dir / "spanning_runs.csv", per_run);
  detail::write_file(out_dir / "spanning_by_round.csv", curve);
  detail::write_file(out_dir / "error_by_rank.csv", bins);
  return total;
}

struct BoundCheck {
  std::string method;
  std::size_t point = 0;
  BoundReport report;
};

// Anytime bound check for the structure-free methods of a run, from the
// summary's means and intervals.
inline std::vector<BoundCheck> analyze_bound(const std::filesystem::path& run_dir,
                                             const std::filesystem::path& out_dir) {
  using detail::format_number;
  const auto cfg = load_run_config(run_dir);
  const auto table = read_csv(run_dir / "summary.csv");
  const int c_method = table.column("method"), c_metric = table.column("metric");
  const int c_mean = table.column("mean"), c_lo = table.column("ci_lo"), c_hi = table.column("ci_hi");
  const auto points = sweep_points(cfg);
  const std::size_t per_point = table.rows.size() / std::max<std::size_t>(1, points.size());
  std::vector<BoundCheck> out;
  std::string csv = "method,point,c,T,n,mean,ci_lo,ci_hi,bound,margin,holds\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row[c_metric] != "anytime_skill") continue;
    const auto& method = row[c_method];
    if (!is_structure_free(method)) continue;
    const std::size_t p = per_point > 0 ? r / per_point : 0;
    const auto& point = points[p];
    const int n = detail::read<int>(point, "world.n");
    const auto mission = mission_config(point, 0);
    const int c = mission.menu_size(n);
    BoundReport rep;
    rep.bound = theorem1_bound(c, mission.T, n);
    rep.mean = std::stod(row[c_mean]);
    rep.half_width = 0.5 * (std::stod(row[c_hi]) - std::stod(row[c_lo]));
    rep.margin = rep.bound + 2.0 * rep.half_width - rep.mean;
    rep.holds = rep.margin >= 0.0;
    out.push_back({method, p, rep});
    csv += method + "," + std::to_string(p) + "," + std::to_string(c) + "," + std::to_string(mission.T) +
           "," + std::to_string(n) + "," + row[c_mean] + "," + row[c_lo] + "," + row[c_hi] + "," +
           format_number(rep.bound) + "," + format_number(rep.margin) + "," +
           (rep.holds ? "true" : "false") + "\n";
  }
  std::filesystem::create_directories(out_dir);
  detail::write_file(out_dir / "bound.csv", csv);
  return out;
}

struct FoldinRow {
  std::string axis;
  double epsilon = 0.0;
  double sigma = 0.0;
  double lambda = 0.0;
  int k = 0;
  FoldinProfile profile;
};

inline constexpr int kFoldinTrials = 256;

// Fold-in error along each single-parameter axis with the others at zero,
// plus the k = d versus k = 4d comparison under noise.
inline std::vector<FoldinRow> foldin_grid(int d, int trials, std::uint64_t seed) {
  std::vector<FoldinRow> rows;
  const double tiny = 1e-12;
  auto add = [&](std::string axis, double eps, double sigma, double lambda, int k) {
    rows.push_back({std::move(axis), eps, sigma, lambda, k,
                    foldin_error_profile(eps, sigma, lambda, k, d, trials, seed)});
  };
  add("exact", 0.0, 0.0, tiny, d);
  add("exact", 0.0, 0.0, tiny, 4 * d);
  for (const double e : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) add("epsilon", e, 0.0, tiny, 2 * d);
  for (const double s : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) add("sigma", 0.0, s, tiny, 2 * d);
  for (const double l : {tiny, 1e-2, 1e-1, 1.0, 10.0, 100.0}) add("lambda", 0.0, 0.0, l, 2 * d);
  add("basis_size", 0.0, 0.3, tiny, d);
  add("basis_size", 0.0, 0.3, tiny, 4 * d);
  return rows;
}

inline std::vector<FoldinRow> analyze_foldin(const std::filesystem::path& out_dir, int d = 5,
                                             int trials = kFoldinTrials, std::uint64_t seed = 0) {
  using detail::format_number;
  const auto rows = foldin_grid(d, trials, seed);
  std::string csv = "axis,epsilon,sigma,lambda,k,d,mean_error,std_error\n";
  for (const auto& r : rows) {
    csv += r.axis + "," + format_number(r.epsilon) + "," + format_number(r.sigma) + "," +
           format_number(r.lambda) + "," + std::to_string(r.k) + "," + std::to_string(d) + "," +
           format_number(r.profile.mean_error) + "," + format_number(r.profile.std_error) + "\n";
  }
  std::filesystem::create_directories(out_dir);
  detail::write_file(out_dir / "foldin.csv", csv);
  return rows;
}

struct CoverageRow {
  std::size_t point = 0;
  int m = 0;
  std::vector<int> times;  // per seed, -1 = never
  double median = 0.0;     // over seeds, never counted as T + 1
};

inline std::vector<CoverageRow> analyze_coverage(const std::filesystem::path& run_dir,
                                                 const std::filesystem::path& out_dir) {
  using detail::format_number;
  const auto cfg = load_run_config(run_dir);
  const auto missions = read_logged_missions(cfg, run_dir);
  std::vector<CoverageRow> rows;
  std::string per_run = "method,point,m,seed,coverage_time\n";
  for (const auto& lm : missions) {
    const int t = coverage_time(lm.setup.world, lm.log);
    if (rows.empty() || rows.back().point != lm.point) {
      rows.push_back({lm.point, lm.log.m, {}, 0.0});
    }
    rows.back().times.push_back(t);
    per_run += lm.method + "," + std::to_string(lm.point) + "," + std::to_string(lm.log.m) + "," +
               std::to_string(lm.seed) + "," + std::to_string(t) + "\n";
  }
  std::string summary = "point,m,median_coverage_time,never\n";
  std::vector<double> medians;
  for (auto& r : rows) {
    std::vector<double> v;
    int never = 0;
    for (const int t : r.times) {
      v.push_back(t < 0 ? static_cast<double>(cfg.params["mission"]["T"].get<int>() + 1) : t);
      if (t < 0) ++never;
    }
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    r.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    medians.push_back(r.median);
    summary += std::to_string(r.point) + "," + std::to_string(r.m) + "," + format_number(r.median) +
               "," + std::to_string(never) + "\n";
  }
  std::filesystem::create_directories(out_dir);
  detail::write_file(out_dir / "coverage_runs.csv", per_run);
  detail::write_file(out_dir / "coverage.csv", summary);
  return rows;
}

// Plain-text rendering of a summary.csv.
inline void print_report(const std::filesystem::path& run_dir, std::ostream& os) {
  const auto table = read_csv(run_dir / "summary.csv");
  std::vector<std::size_t> width(table.header.size(), 0);
  for (std::size_t k = 0; k < table.header.size(); ++k) width[k] = table.header[k].size();
  for (const auto& row : table.rows)
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k)
      os << std::left << std::setw(static_cast<int>(width[k]) + 2) << cells[k];
    os << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
}

}  // namespace zkmrta
