#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "instance.hpp"
#include "kv_config.hpp"
#include "policies.hpp"
#include "simulator.hpp"

namespace sdd {

// Served / requests pooled over all evaluation days.
inline double solution_quality(std::span<const EpisodeResult> results) {
  if (results.empty()) throw std::invalid_argument("solution_quality: no results");
  long long served = 0, requests = 0;
  for (const auto& r : results) {
    served += r.served;
    requests += r.requests;
  }
  if (requests == 0) throw std::domain_error("solution_quality: zero requests");
  return static_cast<double>(served) / static_cast<double>(requests);
}

// Relative improvement of a over b, in percent.
inline double improvement(double q_a, double q_b) {
  if (q_b == 0.0) throw std::domain_error("improvement: baseline quality is zero");
  return (q_a - q_b) / q_b * 100.0;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
  // differences had zero variance but a non-zero mean; t is infinite, p = 0
  bool degenerate = false;
};

// Two-sided paired t-test on a[i] - b[i].
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: unequal sample sizes");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.df = static_cast<int>(n - 1);
  if (sd == 0.0) {
    if (mean == 0.0) return r;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = 0.0;
    r.degenerate = true;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

inline TTestResult paired_t_test(std::span<const EpisodeResult> a, std::span<const EpisodeResult> b) {
  std::vector<double> x, y;
  for (const auto& r : a) x.push_back(r.served);
  for (const auto& r : b) y.push_back(r.served);
  return paired_t_test(x, y);
}

struct FleetSize {
  int m = 0;
  int n = 0;
  friend bool operator==(const FleetSize&, const FleetSize&) = default;
};

// Policies may reference per-cell checkpoints with the placeholders {m}, {n}
// and {geo}, e.g. q:checkpoint=runs/bank_{m}_{n}_{geo}.bin
struct RunMatrixSpec {
  std::vector<FleetSize> fleets;
  std::vector<std::string> geographies;
  std::size_t eval_days = 500;
  std::vector<std::string> policies;
  std::uint64_t seed = 1;
};

struct CellPolicyResult {
  FleetSize fleet;
  std::string geography;
  std::string policy;
  std::vector<EpisodeResult> days;
  double mean_served = 0.0;
  double quality = 0.0;
  // relative to the first policy of the cell
  double improvement_pct = 0.0;
  TTestResult test;
};

struct EvalReport {
  std::vector<CellPolicyResult> rows;
};

inline std::string substitute_cell(std::string text, FleetSize f, const std::string& geo) {
  auto replace = [&text](const std::string& key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
      text.replace(pos, key.size(), value);
  };
  replace("{m}", std::to_string(f.m));
  replace("{n}", std::to_string(f.n));
  replace("{geo}", geo);
  return text;
}

inline InstanceConfig cell_config(InstanceConfig cfg, FleetSize f, const std::string& geo) {
  cfg.fleet_m = f.m;
  cfg.fleet_n = f.n;
  if (geo != cfg.geography.name)
    cfg.geography = parse_geography(geo, cfg.geography.max_sigma(), "", cfg.order_window_end);
  cfg.validate();
  return cfg;
}

// Evaluation days for a geography; shared by every fleet and policy so that
// the per-day comparisons are paired.
inline std::vector<SamplePath> evaluation_paths(const InstanceConfig& cfg, std::size_t days, std::uint64_t seed) {
  return gen_sample_paths(cfg, days, mix_seed(seed, fnv1a(cfg.geography.name.data(), cfg.geography.name.size())));
}

inline EvalReport run_matrix(const RunMatrixSpec& spec, const InstanceConfig& base) {
  if (spec.fleets.empty() || spec.geographies.empty() || spec.policies.empty())
    throw InvalidConfig("run matrix needs at least one fleet, geography and policy");
  if (spec.eval_days == 0) throw InvalidConfig("run matrix needs at least one evaluation day");
  EvalReport report;
  for (const auto& geo : spec.geographies) {
    for (const auto& fleet : spec.fleets) {
      const InstanceConfig cfg = cell_config(base, fleet, geo);
      const auto paths = evaluation_paths(cfg, spec.eval_days, spec.seed);
      const std::size_t first = report.rows.size();
      for (const auto& pol : spec.policies) {
        const PolicyHandle h = make_policy(parse_policy_spec(substitute_cell(pol, fleet, geo)), cfg);
        CellPolicyResult row;
        row.fleet = fleet;
        row.geography = geo;
        row.policy = h.name;
        for (const auto& p : paths) row.days.push_back(run_episode(h.policy, p, cfg));
        double total = 0.0;
        for (const auto& d : row.days) total += d.served;
        row.mean_served = total / static_cast<double>(row.days.size());
        row.quality = solution_quality(row.days);
        report.rows.push_back(std::move(row));
      }
      const auto& ref = report.rows[first];
      for (std::size_t i = first; i < report.rows.size(); ++i) {
        auto& row = report.rows[i];
        row.improvement_pct = ref.quality > 0.0 ? improvement(row.quality, ref.quality) : 0.0;
        if (row.days.size() >= 2) row.test = paired_t_test(row.days, ref.days);
      }
    }
  }
  return report;
}

// Report CSV: fleet_m,fleet_n,geography,policy,days,mean_served,quality,
// improvement_pct,t_stat,p_value (the last three against the cell's first policy)
inline void write_report(std::ostream& out, const EvalReport& r) {
  out << "fleet_m,fleet_n,geography,policy,days,mean_served,quality,improvement_pct,t_stat,p_value\n";
  for (const auto& row : r.rows)
    out << row.fleet.m << "," << row.fleet.n << "," << row.geography << ",\"" << row.policy << "\","
        << row.days.size() << "," << format_double(row.mean_served) << "," << format_double(row.quality) << ","
        << format_double(row.improvement_pct) << "," << format_double(row.test.t) << ","
        << format_double(row.test.p) << "\n";
}

// Feasibility-map CSV: t_bin_start,decisions,vehicle_infeasible,drone_infeasible,both_infeasible
// Share of decisions per time bin for which each fleet was infeasible.
inline void write_feasibility_map(std::ostream& out, std::span<const EpisodeResult> days, Minutes bin,
                                  Minutes window_end) {
  if (!(bin > 0.0)) throw std::invalid_argument("feasibility map bin must be positive");
  const auto bins = static_cast<std::size_t>(std::ceil(window_end / bin));
  std::vector<long long> total(bins, 0), veh(bins, 0), drone(bins, 0), both(bins, 0);
  for (const auto& d : days)
    for (const auto& rec : d.decisions) {
      const auto i = std::min(bins - 1, static_cast<std::size_t>(rec.t / bin));
      ++total[i];
      veh[i] += rec.vehicle_feasible ? 0 : 1;
      drone[i] += rec.drone_feasible ? 0 : 1;
      both[i] += (rec.vehicle_feasible || rec.drone_feasible) ? 0 : 1;
    }
  out << "t_bin_start,decisions,vehicle_infeasible,drone_infeasible,both_infeasible\n";
  for (std::size_t i = 0; i < bins; ++i) {
    const double n = static_cast<double>(std::max(1LL, total[i]));
    out << format_double(static_cast<double>(i) * bin) << "," << total[i] << ","
        << format_double(static_cast<double>(veh[i]) / n) << "," << format_double(static_cast<double>(drone[i]) / n)
        << "," << format_double(static_cast<double>(both[i]) / n) << "\n";
  }
}

inline std::string file_safe(std::string s) {
  for (char& ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.')) ch = '_';
  return s;
}

// Writes report.csv plus, per cell and policy, the first day's decision log
// and a feasibility map over all days.
inline void write_matrix_artifacts(const std::filesystem::path& dir, const EvalReport& r, Minutes window_end,
                                   Minutes bin = 10.0) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(dir / "report.csv");
    write_report(f, r);
  }
  for (const auto& row : r.rows) {
    const std::string stem = std::to_string(row.fleet.m) + "_" + std::to_string(row.fleet.n) + "_" +
                             row.geography + "_" + file_safe(row.policy);
    {
      auto f = open(dir / ("decisions_" + stem + ".csv"));
      write_decision_log(f, row.days.front().decisions);
    }
    auto f = open(dir / ("feasibility_" + stem + ".csv"));
    write_feasibility_map(f, row.days, bin, window_end);
  }
}

}  // namespace sdd
