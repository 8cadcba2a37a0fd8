#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "instance.hpp"
#include "routing.hpp"
#include "simulator.hpp"

namespace sdd {

enum class FeatureSet { full, local, action_only, post_decision, distance_only };

inline FeatureSet parse_feature_set(std::string_view s) {
  if (s == "full") return FeatureSet::full;
  if (s == "local") return FeatureSet::local;
  if (s == "action_only") return FeatureSet::action_only;
  if (s == "post_decision") return FeatureSet::post_decision;
  if (s == "distance_only") return FeatureSet::distance_only;
  throw std::invalid_argument("unknown feature set: " + std::string(s));
}

inline const char* to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::full: return "full";
    case FeatureSet::local: return "local";
    case FeatureSet::action_only: return "action_only";
    case FeatureSet::post_decision: return "post_decision";
    case FeatureSet::distance_only: return "distance_only";
  }
  return "?";
}

inline std::size_t feature_dimension(FeatureSet f, int m, int n) {
  const auto um = static_cast<std::size_t>(m), un = static_cast<std::size_t>(n);
  switch (f) {
    case FeatureSet::full: return 3 + um + un;
    case FeatureSet::local: return 5;
    case FeatureSet::action_only: return 3;
    case FeatureSet::post_decision: return 3 * (1 + um + un);
    case FeatureSet::distance_only: return 2;
  }
  return 0;
}

struct FeatureVector {
  std::vector<double> raw;
  std::vector<double> normalized;
};

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

// 99.9% radius of a centred bivariate normal with per-axis sigma (Rayleigh quantile).
inline double radius_999_km(double sigma_km) { return sigma_km * std::sqrt(-2.0 * std::log(0.001)); }

// Upper bound of the distance feature: the 99.9% depot radius of the widest
// sigma band, as drone travel minutes.
inline Minutes distance_cap(const InstanceConfig& cfg) {
  const double km = radius_999_km(cfg.geography.max_sigma());
  return drone_travel_time(cfg.depot, {cfg.depot.x_km + km, cfg.depot.y_km}, cfg.travel);
}

inline std::vector<Bounds> normalization_bounds(const InstanceConfig& cfg, FeatureSet f) {
  const Bounds time{0.0, cfg.t_d_max};
  const Bounds dist{0.0, distance_cap(cfg)};
  const Bounds delta{0.0, kInfeasibleDelta};
  std::vector<Bounds> b;
  switch (f) {
    case FeatureSet::full:
      b = {time, dist, delta};
      b.insert(b.end(), static_cast<std::size_t>(cfg.fleet_m + cfg.fleet_n), time);
      break;
    case FeatureSet::local:
      b = {time, dist, delta, time, time};
      break;
    case FeatureSet::action_only:
      b = {time, dist, delta};
      break;
    case FeatureSet::post_decision:
      b.assign(feature_dimension(f, cfg.fleet_m, cfg.fleet_n), time);
      break;
    case FeatureSet::distance_only:
      b = {time, dist};
      break;
  }
  return b;
}

inline std::vector<double> normalize(const std::vector<double>& raw, const std::vector<Bounds>& bounds) {
  if (raw.size() != bounds.size()) throw std::invalid_argument("feature/bounds dimension mismatch");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double span = bounds[i].hi - bounds[i].lo;
    const double z = span > 0.0 ? (raw[i] - bounds[i].lo) / span : 0.0;
    out[i] = std::clamp(z, 0.0, 1.0);
  }
  return out;
}

namespace detail {

template <class Plans>
std::size_t earliest_unit(const Plans& units) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < units.size(); ++i)
    if (units[i].availability() < units[best].availability()) best = i;
  return best;
}

inline void append_completions(std::vector<double>& out, Minutes t, const FleetPlans& p) {
  out.push_back(t);
  for (const auto& v : p.vehicles) out.push_back(v.completion());
  for (const auto& d : p.drones) out.push_back(d.completion());
}

}  // namespace detail

// Raw feature layout per set:
//   full           [t, d, Δ, a(N1) per vehicle, a(N1) per drone]
//   local          [t, d, Δ, a(N1) of the would-be vehicle, a(N1) of the would-be drone]
//   action_only    [t, d, Δ]
//   distance_only  [t, d]
//   post_decision  for α in (vehicle, drone, deny): [t, completion time per unit]
// d is the drone travel time depot -> customer; Δ is Δ_Vehicle or 10000.
inline std::vector<double> raw_features(const State& s, const FeasibilityPair& feas, FeatureSet f,
                                        const InstanceConfig& cfg) {
  const double t = s.t;
  const double d = drone_travel_time(cfg.depot, s.request.location, cfg.travel);
  const double delta = feas.delta();
  std::vector<double> raw;
  raw.reserve(feature_dimension(f, cfg.fleet_m, cfg.fleet_n));
  switch (f) {
    case FeatureSet::full:
      raw = {t, d, delta};
      for (const auto& v : s.plans.vehicles) raw.push_back(v.availability());
      for (const auto& dr : s.plans.drones) raw.push_back(dr.availability());
      break;
    case FeatureSet::local: {
      raw = {t, d, delta};
      const auto& vs = s.plans.vehicles;
      const auto& ds = s.plans.drones;
      raw.push_back(vs.empty() ? 0.0
                               : vs[feas.vehicle ? feas.vehicle->vehicle : detail::earliest_unit(vs)]
                                     .availability());
      raw.push_back(ds.empty() ? 0.0
                               : ds[feas.drone ? feas.drone->drone : detail::earliest_unit(ds)]
                                     .availability());
      break;
    }
    case FeatureSet::action_only:
      raw = {t, d, delta};
      break;
    case FeatureSet::distance_only:
      raw = {t, d};
      break;
    case FeatureSet::post_decision: {
      const FleetPlans& none = s.plans;
      FleetPlans with_vehicle = none, with_drone = none;
      if (feas.vehicle) with_vehicle.vehicles[feas.vehicle->vehicle] = feas.vehicle->plan;
      if (feas.drone) with_drone.drones[feas.drone->drone] = feas.drone->plan;
      detail::append_completions(raw, t, with_vehicle);
      detail::append_completions(raw, t, with_drone);
      detail::append_completions(raw, t, none);
      break;
    }
  }
  return raw;
}

inline FeatureVector extract(const State& s, const FeasibilityPair& feas, FeatureSet f,
                             const InstanceConfig& cfg) {
  FeatureVector fv;
  fv.raw = raw_features(s, feas, f, cfg);
  fv.normalized = normalize(fv.raw, normalization_bounds(cfg, f));
  return fv;
}

}  // namespace sdd
