#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "instance.hpp"
#include "kv_config.hpp"
#include "routing.hpp"

namespace sdd {

enum class Alpha : int { deny = 0, vehicle = 1, drone = 2 };

inline int to_int(Alpha a) { return static_cast<int>(a); }

// Pre-decision state S_k = (t_k, C_k, Θ_k). Availabilities are clamped to t_k.
struct State {
  Minutes t = 0.0;
  CustomerRequest request;
  FleetPlans plans;
};

struct FeasibilityPair {
  std::optional<VehicleUpdate> vehicle;
  std::optional<DroneUpdate> drone;

  bool vehicle_feasible() const { return vehicle.has_value(); }
  bool drone_feasible() const { return drone.has_value(); }
  bool forced_denial() const { return !vehicle && !drone; }
  Minutes delta() const { return vehicle ? vehicle->delta : kInfeasibleDelta; }
};

class InconsistentAction : public std::logic_error {
 public:
  explicit InconsistentAction(const std::string& what) : std::logic_error(what) {}
};

// x_k = (α_k, Θ^x_V, Θ^x_D)
struct Action {
  Alpha alpha = Alpha::deny;
  FleetPlans plans;
};

inline FeasibilityPair feasibility_check(const State& s, const CustomerBook& book,
                                         const InstanceConfig& cfg) {
  return {best_vehicle_insertion(s.plans, s.request, book, cfg),
          drone_fifo_assignment(s.plans, s.request, cfg)};
}

// Builds the post-decision plans for `alpha` from the feasibility pair.
inline Action make_action(const State& s, const FeasibilityPair& feas, Alpha alpha) {
  Action a{alpha, s.plans};
  switch (alpha) {
    case Alpha::deny:
      break;
    case Alpha::vehicle:
      if (!feas.vehicle) throw InconsistentAction("vehicle assignment without a feasible insertion");
      a.plans.vehicles[feas.vehicle->vehicle] = feas.vehicle->plan;
      break;
    case Alpha::drone:
      if (!feas.drone) throw InconsistentAction("drone assignment without a feasible drone");
      a.plans.drones[feas.drone->drone] = feas.drone->plan;
      break;
  }
  return a;
}

struct Transition {
  FleetPlans plans;
  int reward = 0;
};

inline Transition apply_action(const State& s, const FeasibilityPair& feas, Alpha alpha) {
  Action a = make_action(s, feas, alpha);
  return {std::move(a.plans), alpha == Alpha::deny ? 0 : 1};
}

// A policy maps a pre-decision state and its feasibility pair to α. It is only
// consulted when at least one fleet is feasible.
using Policy = std::function<Alpha(const State&, const FeasibilityPair&)>;

struct DecisionRecord {
  Minutes t = 0.0;
  int customer_id = 0;
  Minutes dist_vehicle = 0.0;  // vehicle travel time depot -> customer
  Minutes delta = kInfeasibleDelta;
  bool vehicle_feasible = false;
  bool drone_feasible = false;
  Alpha alpha = Alpha::deny;
  int reward = 0;
};

struct EpisodeResult {
  int requests = 0;
  int served = 0;
  int forced_denials = 0;
  int policy_denials = 0;
  std::vector<DecisionRecord> decisions;
  // Customers as their tours departed (planned arrival = realized arrival).
  std::vector<Delivery> deliveries;
};

struct EpisodeOptions {
  // Re-validate every plan after each decision; throws std::logic_error on a
  // violation.
  bool check_invariants = false;
};

inline void check_plans(const FleetPlans& plans, const InstanceConfig& cfg, const CustomerBook& book) {
  for (const auto& v : plans.vehicles)
    if (!validate_vehicle_plan(v, cfg, book)) throw std::logic_error("vehicle plan invariant violated");
  for (const auto& d : plans.drones)
    if (!validate_drone_plan(d, cfg, book)) throw std::logic_error("drone plan invariant violated");
}

// Requests in (time, id) order; ties in time are processed by id.
inline std::vector<CustomerRequest> decision_order(const SamplePath& path) {
  std::vector<CustomerRequest> reqs = path.requests;
  std::stable_sort(reqs.begin(), reqs.end(), [](const auto& a, const auto& b) {
    return a.request_time < b.request_time || (a.request_time == b.request_time && a.id < b.id);
  });
  return reqs;
}

inline EpisodeResult run_episode(const Policy& policy, const SamplePath& path, const InstanceConfig& cfg,
                                 EpisodeOptions opts = {}) {
  EpisodeResult res;
  const CustomerBook book(path.requests);
  FleetPlans plans = initial_plans(cfg);
  Minutes now = 0.0;
  res.decisions.reserve(path.requests.size());
  for (const auto& req : decision_order(path)) {
    plans = advance_plans(std::move(plans), now, std::max(now, req.request_time), cfg, &res.deliveries);
    now = std::max(now, req.request_time);
    State s{now, req, std::move(plans)};
    const FeasibilityPair feas = feasibility_check(s, book, cfg);
    Alpha alpha = Alpha::deny;
    if (feas.forced_denial()) {
      ++res.forced_denials;
    } else {
      alpha = policy(s, feas);
      if (alpha == Alpha::deny) ++res.policy_denials;
    }
    Transition tr = apply_action(s, feas, alpha);
    res.served += tr.reward;
    res.decisions.push_back({now, req.id, vehicle_travel_time(cfg.depot, req.location, cfg.travel),
                             feas.delta(), feas.vehicle_feasible(), feas.drone_feasible(), alpha,
                             tr.reward});
    plans = std::move(tr.plans);
    if (opts.check_invariants) check_plans(plans, cfg, book);
  }
  res.requests = static_cast<int>(path.requests.size());
  plans = advance_plans(std::move(plans), now, std::max(now, cfg.horizon()), cfg, &res.deliveries);
  return res;
}

// Decision-log CSV: t_min,dist_vehicle_min,veh_feasible,drone_feasible,alpha
inline void write_decision_log(std::ostream& out, const std::vector<DecisionRecord>& log) {
  out << "t_min,dist_vehicle_min,veh_feasible,drone_feasible,alpha\n";
  for (const auto& d : log)
    out << format_double(d.t) << "," << format_double(d.dist_vehicle) << ","
        << (d.vehicle_feasible ? 1 : 0) << "," << (d.drone_feasible ? 1 : 0) << "," << to_int(d.alpha)
        << "\n";
}

}  // namespace sdd
