#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "sdd/sdd.hpp"

namespace sdd::testing {

// Six-customer day on a 1 km grid: vehicles drive Manhattan distances at
// 3 km/h (20 min per block), the drone flies at 6 km/h (10 min per km) and
// rounds event times up to whole minutes. One vehicle, one drone.
inline InstanceConfig grid_day_config() {
  InstanceConfig cfg;
  cfg.fleet_m = 1;
  cfg.fleet_n = 1;
  cfg.load_vehicle = cfg.load_drone = 10.0;
  cfg.service_vehicle = cfg.service_drone = 10.0;
  cfg.charge_time = 20.0;
  cfg.deadline_len = 240.0;
  cfg.travel.vehicle_speed_kmh = 3.0;
  cfg.travel.drone_speed_kmh = 6.0;
  cfg.travel.street_factor = 1.0;
  cfg.travel.vehicle_metric = VehicleMetric::manhattan;
  cfg.travel.drone_round_up = true;
  return cfg;
}

inline SamplePath grid_day_path(const InstanceConfig& cfg) {
  SamplePath p;
  p.config_ref = "grid-day";
  p.requests = {make_request(1, {0, 3}, 30, cfg),  make_request(2, {-1, 2}, 30, cfg),
                make_request(3, {-3, 2}, 30, cfg), make_request(4, {3, 2}, 50, cfg),
                make_request(5, {3, 0}, 55, cfg),  make_request(6, {2, 1}, 60, cfg)};
  return p;
}

// C1, C2 and C5 by vehicle, C3, C4 and C6 by drone.
inline Policy grid_day_script() {
  return [](const State& s, const FeasibilityPair&) {
    static const std::map<int, Alpha> plan{{1, Alpha::vehicle}, {2, Alpha::vehicle}, {3, Alpha::drone},
                                           {4, Alpha::drone},   {5, Alpha::vehicle}, {6, Alpha::drone}};
    return plan.at(s.request.id);
  };
}

// Pre-decision states of the scripted day, keyed by customer id, together
// with the final plans.
struct ReplayedDay {
  std::map<int, State> states;
  std::map<int, FeasibilityPair> feasibility;
  std::map<int, FleetPlans> post;
};

inline ReplayedDay replay_grid_day() {
  const auto cfg = grid_day_config();
  const auto path = grid_day_path(cfg);
  ReplayedDay out;
  const Policy script = grid_day_script();
  const CustomerBook book(path.requests);
  Policy recorder = [&](const State& s, const FeasibilityPair& f) {
    out.states[s.request.id] = s;
    out.feasibility[s.request.id] = f;
    const Alpha a = script(s, f);
    out.post[s.request.id] = apply_action(s, f, a).plans;
    return a;
  };
  run_episode(recorder, path, cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Independent insertion oracle. Times each candidate tour by walking it
// stop by stop and applies the selection rule literally: an idle vehicle if
// one exists and can take the customer, else the least completion-time
// increase with ties to the lowest vehicle and then the latest position.

struct OracleInsertion {
  std::size_t vehicle = 0;
  std::size_t position = 0;
  double delta = 0.0;
  std::vector<double> arrivals;
  double return_time = 0.0;
};

inline double oracle_vehicle_leg(const Location& a, const Location& b, const TravelModel& tm) {
  const double km = tm.vehicle_metric == VehicleMetric::manhattan
                        ? std::abs(a.x_km - b.x_km) + std::abs(a.y_km - b.y_km)
                        : std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
  return tm.street_factor * km / tm.vehicle_speed_kmh * 60.0;
}

inline std::optional<OracleInsertion> oracle_try(const VehiclePlan& plan, std::size_t v, std::size_t pos,
                                                 const CustomerRequest& c, const CustomerBook& book,
                                                 const InstanceConfig& cfg) {
  std::vector<CustomerRequest> tour;
  for (const auto& s : plan.customers) tour.push_back(book.at(s.customer_id));
  tour.insert(tour.begin() + static_cast<long>(pos), c);
  double clock = (plan.next.arrival > c.request_time ? plan.next.arrival : c.request_time) + cfg.load_vehicle;
  Location at = cfg.depot;
  OracleInsertion r{v, pos, 0.0, {}, 0.0};
  for (std::size_t i = 0; i < tour.size(); ++i) {
    if (i > 0) clock += cfg.service_vehicle;
    clock += oracle_vehicle_leg(at, tour[i].location, cfg.travel);
    if (clock > tour[i].deadline + 1e-9) return std::nullopt;
    r.arrivals.push_back(clock);
    at = tour[i].location;
  }
  r.return_time = clock + cfg.service_vehicle + oracle_vehicle_leg(at, cfg.depot, cfg.travel);
  if (r.return_time > cfg.t_v_max + 1e-9) return std::nullopt;
  double old_completion = plan.customers.empty() ? plan.next.arrival : plan.return_time;
  if (old_completion < c.request_time) old_completion = c.request_time;
  r.delta = r.return_time - old_completion;
  return r;
}

inline std::optional<OracleInsertion> oracle_best_insertion(const FleetPlans& plans, const CustomerRequest& c,
                                                            const CustomerBook& book, const InstanceConfig& cfg) {
  for (std::size_t v = 0; v < plans.vehicles.size(); ++v) {
    const auto& p = plans.vehicles[v];
    if (p.customers.empty() && p.next.arrival <= c.request_time) {
      if (auto r = oracle_try(p, v, 0, c, book, cfg)) return r;
      break;
    }
  }
  std::vector<OracleInsertion> all;
  for (std::size_t v = 0; v < plans.vehicles.size(); ++v)
    for (std::size_t pos = 0; pos <= plans.vehicles[v].customers.size(); ++pos)
      if (auto r = oracle_try(plans.vehicles[v], v, pos, c, book, cfg)) all.push_back(*r);
  if (all.empty()) return std::nullopt;
  OracleInsertion best = all.front();
  for (const auto& r : all) {
    const bool better = r.delta < best.delta ||
                        (r.delta == best.delta &&
                         (r.vehicle < best.vehicle || (r.vehicle == best.vehicle && r.position > best.position)));
    if (better) best = r;
  }
  return best;
}

// Random small state for insertion tests: up to `max_vehicles` vehicles and
// `max_pending` pending vehicle customers in total, plus one new request.
struct RandomInsertionCase {
  InstanceConfig cfg;
  std::vector<CustomerRequest> requests;
  FleetPlans plans;
  CustomerRequest request;
};

inline RandomInsertionCase random_insertion_case(Rng& rng, int max_vehicles = 3, int max_pending = 6) {
  RandomInsertionCase tc;
  tc.cfg.fleet_m = std::uniform_int_distribution<int>(1, max_vehicles)(rng);
  tc.cfg.fleet_n = 0;
  if (uniform01(rng) < 0.3) tc.cfg.travel.vehicle_metric = VehicleMetric::manhattan;
  std::uniform_real_distribution<double> coord(-6.0, 6.0);
  const double now = std::uniform_real_distribution<double>(0.0, 300.0)(rng);
  const int pending = std::uniform_int_distribution<int>(0, max_pending)(rng);
  tc.plans = initial_plans(tc.cfg);
  int id = 0;
  std::vector<std::vector<int>> tours(static_cast<std::size_t>(tc.cfg.fleet_m));
  for (int i = 0; i < pending; ++i) {
    const double t = std::uniform_real_distribution<double>(std::max(0.0, now - 120.0), now)(rng);
    tc.requests.push_back(make_request(id, {coord(rng), coord(rng)}, t, tc.cfg));
    tours[std::uniform_int_distribution<std::size_t>(0, tours.size() - 1)(rng)].push_back(id);
    ++id;
  }
  const CustomerBook book(tc.requests);
  for (std::size_t v = 0; v < tours.size(); ++v) {
    auto& p = tc.plans.vehicles[v];
    const double avail = uniform01(rng) < 0.3 ? std::uniform_real_distribution<double>(now - 60.0, now)(rng)
                                              : std::uniform_real_distribution<double>(now, now + 120.0)(rng);
    p.next = {std::max(0.0, avail), std::max(0.0, avail)};
    if (tours[v].empty()) {
      p.next.start = tc.cfg.t_v_max;
      p.return_time = p.next.arrival;
      continue;
    }
    const auto timed = time_vehicle_tour(p.next.arrival, tours[v], book, tc.cfg);
    p.customers = timed.stops;
    p.return_time = timed.return_time;
  }
  tc.request = make_request(id, {coord(rng), coord(rng)}, now, tc.cfg);
  tc.requests.push_back(tc.request);
  return tc;
}

// Pre-decision states collected from random-policy days on small fleets.
struct SampledState {
  State state;
  FeasibilityPair feasibility;
  InstanceConfig cfg;
  std::shared_ptr<const std::vector<CustomerRequest>> requests;  // the whole day
};

inline std::vector<SampledState> random_states(std::size_t count, std::uint64_t seed) {
  std::vector<SampledState> out;
  Rng rng(seed);
  std::uint64_t day = 0;
  while (out.size() < count) {
    InstanceConfig cfg;
    cfg.fleet_m = std::uniform_int_distribution<int>(1, 3)(rng);
    cfg.fleet_n = std::uniform_int_distribution<int>(1, 4)(rng);
    cfg.expected_requests = 150;
    cfg.travel.drone_round_up = uniform01(rng) < 0.5;
    const auto path = gen_sample_path(cfg, mix_seed(seed, ++day));
    const auto requests = std::make_shared<const std::vector<CustomerRequest>>(path.requests);
    const std::uint64_t pol_seed = mix_seed(seed, 1000000 + day);
    Policy collect = [&](const State& s, const FeasibilityPair& f) {
      if (out.size() < count && uniform01(rng) < 0.2) out.push_back({s, f, cfg, requests});
      return decide_random(s, f, pol_seed);
    };
    run_episode(collect, path, cfg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbations for the feasibility monotonicity properties. Delays are whole
// minutes so rounded drone times stay on the grid.

inline FleetPlans delay_vehicle(FleetPlans plans, std::size_t v, Minutes by, const InstanceConfig& cfg) {
  auto& p = plans.vehicles[v];
  p.next.arrival += by;
  if (p.customers.empty()) {
    p.next.start = std::max(cfg.t_v_max, p.next.arrival);
    p.return_time = p.next.arrival;
    return plans;
  }
  p.next.start += by;
  for (auto& c : p.customers) c.arrival += by;
  p.return_time += by;
  return plans;
}

inline FleetPlans delay_drone(FleetPlans plans, std::size_t d, Minutes by, const InstanceConfig& cfg) {
  auto& p = plans.drones[d];
  p.next.arrival += by;
  p.ready += by;
  if (p.trips.empty()) {
    p.next.start = std::max(cfg.t_d_max, p.next.arrival);
    return plans;
  }
  p.next.start += by;
  for (auto& t : p.trips) {
    t.customer.arrival += by;
    t.back.arrival += by;
    t.back.start += by;
  }
  p.trips.back().back.start = std::max(cfg.t_d_max, p.trips.back().back.arrival);
  return plans;
}

// The day's requests with `changed` substituted for the entry with its id.
inline std::vector<CustomerRequest> with_request(std::vector<CustomerRequest> requests,
                                                 const CustomerRequest& changed) {
  for (auto& r : requests)
    if (r.id == changed.id) r = changed;
  return requests;
}

enum class DelayKind { unit_availability, request_time_rederived_deadline, request_time_fixed_deadline };

struct MonotonicityCount {
  long long checked = 0;              // perturbations of an infeasible fleet
  long long vehicle_violations = 0;   // infeasible -> feasible
  long long drone_violations = 0;
  long long violations() const { return vehicle_violations + drone_violations; }
};

// Applies one random perturbation of `kind` to each sampled state and counts
// fleets that were infeasible before and feasible after.
inline MonotonicityCount check_delay_monotonicity(const std::vector<SampledState>& states, DelayKind kind,
                                                  std::uint64_t seed) {
  MonotonicityCount out;
  Rng rng(seed);
  std::uniform_int_distribution<int> minutes(1, 60);
  for (const auto& st : states) {
    const auto& cfg = st.cfg;
    const auto& f = st.feasibility;
    if (f.vehicle && f.drone) continue;
    const Minutes by = minutes(rng);
    State s = st.state;
    std::vector<CustomerRequest> requests = *st.requests;
    switch (kind) {
      case DelayKind::unit_availability: {
        const std::size_t units = s.plans.vehicles.size() + s.plans.drones.size();
        const std::size_t u = std::uniform_int_distribution<std::size_t>(0, units - 1)(rng);
        s.plans = u < s.plans.vehicles.size() ? delay_vehicle(s.plans, u, by, cfg)
                                              : delay_drone(s.plans, u - s.plans.vehicles.size(), by, cfg);
        break;
      }
      case DelayKind::request_time_rederived_deadline:
        s.request = make_request(s.request.id, s.request.location, s.request.request_time + by, cfg);
        s.t = s.request.request_time;
        requests = with_request(std::move(requests), s.request);
        break;
      case DelayKind::request_time_fixed_deadline:
        s.request.request_time += by;
        s.t = s.request.request_time;
        requests = with_request(std::move(requests), s.request);
        break;
    }
    const auto after = feasibility_check(s, CustomerBook(requests), cfg);
    if (!f.vehicle) {
      ++out.checked;
      if (after.vehicle) ++out.vehicle_violations;
    }
    if (!f.drone) {
      ++out.checked;
      if (after.drone) ++out.drone_violations;
    }
  }
  return out;
}

}  // namespace sdd::testing
