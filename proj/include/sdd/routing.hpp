#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "instance.hpp"
#include "kv_config.hpp"

namespace sdd {

// Δ_Vehicle reported when no vehicle can serve the request.
inline constexpr Minutes kInfeasibleDelta = 10000.0;

// Equality slack for recomputed event times.
inline constexpr double kTimeTol = 1e-6;

class UnknownCustomer : public std::out_of_range {
 public:
  explicit UnknownCustomer(int id)
      : std::out_of_range("unknown customer id " + std::to_string(id)) {}
};

// Id-indexed store of every request revealed so far in an episode.
class CustomerBook {
 public:
  CustomerBook() = default;
  explicit CustomerBook(std::span<const CustomerRequest> requests) {
    for (const auto& r : requests) add(r);
  }

  void add(const CustomerRequest& r) {
    if (r.id < 0) throw std::invalid_argument("negative customer id");
    const auto i = static_cast<std::size_t>(r.id);
    if (i >= slots_.size()) slots_.resize(i + 1);
    slots_[i] = r;
  }

  const CustomerRequest& at(int id) const {
    const auto i = static_cast<std::size_t>(id);
    if (id < 0 || i >= slots_.size() || !slots_[i]) throw UnknownCustomer(id);
    return *slots_[i];
  }

  bool contains(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < slots_.size() &&
           slots_[static_cast<std::size_t>(id)].has_value();
  }

 private:
  std::vector<std::optional<CustomerRequest>> slots_;
};

struct DepotStop {
  Minutes arrival = 0.0;  // a(N)
  Minutes start = 0.0;    // s(N): loading for the next tour begins

  friend bool operator==(const DepotStop&, const DepotStop&) = default;
};

struct CustomerStop {
  int customer_id = 0;
  Minutes arrival = 0.0;  // planned a(C)

  friend bool operator==(const CustomerStop&, const CustomerStop&) = default;
};

// ((N1, a -> s), (C1, a), ..., (Ch, a), (N2, a(N2) -> t_v_max))
struct VehiclePlan {
  DepotStop next;
  std::vector<CustomerStop> customers;  // assigned, not yet loaded
  Minutes return_time = 0.0;            // a(N2); equals next.arrival when empty

  bool empty() const { return customers.empty(); }
  Minutes availability() const { return next.arrival; }
  Minutes completion() const { return customers.empty() ? next.arrival : return_time; }

  friend bool operator==(const VehiclePlan&, const VehiclePlan&) = default;
};

struct DroneTrip {
  CustomerStop customer;
  DepotStop back;  // return to the depot; start is the following trip's load time

  friend bool operator==(const DroneTrip&, const DroneTrip&) = default;
};

// ((N1, a -> s), (C1, a), (N2, a -> s), ..., (N_-1, a -> t_d_max))
struct DronePlan {
  DepotStop next;
  // Earliest time loading may start at N1: a(N1) plus the charge time when
  // the drone is returning from a delivery.
  Minutes ready = 0.0;
  std::vector<DroneTrip> trips;

  bool empty() const { return trips.empty(); }
  Minutes availability() const { return next.arrival; }
  Minutes completion() const { return trips.empty() ? next.arrival : trips.back().back.arrival; }

  friend bool operator==(const DronePlan&, const DronePlan&) = default;
};

struct FleetPlans {
  std::vector<VehiclePlan> vehicles;
  std::vector<DronePlan> drones;

  // C^θ_V: customers assigned to vehicles and not yet loaded.
  std::vector<int> pending_vehicle_customers() const {
    std::vector<int> ids;
    for (const auto& v : vehicles)
      for (const auto& c : v.customers) ids.push_back(c.customer_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  std::vector<int> pending_drone_customers() const {
    std::vector<int> ids;
    for (const auto& d : drones)
      for (const auto& t : d.trips) ids.push_back(t.customer.customer_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  friend bool operator==(const FleetPlans&, const FleetPlans&) = default;
};

// Every unit at the depot at t=0 with nothing planned.
inline FleetPlans initial_plans(const InstanceConfig& cfg) {
  FleetPlans p;
  p.vehicles.assign(static_cast<std::size_t>(cfg.fleet_m),
                    VehiclePlan{{0.0, cfg.t_v_max}, {}, 0.0});
  p.drones.assign(static_cast<std::size_t>(cfg.fleet_n), DronePlan{{0.0, cfg.t_d_max}, 0.0, {}});
  return p;
}

// ---------------------------------------------------------------------------
// Tour timing

struct TimedTour {
  std::vector<CustomerStop> stops;
  Minutes return_time = 0.0;
};

// Times a vehicle tour that starts loading at `start` and visits `ids` in order.
inline TimedTour time_vehicle_tour(Minutes start, std::span<const int> ids,
                                   const CustomerBook& book, const InstanceConfig& cfg) {
  TimedTour tour;
  tour.stops.reserve(ids.size());
  Location here = cfg.depot;
  Minutes t = start + cfg.load_vehicle;
  bool first = true;
  for (int id : ids) {
    const auto& c = book.at(id);
    if (!first) t += cfg.service_vehicle;
    t += vehicle_travel_time(here, c.location, cfg.travel);
    tour.stops.push_back({id, t});
    here = c.location;
    first = false;
  }
  if (ids.empty()) {
    tour.return_time = start;
  } else {
    tour.return_time = t + cfg.service_vehicle + vehicle_travel_time(here, cfg.depot, cfg.travel);
  }
  return tour;
}

inline bool tour_meets_deadlines(const TimedTour& tour, const CustomerBook& book) {
  for (const auto& s : tour.stops)
    if (s.arrival > book.at(s.customer_id).deadline + 1e-9) return false;
  return true;
}

// Drone round trip loading at `start`: returns (a(C), a(N)).
inline std::pair<Minutes, Minutes> time_drone_trip(Minutes start, const CustomerRequest& c,
                                                   const InstanceConfig& cfg) {
  const Minutes fly = drone_travel_time(cfg.depot, c.location, cfg.travel);
  const Minutes at_customer = drone_event_time(start + cfg.load_drone + fly, cfg.travel);
  const Minutes back = drone_event_time(at_customer + cfg.service_drone + fly, cfg.travel);
  return {at_customer, back};
}

// ---------------------------------------------------------------------------
// Feasibility predicates

inline bool validate_vehicle_plan(const VehiclePlan& plan, const InstanceConfig& cfg,
                                  const CustomerBook& book) {
  const auto& n1 = plan.next;
  if (n1.start + kTimeTol < n1.arrival) return false;  // condition 3
  if (plan.customers.empty()) return true;
  std::vector<int> ids;
  ids.reserve(plan.customers.size());
  for (const auto& c : plan.customers) {
    const auto& req = book.at(c.customer_id);  // throws on unknown ids
    if (std::find(ids.begin(), ids.end(), c.customer_id) != ids.end()) return false;
    ids.push_back(c.customer_id);
    if (c.arrival > req.deadline + 1e-9) return false;  // condition 2
  }
  // Conditions 4 and 5: the recorded times equal travel plus loading/service.
  const TimedTour expect = time_vehicle_tour(n1.start, ids, book, cfg);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (std::abs(expect.stops[i].arrival - plan.customers[i].arrival) > kTimeTol) return false;
  if (std::abs(expect.return_time - plan.return_time) > kTimeTol) return false;
  return plan.return_time <= cfg.t_v_max + 1e-9;  // condition 6
}

inline bool validate_drone_plan(const DronePlan& plan, const InstanceConfig& cfg,
                                const CustomerBook& book) {
  if (plan.next.start + kTimeTol < plan.next.arrival) return false;
  if (plan.trips.empty()) return true;
  if (plan.next.start + kTimeTol < plan.ready) return false;
  Minutes load_at = plan.next.start;
  for (std::size_t i = 0; i < plan.trips.size(); ++i) {
    const auto& trip = plan.trips[i];
    const auto& req = book.at(trip.customer.customer_id);
    if (trip.customer.arrival > req.deadline + 1e-9) return false;
    const auto [at_c, back] = time_drone_trip(load_at, req, cfg);
    if (std::abs(at_c - trip.customer.arrival) > kTimeTol) return false;
    if (std::abs(back - trip.back.arrival) > kTimeTol) return false;
    if (i + 1 < plan.trips.size()) {
      // loading resumes only after the battery swap
      if (trip.back.start + kTimeTol < trip.back.arrival + cfg.charge_time) return false;
      load_at = trip.back.start;
    }
  }
  return plan.trips.back().back.arrival <= cfg.t_d_max + 1e-9;
}

// ---------------------------------------------------------------------------
// Flat stop sequences (debug dumps and structural checks)

struct RouteStop {
  enum class Kind { depot, customer } kind = Kind::depot;
  int customer_id = -1;
  Minutes arrival = 0.0;
  Minutes start = 0.0;  // depots only
};

inline std::vector<RouteStop> to_stops(const VehiclePlan& p, const InstanceConfig& cfg) {
  std::vector<RouteStop> out;
  out.push_back({RouteStop::Kind::depot, -1, p.next.arrival, p.next.start});
  if (p.customers.empty()) return out;
  for (const auto& c : p.customers) out.push_back({RouteStop::Kind::customer, c.customer_id, c.arrival, 0.0});
  out.push_back({RouteStop::Kind::depot, -1, p.return_time, std::max(cfg.t_v_max, p.return_time)});
  return out;
}

inline std::vector<RouteStop> to_stops(const DronePlan& p) {
  std::vector<RouteStop> out;
  out.push_back({RouteStop::Kind::depot, -1, p.next.arrival, p.next.start});
  for (const auto& t : p.trips) {
    out.push_back({RouteStop::Kind::customer, t.customer.customer_id, t.customer.arrival, 0.0});
    out.push_back({RouteStop::Kind::depot, -1, t.back.arrival, t.back.start});
  }
  return out;
}

// Rebuilds a drone plan from a flat sequence; nullopt unless the sequence
// alternates depot/customer and starts and ends at the depot.
inline std::optional<DronePlan> drone_plan_from_stops(std::span<const RouteStop> stops) {
  if (stops.empty() || stops.size() % 2 == 0) return std::nullopt;
  for (std::size_t i = 0; i < stops.size(); ++i) {
    const auto want = i % 2 == 0 ? RouteStop::Kind::depot : RouteStop::Kind::customer;
    if (stops[i].kind != want) return std::nullopt;
  }
  DronePlan p;
  p.next = {stops[0].arrival, stops[0].start};
  p.ready = stops[0].arrival;
  for (std::size_t i = 1; i < stops.size(); i += 2)
    p.trips.push_back({{stops[i].customer_id, stops[i].arrival},
                       {stops[i + 1].arrival, stops[i + 1].start}});
  return p;
}

// Structural check plus validate_drone_plan for a flat stop sequence.
inline bool validate_drone_route(std::span<const RouteStop> stops, const InstanceConfig& cfg,
                                 const CustomerBook& book, Minutes ready) {
  auto plan = drone_plan_from_stops(stops);
  if (!plan) return false;
  plan->ready = ready;
  return validate_drone_plan(*plan, cfg, book);
}

inline void dump_stops(std::ostream& out, std::span<const RouteStop> stops) {
  for (const auto& s : stops) {
    if (s.kind == RouteStop::Kind::depot)
      out << "  N a=" << format_double(s.arrival) << " s=" << format_double(s.start) << "\n";
    else
      out << "  C" << s.customer_id << " a=" << format_double(s.arrival) << "\n";
  }
}

// One stop per line, vehicles first; used by golden-file tests.
inline std::string dump_plans(const FleetPlans& plans, const InstanceConfig& cfg) {
  std::ostringstream out;
  for (std::size_t i = 0; i < plans.vehicles.size(); ++i) {
    out << "vehicle " << i << "\n";
    dump_stops(out, to_stops(plans.vehicles[i], cfg));
  }
  for (std::size_t i = 0; i < plans.drones.size(); ++i) {
    out << "drone " << i << "\n";
    dump_stops(out, to_stops(plans.drones[i]));
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Vehicle insertion

struct VehicleUpdate {
  std::size_t vehicle = 0;
  std::size_t position = 0;  // index of the new customer in the tour
  Minutes delta = 0.0;       // increase in the vehicle's tour completion time
  VehiclePlan plan;
};

// Physically at the depot with nothing planned.
inline bool vehicle_idle(const VehiclePlan& p, Minutes now) {
  return p.customers.empty() && p.next.arrival <= now;
}

// Plan obtained by inserting `c` at `position`; nullopt if it breaks a deadline
// or the shift end.
inline std::optional<VehicleUpdate> try_vehicle_insertion(const VehiclePlan& plan, std::size_t vehicle,
                                                          std::size_t position,
                                                          const CustomerRequest& c,
                                                          const CustomerBook& book,
                                                          const InstanceConfig& cfg) {
  std::vector<int> ids;
  ids.reserve(plan.customers.size() + 1);
  for (const auto& s : plan.customers) ids.push_back(s.customer_id);
  ids.insert(ids.begin() + static_cast<std::ptrdiff_t>(position), c.id);
  const Minutes start = std::max(plan.next.arrival, c.request_time);
  TimedTour tour = time_vehicle_tour(start, ids, book, cfg);
  if (tour.return_time > cfg.t_v_max + 1e-9 || !tour_meets_deadlines(tour, book)) return std::nullopt;
  VehicleUpdate u;
  u.vehicle = vehicle;
  u.position = position;
  u.plan.next = {start, start};
  u.plan.customers = std::move(tour.stops);
  u.plan.return_time = tour.return_time;
  u.delta = tour.return_time - std::max(plan.completion(), c.request_time);
  return u;
}

// Idle vehicle first (lowest index); otherwise the cheapest feasible insertion
// over every vehicle and position. Ties go to the lowest vehicle index, then
// to the latest position.
inline std::optional<VehicleUpdate> best_vehicle_insertion(const FleetPlans& plans,
                                                           const CustomerRequest& c,
                                                           const CustomerBook& book,
                                                           const InstanceConfig& cfg) {
  const Minutes now = c.request_time;
  for (std::size_t v = 0; v < plans.vehicles.size(); ++v) {
    if (!vehicle_idle(plans.vehicles[v], now)) continue;
    if (auto u = try_vehicle_insertion(plans.vehicles[v], v, 0, c, book, cfg)) return u;
    break;
  }
  std::optional<VehicleUpdate> best;
  for (std::size_t v = 0; v < plans.vehicles.size(); ++v) {
    const auto& plan = plans.vehicles[v];
    for (std::size_t pos = plan.customers.size() + 1; pos-- > 0;) {
      auto u = try_vehicle_insertion(plan, v, pos, c, book, cfg);
      if (u && (!best || u->delta < best->delta)) best = std::move(u);
    }
  }
  return best;
}

inline Minutes delta_vehicle(const FleetPlans& plans, const CustomerRequest& c,
                             const CustomerBook& book, const InstanceConfig& cfg) {
  const auto u = best_vehicle_insertion(plans, c, book, cfg);
  return u ? u->delta : kInfeasibleDelta;
}

// ---------------------------------------------------------------------------
// Drone FIFO assignment

struct DroneUpdate {
  std::size_t drone = 0;
  Minutes arrival = 0.0;  // planned a(C)
  DronePlan plan;
};

// Earliest time drone `p` could start loading a newly appended trip.
inline Minutes drone_next_load_time(const DronePlan& p, Minutes now, const InstanceConfig& cfg) {
  if (p.trips.empty()) return std::max({p.ready, p.next.arrival, now});
  return std::max(p.trips.back().back.arrival + cfg.charge_time, now);
}

inline bool drone_idle(const DronePlan& p, Minutes now) {
  return p.trips.empty() && std::max(p.ready, p.next.arrival) <= now;
}

inline std::optional<DroneUpdate> try_drone_append(const DronePlan& plan, std::size_t drone,
                                                   const CustomerRequest& c,
                                                   const InstanceConfig& cfg) {
  const Minutes load_at = drone_next_load_time(plan, c.request_time, cfg);
  const auto [at_c, back] = time_drone_trip(load_at, c, cfg);
  if (at_c > c.deadline + 1e-9 || back > cfg.t_d_max + 1e-9) return std::nullopt;
  DroneUpdate u{drone, at_c, plan};
  if (u.plan.trips.empty())
    u.plan.next.start = load_at;
  else
    u.plan.trips.back().back.start = load_at;
  u.plan.trips.push_back({{c.id, at_c}, {back, std::max(cfg.t_d_max, back)}});
  return u;
}

// Idle drones first, then earliest availability, ties by lowest index; the
// trip is appended after the drone's last planned depot stop.
inline std::optional<DroneUpdate> drone_fifo_assignment(const FleetPlans& plans,
                                                        const CustomerRequest& c,
                                                        const InstanceConfig& cfg) {
  const Minutes now = c.request_time;
  std::vector<std::size_t> order(plans.drones.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto key = [&](std::size_t i) {
    const auto& d = plans.drones[i];
    return std::pair{drone_idle(d, now) ? 0 : 1, drone_next_load_time(d, now, cfg)};
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  for (std::size_t i : order)
    if (auto u = try_drone_append(plans.drones[i], i, c, cfg)) return u;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Plan advancement between decision points

struct Delivery {
  enum class Fleet { vehicle, drone } fleet = Fleet::vehicle;
  std::size_t unit = 0;
  int customer_id = 0;
  Minutes arrival = 0.0;
  Minutes departed = 0.0;  // tour start time
};

// Moves plans from `from` to `to`: tours whose loading started before `to`
// leave the plan (their customers are reported in `departed`), and units
// waiting at the depot have a(N1) pulled up to `to`.
inline FleetPlans advance_plans(FleetPlans plans, Minutes from, Minutes to, const InstanceConfig& cfg,
                                std::vector<Delivery>* departed = nullptr) {
  if (to < from) throw std::invalid_argument("advance_plans: target time precedes current time");
  for (std::size_t v = 0; v < plans.vehicles.size(); ++v) {
    auto& p = plans.vehicles[v];
    if (!p.customers.empty() && p.next.start < to) {
      if (departed)
        for (const auto& c : p.customers)
          departed->push_back({Delivery::Fleet::vehicle, v, c.customer_id, c.arrival, p.next.start});
      p.next = {p.return_time, std::max(cfg.t_v_max, p.return_time)};
      p.customers.clear();
    }
    if (p.next.arrival < to && to <= p.next.start) p.next.arrival = to;
    if (p.customers.empty()) {
      p.next.arrival = std::max(p.next.arrival, to);
      p.next.start = std::max(cfg.t_v_max, p.next.arrival);
      p.return_time = p.next.arrival;
    }
  }
  for (std::size_t d = 0; d < plans.drones.size(); ++d) {
    auto& p = plans.drones[d];
    while (!p.trips.empty() && p.next.start < to) {
      const auto& trip = p.trips.front();
      if (departed)
        departed->push_back({Delivery::Fleet::drone, d, trip.customer.customer_id,
                             trip.customer.arrival, p.next.start});
      p.next = trip.back;
      p.ready = trip.back.arrival + cfg.charge_time;
      p.trips.erase(p.trips.begin());
    }
    if (p.trips.empty()) {
      p.next.arrival = std::max(p.next.arrival, to);
      p.next.start = std::max(cfg.t_d_max, p.next.arrival);
    } else if (p.next.arrival < to) {
      p.next.arrival = to;
    }
    p.ready = std::max(p.ready, p.next.arrival);
  }
  return plans;
}

}  // namespace sdd
