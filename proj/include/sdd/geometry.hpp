#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sdd {

// Minutes since the start of the shift.
using Minutes = double;

struct Location {
  double x_km = 0.0;
  double y_km = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

inline double euclid_km(const Location& a, const Location& b) {
  return std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
}

inline double manhattan_km(const Location& a, const Location& b) {
  return std::abs(a.x_km - b.x_km) + std::abs(a.y_km - b.y_km);
}

enum class VehicleMetric { euclidean, manhattan };

inline VehicleMetric parse_vehicle_metric(std::string_view s) {
  if (s == "euclidean") return VehicleMetric::euclidean;
  if (s == "manhattan") return VehicleMetric::manhattan;
  throw std::invalid_argument("unknown vehicle metric: " + std::string(s));
}

inline const char* to_string(VehicleMetric m) {
  return m == VehicleMetric::euclidean ? "euclidean" : "manhattan";
}

struct TravelModel {
  double vehicle_speed_kmh = 30.0;
  double drone_speed_kmh = 40.0;
  // Euclidean-to-street multiplier applied to vehicle distances.
  double street_factor = 1.5;
  // Round drone customer/depot arrival times up to whole minutes.
  bool drone_round_up = false;
  VehicleMetric vehicle_metric = VehicleMetric::euclidean;

  void validate() const {
    if (!(vehicle_speed_kmh > 0.0) || !(drone_speed_kmh > 0.0))
      throw std::invalid_argument("travel speeds must be positive");
    if (!(street_factor >= 1.0))
      throw std::invalid_argument("street_factor must be >= 1");
  }
};

inline Minutes vehicle_travel_time(const Location& a, const Location& b,
                                   const TravelModel& tm) {
  const double km = tm.vehicle_metric == VehicleMetric::euclidean
                        ? euclid_km(a, b)
                        : manhattan_km(a, b);
  return tm.street_factor * km / tm.vehicle_speed_kmh * 60.0;
}

inline Minutes drone_travel_time(const Location& a, const Location& b,
                                 const TravelModel& tm) {
  return euclid_km(a, b) / tm.drone_speed_kmh * 60.0;
}

// Applies the drone rounding rule to an event time. The small slack keeps
// exact integers (up to accumulated round-off) from being bumped up a minute.
inline Minutes drone_event_time(Minutes t, const TravelModel& tm) {
  if (!tm.drone_round_up) return t;
  return std::ceil(t - 1e-9);
}

}  // namespace sdd
