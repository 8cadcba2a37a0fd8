#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kv_config.hpp"
#include "random.hpp"

namespace sdd {

// Coordinate standard deviation applied to requests whose request time falls
// in [begin, end).
struct SigmaBand {
  Minutes begin = 0.0;
  Minutes end = 0.0;
  double sigma_km = 3.0;

  friend bool operator==(const SigmaBand&, const SigmaBand&) = default;
};

struct Geography {
  std::string name = "homogeneous";
  std::vector<SigmaBand> bands;

  static Geography homogeneous(double sigma_km, Minutes window_end) {
    return {"homogeneous", {{0.0, window_end, sigma_km}}};
  }

  // First and last two hours at 3 km, the three hours in between at 1 km.
  static Geography heterogeneous(Minutes window_end = 420.0, double outer_km = 3.0,
                                 double inner_km = 1.0) {
    return {"heterogeneous",
            {{0.0, 120.0, outer_km}, {120.0, 300.0, inner_km}, {300.0, window_end, outer_km}}};
  }

  double sigma_at(Minutes t) const {
    for (const auto& b : bands)
      if (t >= b.begin && t < b.end) return b.sigma_km;
    // t == window end belongs to the last band
    return bands.back().sigma_km;
  }

  double max_sigma() const {
    double s = 0.0;
    for (const auto& b : bands) s = std::max(s, b.sigma_km);
    return s;
  }

  friend bool operator==(const Geography&, const Geography&) = default;
};

struct InstanceConfig {
  Minutes order_window_end = 420.0;
  Minutes t_v_max = 480.0;
  Minutes t_d_max = 720.0;
  Minutes deadline_len = 240.0;
  Minutes load_vehicle = 3.0;
  Minutes load_drone = 3.0;
  Minutes service_vehicle = 3.0;
  Minutes service_drone = 3.0;
  Minutes charge_time = 20.0;
  double expected_requests = 500.0;
  int fleet_m = 3;
  int fleet_n = 10;
  Location depot{};
  Geography geography = Geography::homogeneous(3.0, 420.0);
  TravelModel travel{};
  std::uint64_t seed = 1;

  Minutes horizon() const { return std::max(t_v_max, t_d_max); }

  void validate() const {
    travel.validate();
    if (!(order_window_end > 0.0) || order_window_end > std::min(t_v_max, t_d_max))
      throw InvalidConfig("order window must end within both shifts");
    for (double d : {deadline_len, load_vehicle, load_drone, service_vehicle, service_drone,
                     charge_time})
      if (!(d >= 0.0)) throw InvalidConfig("durations must be non-negative");
    if (fleet_m < 0 || fleet_n < 0) throw InvalidConfig("fleet sizes must be non-negative");
    if (!(expected_requests >= 0.0)) throw InvalidConfig("expected_requests must be >= 0");
    if (geography.bands.empty()) throw InvalidConfig("geography has no sigma bands");
    Minutes cursor = 0.0;
    for (const auto& b : geography.bands) {
      if (b.begin != cursor || !(b.end > b.begin) || !(b.sigma_km >= 0.0))
        throw InvalidConfig("geography bands must partition [0, order_window_end)");
      cursor = b.end;
    }
    if (cursor != order_window_end)
      throw InvalidConfig("geography bands must partition [0, order_window_end)");
  }
};

struct CustomerRequest {
  int id = 0;
  Location location{};
  Minutes request_time = 0.0;
  Minutes deadline = 0.0;

  friend bool operator==(const CustomerRequest&, const CustomerRequest&) = default;
};

inline CustomerRequest make_request(int id, Location loc, Minutes t, const InstanceConfig& cfg) {
  return {id, loc, t, t + cfg.deadline_len};
}

struct SamplePath {
  std::string config_ref;
  std::vector<CustomerRequest> requests;

  friend bool operator==(const SamplePath&, const SamplePath&) = default;
};

inline SamplePath gen_sample_path(const InstanceConfig& cfg, std::uint64_t seed) {
  SamplePath path;
  path.config_ref = cfg.geography.name;
  if (cfg.expected_requests <= 0.0) return path;
  Rng rng(seed);
  std::exponential_distribution<double> gap(cfg.expected_requests / cfg.order_window_end);
  std::normal_distribution<double> unit(0.0, 1.0);
  Minutes t = 0.0;
  for (;;) {
    t += gap(rng);
    if (t > cfg.order_window_end) break;
    const double sigma = cfg.geography.sigma_at(t);
    const double x = cfg.depot.x_km + sigma * unit(rng);
    const double y = cfg.depot.y_km + sigma * unit(rng);
    path.requests.push_back(make_request(static_cast<int>(path.requests.size()), {x, y}, t, cfg));
  }
  return path;
}

// `count` paths with seeds derived from `base_seed`.
inline std::vector<SamplePath> gen_sample_paths(const InstanceConfig& cfg, std::size_t count,
                                                std::uint64_t base_seed) {
  std::vector<SamplePath> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(gen_sample_path(cfg, mix_seed(base_seed, i)));
  return out;
}

// ---------------------------------------------------------------------------
// Config file <-> InstanceConfig

inline Geography parse_geography(const std::string& name, double sigma_km,
                                 const std::string& bands, Minutes window_end) {
  if (!bands.empty()) {
    Geography g{name.empty() ? "custom" : name, {}};
    std::stringstream ss(bands);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto a = item.find(':');
      const auto b = item.find(':', a + 1);
      if (a == std::string::npos || b == std::string::npos)
        throw InvalidConfig("geography_bands entries are begin:end:sigma");
      g.bands.push_back({parse_double(trim(std::string_view(item).substr(0, a))),
                         parse_double(trim(std::string_view(item).substr(a + 1, b - a - 1))),
                         parse_double(trim(std::string_view(item).substr(b + 1)))});
    }
    return g;
  }
  if (name == "homogeneous") return Geography::homogeneous(sigma_km, window_end);
  if (name == "heterogeneous") return Geography::heterogeneous(window_end, sigma_km);
  throw InvalidConfig("unknown geography: " + name);
}

inline InstanceConfig instance_config_from(const KeyValueConfig& kv) {
  InstanceConfig c;
  c.order_window_end = kv.get_double("order_window_end", c.order_window_end);
  c.t_v_max = kv.get_double("t_v_max", c.t_v_max);
  c.t_d_max = kv.get_double("t_d_max", c.t_d_max);
  c.deadline_len = kv.get_double("deadline_len", c.deadline_len);
  c.load_vehicle = kv.get_double("load_vehicle", c.load_vehicle);
  c.load_drone = kv.get_double("load_drone", c.load_drone);
  c.service_vehicle = kv.get_double("service_vehicle", c.service_vehicle);
  c.service_drone = kv.get_double("service_drone", c.service_drone);
  c.charge_time = kv.get_double("charge_time", c.charge_time);
  c.expected_requests = kv.get_double("expected_requests", c.expected_requests);
  c.fleet_m = static_cast<int>(kv.get_int("fleet_m", c.fleet_m));
  c.fleet_n = static_cast<int>(kv.get_int("fleet_n", c.fleet_n));
  c.depot = {kv.get_double("depot_x", 0.0), kv.get_double("depot_y", 0.0)};
  c.travel.vehicle_speed_kmh = kv.get_double("vehicle_speed", c.travel.vehicle_speed_kmh);
  c.travel.drone_speed_kmh = kv.get_double("drone_speed", c.travel.drone_speed_kmh);
  c.travel.street_factor = kv.get_double("street_factor", c.travel.street_factor);
  c.travel.drone_round_up = kv.get_bool("drone_round_up", c.travel.drone_round_up);
  c.travel.vehicle_metric =
      parse_vehicle_metric(kv.get_string("vehicle_metric", to_string(c.travel.vehicle_metric)));
  c.geography = parse_geography(kv.get_string("geography", "homogeneous"),
                                kv.get_double("sigma_km", 3.0),
                                kv.get_string("geography_bands", ""), c.order_window_end);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

inline KeyValueConfig to_key_values(const InstanceConfig& c) {
  KeyValueConfig kv;
  kv.set("order_window_end", format_double(c.order_window_end));
  kv.set("t_v_max", format_double(c.t_v_max));
  kv.set("t_d_max", format_double(c.t_d_max));
  kv.set("deadline_len", format_double(c.deadline_len));
  kv.set("load_vehicle", format_double(c.load_vehicle));
  kv.set("load_drone", format_double(c.load_drone));
  kv.set("service_vehicle", format_double(c.service_vehicle));
  kv.set("service_drone", format_double(c.service_drone));
  kv.set("charge_time", format_double(c.charge_time));
  kv.set("expected_requests", format_double(c.expected_requests));
  kv.set("fleet_m", std::to_string(c.fleet_m));
  kv.set("fleet_n", std::to_string(c.fleet_n));
  kv.set("depot_x", format_double(c.depot.x_km));
  kv.set("depot_y", format_double(c.depot.y_km));
  kv.set("vehicle_speed", format_double(c.travel.vehicle_speed_kmh));
  kv.set("drone_speed", format_double(c.travel.drone_speed_kmh));
  kv.set("street_factor", format_double(c.travel.street_factor));
  kv.set("drone_round_up", c.travel.drone_round_up ? "true" : "false");
  kv.set("vehicle_metric", to_string(c.travel.vehicle_metric));
  kv.set("geography", c.geography.name);
  std::string bands;
  for (const auto& b : c.geography.bands) {
    if (!bands.empty()) bands += ",";
    bands += format_double(b.begin) + ":" + format_double(b.end) + ":" + format_double(b.sigma_km);
  }
  kv.set("geography_bands", bands);
  kv.set("seed", std::to_string(c.seed));
  return kv;
}

// ---------------------------------------------------------------------------
// Sample-path files
//
//   # sdd-paths 1
//   # <key> = <value>          (instance config, one entry per line)
//   path <index> <count>
//   <id> <request_time> <x_km> <y_km>
//   ...
//
// Numbers use the shortest round-trip decimal form, so a save/load cycle is
// bit-exact. Deadlines are not stored; they are re-derived from deadline_len.

inline constexpr int kPathFileVersion = 1;

struct PathFile {
  InstanceConfig config;
  std::vector<SamplePath> paths;
};

inline void write_paths(std::ostream& out, const InstanceConfig& cfg,
                        const std::vector<SamplePath>& paths) {
  out << "# sdd-paths " << kPathFileVersion << "\n";
  const KeyValueConfig kv = to_key_values(cfg);
  for (const auto& [k, v] : kv.entries()) out << "# " << k << " = " << v << "\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    out << "path " << i << " " << paths[i].requests.size() << "\n";
    for (const auto& r : paths[i].requests)
      out << r.id << " " << format_double(r.request_time) << " " << format_double(r.location.x_km)
          << " " << format_double(r.location.y_km) << "\n";
  }
}

inline PathFile read_paths(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty sample-path file");
  {
    std::istringstream hs(line);
    std::string hash, tag;
    int version = -1;
    hs >> hash >> tag >> version;
    if (hash != "#" || tag != "sdd-paths") throw IoError("not a sample-path file");
    if (version != kPathFileVersion)
      throw IoError("sample-path schema version " + std::to_string(version) + " unsupported");
  }
  KeyValueConfig kv;
  PathFile pf;
  bool config_done = false;
  SamplePath* current = nullptr;
  std::size_t remaining = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (config_done) continue;
      const auto body = trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      kv.set(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
      continue;
    }
    if (!config_done) {
      try {
        pf.config = instance_config_from(kv);
      } catch (const InvalidConfig& e) {
        throw IoError(std::string("sample-path header: ") + e.what());
      }
      config_done = true;
    }
    std::istringstream ls(line);
    if (line.rfind("path", 0) == 0) {
      if (remaining != 0) throw IoError("truncated path block");
      std::string tag;
      std::size_t idx = 0;
      ls >> tag >> idx >> remaining;
      if (!ls || idx != pf.paths.size()) throw IoError("malformed path header: " + line);
      pf.paths.push_back({pf.config.geography.name, {}});
      current = &pf.paths.back();
      current->requests.reserve(remaining);
      continue;
    }
    if (current == nullptr || remaining == 0) throw IoError("request outside a path block");
    std::string id, t, x, y;
    ls >> id >> t >> x >> y;
    if (!ls) throw IoError("malformed request line: " + line);
    try {
      current->requests.push_back(make_request(static_cast<int>(parse_int(id)),
                                               {parse_double(x), parse_double(y)},
                                               parse_double(t), pf.config));
    } catch (const InvalidConfig& e) {
      throw IoError(std::string("malformed request line: ") + e.what());
    }
    --remaining;
  }
  if (remaining != 0) throw IoError("truncated path block");
  if (!config_done) {
    try {
      pf.config = instance_config_from(kv);
    } catch (const InvalidConfig& e) {
      throw IoError(std::string("sample-path header: ") + e.what());
    }
  }
  return pf;
}

inline void save_paths(const std::string& file, const InstanceConfig& cfg,
                       const std::vector<SamplePath>& paths) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file);
  write_paths(out, cfg, paths);
  if (!out) throw IoError("write failed: " + file);
}

inline PathFile load_paths(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file);
  return read_paths(in);
}

}  // namespace sdd
