#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dqn.hpp"
#include "features.hpp"
#include "kv_config.hpp"
#include "random.hpp"
#include "simulator.hpp"

namespace sdd {

inline Minutes vehicle_distance(const State& s, const InstanceConfig& cfg) {
  return vehicle_travel_time(cfg.depot, s.request.location, cfg.travel);
}

// Threshold rule on vehicle travel time; feasible requests are always served.
inline Alpha decide_pfa(Minutes d_vehicle, const FeasibilityPair& feas, double tau) {
  if (feas.vehicle && feas.drone) return d_vehicle <= tau ? Alpha::vehicle : Alpha::drone;
  if (feas.vehicle) return Alpha::vehicle;
  if (feas.drone) return Alpha::drone;
  return Alpha::deny;
}

// Hard threshold: the designated fleet or nothing.
inline Alpha decide_pfa_rej(Minutes d_vehicle, const FeasibilityPair& feas, double tau) {
  if (d_vehicle <= tau) return feas.vehicle ? Alpha::vehicle : Alpha::deny;
  return feas.drone ? Alpha::drone : Alpha::deny;
}

inline Alpha decide_delta(const FeasibilityPair& feas, double delta) {
  if (feas.vehicle && feas.vehicle->delta < delta) return Alpha::vehicle;
  if (feas.drone) return Alpha::drone;
  return Alpha::deny;
}

inline Alpha decide_q(const NetworkBank& bank, std::span<const double> features, const FeasibilityPair& feas) {
  return choose_action(bank, features, feas, 0.0, nullptr).alpha;
}

// Single two-output net (vehicle, drone), only queried when both fleets are feasible.
inline Alpha decide_q_no_rej(const Mlp& net, std::span<const double> features, const FeasibilityPair& feas) {
  if (feas.vehicle && feas.drone) return argmax_lowest(net.forward(features)) == 0 ? Alpha::vehicle : Alpha::drone;
  if (feas.vehicle) return Alpha::vehicle;
  if (feas.drone) return Alpha::drone;
  return Alpha::deny;
}

inline Alpha decide_greedy_vehicle_first(const FeasibilityPair& feas) {
  if (feas.vehicle) return Alpha::vehicle;
  if (feas.drone) return Alpha::drone;
  return Alpha::deny;
}

// Uniform over {feasible fleets} ∪ {deny}. The draw is keyed on the request,
// so the policy is a pure function and safe to share across episodes.
inline Alpha decide_random(const State& s, const FeasibilityPair& feas, std::uint64_t seed) {
  std::vector<Alpha> options;
  if (feas.vehicle) options.push_back(Alpha::vehicle);
  if (feas.drone) options.push_back(Alpha::drone);
  if (options.empty()) return Alpha::deny;
  options.push_back(Alpha::deny);
  std::uint64_t tbits = 0;
  std::memcpy(&tbits, &s.t, sizeof tbits);
  Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(s.request.id)), tbits));
  return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
}

enum class PolicyKind { pfa, pfa_rej, delta, q, q_no_rej, random, greedy };

struct PolicySpec {
  PolicyKind kind = PolicyKind::pfa;
  std::map<std::string, std::string> params;

  double number(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : parse_double(it->second);
  }
  std::string text(const std::string& key) const {
    auto it = params.find(key);
    return it == params.end() ? std::string() : it->second;
  }
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::pfa: return "pfa";
    case PolicyKind::pfa_rej: return "pfa_rej";
    case PolicyKind::delta: return "delta";
    case PolicyKind::q: return "q";
    case PolicyKind::q_no_rej: return "q_no_rej";
    case PolicyKind::random: return "random";
    case PolicyKind::greedy: return "greedy";
  }
  return "?";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
  for (auto k : {PolicyKind::pfa, PolicyKind::pfa_rej, PolicyKind::delta, PolicyKind::q, PolicyKind::q_no_rej,
                 PolicyKind::random, PolicyKind::greedy})
    if (s == to_string(k)) return k;
  throw InvalidConfig("unknown policy: " + std::string(s));
}

// "name" or "name:key=value,key=value", e.g. pfa:tau=14 or q:checkpoint=bank.bin
inline PolicySpec parse_policy_spec(std::string_view text) {
  PolicySpec spec;
  const auto colon = text.find(':');
  spec.kind = parse_policy_kind(trim(text.substr(0, colon)));
  if (colon == std::string_view::npos) return spec;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig("policy parameter without '=': " + std::string(item));
    spec.params[std::string(trim(item.substr(0, eq)))] = std::string(trim(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return spec;
}

inline std::string to_string(const PolicySpec& spec) {
  std::string out = to_string(spec.kind);
  char sep = ':';
  for (const auto& [k, v] : spec.params) {
    out += sep + k + "=" + v;
    sep = ',';
  }
  return out;
}

// A policy plus whatever it needs to stay alive (trained weights).
struct PolicyHandle {
  std::string name;
  Policy policy;
  std::shared_ptr<const NetworkBank> bank;
};

inline void check_bank_matches(const NetworkBank& bank, const InstanceConfig& cfg) {
  if (bank.fleet_m != cfg.fleet_m || bank.fleet_n != cfg.fleet_n)
    throw InvalidConfig("checkpoint fleet (" + std::to_string(bank.fleet_m) + "," + std::to_string(bank.fleet_n) +
                        ") does not match configured fleet (" + std::to_string(cfg.fleet_m) + "," +
                        std::to_string(cfg.fleet_n) + ")");
}

inline PolicyHandle make_policy(std::shared_ptr<const NetworkBank> bank, const InstanceConfig& cfg,
                                std::string name) {
  check_bank_matches(*bank, cfg);
  PolicyHandle h{std::move(name), {}, bank};
  const NetworkBank* b = bank.get();
  if (b->allow_denial) {
    h.policy = [b, cfg](const State& s, const FeasibilityPair& feas) {
      return decide_q(*b, extract(s, feas, b->features, cfg).normalized, feas);
    };
  } else {
    h.policy = [b, cfg](const State& s, const FeasibilityPair& feas) {
      if (!(feas.vehicle && feas.drone)) return decide_greedy_vehicle_first(feas);
      return decide_q_no_rej(b->net(NetworkId::both).net, extract(s, feas, b->features, cfg).normalized, feas);
    };
  }
  return h;
}

inline PolicyHandle make_policy(const PolicySpec& spec, const InstanceConfig& cfg) {
  PolicyHandle h{to_string(spec), {}, nullptr};
  switch (spec.kind) {
    case PolicyKind::pfa: {
      const double tau = spec.number("tau", 0.0);
      h.policy = [tau, cfg](const State& s, const FeasibilityPair& f) {
        return decide_pfa(vehicle_distance(s, cfg), f, tau);
      };
      break;
    }
    case PolicyKind::pfa_rej: {
      const double tau = spec.number("tau", 0.0);
      h.policy = [tau, cfg](const State& s, const FeasibilityPair& f) {
        return decide_pfa_rej(vehicle_distance(s, cfg), f, tau);
      };
      break;
    }
    case PolicyKind::delta: {
      const double delta = spec.number("delta", 0.0);
      h.policy = [delta](const State&, const FeasibilityPair& f) { return decide_delta(f, delta); };
      break;
    }
    case PolicyKind::random: {
      const auto seed = static_cast<std::uint64_t>(spec.number("seed", 0.0));
      h.policy = [seed](const State& s, const FeasibilityPair& f) { return decide_random(s, f, seed); };
      break;
    }
    case PolicyKind::greedy:
      h.policy = [](const State&, const FeasibilityPair& f) { return decide_greedy_vehicle_first(f); };
      break;
    case PolicyKind::q:
    case PolicyKind::q_no_rej: {
      const std::string file = spec.text("checkpoint");
      if (file.empty()) throw InvalidConfig(std::string(to_string(spec.kind)) + " policy needs checkpoint=<file>");
      auto bank = std::make_shared<const NetworkBank>(load_bank(file));
      if ((spec.kind == PolicyKind::q_no_rej) == bank->allow_denial)
        throw InvalidConfig("checkpoint " + file + " was not trained for policy " + to_string(spec.kind));
      return make_policy(std::move(bank), cfg, h.name);
    }
  }
  return h;
}

struct TuneResult {
  double best = 0.0;
  double best_mean_served = 0.0;
  std::vector<std::pair<double, double>> scores;  // (threshold, mean served)
};

inline std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw InvalidConfig("threshold grid needs step > 0 and hi >= lo");
  std::vector<double> g;
  const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
  for (long long i = 0; i <= count; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

// Mean served on `paths` for every grid value; argmax, lowest value on ties.
inline TuneResult tune_threshold_by_enumeration(PolicyKind family, std::span<const double> grid,
                                                std::span<const SamplePath> paths, const InstanceConfig& cfg) {
  if (grid.empty()) throw std::invalid_argument("tune_threshold_by_enumeration: empty grid");
  if (paths.empty()) throw std::invalid_argument("tune_threshold_by_enumeration: empty path set");
  const char* key = nullptr;
  switch (family) {
    case PolicyKind::pfa:
    case PolicyKind::pfa_rej: key = "tau"; break;
    case PolicyKind::delta: key = "delta"; break;
    default: throw std::invalid_argument("tune_threshold_by_enumeration: family has no threshold");
  }
  TuneResult res;
  res.best_mean_served = -std::numeric_limits<double>::infinity();
  for (double v : grid) {
    PolicySpec spec{family, {{key, format_double(v)}}};
    const double score = mean_served(make_policy(spec, cfg).policy, paths, cfg);
    res.scores.emplace_back(v, score);
    if (score > res.best_mean_served || (score == res.best_mean_served && v < res.best)) {
      res.best = v;
      res.best_mean_served = score;
    }
  }
  return res;
}

}  // namespace sdd
