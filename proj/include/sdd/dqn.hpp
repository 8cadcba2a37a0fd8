#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "features.hpp"
#include "instance.hpp"
#include "kv_config.hpp"
#include "mlp.hpp"
#include "random.hpp"
#include "simulator.hpp"

namespace sdd {

// φ¹: vehicle feasible only, φ²: drone feasible only, φ³: both feasible.
enum class NetworkId : int { vehicle_only = 0, drone_only = 1, both = 2 };

inline constexpr std::size_t kNetworkCount = 3;

// With voluntary denial disabled φ³ has two outputs (vehicle, drone) and the
// single-fleet networks are never consulted.
inline std::size_t action_count(NetworkId id, bool allow_denial = true) {
  return id == NetworkId::both ? (allow_denial ? 3 : 2) : 2;
}

// Output layout: φ¹ (vehicle, deny), φ² (drone, deny), φ³ (vehicle, drone, deny).
inline Alpha alpha_for(NetworkId id, int action_index) {
  switch (id) {
    case NetworkId::vehicle_only: return action_index == 0 ? Alpha::vehicle : Alpha::deny;
    case NetworkId::drone_only: return action_index == 0 ? Alpha::drone : Alpha::deny;
    case NetworkId::both:
      return action_index == 0 ? Alpha::vehicle : action_index == 1 ? Alpha::drone : Alpha::deny;
  }
  return Alpha::deny;
}

inline std::optional<NetworkId> network_for(const FeasibilityPair& feas, bool allow_denial = true) {
  if (feas.vehicle && feas.drone) return NetworkId::both;
  if (!allow_denial) return std::nullopt;
  if (feas.vehicle) return NetworkId::vehicle_only;
  if (feas.drone) return NetworkId::drone_only;
  return std::nullopt;
}

struct Experience {
  std::vector<double> features;  // normalized
  NetworkId network = NetworkId::both;
  int action_index = 0;
  double return_to_go = 0.0;
};

// Fixed-capacity FIFO ring of experiences.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000) : capacity_(capacity) {}

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  void clear() {
    items_.clear();
    head_ = 0;
  }

  void push(Experience e) {
    if (capacity_ == 0) return;
    if (items_.size() < capacity_) {
      items_.push_back(std::move(e));
    } else {
      items_[head_] = std::move(e);
      head_ = (head_ + 1) % capacity_;
    }
  }

  // i-th oldest item.
  const Experience& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  // Uniform draw with replacement.
  const Experience& sample(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    return items_[pick(rng)];
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Experience> items_;
};

struct TrainingSchedule {
  std::uint64_t total_steps = 400000;
  std::size_t minibatch = 5000;
  std::size_t buffer_capacity = 50000;
  double eps_start = 1.0;
  double eps_end = 0.01;
  double eps_decay_fraction = 0.8;  // ε reaches eps_end at this share of total_steps
  std::uint64_t eval_interval = 100;
  std::size_t eval_paths = 50;
  std::size_t train_paths = 500;
  // false: each update sees only the newest episode's experiences
  bool replay = true;
  // false trains the no-rejection variant: denial only when forced
  bool allow_denial = true;
  std::size_t hidden_layers = 2;
  std::size_t hidden_nodes = 0;  // 0 -> 10 * number of vehicles
  LearningRateSchedule lr{};
};

inline TrainingSchedule training_schedule_from(const KeyValueConfig& kv) {
  TrainingSchedule s;
  s.total_steps = static_cast<std::uint64_t>(kv.get_int("total_steps", static_cast<long long>(s.total_steps)));
  s.minibatch = static_cast<std::size_t>(kv.get_int("minibatch", static_cast<long long>(s.minibatch)));
  s.buffer_capacity =
      static_cast<std::size_t>(kv.get_int("buffer_capacity", static_cast<long long>(s.buffer_capacity)));
  s.eps_start = kv.get_double("eps_start", s.eps_start);
  s.eps_end = kv.get_double("eps_end", s.eps_end);
  s.eps_decay_fraction = kv.get_double("eps_decay_fraction", s.eps_decay_fraction);
  s.eval_interval = static_cast<std::uint64_t>(kv.get_int("eval_interval", static_cast<long long>(s.eval_interval)));
  s.eval_paths = static_cast<std::size_t>(kv.get_int("eval_paths", static_cast<long long>(s.eval_paths)));
  s.train_paths = static_cast<std::size_t>(kv.get_int("train_paths", static_cast<long long>(s.train_paths)));
  s.replay = kv.get_bool("replay", s.replay);
  s.allow_denial = kv.get_bool("allow_denial", s.allow_denial);
  s.hidden_layers = static_cast<std::size_t>(kv.get_int("hidden_layers", static_cast<long long>(s.hidden_layers)));
  s.hidden_nodes = static_cast<std::size_t>(kv.get_int("hidden_nodes", static_cast<long long>(s.hidden_nodes)));
  s.lr.initial = kv.get_double("lr_initial", s.lr.initial);
  s.lr.base = kv.get_double("lr_base", s.lr.base);
  s.lr.period = kv.get_double("lr_period", s.lr.period);
  if (s.minibatch > s.buffer_capacity && s.replay)
    throw InvalidConfig("minibatch must not exceed buffer_capacity");
  if (!(s.eps_end <= s.eps_start)) throw InvalidConfig("eps_end must not exceed eps_start");
  if (s.eval_interval == 0) throw InvalidConfig("eval_interval must be positive");
  return s;
}

// Linear from eps_start to eps_end over the first eps_decay_fraction of the
// budget, constant afterwards.
inline double eps_at(std::uint64_t step, const TrainingSchedule& s) {
  const double horizon = s.eps_decay_fraction * static_cast<double>(s.total_steps);
  if (horizon <= 0.0) return s.eps_end;
  const double frac = std::min(1.0, static_cast<double>(step) / horizon);
  return s.eps_start + (s.eps_end - s.eps_start) * frac;
}

struct NetworkBank {
  FeatureSet features = FeatureSet::full;
  int fleet_m = 0;
  int fleet_n = 0;
  bool allow_denial = true;
  std::array<TrainableNet, kNetworkCount> nets;
  std::array<ReplayBuffer, kNetworkCount> buffers{ReplayBuffer{}, ReplayBuffer{}, ReplayBuffer{}};

  TrainableNet& net(NetworkId id) { return nets[static_cast<std::size_t>(id)]; }
  const TrainableNet& net(NetworkId id) const { return nets[static_cast<std::size_t>(id)]; }
  ReplayBuffer& buffer(NetworkId id) { return buffers[static_cast<std::size_t>(id)]; }
  const ReplayBuffer& buffer(NetworkId id) const { return buffers[static_cast<std::size_t>(id)]; }
};

inline NetworkBank make_bank(const InstanceConfig& cfg, FeatureSet features, const TrainingSchedule& s,
                             Rng& rng) {
  NetworkBank bank;
  bank.features = features;
  bank.fleet_m = cfg.fleet_m;
  bank.fleet_n = cfg.fleet_n;
  bank.allow_denial = s.allow_denial;
  const std::size_t in = feature_dimension(features, cfg.fleet_m, cfg.fleet_n);
  const std::size_t hidden =
      s.hidden_nodes ? s.hidden_nodes : static_cast<std::size_t>(std::max(1, 10 * cfg.fleet_m));
  for (std::size_t k = 0; k < kNetworkCount; ++k) {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), s.hidden_layers, hidden);
    dims.push_back(action_count(static_cast<NetworkId>(k), s.allow_denial));
    bank.nets[k] = TrainableNet(Mlp::he_init(std::move(dims), rng));
    bank.buffers[k] = ReplayBuffer(s.buffer_capacity);
  }
  return bank;
}

struct ChosenAction {
  Alpha alpha = Alpha::deny;
  int action_index = -1;
  std::optional<NetworkId> network;  // empty for forced denials
};

inline int argmax_lowest(std::span<const double> q) {
  int best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// ε-greedy over the network selected by the feasibility pattern. No network
// is consulted (and no randomness drawn) for a forced denial, or, without
// voluntary denial, when only one fleet is feasible.
inline ChosenAction choose_action(const NetworkBank& bank, std::span<const double> features,
                                  const FeasibilityPair& feas, double eps, Rng* rng) {
  const auto id = network_for(feas, bank.allow_denial);
  if (!id) {
    ChosenAction c;
    c.alpha = feas.vehicle ? Alpha::vehicle : feas.drone ? Alpha::drone : Alpha::deny;
    return c;
  }
  ChosenAction c;
  c.network = id;
  const auto n_actions = action_count(*id, bank.allow_denial);
  if (eps > 0.0 && rng != nullptr && uniform01(*rng) < eps) {
    c.action_index = std::uniform_int_distribution<int>(0, static_cast<int>(n_actions) - 1)(*rng);
  } else {
    c.action_index = argmax_lowest(bank.net(*id).net.forward(features));
  }
  c.alpha = alpha_for(*id, c.action_index);
  return c;
}

// One decision as seen by the learner, before the episode's returns are known.
struct DecisionSample {
  std::vector<double> features;
  std::optional<NetworkId> network;  // empty: forced denial
  int action_index = -1;
  int reward = 0;
};

// R_SA for decision k is the reward collected at decisions k..K. Decisions
// made without a network (forced denials) carry no experience.
inline std::vector<Experience> finalize_episode_returns(const std::vector<DecisionSample>& decisions) {
  std::vector<double> to_go(decisions.size() + 1, 0.0);
  for (std::size_t k = decisions.size(); k-- > 0;) to_go[k] = to_go[k + 1] + decisions[k].reward;
  std::vector<Experience> out;
  out.reserve(decisions.size());
  for (std::size_t k = 0; k < decisions.size(); ++k) {
    if (!decisions[k].network) continue;
    out.push_back({decisions[k].features, *decisions[k].network, decisions[k].action_index, to_go[k]});
  }
  return out;
}

using NetworkLosses = std::array<std::optional<double>, kNetworkCount>;

// Routes experiences to their buffers, then applies one Adam step per
// network with a non-empty buffer on a uniform minibatch (with replacement).
inline NetworkLosses train_step(NetworkBank& bank, std::vector<Experience> fresh, const TrainingSchedule& s,
                                std::uint64_t step, Rng& rng) {
  if (!s.replay)
    for (auto& b : bank.buffers) b.clear();
  for (auto& e : fresh) bank.buffer(e.network).push(std::move(e));
  NetworkLosses losses;
  const double lr = s.lr.at(step);
  for (std::size_t k = 0; k < kNetworkCount; ++k) {
    const auto& buf = bank.buffers[k];
    if (buf.empty()) continue;
    auto& tn = bank.nets[k];
    TrainBatch batch;
    batch.input_dim = tn.net.input_dim();
    const std::size_t n = s.replay ? std::min(s.minibatch, buf.size()) : buf.size();
    batch.inputs.reserve(n * batch.input_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const Experience& e = s.replay ? buf.sample(rng) : buf.at(i);
      batch.add(e.features, e.action_index, e.return_to_go);
    }
    GradientResult g = gradient(tn.net, batch);
    adam_step(tn.net.params(), tn.adam, g.grads, lr);
    losses[k] = g.loss;
  }
  return losses;
}

// Greedy (ε = 0) dispatch policy backed by the bank.
inline Policy greedy_policy(const NetworkBank& bank, const InstanceConfig& cfg) {
  return [&bank, &cfg](const State& s, const FeasibilityPair& feas) {
    const auto fv = extract(s, feas, bank.features, cfg);
    return choose_action(bank, fv.normalized, feas, 0.0, nullptr).alpha;
  };
}

inline double mean_served(const Policy& policy, std::span<const SamplePath> paths, const InstanceConfig& cfg) {
  if (paths.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : paths) total += run_episode(policy, p, cfg).served;
  return total / static_cast<double>(paths.size());
}

struct CurvePoint {
  std::uint64_t step = 0;
  double eval_mean_served = 0.0;
  NetworkLosses losses;
};

struct TrainingResult {
  NetworkBank final_bank;
  NetworkBank best_bank;
  double best_eval = -1.0;
  std::vector<CurvePoint> curve;
};

inline TrainingResult training_run(const InstanceConfig& cfg, std::span<const SamplePath> train_paths,
                                   std::span<const SamplePath> eval_paths, const TrainingSchedule& s,
                                   FeatureSet features, std::uint64_t seed) {
  if (train_paths.empty()) throw std::invalid_argument("training_run: empty path set");
  Rng init_rng(mix_seed(seed, 1)), path_rng(mix_seed(seed, 2)), explore_rng(mix_seed(seed, 3)),
      batch_rng(mix_seed(seed, 4));
  TrainingResult res;
  res.final_bank = make_bank(cfg, features, s, init_rng);
  NetworkBank& bank = res.final_bank;
  std::uniform_int_distribution<std::size_t> pick(0, train_paths.size() - 1);
  std::vector<DecisionSample> samples;
  for (std::uint64_t step = 0; step < s.total_steps; ++step) {
    const SamplePath& path = train_paths[pick(path_rng)];
    const double eps = eps_at(step, s);
    samples.clear();
    Policy explore = [&](const State& st, const FeasibilityPair& feas) {
      auto fv = extract(st, feas, bank.features, cfg);
      const ChosenAction c = choose_action(bank, fv.normalized, feas, eps, &explore_rng);
      samples.push_back({std::move(fv.normalized), c.network, c.action_index, c.alpha == Alpha::deny ? 0 : 1});
      return c.alpha;
    };
    // forced denials never reach the policy; they add nothing to returns
    run_episode(explore, path, cfg);
    const NetworkLosses losses = train_step(bank, finalize_episode_returns(samples), s, step, batch_rng);
    if ((step + 1) % s.eval_interval == 0 && !eval_paths.empty()) {
      const double score = mean_served(greedy_policy(bank, cfg), eval_paths, cfg);
      res.curve.push_back({step + 1, score, losses});
      if (score > res.best_eval) {
        res.best_eval = score;
        res.best_bank = bank;
      }
    }
  }
  if (res.best_eval < 0.0) res.best_bank = bank;
  for (auto& b : res.best_bank.buffers) b.clear();
  return res;
}

// Learning-curve CSV: step,eval_mean_served,loss_phi1,loss_phi2,loss_phi3
// (an empty loss field means that network had no data at that step).
inline void write_learning_curve(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "step,eval_mean_served,loss_phi1,loss_phi2,loss_phi3\n";
  for (const auto& p : curve) {
    out << p.step << "," << format_double(p.eval_mean_served);
    for (const auto& l : p.losses) out << "," << (l ? format_double(*l) : std::string());
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: "SDDBANK1", u32 version, u32 m, u32 n, u32 feature set,
// u32 allow_denial, then the three model payloads (φ¹, φ², φ³). Replay
// buffers are not stored.

inline constexpr char kBankMagic[8] = {'S', 'D', 'D', 'B', 'A', 'N', 'K', '1'};
inline constexpr std::uint32_t kBankVersion = 1;

inline std::vector<std::uint8_t> serialize_bank(const NetworkBank& bank) {
  std::vector<std::uint8_t> out(std::begin(kBankMagic), std::end(kBankMagic));
  detail::put_u32(out, kBankVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(bank.fleet_m));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.fleet_n));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.features));
  detail::put_u32(out, bank.allow_denial ? 1u : 0u);
  for (const auto& n : bank.nets) serialize_into(out, n);
  return out;
}

inline NetworkBank deserialize_bank(std::span<const std::uint8_t> bytes) {
  detail::ByteReader rd(bytes);
  char magic[8];
  rd.bytes(magic, 8);
  if (std::memcmp(magic, kBankMagic, 8) != 0) throw IoError("not a checkpoint (bad magic)");
  const auto version = rd.u32();
  if (version != kBankVersion) throw IoError("checkpoint version " + std::to_string(version) + " unsupported");
  NetworkBank bank;
  bank.fleet_m = static_cast<int>(rd.u32());
  bank.fleet_n = static_cast<int>(rd.u32());
  const auto fs = rd.u32();
  if (fs > static_cast<std::uint32_t>(FeatureSet::distance_only)) throw IoError("corrupt checkpoint: feature set");
  bank.features = static_cast<FeatureSet>(fs);
  const auto deny = rd.u32();
  if (deny > 1) throw IoError("corrupt checkpoint: denial flag");
  bank.allow_denial = deny == 1;
  const std::size_t in = feature_dimension(bank.features, bank.fleet_m, bank.fleet_n);
  for (std::size_t k = 0; k < kNetworkCount; ++k) {
    bank.nets[k] = deserialize_from(rd);
    const auto& net = bank.nets[k].net;
    if (net.input_dim() != in || net.output_dim() != action_count(static_cast<NetworkId>(k), bank.allow_denial))
      throw IoError("corrupt checkpoint: network shape does not match fleet/features");
  }
  if (rd.position() != bytes.size()) throw IoError("corrupt checkpoint: trailing bytes");
  return bank;
}

inline void save_bank(const std::string& file, const NetworkBank& bank) {
  const auto bytes = serialize_bank(bank);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + file);
}

inline NetworkBank load_bank(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bank(bytes);
}

}  // namespace sdd
