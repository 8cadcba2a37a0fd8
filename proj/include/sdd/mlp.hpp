#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace sdd {

class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

// Fully connected network: ReLU on every hidden layer, linear output.
// Parameters live in one flat vector; layer l stores its weight matrix
// (out x in, row-major) followed by its bias vector.
class Mlp {
 public:
  Mlp() = default;

  // All parameters zero.
  explicit Mlp(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("an MLP needs at least input and output dims");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(n);
      n += dims_[l] * dims_[l + 1] + dims_[l + 1];
    }
    params_.assign(n, 0.0);
  }

  // He initialization: zero biases, N(0, 2/fan_in) weights.
  static Mlp he_init(std::vector<std::size_t> dims, Rng& rng) {
    Mlp net(std::move(dims));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      std::normal_distribution<double> w(0.0, std::sqrt(2.0 / static_cast<double>(net.dims_[l])));
      double* W = net.weights(l);
      for (std::size_t i = 0; i < net.dims_[l] * net.dims_[l + 1]; ++i) W[i] = w(rng);
    }
    return net;
  }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return dims_.size() - 1; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double* weights(std::size_t l) { return params_.data() + offsets_[l]; }
  const double* weights(std::size_t l) const { return params_.data() + offsets_[l]; }
  double* bias(std::size_t l) { return weights(l) + dims_[l] * dims_[l + 1]; }
  const double* bias(std::size_t l) const { return weights(l) + dims_[l] * dims_[l + 1]; }
  std::size_t offset(std::size_t l) const { return offsets_[l]; }

  std::vector<double> forward(std::span<const double> x) const {
    if (x.size() != input_dim())
      throw DimensionMismatch("forward: expected " + std::to_string(input_dim()) + " inputs, got " +
                              std::to_string(x.size()));
    std::vector<double> cur(x.begin(), x.end()), next;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      affine(l, cur, next);
      if (l + 1 < layer_count())
        for (double& v : next) v = std::max(v, 0.0);
      cur.swap(next);
    }
    return cur;
  }

  // next = W_l * in + b_l
  void affine(std::size_t l, std::span<const double> in, std::vector<double>& next) const {
    const std::size_t ni = dims_[l], no = dims_[l + 1];
    const double* W = weights(l);
    const double* b = bias(l);
    next.resize(no);
    for (std::size_t o = 0; o < no; ++o) {
      double acc = b[o];
      const double* row = W + o * ni;
      for (std::size_t i = 0; i < ni; ++i) acc += row[i] * in[i];
      next[o] = acc;
    }
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Rows of features with one regression target on one output each.
struct TrainBatch {
  std::size_t input_dim = 0;
  std::vector<double> inputs;  // rows x input_dim
  std::vector<int> actions;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }

  void add(std::span<const double> x, int action, double target) {
    if (x.size() != input_dim) throw DimensionMismatch("batch row has the wrong width");
    inputs.insert(inputs.end(), x.begin(), x.end());
    actions.push_back(action);
    targets.push_back(target);
  }
};

struct GradientResult {
  std::vector<double> grads;  // same layout as Mlp::params()
  double loss = 0.0;
};

// Mean squared error on the taken action's output only; the other outputs
// receive no gradient.
inline GradientResult gradient(const Mlp& net, const TrainBatch& batch) {
  if (batch.input_dim != net.input_dim()) throw DimensionMismatch("batch width differs from network input");
  if (batch.inputs.size() != batch.size() * batch.input_dim || batch.actions.size() != batch.size())
    throw DimensionMismatch("batch row counts differ");
  GradientResult res;
  res.grads.assign(net.params().size(), 0.0);
  const std::size_t B = batch.size();
  if (B == 0) return res;
  const std::size_t L = net.layer_count();
  const auto& dims = net.dims();
  std::vector<std::vector<double>> act(L + 1);  // act[0] input, act[l+1] post-activation
  std::vector<double> delta, prev_delta;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t r = 0; r < B; ++r) {
    const std::span<const double> x(batch.inputs.data() + r * batch.input_dim, batch.input_dim);
    act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < L; ++l) {
      net.affine(l, act[l], act[l + 1]);
      if (l + 1 < L)
        for (double& v : act[l + 1]) v = std::max(v, 0.0);
    }
    const int a = batch.actions[r];
    if (a < 0 || static_cast<std::size_t>(a) >= net.output_dim())
      throw DimensionMismatch("action index outside the network's outputs");
    const double err = act[L][static_cast<std::size_t>(a)] - batch.targets[r];
    res.loss += err * err * inv_b;
    delta.assign(dims[L], 0.0);
    delta[static_cast<std::size_t>(a)] = 2.0 * err * inv_b;
    for (std::size_t l = L; l-- > 0;) {
      const std::size_t ni = dims[l], no = dims[l + 1];
      double* gW = res.grads.data() + net.offset(l);
      double* gb = gW + ni * no;
      const auto& in = act[l];
      for (std::size_t o = 0; o < no; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* row = gW + o * ni;
        for (std::size_t i = 0; i < ni; ++i) row[i] += d * in[i];
      }
      if (l == 0) break;
      prev_delta.assign(ni, 0.0);
      const double* W = net.weights(l);
      for (std::size_t o = 0; o < no; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = W + o * ni;
        for (std::size_t i = 0; i < ni; ++i) prev_delta[i] += d * row[i];
      }
      for (std::size_t i = 0; i < ni; ++i)
        if (in[i] <= 0.0) prev_delta[i] = 0.0;  // ReLU
      delta.swap(prev_delta);
    }
  }
  return res;
}

inline double batch_loss(const Mlp& net, const TrainBatch& batch) {
  double loss = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto q = net.forward({batch.inputs.data() + r * batch.input_dim, batch.input_dim});
    const double err = q[static_cast<std::size_t>(batch.actions[r])] - batch.targets[r];
    loss += err * err;
  }
  return batch.size() ? loss / static_cast<double>(batch.size()) : 0.0;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update in place.
inline void adam_step(std::span<double> params, AdamState& st, std::span<const double> grads, double lr) {
  if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw DimensionMismatch("adam_step: shape mismatch");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

// 0.01 * 0.96^(step / 6000), continuous exponent.
struct LearningRateSchedule {
  double initial = 0.01;
  double base = 0.96;
  double period = 6000.0;

  double at(std::uint64_t step) const {
    return initial * std::pow(base, static_cast<double>(step) / period);
  }
};

inline double lr_at(std::uint64_t step) { return LearningRateSchedule{}.at(step); }

// A network together with its optimizer state.
struct TrainableNet {
  Mlp net;
  AdamState adam;

  TrainableNet() = default;
  explicit TrainableNet(Mlp n) : net(std::move(n)), adam(net.params().size()) {}

  friend bool operator==(const TrainableNet&, const TrainableNet&) = default;
};

// ---------------------------------------------------------------------------
// Model files
//
//   bytes 0-7   magic "SDDMLP01"
//   u32         format version (1)
//   u32         number of layer dims D
//   u32 x D     layer dims (input ... output)
//   u64         Adam step counter
//   f64 x 3     beta1, beta2, eps
//   u64         parameter count P
//   f64 x P     parameters
//   f64 x P     Adam first moments
//   f64 x P     Adam second moments
//
// Integers and IEEE-754 doubles are little-endian.

inline constexpr char kModelMagic[8] = {'S', 'D', 'D', 'M', 'L', 'P', '0', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  void bytes(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw IoError("model payload truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void serialize_into(std::vector<std::uint8_t>& out, const TrainableNet& t) {
  out.insert(out.end(), std::begin(kModelMagic), std::end(kModelMagic));
  detail::put_u32(out, kModelVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(t.net.dims().size()));
  for (auto d : t.net.dims()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  detail::put_u64(out, t.adam.step);
  detail::put_f64(out, t.adam.beta1);
  detail::put_f64(out, t.adam.beta2);
  detail::put_f64(out, t.adam.eps);
  const auto p = t.net.params();
  detail::put_u64(out, p.size());
  for (double d : p) detail::put_f64(out, d);
  for (double d : t.adam.m) detail::put_f64(out, d);
  for (double d : t.adam.v) detail::put_f64(out, d);
}

inline std::vector<std::uint8_t> serialize(const TrainableNet& t) {
  std::vector<std::uint8_t> out;
  serialize_into(out, t);
  return out;
}

inline TrainableNet deserialize_from(detail::ByteReader& rd) {
  char magic[8];
  rd.bytes(magic, 8);
  if (std::memcmp(magic, kModelMagic, 8) != 0) throw IoError("not a model payload (bad magic)");
  const std::uint32_t version = rd.u32();
  if (version != kModelVersion) throw IoError("model format version " + std::to_string(version) + " unsupported");
  const std::uint32_t nd = rd.u32();
  if (nd < 2 || nd > 64) throw IoError("corrupt model payload: layer count");
  std::vector<std::size_t> dims(nd);
  for (auto& d : dims) {
    d = rd.u32();
    if (d == 0 || d > (1u << 20)) throw IoError("corrupt model payload: layer width");
  }
  TrainableNet t{Mlp(dims)};
  t.adam.step = rd.u64();
  t.adam.beta1 = rd.f64();
  t.adam.beta2 = rd.f64();
  t.adam.eps = rd.f64();
  const std::uint64_t n = rd.u64();
  if (n != t.net.params().size()) throw IoError("corrupt model payload: parameter count");
  for (double& d : t.net.params()) d = rd.f64();
  for (double& d : t.adam.m) d = rd.f64();
  for (double& d : t.adam.v) d = rd.f64();
  return t;
}

inline TrainableNet deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader rd(bytes);
  TrainableNet t = deserialize_from(rd);
  if (rd.position() != bytes.size()) throw IoError("corrupt model payload: trailing bytes");
  return t;
}

}  // namespace sdd
