#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "kv_config.hpp"
#include "random.hpp"

namespace sdd {

// Single-drone end-of-day model: Poisson arrivals at rate mu per time unit,
// customer distances uniform on [0, dmax] in vehicle travel-time units, a
// drone c times as fast as the vehicle, horizon T.
struct AnalyticParams {
  double c = 1.5;
  double mu = 1.0;
  double dmax = 40.0;
  double T = 420.0;
  double tprime = 0.0;
  double bprime = 0.0;

  void validate() const {
    if (!(c > 1.0)) throw std::invalid_argument("c must exceed 1");
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
    if (!(dmax > 0.0)) throw std::invalid_argument("dmax must be positive");
    if (tprime < 0.0 || tprime > T) throw std::invalid_argument("tprime must lie in [0, T]");
    if (bprime < 0.0 || bprime > dmax) throw std::invalid_argument("bprime must lie in [0, dmax]");
  }
};

inline AnalyticParams with_point(AnalyticParams p, double tprime, double bprime) {
  p.tprime = tprime;
  p.bprime = bprime;
  return p;
}

// The candidate can still be reached in time if it is dispatched now.
inline bool feasible_last_dispatch(const AnalyticParams& p) { return p.tprime <= p.T - p.bprime / p.c; }

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Probability the drone serves at least one more customer after taking the
// candidate at distance b'. Clamped; goes to 0 for infeasible points.
inline double accept_one_more_value(const AnalyticParams& p) {
  const double M = std::ceil(p.bprime / p.c);
  const double A = p.T - p.tprime;
  return clamp01(1.0 - std::exp(-p.c * p.mu * (A - M) * (A + M - 1.0) / (2.0 * p.dmax)));
}

inline double p_accept_one_more(const AnalyticParams& p) {
  p.validate();
  if (!feasible_last_dispatch(p)) throw std::domain_error("p_accept_one_more: candidate infeasible");
  return accept_one_more_value(p);
}

// Probability the drone serves at least two customers if the candidate is
// declined; the double sum is evaluated term by term as printed, with integer
// indices k = 1..T-t' and m = 1..floor(c(T-t'-k)). Independent of b'.
inline double p_reject_two(const AnalyticParams& p) {
  p.validate();
  const double c = p.c, mu = p.mu, D = p.dmax, T = p.T, tp = p.tprime;
  const auto K = static_cast<long long>(std::floor(T - tp + 1e-9));
  double sum = 0.0;
  for (long long ki = 1; ki <= K; ++ki) {
    const double k = static_cast<double>(ki);
    const auto mmax = static_cast<long long>(std::floor(c * (T - tp - k) + 1e-9));
    double inner = 0.0;
    for (long long mi = 1; mi <= mmax; ++mi) {
      const double M = std::ceil(static_cast<double>(mi) / c);
      const double e = 2 * D + c * k + c * k * k - c * T - 2 * c * k * T + c * T * T + c * tp + 2 * c * k * tp -
                       2 * c * T * tp + c * tp * tp + c * M - c * M * M;
      inner += mu / D * std::exp(-mu / (2 * D) * e);
    }
    sum += std::exp(-k * c * mu * (2 * T - 2 * tp + k - 1) / (2 * D)) * inner;
  }
  const double none = std::exp(-c * mu * (T - tp) * (T - tp - 1) / (2 * D));
  return clamp01(1.0 - none - sum);
}

struct BStar {
  enum class Kind { always_accept, threshold, never_accept };
  Kind kind = Kind::always_accept;
  double value = 0.0;  // meaningful for Kind::threshold
};

// Scans b' over [0, dmax] in steps of `step` (feasible points only) and
// returns the largest b' where accepting is at least as good as declining.
inline BStar b_star(AnalyticParams p, double step = 0.1) {
  p.bprime = 0.0;
  p.validate();
  const double y2 = p_reject_two(p);
  const auto n = static_cast<long long>(std::floor(p.dmax / step + 1e-9));
  std::optional<double> last_accept;
  bool any_decline = false;
  for (long long i = 0; i <= n; ++i) {
    p.bprime = std::min(p.dmax, static_cast<double>(i) * step);
    if (!feasible_last_dispatch(p)) continue;
    if (accept_one_more_value(p) >= y2)
      last_accept = p.bprime;
    else
      any_decline = true;
  }
  if (!any_decline) return {BStar::Kind::always_accept, 0.0};
  if (!last_accept) return {BStar::Kind::never_accept, 0.0};
  return {BStar::Kind::threshold, *last_accept};
}

enum class OracleScenario { accept_one_more, reject_two };

struct OracleEstimate {
  double p = 0.0;
  double se = 0.0;
  long long trials = 0;
};

namespace detail {

// One simulated day tail. Arrivals of minute s fall in (s-1, s] and are
// dispatchable at s; at each integer minute the idle drone drops queued
// customers it can no longer reach by T and takes the oldest remaining one.
inline bool oracle_trial(const AnalyticParams& p, OracleScenario sc, Rng& rng, std::deque<double>& queue) {
  const auto t0 = static_cast<long long>(std::llround(p.tprime));
  const auto T = static_cast<long long>(std::llround(p.T));
  std::poisson_distribution<int> arrivals(p.mu);
  std::uniform_real_distribution<double> dist(0.0, p.dmax);
  const int need = sc == OracleScenario::accept_one_more ? 1 : 2;
  double free = sc == OracleScenario::accept_one_more ? p.tprime + std::ceil(p.bprime / p.c) : p.tprime;
  int served = 0;
  queue.clear();
  for (long long s = t0 + 1; s <= T; ++s) {
    for (int a = arrivals(rng); a > 0; --a) queue.push_back(dist(rng));
    if (static_cast<double>(s) < free) continue;
    const double reach = p.c * static_cast<double>(T - s);
    std::erase_if(queue, [reach](double d) { return d > reach; });
    if (queue.empty()) continue;
    const double x = queue.front();
    queue.pop_front();
    if (++served >= need) return true;
    free = static_cast<double>(s) + std::ceil(x / p.c);
  }
  return false;
}

}  // namespace detail

inline constexpr long long kOracleChunk = 4096;

// Monte-Carlo estimate in the simplified single-drone model above. Trials are
// grouped in chunks with their own seed stream.
inline OracleEstimate mc_oracle(const AnalyticParams& p, OracleScenario sc, long long trials, std::uint64_t seed) {
  if (trials <= 0) throw std::invalid_argument("mc_oracle: trials must be positive");
  p.validate();
  long long hits = 0;
  std::deque<double> queue;
  for (long long start = 0, chunk = 0; start < trials; start += kOracleChunk, ++chunk) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(chunk)));
    const long long end = std::min(trials, start + kOracleChunk);
    for (long long i = start; i < end; ++i) hits += detail::oracle_trial(p, sc, rng, queue) ? 1 : 0;
  }
  OracleEstimate est;
  est.trials = trials;
  est.p = static_cast<double>(hits) / static_cast<double>(trials);
  est.se = std::sqrt(est.p * (1.0 - est.p) / static_cast<double>(trials));
  return est;
}

struct CurveRow {
  double tprime = 0.0;
  double bprime = 0.0;
  double p_accept = 0.0;
  double p_reject = 0.0;
};

inline std::vector<CurveRow> curve_rows(const AnalyticParams& base, const std::vector<double>& tprimes,
                                        const std::vector<double>& bprimes) {
  std::vector<CurveRow> rows;
  for (double tp : tprimes) {
    const double y2 = p_reject_two(with_point(base, tp, 0.0));
    for (double b : bprimes) {
      const auto p = with_point(base, tp, b);
      p.validate();
      rows.push_back({tp, b, accept_one_more_value(p), y2});
    }
  }
  return rows;
}

// CSV: tprime,bprime,p_accept,p_reject
inline void emit_curves(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "tprime,bprime,p_accept,p_reject\n";
  for (const auto& r : rows)
    out << format_double(r.tprime) << "," << format_double(r.bprime) << "," << format_double(r.p_accept) << ","
        << format_double(r.p_reject) << "\n";
}

}  // namespace sdd
