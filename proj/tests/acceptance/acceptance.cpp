// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr, artifacts under --out-dir. Exit status is nonzero if any criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "support/fixtures.hpp"

using namespace sdd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string hex(std::uint64_t h) { return fmt("%016llx", static_cast<unsigned long long>(h)); }

std::uint64_t hash_of(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

InstanceConfig toy_config() {
  InstanceConfig cfg;
  cfg.fleet_m = 1;
  cfg.fleet_n = 2;
  cfg.expected_requests = 50;
  return cfg;
}

// 1 ------------------------------------------------------------------------

Outcome golden_day() {
  const auto day = testing::replay_grid_day();
  std::vector<std::string> bad;
  auto expect = [&bad](const char* what, double got, double want) {
    if (got != want) bad.push_back(fmt("%s=%g (want %g)", what, got, want));
  };
  const auto& v2 = day.post.at(2).vehicles[0];
  if (v2.customers.size() == 2) {
    expect("C1", v2.customers[0].arrival, 100);
    expect("C2", v2.customers[1].arrival, 150);
  } else {
    bad.push_back("vehicle tour after C2 has wrong length");
  }
  expect("vehicle return 1", v2.return_time, 220);
  const auto& v5 = day.post.at(5).vehicles[0];
  if (v5.customers.size() == 1) expect("C5", v5.customers[0].arrival, 290);
  expect("vehicle return 2", v5.return_time, 360);
  const auto& d3 = day.post.at(3).drones[0];
  if (d3.trips.size() == 1) {
    expect("C3", d3.trips[0].customer.arrival, 77);
    expect("drone return 1", d3.trips[0].back.arrival, 124);
  } else {
    bad.push_back("drone plan after C3 has wrong length");
  }
  const auto& d4 = day.post.at(4).drones[0];
  expect("drone load C4", d4.next.start, 144);
  if (d4.trips.size() == 1) {
    expect("C4", d4.trips[0].customer.arrival, 191);
    expect("drone return 2", d4.trips[0].back.arrival, 238);
  } else {
    bad.push_back("drone plan after C4 has wrong length");
  }
  const auto& f6 = day.feasibility.at(6);
  if (f6.vehicle || !f6.drone) bad.push_back("C6 verdict is not vehicle-infeasible/drone-feasible");
  const auto& d6 = day.post.at(6).drones[0];
  if (d6.trips.size() == 2) {
    expect("238->", d6.trips[0].back.arrival, 238);
    expect("->258", d6.trips[0].back.start, 258);
    expect("C6", d6.trips[1].customer.arrival, 291);
    expect("N", d6.trips[1].back.arrival, 324);
  } else {
    bad.push_back("drone plan after C6 has wrong length");
  }
  if (bad.empty()) return {true, "vehicle 100/150/220/290/360, drone 77/124/144/191/238, C6 drone-only, route 238->258 C6@291 N@324"};
  std::string d;
  for (const auto& b : bad) d += b + "; ";
  return {false, d};
}

// 2 ------------------------------------------------------------------------

Outcome feature_golden() {
  const auto cfg = testing::grid_day_config();
  auto path = testing::grid_day_path(cfg);
  const auto day = testing::replay_grid_day();
  State s = day.states.at(6);
  s.request = make_request(6, {6, 0}, 60, cfg);
  path.requests[5] = s.request;
  const auto raw = raw_features(s, feasibility_check(s, CustomerBook(path.requests), cfg), FeatureSet::full, cfg);
  std::string got;
  for (double v : raw) got += (got.empty() ? "" : ",") + format_double(v);
  return {raw == std::vector<double>{60, 60, 10000, 220, 124}, "raw features [" + got + "]"};
}

// 3 ------------------------------------------------------------------------

Outcome analytics_vs_oracle(const fs::path& out_dir) {
  constexpr long long trials = 200000;
  const AnalyticParams base;
  std::ofstream csv(out_dir / "analytics_vs_oracle.csv");
  csv << "tprime,bprime,scenario,closed_form,mc_estimate,mc_se,tolerance,ok\n";
  int accept_bad = 0, reject_bad = 0, points = 0;
  double accept_worst = 0, reject_worst = 0;
  std::string reject_detail;
  for (double tp : {300.0, 410.0, 416.0}) {
    const auto p0 = with_point(base, tp, 0.0);
    const double closed_reject = p_reject_two(p0);
    const auto mc_reject = mc_oracle(p0, OracleScenario::reject_two, trials, mix_seed(3, static_cast<std::uint64_t>(tp)));
    const double tol_r = std::max(0.02, 3 * mc_reject.se);
    const double dr = std::abs(closed_reject - mc_reject.p);
    reject_worst = std::max(reject_worst, dr);
    csv << format_double(tp) << ",*,reject_two," << format_double(closed_reject) << "," << format_double(mc_reject.p)
        << "," << format_double(mc_reject.se) << "," << format_double(tol_r) << "," << (dr <= tol_r) << "\n";
    if (dr > tol_r) {
      ++reject_bad;
      reject_detail += fmt(" t'=%g: %.4f vs MC %.4f;", tp, closed_reject, mc_reject.p);
    }
    for (int b = 1; b <= 40; ++b) {
      const auto p = with_point(base, tp, b);
      const double closed = accept_one_more_value(p);
      const auto mc = mc_oracle(p, OracleScenario::accept_one_more, trials,
                                mix_seed(mix_seed(4, static_cast<std::uint64_t>(tp)), static_cast<std::uint64_t>(b)));
      const double tol = std::max(0.02, 3 * mc.se);
      const double d = std::abs(closed - mc.p);
      accept_worst = std::max(accept_worst, d);
      ++points;
      csv << format_double(tp) << "," << b << ",accept_one_more," << format_double(closed) << ","
          << format_double(mc.p) << "," << format_double(mc.se) << "," << format_double(tol) << "," << (d <= tol)
          << "\n";
      if (d > tol) ++accept_bad;
    }
  }
  const bool pass = accept_bad == 0 && reject_bad == 0;
  return {pass, fmt("accept: %d/%d points outside tolerance (worst %.4f); reject: %d/3 outside (worst %.4f)%s",
                    accept_bad, points, accept_worst, reject_bad, reject_worst, reject_detail.c_str())};
}

// 4 ------------------------------------------------------------------------

Outcome b_star_reproduction() {
  const AnalyticParams base;
  const auto b300 = b_star(with_point(base, 300, 0));
  const auto b410 = b_star(with_point(base, 410, 0));
  const auto b416 = b_star(with_point(base, 416, 0));
  const bool ok = b300.kind == BStar::Kind::always_accept && b410.kind == BStar::Kind::threshold &&
                  b410.value >= 6.5 && b410.value <= 8.5 && b416.kind == BStar::Kind::threshold &&
                  b416.value < b410.value;
  auto show = [](const BStar& b) {
    return b.kind == BStar::Kind::threshold ? format_double(b.value)
           : b.kind == BStar::Kind::always_accept ? std::string("AlwaysAccept")
                                                  : std::string("NeverAccept");
  };
  return {ok, "b*(300)=" + show(b300) + " b*(410)=" + show(b410) + " b*(416)=" + show(b416)};
}

// 5 ------------------------------------------------------------------------

Outcome dispatch_boundary() {
  long long cases = 0, wrong = 0;
  for (double T : {120.0, 300.0, 420.0, 720.0})
    for (double c : {1.1, 1.5, 2.0, 3.0})
      for (double b = 0; b <= 40.0; b += 0.5) {
        AnalyticParams p;
        p.T = T;
        p.c = c;
        p.bprime = b;
        const double edge = T - b / c;
        if (edge < 0) continue;
        ++cases;
        p.tprime = edge;
        const bool at = feasible_last_dispatch(p);
        p.tprime = std::nextafter(edge, 1e300);
        const bool after = feasible_last_dispatch(p);
        p.tprime = std::nextafter(edge, -1e300);
        const bool before = feasible_last_dispatch(p);
        if (!at || after || !before) ++wrong;
      }
  const bool example = feasible_last_dispatch(with_point(AnalyticParams{}, 410, 15)) &&
                       !feasible_last_dispatch(with_point(AnalyticParams{}, 411, 15));
  return {wrong == 0 && example,
          fmt("%lld grid points, %lld misplaced flips; T=420,c=1.5,b'=15 feasible at 410, not at 411: %s", cases, wrong,
              example ? "yes" : "no")};
}

// 6 ------------------------------------------------------------------------

Outcome feasibility_monotonicity() {
  const auto states = testing::random_states(10000, 606);
  using testing::DelayKind;
  const auto avail = testing::check_delay_monotonicity(states, DelayKind::unit_availability, 1);
  const auto literal = testing::check_delay_monotonicity(states, DelayKind::request_time_rederived_deadline, 2);
  const auto fixed = testing::check_delay_monotonicity(states, DelayKind::request_time_fixed_deadline, 3);
  const bool pass = avail.violations() == 0 && literal.violations() == 0;
  return {pass, fmt("%zu states; unit availability delay: %lld/%lld violations; request delay with re-derived "
                    "deadline: %lld/%lld (vehicle %lld, drone %lld); request delay, deadline held: %lld/%lld",
                    states.size(), avail.violations(), avail.checked, literal.violations(), literal.checked,
                    literal.vehicle_violations, literal.drone_violations, fixed.violations(), fixed.checked)};
}

// 7 ------------------------------------------------------------------------

Outcome numerics() {
  Rng rng(77);
  double worst = 0;
  long long compared = 0;
  for (int k = 0; k < 100; ++k) {
    std::uniform_int_distribution<std::size_t> w(1, 6);
    std::vector<std::size_t> dims{w(rng), w(rng), w(rng), std::uniform_int_distribution<std::size_t>(1, 3)(rng)};
    auto net = Mlp::he_init(dims, rng);
    for (double& p : net.params()) p += 0.05 * (uniform01(rng) - 0.5);
    TrainBatch batch{net.input_dim(), {}, {}, {}};
    std::normal_distribution<double> n(0, 1);
    for (int r = 0; r < 6; ++r) {
      std::vector<double> x(net.input_dim());
      for (double& v : x) v = n(rng);
      batch.add(x, std::uniform_int_distribution<int>(0, static_cast<int>(net.output_dim()) - 1)(rng), n(rng));
    }
    const auto g = gradient(net, batch);
    const double base = batch_loss(net, batch);
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      const double h = 1e-6, keep = net.params()[i];
      net.params()[i] = keep + h;
      const double up = batch_loss(net, batch);
      net.params()[i] = keep - h;
      const double down = batch_loss(net, batch);
      net.params()[i] = keep;
      if (std::abs((up - base) - (base - down)) > 1e-6) continue;  // ReLU kink inside the stencil
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g.grads[i]) / std::max({std::abs(fd), std::abs(g.grads[i]), 1e-3}));
      ++compared;
    }
  }
  const double adam_ref[] = {0.9000000004999999975,  0.80041222869179214524, 0.70158627294602954516,
                             0.6039390605737448393,  0.50796365926434067674, 0.41423645599366060874,
                             0.3234207049391005065,  0.23626372452104057979, 0.15358456007036253631,
                             0.076249155606911102582};
  std::vector<double> w{1.0};
  AdamState st(1);
  double adam_err = 0;
  for (double ref : adam_ref) {
    adam_step(w, st, std::vector<double>{2 * w[0]}, 0.1);
    adam_err = std::max(adam_err, std::abs(w[0] - ref));
  }
  const bool lr_ok = lr_at(0) == 0.01 && std::abs(lr_at(6000) - 0.0096) <= 1e-18;
  return {worst <= 1e-4 && adam_err <= 1e-10 && lr_ok,
          fmt("grad rel err max %.2e over %lld params; Adam max err %.2e; lr_at(0)=%s lr_at(6000)=%s", worst, compared,
              adam_err, format_double(lr_at(0)).c_str(), format_double(lr_at(6000)).c_str())};
}

// 8 ------------------------------------------------------------------------

Outcome routing_oracle() {
  Rng rng(808);
  int mismatches = 0, feasible = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto tc = testing::random_insertion_case(rng, 3, 6);
    const CustomerBook book(tc.requests);
    const auto got = best_vehicle_insertion(tc.plans, tc.request, book, tc.cfg);
    const auto want = testing::oracle_best_insertion(tc.plans, tc.request, book, tc.cfg);
    if (got.has_value() != want.has_value()) {
      ++mismatches;
      continue;
    }
    if (!got) continue;
    ++feasible;
    bool same = got->vehicle == want->vehicle && got->position == want->position &&
                std::abs(got->delta - want->delta) <= 1e-9 && got->plan.customers.size() == want->arrivals.size();
    for (std::size_t k = 0; same && k < want->arrivals.size(); ++k)
      same = std::abs(got->plan.customers[k].arrival - want->arrivals[k]) <= 1e-9;
    if (!same) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 states (%d with a feasible insertion), %d mismatches", feasible, mismatches)};
}

// 9, 10 ----------------------------------------------------------------------

struct LearningRuns {
  double q_quality = 0, random_quality = 0, pfa_quality = 0, pfa_tau = 0;
  double replay_final = 0, no_replay_final = 0;
};

double quality_on(const Policy& pol, const std::vector<SamplePath>& days, const InstanceConfig& cfg) {
  std::vector<EpisodeResult> res;
  for (const auto& d : days) res.push_back(run_episode(pol, d, cfg));
  return solution_quality(res);
}

LearningRuns learning_runs(const fs::path& out_dir) {
  const auto cfg = toy_config();
  TrainingSchedule sched;
  sched.total_steps = 5000;
  const auto train = gen_sample_paths(cfg, sched.train_paths, 9001);
  const auto held_out = gen_sample_paths(cfg, sched.eval_paths, 9002);
  const auto eval_days = gen_sample_paths(cfg, 200, 9003);
  LearningRuns r;

  std::cerr << "  training with replay (5000 steps)\n";
  const auto with = training_run(cfg, train, held_out, sched, FeatureSet::full, 11);
  {
    std::ofstream f(out_dir / "learning_curve_replay.csv");
    write_learning_curve(f, with.curve);
  }
  save_bank((out_dir / "toy_q_bank.bin").string(), with.best_bank);
  r.q_quality = quality_on(greedy_policy(with.best_bank, cfg), eval_days, cfg);
  r.replay_final = quality_on(greedy_policy(with.final_bank, cfg), eval_days, cfg);

  r.random_quality = quality_on(make_policy(parse_policy_spec("random:seed=5"), cfg).policy, eval_days, cfg);
  const auto grid = threshold_grid(0, 60, 0.5);
  const auto tuned = tune_threshold_by_enumeration(PolicyKind::pfa, grid, train, cfg);
  r.pfa_tau = tuned.best;
  r.pfa_quality = quality_on(make_policy(PolicySpec{PolicyKind::pfa, {{"tau", format_double(tuned.best)}}}, cfg).policy,
                             eval_days, cfg);

  std::cerr << "  training without replay (5000 steps)\n";
  auto no_replay = sched;
  no_replay.replay = false;
  const auto without = training_run(cfg, train, held_out, no_replay, FeatureSet::full, 11);
  {
    std::ofstream f(out_dir / "learning_curve_no_replay.csv");
    write_learning_curve(f, without.curve);
  }
  r.no_replay_final = quality_on(greedy_policy(without.final_bank, cfg), eval_days, cfg);
  return r;
}

Outcome desk_learning(const LearningRuns& r) {
  const double vs_random = 100 * (r.q_quality - r.random_quality);
  const double vs_pfa = 100 * (r.q_quality - r.pfa_quality);
  return {vs_random >= 5.0 && vs_pfa >= -1.0,
          fmt("Q(pi^Q)=%.2f%%, Random=%.2f%% (%+.2f pp), tuned PFA tau=%g: %.2f%% (%+.2f pp), 200 shared days",
              100 * r.q_quality, 100 * r.random_quality, vs_random, r.pfa_tau, 100 * r.pfa_quality, vs_pfa)};
}

Outcome replay_ablation(const LearningRuns& r, const fs::path& out_dir) {
  const bool curves = fs::exists(out_dir / "learning_curve_replay.csv") &&
                      fs::exists(out_dir / "learning_curve_no_replay.csv");
  return {r.replay_final >= r.no_replay_final && curves,
          fmt("final Q with replay %.2f%%, without %.2f%% at 5000 steps; curves %s", 100 * r.replay_final,
              100 * r.no_replay_final, curves ? "written" : "missing")};
}

// 11 -----------------------------------------------------------------------

Outcome statistics() {
  const std::vector<double> a{2, 4, 6, 8, 10}, b{1, 2, 3, 4, 5};
  const auto r = paired_t_test(a, b);
  const auto same = paired_t_test(a, a);
  return {std::abs(r.t - 4.2426) <= 1e-3 && std::abs(r.p - 0.0132) <= 1e-3 && same.p == 1.0,
          fmt("t=%.6f p=%.6f df=%d; identical samples p=%g", r.t, r.p, r.df, same.p)};
}

// 12 -----------------------------------------------------------------------

struct StageHashes {
  std::uint64_t generation = 0, training = 0, evaluation = 0, reporting = 0;
  friend bool operator==(const StageHashes&, const StageHashes&) = default;
};

StageHashes pipeline_hashes(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = toy_config();
  StageHashes h;
  std::ostringstream paths_text;
  const auto train = gen_sample_paths(cfg, 30, 12);
  write_paths(paths_text, cfg, train);
  h.generation = hash_of(paths_text.str());

  TrainingSchedule s;
  s.total_steps = 300;
  s.minibatch = 256;
  s.buffer_capacity = 5000;
  s.eval_interval = 50;
  const auto run = training_run(cfg, train, gen_sample_paths(cfg, 5, 13), s, FeatureSet::full, 14);
  std::ostringstream curve;
  write_learning_curve(curve, run.curve);
  const auto bank_bytes = serialize_bank(run.best_bank);
  h.training = hash_of(curve.str() + std::string(bank_bytes.begin(), bank_bytes.end()));

  // both runs evaluate through the same checkpoint path so artifact names match
  const auto bank_file = dir.parent_path() / "determinism_bank.bin";
  save_bank(bank_file.string(), run.best_bank);
  RunMatrixSpec spec;
  spec.fleets = {{1, 2}};
  spec.geographies = {"homogeneous", "heterogeneous"};
  spec.eval_days = 10;
  spec.seed = 15;
  spec.policies = {"random:seed=3", "pfa:tau=12", "q:checkpoint=" + bank_file.string()};
  const auto report = run_matrix(spec, cfg);
  std::ostringstream rep;
  write_report(rep, report);
  h.evaluation = hash_of(rep.str());

  write_matrix_artifacts(dir / "matrix", report, cfg.order_window_end);
  std::ostringstream curves;
  std::vector<double> bs;
  for (int b = 1; b <= 40; ++b) bs.push_back(b);
  emit_curves(curves, curve_rows(AnalyticParams{}, {300, 410, 416}, bs));
  std::string all = curves.str();
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "matrix")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    all += f.filename().string() + "\n" + read_file(f);
  }
  h.reporting = hash_of(all);
  return h;
}

Outcome determinism(const fs::path& out_dir) {
  const auto a = pipeline_hashes(out_dir / "determinism_a");
  const auto b = pipeline_hashes(out_dir / "determinism_b");
  write_file(out_dir / "determinism_hashes.txt", "generation " + hex(a.generation) + "\ntraining " + hex(a.training) +
                                                     "\nevaluation " + hex(a.evaluation) + "\nreporting " +
                                                     hex(a.reporting) + "\n");
  return {a == b, "generation " + hex(a.generation) + (a.generation == b.generation ? "" : "!=" + hex(b.generation)) +
                      ", training " + hex(a.training) + (a.training == b.training ? "" : "!=" + hex(b.training)) +
                      ", evaluation " + hex(a.evaluation) +
                      (a.evaluation == b.evaluation ? "" : "!=" + hex(b.evaluation)) + ", reporting " +
                      hex(a.reporting) + (a.reporting == b.reporting ? "" : "!=" + hex(b.reporting))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the same-day delivery fleet library"};
  std::string out_dir = "acceptance_artifacts";
  app.add_option("--out-dir", out_dir, "Directory for CSV artifacts");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out_dir);

  int failed = 0;
  auto run = [&failed](int id, const char* name, const std::function<Outcome()>& body) {
    std::cerr << "criterion " << id << ": " << name << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << " (" << fmt("%.1f", secs)
              << " s): " << o.detail << std::endl;
  };

  const fs::path dir(out_dir);
  run(1, "golden worked example", golden_day);
  run(2, "feature golden", feature_golden);
  run(3, "analytics vs Monte-Carlo oracle", [&] { return analytics_vs_oracle(dir); });
  run(4, "b* reproduction", b_star_reproduction);
  run(5, "last-dispatch feasibility boundary", dispatch_boundary);
  run(6, "feasibility anti-monotonicity", feasibility_monotonicity);
  run(7, "numerics", numerics);
  run(8, "routing oracle equivalence", routing_oracle);
  LearningRuns runs;
  std::string learning_error;
  try {
    runs = learning_runs(dir);
  } catch (const std::exception& e) {
    learning_error = e.what();
  }
  run(9, "desk-scale learning", [&] {
    if (!learning_error.empty()) return Outcome{false, "exception: " + learning_error};
    return desk_learning(runs);
  });
  run(10, "experience-replay ablation", [&] {
    if (!learning_error.empty()) return Outcome{false, "exception: " + learning_error};
    return replay_ablation(runs, dir);
  });
  run(11, "paired t-test", statistics);
  run(12, "determinism", [&] { return determinism(dir); });
  std::cerr << (12 - failed) << "/12 criteria passed\n";
  return failed == 0 ? 0 : 1;
}
