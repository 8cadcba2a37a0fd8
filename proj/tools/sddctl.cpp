// sddctl: sample-path generation, threshold tuning, DQN training, policy
// evaluation and the analytical drone-acceptance curves.
//
// Exit codes: 0 ok, 1 usage, 2 invalid configuration, 3 I/O error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "sdd/sdd.hpp"

namespace fs = std::filesystem;
using namespace sdd;

namespace {

constexpr int kUsage = 1;
constexpr int kInvalidConfig = 2;
constexpr int kIo = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> policies;
  std::string checkpoint;
  std::vector<std::string> fleets;
  std::vector<std::string> geographies;
  std::optional<std::size_t> days;
  std::optional<std::uint64_t> steps;
  std::string features = "full";
  std::string grid = "0:60:0.5";
  long long trials = 0;
};

FleetSize parse_fleet(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("--fleet expects m,n (got '" + text + "')");
  try {
    return {static_cast<int>(parse_int(trim(std::string_view(text).substr(0, comma)))),
            static_cast<int>(parse_int(trim(std::string_view(text).substr(comma + 1))))};
  } catch (const InvalidConfig&) {
    throw UsageError("--fleet expects integers m,n (got '" + text + "')");
  }
}

KeyValueConfig load_kv(const Options& o) { return o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config); }

// Instance config from --config with --seed, --fleet and --geography applied.
InstanceConfig instance_config(const Options& o, const KeyValueConfig& kv) {
  InstanceConfig cfg = instance_config_from(kv);
  if (o.seed) cfg.seed = *o.seed;
  if (o.fleets.size() > 1 || o.geographies.size() > 1)
    throw UsageError("this command takes a single --fleet and --geography");
  const FleetSize fleet = o.fleets.empty() ? FleetSize{cfg.fleet_m, cfg.fleet_n} : parse_fleet(o.fleets.front());
  return cell_config(cfg, fleet, o.geographies.empty() ? cfg.geography.name : o.geographies.front());
}

fs::path prepare_out_dir(const Options& o) {
  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::vector<PolicySpec> parse_policies(const std::vector<std::string>& texts) {
  std::vector<PolicySpec> out;
  for (const auto& t : texts) {
    try {
      out.push_back(parse_policy_spec(t));
    } catch (const InvalidConfig& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

int cmd_gen(const Options& o) {
  const auto kv = load_kv(o);
  const auto cfg = instance_config(o, kv);
  const std::size_t days = o.days.value_or(500);
  const auto dir = prepare_out_dir(o);
  save_paths((dir / "paths.txt").string(), cfg, gen_sample_paths(cfg, days, cfg.seed));
  auto f = open_out(dir / "instance.cfg");
  f << to_key_values(cfg).to_text();
  std::cout << "wrote " << days << " sample paths to " << (dir / "paths.txt").string() << "\n";
  return 0;
}

int cmd_tune(const Options& o) {
  const auto kv = load_kv(o);
  const auto cfg = instance_config(o, kv);
  const auto specs = parse_policies(o.policies.empty() ? std::vector<std::string>{"pfa"} : o.policies);
  std::vector<double> grid;
  {
    const auto a = o.grid.find(':'), b = o.grid.rfind(':');
    if (a == std::string::npos || a == b) throw UsageError("--grid expects lo:hi:step");
    try {
      grid = threshold_grid(parse_double(o.grid.substr(0, a)), parse_double(o.grid.substr(a + 1, b - a - 1)),
                            parse_double(o.grid.substr(b + 1)));
    } catch (const InvalidConfig& e) {
      throw UsageError(std::string("--grid: ") + e.what());
    }
  }
  const auto paths = gen_sample_paths(cfg, o.days.value_or(500), mix_seed(cfg.seed, 1));
  const auto dir = prepare_out_dir(o);
  for (const auto& spec : specs) {
    if (spec.kind != PolicyKind::pfa && spec.kind != PolicyKind::pfa_rej && spec.kind != PolicyKind::delta)
      throw UsageError(std::string("policy ") + to_string(spec.kind) + " has no threshold to tune");
    const auto r = tune_threshold_by_enumeration(spec.kind, grid, paths, cfg);
    auto f = open_out(dir / (std::string("tune_") + to_string(spec.kind) + ".csv"));
    f << "threshold,mean_served\n";
    for (const auto& [v, s] : r.scores) f << format_double(v) << "," << format_double(s) << "\n";
    std::cout << to_string(spec.kind) << ": best threshold " << format_double(r.best) << " (mean served "
              << format_double(r.best_mean_served) << ")\n";
  }
  return 0;
}

int cmd_train(const Options& o) {
  const auto kv = load_kv(o);
  const auto cfg = instance_config(o, kv);
  TrainingSchedule sched = training_schedule_from(kv);
  if (o.steps) sched.total_steps = *o.steps;
  const auto specs = parse_policies(o.policies.empty() ? std::vector<std::string>{"q"} : o.policies);
  if (specs.size() != 1 || (specs[0].kind != PolicyKind::q && specs[0].kind != PolicyKind::q_no_rej))
    throw UsageError("train takes at most one --policy, q or q_no_rej");
  sched.allow_denial = specs[0].kind == PolicyKind::q;
  FeatureSet features;
  try {
    features = parse_feature_set(o.features);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto train = gen_sample_paths(cfg, sched.train_paths, mix_seed(cfg.seed, 1));
  const auto held_out = gen_sample_paths(cfg, sched.eval_paths, mix_seed(cfg.seed, 2));
  const auto dir = prepare_out_dir(o);
  const auto r = training_run(cfg, train, held_out, sched, features, cfg.seed);
  const std::string bank_file = o.checkpoint.empty() ? (dir / "bank.bin").string() : o.checkpoint;
  save_bank(bank_file, r.best_bank);
  auto f = open_out(dir / "learning_curve.csv");
  write_learning_curve(f, r.curve);
  std::cout << "trained " << sched.total_steps << " steps; best held-out mean served "
            << format_double(std::max(0.0, r.best_eval)) << "; checkpoint " << bank_file << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto kv = load_kv(o);
  InstanceConfig cfg = instance_config_from(kv);
  if (o.seed) cfg.seed = *o.seed;
  if (o.policies.empty()) throw UsageError("eval needs at least one --policy");
  auto specs = parse_policies(o.policies);
  RunMatrixSpec spec;
  for (const auto& f : o.fleets) spec.fleets.push_back(parse_fleet(f));
  if (spec.fleets.empty()) spec.fleets.push_back({cfg.fleet_m, cfg.fleet_n});
  spec.geographies = o.geographies.empty() ? std::vector<std::string>{cfg.geography.name} : o.geographies;
  spec.eval_days = o.days.value_or(500);
  spec.seed = cfg.seed;
  for (auto& s : specs) {
    const bool learned = s.kind == PolicyKind::q || s.kind == PolicyKind::q_no_rej;
    if (learned && s.text("checkpoint").empty() && !o.checkpoint.empty()) s.params["checkpoint"] = o.checkpoint;
    spec.policies.push_back(to_string(s));
  }
  const auto report = run_matrix(spec, cfg);
  const auto dir = prepare_out_dir(o);
  write_matrix_artifacts(dir, report, cfg.order_window_end);
  write_report(std::cout, report);
  return 0;
}

int cmd_analyze(const Options& o) {
  const AnalyticParams base;
  const auto dir = prepare_out_dir(o);
  auto f = open_out(dir / "b_star.csv");
  f << "tprime,p_reject,b_star\n";
  for (int tp = 300; tp < 420; ++tp) {
    const auto p = with_point(base, tp, 0.0);
    const auto b = b_star(p);
    f << tp << "," << format_double(p_reject_two(p)) << ","
      << (b.kind == BStar::Kind::threshold       ? format_double(b.value)
          : b.kind == BStar::Kind::always_accept ? std::string("always_accept")
                                                 : std::string("never_accept"))
      << "\n";
  }
  if (o.trials > 0) {
    auto g = open_out(dir / "oracle.csv");
    g << "tprime,bprime,scenario,closed_form,mc_estimate,mc_se\n";
    const std::uint64_t seed = o.seed.value_or(1);
    for (double tp : {300.0, 410.0, 416.0}) {
      const auto p0 = with_point(base, tp, 0.0);
      const auto rej = mc_oracle(p0, OracleScenario::reject_two, o.trials, mix_seed(seed, 0));
      g << format_double(tp) << ",*,reject_two," << format_double(p_reject_two(p0)) << "," << format_double(rej.p)
        << "," << format_double(rej.se) << "\n";
      for (int b = 1; b <= 40; ++b) {
        const auto p = with_point(base, tp, b);
        const auto acc = mc_oracle(p, OracleScenario::accept_one_more, o.trials, mix_seed(seed, b));
        g << format_double(tp) << "," << b << ",accept_one_more," << format_double(accept_one_more_value(p)) << ","
          << format_double(acc.p) << "," << format_double(acc.se) << "\n";
      }
    }
  }
  std::cout << "wrote " << (dir / "b_star.csv").string() << "\n";
  return 0;
}

int cmd_curves(const Options& o) {
  std::vector<double> bs;
  for (int b = 1; b <= 40; ++b) bs.push_back(b);
  const auto dir = prepare_out_dir(o);
  auto f = open_out(dir / "curves.csv");
  emit_curves(f, curve_rows(AnalyticParams{}, {300, 410, 416}, bs));
  std::cout << "wrote " << (dir / "curves.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Same-day delivery with vehicles and drones"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
  };
  auto add_instance = [&o](CLI::App* sub) {
    sub->add_option("--fleet", o.fleets, "Fleet size as m,n (repeatable for eval)");
    sub->add_option("--geography", o.geographies, "homogeneous or heterogeneous (repeatable for eval)");
    sub->add_option("--days", o.days, "Number of sample paths");
  };

  auto* gen = app.add_subcommand("gen", "Generate sample paths");
  add_common(gen);
  add_instance(gen);
  auto* tune = app.add_subcommand("tune", "Tune pfa / pfa_rej / delta thresholds by enumeration");
  add_common(tune);
  add_instance(tune);
  tune->add_option("--policy", o.policies, "Policy family to tune (repeatable)");
  tune->add_option("--grid", o.grid, "Threshold grid lo:hi:step");
  auto* train = app.add_subcommand("train", "Train the Q-network bank");
  add_common(train);
  add_instance(train);
  train->add_option("--steps", o.steps, "Training steps (episodes)");
  train->add_option("--policy", o.policies, "q (default) or q_no_rej");
  train->add_option("--checkpoint", o.checkpoint, "Checkpoint file to write");
  train->add_option("--features", o.features, "full, local, action_only, post_decision or distance_only");
  auto* eval = app.add_subcommand("eval", "Evaluate policies over fleets and geographies");
  add_common(eval);
  add_instance(eval);
  eval->add_option("--policy", o.policies, "Policy spec name[:key=value,...] (repeatable)");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint for q / q_no_rej policies without one");
  auto* analyze = app.add_subcommand("analyze", "Drone acceptance threshold b* and Monte-Carlo comparison");
  add_common(analyze);
  analyze->add_option("--trials", o.trials, "Monte-Carlo trials per point (0 skips the oracle)");
  auto* curves = app.add_subcommand("curves", "Acceptance/rejection probability curves");
  add_common(curves);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*tune) return cmd_tune(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*analyze) return cmd_analyze(o);
    if (*curves) return cmd_curves(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }
  return kUsage;
}
