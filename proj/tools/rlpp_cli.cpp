// Command-line front end: train, eval, compare, sweep, select-gain.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "rlpp/config.hpp"
#include "rlpp/harness.hpp"
#include "rlpp/io.hpp"
#include "rlpp/train.hpp"

using namespace rlpp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIncomplete = 1;  // ran, but not fully successful
constexpr int kExitUsage = 2;
constexpr int kExitError = 3;

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "JSON config file (defaults are built in)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, "output directory");
}

RunConfig resolve(const CommonOpts& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

int cmd_train(const RunConfig& cfg) {
  std::cout << "training " << (cfg.train.mode == ActionMode::kJoint ? "joint" : "ld-only") << " policy for "
            << cfg.train.total_steps << " steps (lr schedule " << lr_schedule_name(cfg.ppo.schedule) << ", seed "
            << cfg.seed << ")\n";
  const auto result = train_loop(cfg.env_factory(), cfg.train_config());
  write_file_atomic(join_path(cfg.out_dir, "config.json"), config_to_json(cfg));
  std::cout << "updates: " << result.updates << ", steps: " << result.steps
            << ", best eval return: " << result.best_eval_return << "\n";
  if (!result.evals.empty()) {
    std::cout << "teacher gap: " << result.evals.front().stats.mean_teacher_gap << " -> "
              << result.evals.back().stats.mean_teacher_gap << "\n";
  }
  if (result.halted) {
    std::cerr << "training halted: " << result.halt_reason << "\n";
    return kExitIncomplete;
  }
  return kExitOk;
}

ControllerSpec single_controller(const RunConfig& cfg) {
  if (cfg.controllers.empty()) return ControllerSpec{};
  return cfg.controllers.front();
}

LapReport evaluate_at(const Raceline& base, const ControllerSpec& spec, const RunConfig& cfg, double multiplier,
                      EvalResult* full = nullptr) {
  const Raceline track = base.scale_speeds(multiplier);
  auto driver = make_driver(spec, track, cfg.harness_context());
  EvalConfig ec = cfg.eval_config();
  ec.record_trace = full != nullptr && ec.record_trace;
  EvalResult r = run_laps(track, *driver, ec);
  if (full) *full = r;
  return r.report;
}

int cmd_eval(const RunConfig& cfg, std::optional<double> multiplier) {
  const ControllerSpec spec = single_controller(cfg);
  const double m = multiplier.value_or(cfg.controllers.empty() ? cfg.multiplier : spec.multiplier);
  const Raceline base = cfg.eval_track.build();
  EvalResult r;
  evaluate_at(base, spec, cfg, m, &r);
  const std::string report = report_text(spec.display_name(), m, r.report);
  write_file_atomic(join_path(cfg.out_dir, "laps.csv"), laps_csv(r.laps));
  write_file_atomic(join_path(cfg.out_dir, "trace.csv"), trace_csv(r.trace));
  write_file_atomic(join_path(cfg.out_dir, "report.txt"), report);
  std::cout << report;
  return r.report.full_completion() ? kExitOk : kExitIncomplete;
}

int cmd_sweep(const RunConfig& cfg) {
  const ControllerSpec spec = single_controller(cfg);
  const Raceline base = cfg.eval_track.build();
  const auto sweep = sweep_multipliers(
      cfg.sweep_grid, [&](double m) { return evaluate_at(base, spec, cfg, m); }, cfg.sweep_refine);
  write_file_atomic(join_path(cfg.out_dir, "sweep.csv"), sweep_csv(sweep));
  std::ostringstream report;
  report << "controller: " << spec.display_name() << "\n"
         << "best multiplier: " << sweep.best_multiplier << (sweep.full_completion ? "" : " (no full completion)")
         << "\n";
  for (const auto& e : sweep.entries) {
    report << "  x" << e.multiplier << ": " << e.report.completed << "/" << e.report.laps << " laps, mean "
           << e.report.mean << " s\n";
  }
  write_file_atomic(join_path(cfg.out_dir, "report.txt"), report.str());
  std::cout << report.str();
  return sweep.full_completion ? kExitOk : kExitIncomplete;
}

int cmd_compare(const RunConfig& cfg, bool sweep_each) {
  if (cfg.controllers.size() < 2) throw ConfigError("compare needs at least two controllers in the config");
  const Raceline base = cfg.eval_track.build();
  std::vector<CompareRow> rows;
  bool ok = true;
  for (const auto& spec : cfg.controllers) {
    double m = spec.multiplier;
    if (sweep_each) {
      const auto sweep = sweep_multipliers(
          cfg.sweep_grid, [&](double x) { return evaluate_at(base, spec, cfg, x); }, cfg.sweep_refine);
      m = sweep.best_multiplier;
    }
    rows.push_back({spec.display_name(), m, evaluate_at(base, spec, cfg, m)});
    ok = ok && rows.back().report.full_completion();
  }
  const std::string table = compare_table(rows);
  write_file_atomic(join_path(cfg.out_dir, "compare.csv"), compare_csv(rows));
  write_file_atomic(join_path(cfg.out_dir, "report.txt"), table);
  std::cout << table;
  return ok ? kExitOk : kExitIncomplete;
}

int cmd_select_gain(const RunConfig& cfg) {
  const Raceline track = cfg.track.build();
  EvalConfig ec = cfg.eval_config();
  const auto sel = select_fixed_gain(track, cfg.gain_grid, cfg.sweep_grid, ec, cfg.sweep_refine);
  std::ostringstream out;
  for (const auto& [g, sweep] : sel.sweeps) {
    out << "g=" << g << ": best multiplier " << sweep.best_multiplier
        << (sweep.full_completion ? "" : " (no full completion)") << "\n";
  }
  out << "selected g0: " << sel.gain << "\n";
  write_file_atomic(join_path(cfg.out_dir, "report.txt"), out.str());
  std::cout << out.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pure Pursuit tuning lab: RL training, lap evaluation and controller comparison"};
  app.require_subcommand(1);

  CommonOpts train_o, eval_o, sweep_o, compare_o, gain_o;
  std::string lr_schedule, mode;
  std::optional<long> steps;
  std::optional<double> eval_mult;
  std::string eval_controller, eval_checkpoint;
  bool compare_sweep = false;

  auto* train = app.add_subcommand("train", "train a PPO policy over Pure Pursuit parameters");
  add_common(train, train_o);
  train->add_option("--lr-schedule", lr_schedule, "learning-rate schedule")->check(CLI::IsMember({"linear", "cosine"}));
  train->add_option("--mode", mode, "action space")->check(CLI::IsMember({"joint", "ld-only"}));
  train->add_option("--steps", steps, "total environment steps")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "run consecutive laps with one controller");
  add_common(eval, eval_o);
  eval->add_option("--multiplier", eval_mult, "speed multiplier")->check(CLI::PositiveNumber);
  eval->add_option("--controller", eval_controller, "controller kind (overrides the config)");
  eval->add_option("--checkpoint", eval_checkpoint, "policy checkpoint for RL controllers");

  auto* sweep = app.add_subcommand("sweep", "find the largest speed multiplier with full lap completion");
  add_common(sweep, sweep_o);

  auto* compare = app.add_subcommand("compare", "evaluate every configured controller and tabulate lap times");
  add_common(compare, compare_o);
  compare->add_flag("--sweep", compare_sweep, "use each controller's swept best multiplier");

  auto* select = app.add_subcommand("select-gain", "pick the fixed gain g0 on the training track");
  add_common(select, gain_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      RunConfig cfg = resolve(train_o);
      if (!lr_schedule.empty()) cfg.ppo.schedule = parse_lr_schedule(lr_schedule);
      if (!mode.empty()) cfg.train.mode = mode == "joint" ? ActionMode::kJoint : ActionMode::kLookaheadOnly;
      if (steps) cfg.train.total_steps = *steps;
      cfg.validate();
      return cmd_train(cfg);
    }
    if (*eval) {
      RunConfig cfg = resolve(eval_o);
      if (!eval_controller.empty()) {
        ControllerSpec spec;
        spec.kind = parse_controller_kind(eval_controller);
        spec.multiplier = cfg.multiplier;
        cfg.controllers.insert(cfg.controllers.begin(), spec);
      }
      if (!eval_checkpoint.empty()) {
        if (cfg.controllers.empty()) throw ConfigError("--checkpoint needs an RL controller");
        cfg.controllers.front().checkpoint = eval_checkpoint;
      }
      return cmd_eval(cfg, eval_mult);
    }
    if (*sweep) return cmd_sweep(resolve(sweep_o));
    if (*compare) return cmd_compare(resolve(compare_o), compare_sweep);
    if (*select) return cmd_select_gain(resolve(gain_o));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
