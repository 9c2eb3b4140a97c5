#include "rlpp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rlpp/io.hpp"

namespace rlpp {

ControllerKind parse_controller_kind(std::string_view name) {
  if (name == "fixed") return ControllerKind::kFixed;
  if (name == "adaptive") return ControllerKind::kAdaptive;
  if (name == "teacher") return ControllerKind::kTeacher;
  if (name == "rl-joint") return ControllerKind::kRlJoint;
  if (name == "rl-ld-only") return ControllerKind::kRlLookaheadOnly;
  if (name == "mpc") return ControllerKind::kMpc;
  throw std::invalid_argument("unknown controller '" + std::string(name) + "'");
}

std::string controller_kind_name(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kFixed: return "fixed";
    case ControllerKind::kAdaptive: return "adaptive";
    case ControllerKind::kTeacher: return "teacher";
    case ControllerKind::kRlJoint: return "rl-joint";
    case ControllerKind::kRlLookaheadOnly: return "rl-ld-only";
    case ControllerKind::kMpc: return "mpc";
  }
  return "unknown";
}

std::string ControllerSpec::display_name() const { return label.empty() ? controller_kind_name(kind) : label; }

PurePursuitDriver::PurePursuitDriver(ParamSource source, SmootherState initial)
    : controller_(std::move(source), initial) {}

void PurePursuitDriver::reset() { controller_.reset(); }

DriverOutput PurePursuitDriver::act(const VehicleState& state, const Raceline& raceline, double now) {
  const auto r = controller_.step(state.pose(), state.v, raceline, now);
  return {r.command, r.params, std::string(mode_name(r.mode)), r.nearest, r.taps.kappa_max};
}

namespace {

SmootherState policy_smoother(const PolicyBundle& b) {
  SmootherState s;
  if (b.mode == ActionMode::kLookaheadOnly) s.gain = b.fixed_gain;
  return s;
}

}  // namespace

PolicyDriver::PolicyDriver(PolicyBundle bundle, double timeout)
    : bundle_(std::move(bundle)), controller_(source::External{timeout}, policy_smoother(bundle_)) {}

void PolicyDriver::reset() { controller_.reset(); }

DriverOutput PolicyDriver::act(const VehicleState& state, const Raceline& raceline, double now) {
  if (!deliver_ || deliver_(now)) {
    const auto idx = raceline.nearest_index(state.position());
    controller_.slot().post(bundle_.act(observe(state.v, raceline.taps(idx))), now);
  }
  const auto r = controller_.step(state.pose(), state.v, raceline, now);
  return {r.command, r.params, std::string(mode_name(r.mode)), r.nearest, r.taps.kappa_max};
}

MpcDriver::MpcDriver(MPCConfig cfg, double dt_control) : tracker_(std::move(cfg)), dt_control_(dt_control) {}

void MpcDriver::reset() {
  tracker_.reset();
  prev_ = {};
}

DriverOutput MpcDriver::act(const VehicleState& state, const Raceline& raceline, double) {
  const auto r = tracker_.step(raceline, state, prev_, dt_control_);
  if (!r.converged) ++non_converged_;
  prev_ = r.command;
  const auto idx = raceline.nearest_index(state.position());
  return {r.command, {0.0, 0.0}, "mpc", idx, raceline.taps(idx).kappa_max};
}

std::unique_ptr<Driver> make_driver(const ControllerSpec& spec, const Raceline& raceline, const HarnessContext& ctx) {
  const double gain = spec.gain.value_or(ctx.fixed_gain);
  switch (spec.kind) {
    case ControllerKind::kFixed:
      return std::make_unique<PurePursuitDriver>(source::Fixed{{spec.lookahead, gain}});
    case ControllerKind::kAdaptive:
      return std::make_unique<PurePursuitDriver>(source::AdaptiveLinear{
          spec.v_lo.value_or(raceline.min_speed()), spec.v_hi.value_or(raceline.max_speed()), gain});
    case ControllerKind::kTeacher:
      return std::make_unique<PurePursuitDriver>(source::Teacher{});
    case ControllerKind::kRlJoint:
    case ControllerKind::kRlLookaheadOnly: {
      if (spec.checkpoint.empty()) throw std::invalid_argument("RL controller needs a checkpoint path");
      auto bundle = load_checkpoint(spec.checkpoint);
      const bool want_joint = spec.kind == ControllerKind::kRlJoint;
      if ((bundle.mode == ActionMode::kJoint) != want_joint) {
        throw std::invalid_argument("checkpoint action mode does not match controller '" +
                                    controller_kind_name(spec.kind) + "'");
      }
      return std::make_unique<PolicyDriver>(std::move(bundle), spec.timeout);
    }
    case ControllerKind::kMpc: {
      MPCConfig cfg = ctx.mpc;
      cfg.wheelbase = ctx.sim.wheelbase;
      return std::make_unique<MpcDriver>(cfg, ctx.sim.dt_control);
    }
  }
  throw std::invalid_argument("unhandled controller kind");
}

LapReport report_from_laps(const std::vector<LapRecord>& laps) {
  LapReport r;
  r.laps = static_cast<int>(laps.size());
  for (const auto& l : laps) {
    if (l.completed) r.lap_times.push_back(l.time);
  }
  r.completed = static_cast<int>(r.lap_times.size());
  if (r.completed == 0) return r;
  const double n = static_cast<double>(r.completed);
  r.mean = std::accumulate(r.lap_times.begin(), r.lap_times.end(), 0.0) / n;
  double ss = 0.0;
  for (double t : r.lap_times) ss += (t - r.mean) * (t - r.mean);
  r.std = r.completed > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.min = *std::min_element(r.lap_times.begin(), r.lap_times.end());
  r.max = *std::max_element(r.lap_times.begin(), r.lap_times.end());
  return r;
}

namespace {

VehicleState spawn(const Raceline& rl, std::size_t idx, double speed_fraction) {
  VehicleState s;
  s.x = rl[idx].x;
  s.y = rl[idx].y;
  s.theta = rl.tangent_heading(idx);
  s.v = speed_fraction * rl[idx].v_max;
  return s;
}

}  // namespace

EvalResult run_laps(const Raceline& rl, Driver& driver, const EvalConfig& cfg) {
  cfg.sim.validate();
  if (cfg.laps < 1) throw std::invalid_argument("run_laps: lap count must be >= 1");
  const double lap_length = rl.lap_length();
  const double dt = cfg.sim.dt_control;
  const std::size_t start = cfg.start_index % rl.size();

  EvalResult out;
  VehicleState state = spawn(rl, start, cfg.spawn_speed_fraction);
  double applied_delta = 0.0;
  driver.reset();
  double t = 0.0;
  double lap_start = 0.0;
  double progress = 0.0;
  double station = rl.project_station(state.position());
  double lateral_sum = 0.0, rate_sq_sum = 0.0;

  for (int lap = 1; lap <= cfg.laps; ++lap) {
    while (true) {
      const auto act = driver.act(state, rl, t);
      const auto sim = control_step(state, act.command, applied_delta, cfg.sim);
      const double rate = (sim.applied_delta - applied_delta) / dt;
      state = sim.state;
      applied_delta = sim.applied_delta;
      const double t_next = t + dt;

      const double station_next = rl.project_station(state.position());
      double ds = std::remainder(station_next - station, lap_length);
      const double progress_prev = progress;
      progress += ds;
      station = station_next;
      const double lat = rl.lateral_error(state.position());
      const bool collision = std::abs(lat) > rl.half_width();

      ++out.report.total_steps;
      if (act.mode == "teacher") ++out.report.teacher_steps;
      lateral_sum += std::abs(lat);
      rate_sq_sum += rate * rate;
      if (cfg.record_trace) {
        out.trace.push_back({t_next, lap, act.nearest, state.x, state.y, state.v, act.params.lookahead,
                             act.params.gain, act.kappa_max, act.command.delta, lat, act.command.v_cmd, act.mode,
                             collision});
      }

      auto respawn = [&] {
        state = spawn(rl, start, cfg.spawn_speed_fraction);
        applied_delta = 0.0;
        driver.reset();
        lap_start = t_next;
        progress = 0.0;
        station = rl.project_station(state.position());
      };
      if (collision) {
        out.laps.push_back({lap, false, t_next - lap_start, "collision"});
        t = t_next;
        respawn();
        break;
      }
      if (progress >= lap_length) {
        const double frac = (lap_length - progress_prev) / (progress - progress_prev);
        const double t_cross = t + frac * dt;
        out.laps.push_back({lap, true, t_cross - lap_start, ""});
        lap_start = t_cross;
        progress -= lap_length;
        t = t_next;
        break;
      }
      t = t_next;
      if (t - lap_start > cfg.max_lap_time) {
        out.laps.push_back({lap, false, t - lap_start, "timeout"});
        respawn();
        break;
      }
    }
  }

  const long teacher = out.report.teacher_steps;
  const long total = out.report.total_steps;
  out.report = report_from_laps(out.laps);
  out.report.teacher_steps = teacher;
  out.report.total_steps = total;
  if (total > 0) {
    out.report.mean_abs_lateral = lateral_sum / static_cast<double>(total);
    out.report.steering_rate_rms = std::sqrt(rate_sq_sum / static_cast<double>(total));
  }
  return out;
}

std::string laps_csv(const std::vector<LapRecord>& laps) {
  std::ostringstream out;
  out << "lap,completed,time,reason\n";
  for (const auto& l : laps) out << l.lap << ',' << (l.completed ? 1 : 0) << ',' << format_double(l.time) << ',' << l.reason << '\n';
  return out.str();
}

std::vector<LapRecord> parse_laps_csv(const std::string& text) {
  std::vector<LapRecord> laps;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string lap, completed, time, reason;
    std::getline(row, lap, ',');
    std::getline(row, completed, ',');
    std::getline(row, time, ',');
    std::getline(row, reason);
    if (completed != "0" && completed != "1") throw std::invalid_argument("laps csv: bad completed flag '" + completed + "'");
    laps.push_back({std::stoi(lap), completed == "1", std::stod(time), reason});
  }
  return laps;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << "t,lap,s_index,x,y,v,L_d,g,kappa_max,gamma,lateral_error,v_cmd,mode,collision\n";
  for (const auto& r : trace) {
    out << format_double(r.t) << ',' << r.lap << ',' << r.s_index << ',' << format_double(r.x) << ','
        << format_double(r.y) << ',' << format_double(r.v) << ',' << format_double(r.lookahead) << ','
        << format_double(r.gain) << ',' << format_double(r.kappa_max) << ',' << format_double(r.gamma) << ','
        << format_double(r.lateral_error) << ',' << format_double(r.v_cmd) << ',' << r.mode << ','
        << (r.collision ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string report_text(const std::string& name, double multiplier, const LapReport& r) {
  std::ostringstream out;
  out << std::fixed;
  out << "controller: " << name << "\n";
  out << "speed multiplier: " << std::setprecision(2) << multiplier << "\n";
  out << "laps completed: " << r.completed << "/" << r.laps << "\n";
  out << "lap time mean/std/min/max [s]: " << std::setprecision(2) << r.mean << " " << r.std << " " << r.min << " "
      << r.max << "\n";
  out << "teacher mode: " << r.teacher_steps << "/" << r.total_steps << " steps (" << std::setprecision(3)
      << 100.0 * r.teacher_fraction() << "%)\n";
  out << "mean |lateral error| [m]: " << std::setprecision(4) << r.mean_abs_lateral << "\n";
  out << "steering rate RMS [rad/s]: " << std::setprecision(4) << r.steering_rate_rms << "\n";
  return out.str();
}

SweepResult sweep_multipliers(const std::vector<double>& grid, const std::function<LapReport(double)>& evaluate,
                              double refine_step) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty multiplier grid");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("sweep: grid must be ascending");
  SweepResult res;
  for (double m : grid) res.entries.push_back({m, evaluate(m)});

  auto best_full = [&]() -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < res.entries.size(); ++i) {
      if (res.entries[i].report.full_completion()) best = i;
    }
    return best;
  };

  if (refine_step > 0.0) {
    if (auto b = best_full()) {
      const double base = res.entries[*b].multiplier;
      const auto next = std::upper_bound(grid.begin(), grid.end(), base + 1e-12);
      if (next != grid.end()) {
        for (int k = 1;; ++k) {
          const double m = base + k * refine_step;
          if (m >= *next - 1e-9) break;
          res.entries.push_back({m, evaluate(m)});
        }
        std::stable_sort(res.entries.begin(), res.entries.end(),
                         [](const auto& a, const auto& b) { return a.multiplier < b.multiplier; });
      }
    }
  }

  if (auto b = best_full()) {
    res.best_multiplier = res.entries[*b].multiplier;
    res.full_completion = true;
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < res.entries.size(); ++i) {
      if (res.entries[i].report.completed > res.entries[best].report.completed) best = i;
    }
    res.best_multiplier = res.entries[best].multiplier;
    res.full_completion = false;
  }
  return res;
}

std::vector<double> default_multiplier_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(0.80 + 0.05 * k);
  return grid;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "multiplier,completed,laps,mean,std,min,max\n";
  for (const auto& e : sweep.entries) {
    const auto& r = e.report;
    out << format_double(e.multiplier) << ',' << r.completed << ',' << r.laps << ',' << format_double(r.mean) << ','
        << format_double(r.std) << ',' << format_double(r.min) << ',' << format_double(r.max) << '\n';
  }
  return out.str();
}

std::string compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "Controller" << std::right << std::setw(8) << "Mult" << std::setw(8) << "Laps"
      << std::setw(10) << "Mean" << std::setw(8) << "Std" << std::setw(10) << "Min" << std::setw(10) << "Max"
      << "\n";
  out << std::fixed;
  for (const auto& r : rows) {
    std::ostringstream laps;
    laps << r.report.completed << "/" << r.report.laps;
    out << std::left << std::setw(28) << r.name << std::right << std::setprecision(2) << std::setw(8) << r.multiplier
        << std::setw(8) << laps.str() << std::setw(10) << r.report.mean << std::setw(8) << r.report.std
        << std::setw(10) << r.report.min << std::setw(10) << r.report.max << "\n";
  }
  return out.str();
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "controller,multiplier,completed,laps,mean,std,min,max,teacher_steps,total_steps,mean_abs_lateral,"
         "steering_rate_rms\n";
  for (const auto& r : rows) {
    const auto& p = r.report;
    out << r.name << ',' << format_double(r.multiplier) << ',' << p.completed << ',' << p.laps << ','
        << format_double(p.mean) << ',' << format_double(p.std) << ',' << format_double(p.min) << ','
        << format_double(p.max) << ',' << p.teacher_steps << ',' << p.total_steps << ','
        << format_double(p.mean_abs_lateral) << ',' << format_double(p.steering_rate_rms) << '\n';
  }
  return out.str();
}

GainSelection select_fixed_gain(const Raceline& raceline, const std::vector<double>& gains,
                                const std::vector<double>& grid, const EvalConfig& eval, double refine_step) {
  if (gains.empty()) throw std::invalid_argument("select_fixed_gain: empty gain grid");
  GainSelection sel;
  double best_mult = -1.0, best_time = 0.0;
  bool have = false;
  EvalConfig cfg = eval;
  cfg.record_trace = false;
  for (double g : gains) {
    auto sweep = sweep_multipliers(
        grid,
        [&](double m) {
          const auto scaled = raceline.scale_speeds(m);
          PurePursuitDriver driver(
              source::AdaptiveLinear{scaled.min_speed(), scaled.max_speed(), g});
          return run_laps(scaled, driver, cfg).report;
        },
        refine_step);
    double time = 0.0;
    for (const auto& e : sweep.entries) {
      if (e.multiplier == sweep.best_multiplier) time = e.report.mean;
    }
    // Higher full-completion multiplier wins; ties go to the faster mean lap.
    const double mult = sweep.full_completion ? sweep.best_multiplier : -1.0;
    if (!have || mult > best_mult + 1e-12 || (std::abs(mult - best_mult) <= 1e-12 && time < best_time)) {
      have = true;
      best_mult = mult;
      best_time = time;
      sel.gain = g;
    }
    sel.sweeps.emplace_back(g, std::move(sweep));
  }
  return sel;
}

}  // namespace rlpp
