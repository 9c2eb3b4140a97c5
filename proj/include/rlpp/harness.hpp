#ifndef RLPP_HARNESS_HPP_
#define RLPP_HARNESS_HPP_

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rlpp/env.hpp"
#include "rlpp/mpc.hpp"
#include "rlpp/pure_pursuit.hpp"
#include "rlpp/raceline.hpp"
#include "rlpp/train.hpp"
#include "rlpp/vehicle.hpp"

namespace rlpp {

enum class ControllerKind { kFixed, kAdaptive, kTeacher, kRlJoint, kRlLookaheadOnly, kMpc };

ControllerKind parse_controller_kind(std::string_view name);
std::string controller_kind_name(ControllerKind kind);

struct ControllerSpec {
  ControllerKind kind{ControllerKind::kTeacher};
  std::string label;  // display name; defaults to the kind name
  double lookahead{1.5};             // Fixed
  std::optional<double> gain;        // Fixed / AdaptiveLinear; defaults to g0
  std::optional<double> v_lo, v_hi;  // AdaptiveLinear; default to raceline speed range
  std::string checkpoint;            // RL kinds
  double multiplier{1.0};            // used by compare
  double timeout{kDefaultStalenessTimeout};

  std::string display_name() const;
};

struct DriverOutput {
  Command command;
  PPParams params{};
  std::string mode;  // rl | teacher | fixed | adaptive | mpc
  std::size_t nearest{0};
  double kappa_max{0.0};
};

class Driver {
 public:
  virtual ~Driver() = default;
  virtual void reset() = 0;
  virtual DriverOutput act(const VehicleState& state, const Raceline& raceline, double now) = 0;
};

class PurePursuitDriver : public Driver {
 public:
  explicit PurePursuitDriver(ParamSource source, SmootherState initial = {});
  void reset() override;
  DriverOutput act(const VehicleState& state, const Raceline& raceline, double now) override;

 private:
  PurePursuitController controller_;
};

/// Learned parameters through the External source. `deliver(now)` decides
/// whether a fresh action is posted on this step (always, by default).
class PolicyDriver : public Driver {
 public:
  PolicyDriver(PolicyBundle bundle, double timeout = kDefaultStalenessTimeout);
  void reset() override;
  DriverOutput act(const VehicleState& state, const Raceline& raceline, double now) override;
  void set_delivery(std::function<bool(double)> deliver) { deliver_ = std::move(deliver); }
  const PolicyBundle& bundle() const { return bundle_; }

 private:
  PolicyBundle bundle_;
  PurePursuitController controller_;
  std::function<bool(double)> deliver_;
};

class MpcDriver : public Driver {
 public:
  MpcDriver(MPCConfig cfg, double dt_control);
  void reset() override;
  DriverOutput act(const VehicleState& state, const Raceline& raceline, double now) override;
  int non_converged() const { return non_converged_; }

 private:
  MpcTracker tracker_;
  double dt_control_;
  Command prev_{};
  int non_converged_{0};
};

struct HarnessContext {
  SimConfig sim{};
  MPCConfig mpc{};
  double fixed_gain{0.9};  // g0
};

std::unique_ptr<Driver> make_driver(const ControllerSpec& spec, const Raceline& raceline, const HarnessContext& ctx);

struct EvalConfig {
  SimConfig sim{};
  int laps{10};
  double max_lap_time{120.0};
  std::size_t start_index{0};
  double spawn_speed_fraction{0.5};
  bool record_trace{true};
};

struct LapRecord {
  int lap{0};
  bool completed{false};
  double time{0.0};
  std::string reason;  // empty, "collision" or "timeout"
};

struct TraceRow {
  double t{0.0};
  int lap{0};
  std::size_t s_index{0};
  double x{0.0}, y{0.0}, v{0.0};
  double lookahead{0.0}, gain{0.0}, kappa_max{0.0}, gamma{0.0}, lateral_error{0.0}, v_cmd{0.0};
  std::string mode;
  bool collision{false};
};

struct LapReport {
  std::vector<double> lap_times;  // completed laps only
  double mean{0.0}, std{0.0}, min{0.0}, max{0.0};
  int completed{0};
  int laps{0};
  long teacher_steps{0};
  long total_steps{0};
  double mean_abs_lateral{0.0};
  double steering_rate_rms{0.0};

  bool full_completion() const { return laps > 0 && completed == laps; }
  double teacher_fraction() const { return total_steps ? static_cast<double>(teacher_steps) / total_steps : 0.0; }
};

/// Lap statistics as a pure function of the lap log (sample std, n-1).
LapReport report_from_laps(const std::vector<LapRecord>& laps);

struct EvalResult {
  LapReport report;
  std::vector<LapRecord> laps;
  std::vector<TraceRow> trace;
};

/// Runs `cfg.laps` consecutive lap attempts on an already speed-scaled
/// raceline. A collision or lap timeout ends the attempt as incomplete and
/// respawns at the start line.
EvalResult run_laps(const Raceline& raceline, Driver& driver, const EvalConfig& cfg);

std::string laps_csv(const std::vector<LapRecord>& laps);
std::vector<LapRecord> parse_laps_csv(const std::string& text);
std::string trace_csv(const std::vector<TraceRow>& trace);
std::string report_text(const std::string& name, double multiplier, const LapReport& report);

struct SweepEntry {
  double multiplier{1.0};
  LapReport report;
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // ascending multiplier
  double best_multiplier{0.0};
  bool full_completion{false};
};

/// Largest multiplier with full completion. Optional refinement probes
/// best + k*refine_step below the next coarse grid point. Without any
/// fully completing entry the one with most completed laps is reported and
/// full_completion is false.
SweepResult sweep_multipliers(const std::vector<double>& grid, const std::function<LapReport(double)>& evaluate,
                              double refine_step = 0.0);

std::vector<double> default_multiplier_grid();
std::string sweep_csv(const SweepResult& sweep);

struct CompareRow {
  std::string name;
  double multiplier{1.0};
  LapReport report;
};

std::string compare_table(const std::vector<CompareRow>& rows);
std::string compare_csv(const std::vector<CompareRow>& rows);

/// Validation sweep for g0 with the velocity-linear PP on the given raceline.
struct GainSelection {
  double gain{0.9};
  std::vector<std::pair<double, SweepResult>> sweeps;
};
GainSelection select_fixed_gain(const Raceline& raceline, const std::vector<double>& gains,
                                const std::vector<double>& grid, const EvalConfig& eval, double refine_step = 0.0);

}  // namespace rlpp

#endif  // RLPP_HARNESS_HPP_
