#ifndef RLPP_ENV_HPP_
#define RLPP_ENV_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>

#include "rlpp/pure_pursuit.hpp"
#include "rlpp/raceline.hpp"
#include "rlpp/vehicle.hpp"

namespace rlpp {

inline constexpr int kObservationDim = 5;

struct Observation {
  double v{0.0};
  double kappa0{0.0};
  double kappa1{0.0};
  double kappa2{0.0};
  double dkappa{0.0};

  std::array<double, kObservationDim> to_array() const { return {v, kappa0, kappa1, kappa2, dkappa}; }
};

Observation observe(const VehicleState& state, const Raceline& raceline);
Observation observe(double v, const CurvatureTaps& taps);

struct RewardWeights {
  double w_v{1.8};
  double w_lookahead{3.0};
  double w_gain{0.0};
  double w_jerk_lookahead{0.4};
  double w_jerk_gain{0.0};
  double w_curvature{1.5};
  double w_cross{2.0};
  double w_preshorten{1.5};
  double w_collision{10.0};
  double w_slow{0.5};
  double w_progress{1.0};
  double clip_low{-30.0};
  double clip_high{100.0};
  double kappa_bend{0.3};  // [1/m]
  double v_slow{0.5};      // [m/s]
};

struct RewardContext {
  double v{0.0};
  PPParams smoothed{};       // parameters applied this step
  PPParams prev_smoothed{};  // parameters applied on the previous step
  CurvatureTaps taps{};
  double kappa_local{0.0};   // smoothed local curvature
  double progress{0.0};      // newly passed waypoints
  bool collision{false};
  bool slow{false};
  PPParams teacher{};        // (L*, g*)
};

/// Speed-only ceiling for the pre-shortening bonus: 0.50 + 0.28 v.
double preshorten_ceiling(double v);

/// Fills the teacher targets and slow flag from v and the taps.
RewardContext make_reward_context(double v, const PPParams& smoothed, const PPParams& prev_smoothed,
                                  const CurvatureTaps& taps, double kappa_local, double progress, bool collision,
                                  const RewardWeights& w);

struct RewardTerms {
  double speed, lookahead, gain, jerk_lookahead, jerk_gain, curvature, cross, preshorten, collision, slow, progress;
  double raw;
  double clipped;
};

RewardTerms reward_terms(const RewardContext& ctx, const RewardWeights& w);
double compute_reward(const RewardContext& ctx, const RewardWeights& w);

enum class ActionMode { kJoint, kLookaheadOnly };

struct EnvConfig {
  SimConfig sim{};
  RewardWeights weights{};
  ActionMode mode{ActionMode::kJoint};
  double fixed_gain{0.9};  // g0 for the lookahead-only ablation
  int laps{2};
  int max_steps{6000};
  bool jitter{true};
  double lateral_jitter{0.1};
  double heading_jitter{0.05};
  double spawn_speed_fraction{0.5};
  SmootherState smoother{};
};

struct DoneFlags {
  bool collision{false};
  bool timeout{false};
  bool laps_complete{false};
  bool any() const { return collision || timeout || laps_complete; }
};

struct StepInfo {
  PPParams clipped_action{};
  PPParams applied{};
  PPParams teacher{};
  double lateral_error{0.0};
  ControlMode mode{ControlMode::kRl};
  std::size_t nearest{0};
  std::size_t progress{0};
  double steering{0.0};
  RewardTerms terms{};
};

struct StepResult {
  Observation observation;
  double reward{0.0};
  DoneFlags done;
  StepInfo info;
};

struct EpisodeState {
  VehicleState vehicle{};
  double applied_delta{0.0};
  PPParams prev_smoothed{};
  std::size_t prev_index{0};
  std::size_t start_index{0};
  std::size_t progress_total{0};
  int steps{0};
  int laps{0};
  double time{0.0};
  DoneFlags done{};
};

/// Episodic PP-parameter environment. Single-threaded; owns its simulator.
class RacingEnv {
 public:
  RacingEnv(std::shared_ptr<const Raceline> raceline, EnvConfig cfg);

  Observation reset(std::uint64_t seed, std::optional<std::size_t> spawn_index = std::nullopt);
  /// Throws std::logic_error when called after the episode is done.
  StepResult step(const PPParams& raw_action);

  const EpisodeState& episode() const { return episode_; }
  const EnvConfig& config() const { return cfg_; }
  const Raceline& raceline() const { return *raceline_; }
  int action_dim() const { return cfg_.mode == ActionMode::kJoint ? 2 : 1; }

 private:
  std::shared_ptr<const Raceline> raceline_;
  EnvConfig cfg_;
  PurePursuitController controller_;
  EpisodeState episode_;
  bool started_{false};
};

}  // namespace rlpp

#endif  // RLPP_ENV_HPP_
