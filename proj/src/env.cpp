#include "rlpp/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlpp {

namespace {

SmootherState initial_smoother(const EnvConfig& cfg) {
  SmootherState s = cfg.smoother;
  if (cfg.mode == ActionMode::kLookaheadOnly) s.gain = cfg.fixed_gain;
  return s;
}

}  // namespace

Observation observe(double v, const CurvatureTaps& taps) { return {v, taps.kappa0, taps.kappa1, taps.kappa2, taps.dkappa}; }

Observation observe(const VehicleState& state, const Raceline& raceline) {
  return observe(state.v, raceline.taps(raceline.nearest_index(state.position())));
}

double preshorten_ceiling(double v) { return 0.50 + 0.28 * v; }

RewardContext make_reward_context(double v, const PPParams& smoothed, const PPParams& prev_smoothed,
                                  const CurvatureTaps& taps, double kappa_local, double progress, bool collision,
                                  const RewardWeights& w) {
  RewardContext ctx;
  ctx.v = v;
  ctx.smoothed = smoothed;
  ctx.prev_smoothed = prev_smoothed;
  ctx.taps = taps;
  ctx.kappa_local = kappa_local;
  ctx.progress = progress;
  ctx.collision = collision;
  ctx.slow = v < w.v_slow;
  ctx.teacher = teacher_params(v, taps.kappa_max);
  return ctx;
}

RewardTerms reward_terms(const RewardContext& c, const RewardWeights& w) {
  RewardTerms t{};
  t.speed = w.w_v * c.v;
  t.lookahead = -w.w_lookahead * std::abs(c.smoothed.lookahead - c.teacher.lookahead);
  t.gain = -w.w_gain * std::abs(c.smoothed.gain - c.teacher.gain);
  t.jerk_lookahead = -w.w_jerk_lookahead * std::abs(c.smoothed.lookahead - c.prev_smoothed.lookahead);
  t.jerk_gain = -w.w_jerk_gain * std::abs(c.smoothed.gain - c.prev_smoothed.gain);
  t.curvature = -w.w_curvature * std::abs(c.kappa_local);
  t.cross = -w.w_cross * (c.smoothed.lookahead * c.taps.kappa_max);
  const bool bend = c.taps.kappa_max > w.kappa_bend;
  const bool shortened = c.smoothed.lookahead <= preshorten_ceiling(c.v);
  t.preshorten = (bend && shortened) ? w.w_preshorten : 0.0;
  t.collision = c.collision ? -w.w_collision : 0.0;
  t.slow = c.slow ? -w.w_slow : 0.0;
  t.progress = w.w_progress * c.progress;
  t.raw = t.speed + t.lookahead + t.gain + t.jerk_lookahead + t.jerk_gain + t.curvature + t.cross + t.preshorten +
          t.collision + t.slow + t.progress;
  t.clipped = std::clamp(t.raw, w.clip_low, w.clip_high);
  return t;
}

double compute_reward(const RewardContext& ctx, const RewardWeights& w) { return reward_terms(ctx, w).clipped; }

RacingEnv::RacingEnv(std::shared_ptr<const Raceline> raceline, EnvConfig cfg)
    : raceline_(std::move(raceline)),
      cfg_(std::move(cfg)),
      controller_(source::External{kDefaultStalenessTimeout}, initial_smoother(cfg_)) {
  if (!raceline_) throw std::invalid_argument("RacingEnv: raceline is null");
  cfg_.sim.validate();
  if (cfg_.laps < 1 || cfg_.max_steps < 1) throw std::invalid_argument("RacingEnv: laps and max_steps must be >= 1");
}

Observation RacingEnv::reset(std::uint64_t seed, std::optional<std::size_t> spawn_index) {
  const auto& rl = *raceline_;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::size_t idx = spawn_index.value_or(std::uniform_int_distribution<std::size_t>(0, rl.size() - 1)(rng)) % rl.size();
  const double heading = rl.tangent_heading(idx);
  double lat = 0.0, dtheta = 0.0;
  if (cfg_.jitter) {
    lat = cfg_.lateral_jitter * unit(rng);
    dtheta = cfg_.heading_jitter * unit(rng);
  }
  episode_ = EpisodeState{};
  episode_.vehicle.x = rl[idx].x - lat * std::sin(heading);
  episode_.vehicle.y = rl[idx].y + lat * std::cos(heading);
  episode_.vehicle.theta = wrap_angle(heading + dtheta);
  episode_.vehicle.v = cfg_.spawn_speed_fraction * rl[idx].v_max;
  episode_.prev_index = rl.nearest_index(episode_.vehicle.position());
  episode_.start_index = episode_.prev_index;
  controller_.reset(initial_smoother(cfg_));
  episode_.prev_smoothed = {controller_.smoother().lookahead, controller_.smoother().gain};
  started_ = true;
  return observe(episode_.vehicle.v, rl.taps(episode_.prev_index));
}

StepResult RacingEnv::step(const PPParams& raw_action) {
  if (!started_ || episode_.done.any()) throw std::logic_error("RacingEnv::step called on a finished episode");
  const auto& rl = *raceline_;
  auto& ep = episode_;

  PPParams action = raw_action;
  if (cfg_.mode == ActionMode::kLookaheadOnly) action.gain = cfg_.fixed_gain;
  action = clip_params(action);

  const double v_t = ep.vehicle.v;
  const auto taps_t = rl.taps(ep.prev_index);
  const double kappa_local = rl.smoothed_abs_curvature(ep.prev_index);

  controller_.slot().post(action, ep.time);
  const auto pp = controller_.step(ep.vehicle.pose(), v_t, rl, ep.time);
  const auto sim = control_step(ep.vehicle, pp.command, ep.applied_delta, cfg_.sim);
  ep.vehicle = sim.state;
  ep.applied_delta = sim.applied_delta;
  ep.time += cfg_.sim.dt_control;
  ++ep.steps;

  const std::size_t idx = rl.nearest_index(ep.vehicle.position());
  const std::size_t dp = progress_count(ep.prev_index, idx, rl.size());
  ep.progress_total += dp;
  ep.laps = static_cast<int>(ep.progress_total / rl.size());
  const double lat = rl.lateral_error(ep.vehicle.position());
  const bool collision = std::abs(lat) > rl.half_width();

  const auto ctx = make_reward_context(v_t, pp.params, ep.prev_smoothed, taps_t, kappa_local, static_cast<double>(dp),
                                       collision, cfg_.weights);
  StepResult out;
  out.info.terms = reward_terms(ctx, cfg_.weights);
  out.reward = out.info.terms.clipped;
  out.info.clipped_action = action;
  out.info.applied = pp.params;
  out.info.teacher = ctx.teacher;
  out.info.lateral_error = lat;
  out.info.mode = pp.mode;
  out.info.nearest = idx;
  out.info.progress = dp;
  out.info.steering = pp.command.delta;

  ep.prev_smoothed = pp.params;
  ep.prev_index = idx;
  ep.done.collision = collision;
  ep.done.laps_complete = ep.laps >= cfg_.laps;
  ep.done.timeout = ep.steps >= cfg_.max_steps;
  out.done = ep.done;
  out.observation = observe(ep.vehicle.v, rl.taps(idx));
  return out;
}

}  // namespace rlpp
