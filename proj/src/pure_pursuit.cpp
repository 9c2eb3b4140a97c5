#include "rlpp/pure_pursuit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlpp {

namespace {

// Teacher schedule constants.
constexpr double kTeacherL0 = 0.50;
constexpr double kTeacherLSpeed = 0.28;
constexpr double kTeacherLCurvature = 3.5;
constexpr double kTeacherVMin = 3.0;
constexpr double kTeacherVMax = 18.0;
constexpr double kTeacherGMax = 0.9;
constexpr double kTeacherGMin = 0.65;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

PPParams clip_params(const PPParams& p) {
  return {std::clamp(p.lookahead, kLookaheadMin, kLookaheadMax), std::clamp(p.gain, kGainMin, kGainMax)};
}

Smoothed smooth(const SmootherState& state, const PPParams& raw) {
  Smoothed out{state, {}};
  // beta*raw + (1-beta)*old, written so that raw == old is an exact fixed point.
  out.state.lookahead = state.lookahead + state.beta_lookahead * (raw.lookahead - state.lookahead);
  out.state.gain = state.gain + state.beta_gain * (raw.gain - state.gain);
  out.params = {out.state.lookahead, out.state.gain};
  return out;
}

Vec2 to_vehicle_frame(const Pose& pose, Vec2 point) {
  const double dx = point.x - pose.x;
  const double dy = point.y - pose.y;
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return {c * dx + s * dy, -s * dx + c * dy};
}

double pp_steering(double y_prime, double lookahead, double gain) {
  if (!(lookahead > 0.0)) throw std::invalid_argument("pp_steering: lookahead must be positive");
  return std::clamp(gain * (2.0 * y_prime / (lookahead * lookahead)), -kSteerClip, kSteerClip);
}

double teacher_lookahead(double v, double kappa_max) {
  return std::clamp(kTeacherL0 + kTeacherLSpeed * v - kTeacherLCurvature * kappa_max, kLookaheadMin, kLookaheadMax);
}

double teacher_gain(double v) {
  const double slope = (kTeacherGMin - kTeacherGMax) / (kTeacherVMax - kTeacherVMin);
  const double intercept = kTeacherGMax - slope * kTeacherVMin;
  return std::clamp(slope * v + intercept, kGainMin, kGainMax);
}

PPParams teacher_params(double v, double kappa_max) { return {teacher_lookahead(v, kappa_max), teacher_gain(v)}; }

double adaptive_lookahead(double v, double v_lo, double v_hi) {
  if (!(v_hi > v_lo)) throw std::invalid_argument("adaptive_lookahead: v_hi must exceed v_lo");
  const double t = (v - v_lo) / (v_hi - v_lo);
  return std::clamp(kAdaptiveLookaheadLow + t * (kAdaptiveLookaheadHigh - kAdaptiveLookaheadLow),
                    kAdaptiveLookaheadLow, kAdaptiveLookaheadHigh);
}

std::string_view mode_name(ControlMode mode) {
  switch (mode) {
    case ControlMode::kRl: return "rl";
    case ControlMode::kTeacher: return "teacher";
    case ControlMode::kFixed: return "fixed";
    case ControlMode::kAdaptive: return "adaptive";
  }
  return "unknown";
}

void ActionSlot::post(const PPParams& action, double stamp) {
  std::lock_guard lock(mutex_);
  entry_ = Entry{action, stamp};
}

std::optional<ActionSlot::Entry> ActionSlot::latest() const {
  std::lock_guard lock(mutex_);
  return entry_;
}

void ActionSlot::clear() {
  std::lock_guard lock(mutex_);
  entry_.reset();
}

PurePursuitController::PurePursuitController(ParamSource source, SmootherState initial)
    : source_(std::move(source)), initial_(initial), smoother_(initial) {
  if (const auto* ext = std::get_if<source::External>(&source_); ext && !(ext->timeout > 0.0)) {
    throw std::invalid_argument("External source: staleness timeout must be positive");
  }
  if (const auto* ad = std::get_if<source::AdaptiveLinear>(&source_); ad && !(ad->v_hi > ad->v_lo)) {
    throw std::invalid_argument("AdaptiveLinear source: v_hi must exceed v_lo");
  }
}

void PurePursuitController::reset() {
  smoother_ = initial_;
  slot_.clear();
}

void PurePursuitController::reset(const SmootherState& initial) {
  initial_ = initial;
  reset();
}

PPStepResult PurePursuitController::step(const Pose& pose, double speed, const Raceline& raceline, double now) {
  PPStepResult out;
  out.nearest = raceline.nearest_index({pose.x, pose.y});
  out.taps = raceline.taps(out.nearest);

  auto smoothed = [this](const PPParams& raw) {
    auto s = smooth(smoother_, clip_params(raw));
    smoother_ = s.state;
    return s.params;
  };
  std::visit(Overloaded{
                 [&](const source::Fixed& f) {
                   out.params = f.params;
                   out.mode = ControlMode::kFixed;
                 },
                 [&](const source::AdaptiveLinear& a) {
                   out.params = {adaptive_lookahead(speed, a.v_lo, a.v_hi), a.gain};
                   out.mode = ControlMode::kAdaptive;
                 },
                 [&](const source::Teacher&) {
                   out.params = smoothed(teacher_params(speed, out.taps.kappa_max));
                   out.mode = ControlMode::kTeacher;
                 },
                 [&](const source::External& e) {
                   const auto latest = slot_.latest();
                   if (latest && now - latest->stamp <= e.timeout) {
                     out.params = smoothed(latest->action);
                     out.mode = ControlMode::kRl;
                   } else {
                     out.params = smoothed(teacher_params(speed, out.taps.kappa_max));
                     out.mode = ControlMode::kTeacher;
                   }
                 },
             },
             source_);

  out.target = raceline.point_at_arc(out.nearest, out.params.lookahead);
  out.y_prime = to_vehicle_frame(pose, out.target).y;
  out.command.delta = pp_steering(out.y_prime, out.params.lookahead, out.params.gain);
  out.command.v_cmd = raceline[out.nearest].v_max;
  return out;
}

}  // namespace rlpp
