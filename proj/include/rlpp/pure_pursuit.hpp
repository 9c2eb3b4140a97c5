#ifndef RLPP_PURE_PURSUIT_HPP_
#define RLPP_PURE_PURSUIT_HPP_

#include <mutex>
#include <optional>
#include <string_view>
#include <variant>

#include "rlpp/raceline.hpp"
#include "rlpp/vehicle.hpp"

namespace rlpp {

inline constexpr double kLookaheadMin = 0.35;
inline constexpr double kLookaheadMax = 4.0;
inline constexpr double kGainMin = 0.45;
inline constexpr double kGainMax = 1.15;
inline constexpr double kSteerClip = 0.35;
inline constexpr double kSmoothingBeta = 0.2;
inline constexpr double kAdaptiveLookaheadLow = 1.0;
inline constexpr double kAdaptiveLookaheadHigh = 2.5;
inline constexpr double kDefaultStalenessTimeout = 0.2;

struct PPParams {
  double lookahead{1.0};
  double gain{0.9};
};

PPParams clip_params(const PPParams& p);

struct SmootherState {
  double lookahead{1.0};
  double gain{0.9};
  double beta_lookahead{kSmoothingBeta};
  double beta_gain{kSmoothingBeta};
};

struct Smoothed {
  SmootherState state;
  PPParams params;
};

Smoothed smooth(const SmootherState& state, const PPParams& raw);

Vec2 to_vehicle_frame(const Pose& pose, Vec2 point);

/// gamma = clip(gain * 2 y' / L^2, +-0.35). Throws std::invalid_argument for
/// a non-positive lookahead.
double pp_steering(double y_prime, double lookahead, double gain);

double teacher_lookahead(double v, double kappa_max);
double teacher_gain(double v);
PPParams teacher_params(double v, double kappa_max);

/// Linear v -> L_d over [v_lo, v_hi] onto [1.0, 2.5], clipped.
double adaptive_lookahead(double v, double v_lo, double v_hi);

namespace source {
struct Fixed {
  PPParams params;
};
struct AdaptiveLinear {
  double v_lo{0.0};
  double v_hi{1.0};
  double gain{0.9};
};
struct Teacher {};
struct External {
  double timeout{kDefaultStalenessTimeout};
};
}  // namespace source

using ParamSource = std::variant<source::Fixed, source::AdaptiveLinear, source::Teacher, source::External>;

enum class ControlMode { kRl, kTeacher, kFixed, kAdaptive };

std::string_view mode_name(ControlMode mode);

/// Single-writer/single-reader handoff of the latest external action.
class ActionSlot {
 public:
  void post(const PPParams& action, double stamp);
  struct Entry {
    PPParams action;
    double stamp;
  };
  std::optional<Entry> latest() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::optional<Entry> entry_;
};

struct PPStepResult {
  Command command;
  PPParams params;  // parameters actually applied (post smoothing)
  ControlMode mode{ControlMode::kFixed};
  std::size_t nearest{0};
  CurvatureTaps taps{};
  Vec2 target{};
  double y_prime{0.0};
};

/// Pure Pursuit tracker with a pluggable parameter source. Owns the smoother
/// and the external action slot; one instance per control loop.
class PurePursuitController {
 public:
  explicit PurePursuitController(ParamSource source, SmootherState initial = {});

  void reset();
  void reset(const SmootherState& initial);

  ActionSlot& slot() { return slot_; }
  const ParamSource& source() const { return source_; }
  const SmootherState& smoother() const { return smoother_; }

  PPStepResult step(const Pose& pose, double speed, const Raceline& raceline, double now);

 private:
  ParamSource source_;
  SmootherState initial_;
  SmootherState smoother_;
  ActionSlot slot_;
};

}  // namespace rlpp

#endif  // RLPP_PURE_PURSUIT_HPP_
