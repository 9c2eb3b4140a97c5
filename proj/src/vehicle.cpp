#include "rlpp/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlpp {

int SimConfig::substeps() const { return static_cast<int>(std::lround(dt_control / dt_physics)); }

void SimConfig::validate() const {
  if (!(wheelbase > 0.0 && dt_physics > 0.0 && dt_control > 0.0 && delta_max > 0.0 && delta_rate_max > 0.0 &&
        a_max > 0.0 && speed_gain > 0.0)) {
    throw std::invalid_argument("SimConfig: all limits and timesteps must be positive");
  }
  const double ratio = dt_control / dt_physics;
  if (substeps() < 1 || std::abs(ratio - static_cast<double>(substeps())) > 1e-9 * ratio) {
    throw std::invalid_argument("SimConfig: dt_control must be an integer multiple of dt_physics");
  }
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

StateDerivative derivatives(const VehicleState& s, double accel, double delta, double wheelbase) {
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), s.v / wheelbase * std::tan(delta), accel};
}

VehicleState rk4_step(const VehicleState& s, double accel, double delta, double dt, double wheelbase) {
  auto advance = [](const VehicleState& base, const StateDerivative& d, double h) {
    return VehicleState{base.x + h * d.x_dot, base.y + h * d.y_dot, base.theta + h * d.theta_dot, base.v + h * d.v_dot};
  };
  const auto k1 = derivatives(s, accel, delta, wheelbase);
  const auto k2 = derivatives(advance(s, k1, 0.5 * dt), accel, delta, wheelbase);
  const auto k3 = derivatives(advance(s, k2, 0.5 * dt), accel, delta, wheelbase);
  const auto k4 = derivatives(advance(s, k3, dt), accel, delta, wheelbase);
  const double w = dt / 6.0;
  VehicleState out;
  out.x = s.x + w * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot);
  out.y = s.y + w * (k1.y_dot + 2.0 * k2.y_dot + 2.0 * k3.y_dot + k4.y_dot);
  out.theta = wrap_angle(s.theta + w * (k1.theta_dot + 2.0 * k2.theta_dot + 2.0 * k3.theta_dot + k4.theta_dot));
  out.v = s.v + w * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  return out;
}

double speed_controller(double v, double v_cmd, const SimConfig& cfg) {
  return std::clamp(cfg.speed_gain * (v_cmd - v), -cfg.a_max, cfg.a_max);
}

ControlStepResult control_step(const VehicleState& s, const Command& cmd, double prev_delta, const SimConfig& cfg) {
  const double target = std::clamp(cmd.delta, -cfg.delta_max, cfg.delta_max);
  const double max_change = cfg.delta_rate_max * cfg.dt_physics;
  ControlStepResult r{s, prev_delta};
  for (int k = 0; k < cfg.substeps(); ++k) {
    r.applied_delta += std::clamp(target - r.applied_delta, -max_change, max_change);
    const double accel = speed_controller(r.state.v, cmd.v_cmd, cfg);
    r.state = rk4_step(r.state, accel, r.applied_delta, cfg.dt_physics, cfg.wheelbase);
  }
  return r;
}

bool collision_check(const Raceline& raceline, const VehicleState& s) {
  return std::abs(raceline.lateral_error(s.position())) > raceline.half_width();
}

}  // namespace rlpp
