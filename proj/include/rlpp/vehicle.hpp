#ifndef RLPP_VEHICLE_HPP_
#define RLPP_VEHICLE_HPP_

#include <numbers>

#include "rlpp/raceline.hpp"

namespace rlpp {

struct VehicleState {
  double x{0.0};
  double y{0.0};
  double theta{0.0};  // heading, wrapped to (-pi, pi]
  double v{0.0};      // longitudinal speed

  Pose pose() const { return {x, y, theta}; }
  Vec2 position() const { return {x, y}; }
};

struct StateDerivative {
  double x_dot{0.0};
  double y_dot{0.0};
  double theta_dot{0.0};
  double v_dot{0.0};
};

struct Command {
  double delta{0.0};  // steering angle [rad]
  double v_cmd{0.0};  // commanded speed [m/s]
};

struct SimConfig {
  double wheelbase{0.33};
  double dt_physics{0.01};
  double dt_control{0.05};
  double delta_max{0.4189};
  double delta_rate_max{std::numbers::pi};  // 180 deg/s
  double a_max{3.0};
  double speed_gain{2.0};

  int substeps() const;
  void validate() const;
};

double wrap_angle(double angle);

StateDerivative derivatives(const VehicleState& s, double accel, double delta, double wheelbase);

/// Classic RK4 with accel and delta held over the step.
VehicleState rk4_step(const VehicleState& s, double accel, double delta, double dt, double wheelbase);

double speed_controller(double v, double v_cmd, const SimConfig& cfg);

struct ControlStepResult {
  VehicleState state;
  double applied_delta{0.0};
};

/// One zero-order-hold control interval: clamps and rate-limits steering per
/// physics substep, re-evaluates the speed loop each substep.
ControlStepResult control_step(const VehicleState& s, const Command& cmd, double prev_delta, const SimConfig& cfg);

/// Off-track proxy: strictly outside the raceline corridor.
bool collision_check(const Raceline& raceline, const VehicleState& s);

}  // namespace rlpp

#endif  // RLPP_VEHICLE_HPP_
