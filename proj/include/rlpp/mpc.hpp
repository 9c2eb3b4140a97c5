#ifndef RLPP_MPC_HPP_
#define RLPP_MPC_HPP_

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rlpp/qp.hpp"
#include "rlpp/raceline.hpp"
#include "rlpp/vehicle.hpp"

namespace rlpp {

// MPC state ordering is (x, y, v, psi); control ordering is (a, delta).
using MpcState = Eigen::Vector4d;
using MpcControl = Eigen::Vector2d;

struct MPCConfig {
  int horizon{8};
  double dt{0.1};
  std::array<double, 4> q{13.5, 13.5, 5.5, 13.0};
  std::array<double, 4> q_terminal{13.5, 13.5, 5.5, 13.0};
  std::array<double, 2> r{0.01, 5.0};
  std::array<double, 2> r_delta{0.01, 5.0};
  double delta_max{0.4189};
  double a_max{3.0};
  double delta_rate_max{std::numbers::pi};
  double v_floor{0.5};
  double wheelbase{0.33};
  AdmmSettings solver{};

  void validate() const;
};

struct HorizonReference {
  std::vector<MpcState> states;       // horizon + 1 entries, psi unwrapped
  std::vector<double> curvature;      // signed curvature at each reference waypoint
  std::vector<std::size_t> indices;   // raceline indices used
};

HorizonReference build_reference(const Raceline& raceline, const VehicleState& state, const MPCConfig& cfg);

struct AffineModel {
  Eigen::Matrix4d a;
  Eigen::Matrix<double, 4, 2> b;
  Eigen::Vector4d c;
};

/// Forward-Euler affine model x+ = A x + B u + c about (ref_state, ref_control).
AffineModel linearize(const MpcState& ref_state, const MpcControl& ref_control, double wheelbase, double dt);

/// Continuous-time kinematic model in MPC ordering.
MpcState mpc_dynamics(const MpcState& s, const MpcControl& u, double wheelbase);

/// Curvature-feedforward reference controls: zero acceleration, atan(L kappa).
std::vector<MpcControl> reference_controls(const HorizonReference& ref, double wheelbase);

// Decision vector layout helpers.
struct QPLayout {
  int horizon;
  Eigen::Index state(int t) const { return 4 * t; }
  Eigen::Index control(int t) const { return 4 * (horizon + 1) + 2 * t; }
  Eigen::Index num_variables() const { return 4 * (horizon + 1) + 2 * horizon; }
  Eigen::Index rate_rows_begin() const { return 4 + 4 * horizon + 2 * horizon; }
  Eigen::Index num_constraints() const { return 4 + 4 * horizon + 2 * horizon + (horizon - 1); }
};

QPProblem assemble_qp(const HorizonReference& ref, const std::vector<AffineModel>& models, const MpcState& current,
                      const MPCConfig& cfg);

struct MpcStepResult {
  Command command;
  bool converged{false};
  int iterations{0};
  double primal_residual{0.0};
  double dual_residual{0.0};
  MpcControl first_control{MpcControl::Zero()};
  MpcState reference_head{MpcState::Zero()};
};

/// Receding-horizon tracker. Keeps the previous ADMM iterate for warm starts.
class MpcTracker {
 public:
  explicit MpcTracker(MPCConfig cfg = {});

  const MPCConfig& config() const { return cfg_; }
  void reset() { warm_.reset(); }

  MpcStepResult step(const Raceline& raceline, const VehicleState& state, const Command& prev_command,
                     double dt_control);

 private:
  MPCConfig cfg_;
  std::optional<AdmmIterate> warm_;
};

/// Cold-start single step; holds prev_command when the solver does not converge.
MpcStepResult mpc_step(const Raceline& raceline, const VehicleState& state, const Command& prev_command,
                       const MPCConfig& cfg, double dt_control);

}  // namespace rlpp

#endif  // RLPP_MPC_HPP_
