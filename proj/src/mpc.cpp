#include "rlpp/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlpp {

void MPCConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("MPCConfig: horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("MPCConfig: dt must be positive");
  auto non_negative = [](const auto& arr) { return std::all_of(arr.begin(), arr.end(), [](double w) { return w >= 0.0; }); };
  if (!non_negative(q) || !non_negative(q_terminal) || !non_negative(r) || !non_negative(r_delta)) {
    throw std::invalid_argument("MPCConfig: weights must be non-negative");
  }
  if (!(delta_max > 0.0 && a_max > 0.0 && delta_rate_max > 0.0 && wheelbase > 0.0)) {
    throw std::invalid_argument("MPCConfig: bounds and wheelbase must be positive");
  }
}

HorizonReference build_reference(const Raceline& raceline, const VehicleState& state, const MPCConfig& cfg) {
  const std::size_t n = raceline.size();
  const double travel = std::max(state.v, cfg.v_floor) * cfg.dt;
  const auto advance = static_cast<std::size_t>(std::max(1.0, std::round(travel / raceline.mean_spacing())));

  HorizonReference ref;
  std::size_t idx = raceline.nearest_index(state.position());
  double prev_psi = 0.0;
  for (int t = 0; t <= cfg.horizon; ++t) {
    const auto& w = raceline[idx];
    double psi = raceline.tangent_heading(idx);
    if (t > 0) psi = prev_psi + wrap_angle(psi - prev_psi);
    prev_psi = psi;
    ref.states.push_back(MpcState(w.x, w.y, w.v_max, psi));
    ref.curvature.push_back(w.kappa);
    ref.indices.push_back(idx);
    idx = (idx + advance) % n;
  }
  return ref;
}

MpcState mpc_dynamics(const MpcState& s, const MpcControl& u, double wheelbase) {
  const double v = s[2];
  const double psi = s[3];
  return {v * std::cos(psi), v * std::sin(psi), u[0], v / wheelbase * std::tan(u[1])};
}

AffineModel linearize(const MpcState& ref_state, const MpcControl& ref_control, double wheelbase, double dt) {
  const double v = ref_state[2];
  const double psi = ref_state[3];
  const double delta = ref_control[1];
  const double cos_d = std::cos(delta);

  Eigen::Matrix4d jx = Eigen::Matrix4d::Zero();
  jx(0, 2) = std::cos(psi);
  jx(0, 3) = -v * std::sin(psi);
  jx(1, 2) = std::sin(psi);
  jx(1, 3) = v * std::cos(psi);
  jx(3, 2) = std::tan(delta) / wheelbase;

  Eigen::Matrix<double, 4, 2> ju = Eigen::Matrix<double, 4, 2>::Zero();
  ju(2, 0) = 1.0;
  ju(3, 1) = v / (wheelbase * cos_d * cos_d);

  AffineModel m;
  m.a = Eigen::Matrix4d::Identity() + dt * jx;
  m.b = dt * ju;
  m.c = dt * (mpc_dynamics(ref_state, ref_control, wheelbase) - jx * ref_state - ju * ref_control);
  return m;
}

std::vector<MpcControl> reference_controls(const HorizonReference& ref, double wheelbase) {
  std::vector<MpcControl> controls;
  for (std::size_t t = 0; t + 1 < ref.states.size(); ++t) {
    controls.push_back(MpcControl(0.0, std::atan(wheelbase * ref.curvature[t])));
  }
  return controls;
}

QPProblem assemble_qp(const HorizonReference& ref, const std::vector<AffineModel>& models, const MpcState& current,
                      const MPCConfig& cfg) {
  const int T = cfg.horizon;
  if (static_cast<int>(ref.states.size()) != T + 1 || static_cast<int>(models.size()) != T) {
    throw std::invalid_argument("assemble_qp: reference needs horizon+1 states and horizon models");
  }
  const QPLayout lay{T};
  const auto nv = lay.num_variables();
  const auto nc = lay.num_constraints();

  QPProblem qp;
  qp.P = Eigen::MatrixXd::Zero(nv, nv);
  qp.q = Eigen::VectorXd::Zero(nv);
  qp.A = Eigen::MatrixXd::Zero(nc, nv);
  qp.l = Eigen::VectorXd::Zero(nc);
  qp.u = Eigen::VectorXd::Zero(nc);

  // Cost (0.5 z'Pz + q'z is twice-scaled to match sum of weighted squares).
  for (int t = 0; t <= T; ++t) {
    const auto& w = t < T ? cfg.q : cfg.q_terminal;
    for (int k = 0; k < 4; ++k) {
      qp.P(lay.state(t) + k, lay.state(t) + k) += 2.0 * w[k];
      qp.q[lay.state(t) + k] -= 2.0 * w[k] * ref.states[t][k];
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < 2; ++k) qp.P(lay.control(t) + k, lay.control(t) + k) += 2.0 * cfg.r[k];
  }
  for (int t = 0; t + 1 < T; ++t) {
    for (int k = 0; k < 2; ++k) {
      const auto i = lay.control(t) + k;
      const auto j = lay.control(t + 1) + k;
      const double w = 2.0 * cfg.r_delta[k];
      qp.P(i, i) += w;
      qp.P(j, j) += w;
      qp.P(i, j) -= w;
      qp.P(j, i) -= w;
    }
  }

  Eigen::Index row = 0;
  for (int k = 0; k < 4; ++k, ++row) {
    qp.A(row, lay.state(0) + k) = 1.0;
    qp.l[row] = qp.u[row] = current[k];
  }
  for (int t = 0; t < T; ++t) {
    const auto& m = models[t];
    for (int k = 0; k < 4; ++k, ++row) {
      qp.A(row, lay.state(t + 1) + k) = 1.0;
      for (int j = 0; j < 4; ++j) qp.A(row, lay.state(t) + j) -= m.a(k, j);
      for (int j = 0; j < 2; ++j) qp.A(row, lay.control(t) + j) -= m.b(k, j);
      qp.l[row] = qp.u[row] = m.c[k];
    }
  }
  for (int t = 0; t < T; ++t, ++row) {
    qp.A(row, lay.control(t) + 1) = 1.0;
    qp.l[row] = -cfg.delta_max;
    qp.u[row] = cfg.delta_max;
  }
  for (int t = 0; t < T; ++t, ++row) {
    qp.A(row, lay.control(t)) = 1.0;
    qp.l[row] = -cfg.a_max;
    qp.u[row] = cfg.a_max;
  }
  const double max_step = cfg.delta_rate_max * cfg.dt;
  for (int t = 0; t + 1 < T; ++t, ++row) {
    qp.A(row, lay.control(t + 1) + 1) = 1.0;
    qp.A(row, lay.control(t) + 1) = -1.0;
    qp.l[row] = -max_step;
    qp.u[row] = max_step;
  }
  return qp;
}

MpcTracker::MpcTracker(MPCConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

MpcStepResult MpcTracker::step(const Raceline& raceline, const VehicleState& state, const Command& prev_command,
                               double dt_control) {
  auto ref = build_reference(raceline, state, cfg_);
  // Solve in a frame centred on the vehicle; the model is translation invariant.
  for (auto& s : ref.states) {
    s[0] -= state.x;
    s[1] -= state.y;
  }
  const auto controls = reference_controls(ref, cfg_.wheelbase);
  std::vector<AffineModel> models;
  models.reserve(controls.size());
  for (int t = 0; t < cfg_.horizon; ++t) models.push_back(linearize(ref.states[t], controls[t], cfg_.wheelbase, cfg_.dt));

  const double psi0 = ref.states[0][3] + wrap_angle(state.theta - ref.states[0][3]);
  const MpcState current(0.0, 0.0, state.v, psi0);
  const auto qp = assemble_qp(ref, models, current, cfg_);
  const auto sol = admm_solve(qp, cfg_.solver, warm_);

  MpcStepResult out;
  out.converged = sol.converged;
  out.iterations = sol.iterations;
  out.primal_residual = sol.primal_residual;
  out.dual_residual = sol.dual_residual;
  out.reference_head = ref.states.front() + MpcState(state.x, state.y, 0.0, 0.0);
  if (!sol.converged) {
    warm_.reset();
    out.command = prev_command;
    return out;
  }
  warm_ = sol.iterate();
  const QPLayout lay{cfg_.horizon};
  out.first_control = sol.x.segment<2>(lay.control(0));
  // Clip to the box: ADMM satisfies it only to within the primal tolerance.
  out.first_control[0] = std::clamp(out.first_control[0], -cfg_.a_max, cfg_.a_max);
  out.first_control[1] = std::clamp(out.first_control[1], -cfg_.delta_max, cfg_.delta_max);
  out.command.delta = out.first_control[1];
  out.command.v_cmd = std::max(0.0, state.v + out.first_control[0] * dt_control);
  return out;
}

MpcStepResult mpc_step(const Raceline& raceline, const VehicleState& state, const Command& prev_command,
                       const MPCConfig& cfg, double dt_control) {
  MpcTracker tracker(cfg);
  return tracker.step(raceline, state, prev_command, dt_control);
}

}  // namespace rlpp
