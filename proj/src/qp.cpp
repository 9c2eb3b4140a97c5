#include "rlpp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rlpp {

namespace {

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Equality-constrained re-solve on the active set read off the ADMM iterate.
// Returns false when the guess is inconsistent (wrong multiplier signs or
// bound violations) or not better than the ADMM point.
bool polish(const QPProblem& qp, const AdmmSettings& settings, QPSolution& sol) {
  const auto n = qp.num_variables();
  const auto m = qp.num_constraints();
  std::vector<Eigen::Index> rows;
  std::vector<double> rhs_b;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (qp.l[i] == qp.u[i]) {
      rows.push_back(i);
      rhs_b.push_back(qp.l[i]);
    } else if (sol.z[i] - qp.l[i] < -sol.y[i]) {
      rows.push_back(i);
      rhs_b.push_back(qp.l[i]);
    } else if (qp.u[i] - sol.z[i] < sol.y[i]) {
      rows.push_back(i);
      rhs_b.push_back(qp.u[i]);
    }
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a_act(k, n);
  for (Eigen::Index r = 0; r < k; ++r) a_act.row(r) = qp.A.row(rows[r]);

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
  kkt.topLeftCorner(n, n) = qp.P;
  kkt.topRightCorner(n, k) = a_act.transpose();
  kkt.bottomLeftCorner(k, n) = a_act;
  Eigen::MatrixXd reg = kkt;
  reg.diagonal().head(n).array() += settings.polish_delta;
  reg.diagonal().tail(k).array() -= settings.polish_delta;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(reg);

  Eigen::VectorXd rhs(n + k);
  rhs.head(n) = -qp.q;
  for (Eigen::Index r = 0; r < k; ++r) rhs[n + r] = rhs_b[r];
  Eigen::VectorXd sol_xy = lu.solve(rhs);
  for (int it = 0; it < settings.polish_refine; ++it) sol_xy += lu.solve(rhs - kkt * sol_xy);
  if (!sol_xy.allFinite()) return false;

  const Eigen::VectorXd x = sol_xy.head(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < k; ++r) y[rows[r]] = sol_xy[n + r];
  const Eigen::VectorXd ax = qp.A * x;
  const Eigen::VectorXd z = ax.cwiseMax(qp.l).cwiseMin(qp.u);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = rows[r];
    if (qp.l[i] == qp.u[i]) continue;
    const bool at_lower = rhs_b[r] == qp.l[i];
    if (at_lower ? y[i] > settings.eps_dual : y[i] < -settings.eps_dual) return false;
  }
  const double primal = inf_norm(ax - z);
  const double dual = inf_norm(qp.P * x + qp.q + qp.A.transpose() * y);
  if (primal > std::max(sol.primal_residual, settings.eps_primal) ||
      dual > std::max(sol.dual_residual, settings.eps_dual)) {
    return false;
  }
  sol.x = x;
  sol.z = z;
  sol.y = y;
  sol.primal_residual = primal;
  sol.dual_residual = dual;
  return true;
}

}  // namespace

void QPProblem::validate() const {
  const auto n = q.size();
  const auto m = l.size();
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument("QPProblem: P must be n x n");
  if (A.rows() != m || A.cols() != n) throw std::invalid_argument("QPProblem: A must be m x n");
  if (u.size() != m) throw std::invalid_argument("QPProblem: l and u sizes differ");
  if (n > 0 && (P - P.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
    throw std::invalid_argument("QPProblem: P is not symmetric");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (l[i] > u[i]) throw std::invalid_argument("QPProblem: l > u in row " + std::to_string(i));
  }
}

QPSolution admm_solve(const QPProblem& qp, const AdmmSettings& settings, const std::optional<AdmmIterate>& warm_start) {
  qp.validate();
  const auto n = qp.num_variables();
  const auto m = qp.num_constraints();

  // Equality rows get a stiffer penalty; free rows a negligible one.
  Eigen::VectorXd row_scale(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (qp.l[i] == qp.u[i]) row_scale[i] = settings.eq_rho_scale;
    else if (std::isinf(qp.l[i]) && std::isinf(qp.u[i])) row_scale[i] = kRhoMin / settings.rho;
    else row_scale[i] = 1.0;
  }

  double rho = std::clamp(settings.rho, kRhoMin, kRhoMax);
  Eigen::VectorXd rho_vec = rho * row_scale;
  Eigen::LDLT<Eigen::MatrixXd> kkt;
  auto factorize = [&] {
    Eigen::MatrixXd k = qp.P + qp.A.transpose() * rho_vec.asDiagonal() * qp.A;
    k.diagonal().array() += settings.sigma;
    kkt.compute(k);
  };
  factorize();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  if (warm_start) {
    if (warm_start->x.size() == n) x = warm_start->x;
    if (warm_start->z.size() == m) z = warm_start->z;
    if (warm_start->y.size() == m) y = warm_start->y;
  }
  z = z.cwiseMax(qp.l).cwiseMin(qp.u);

  QPSolution sol;
  for (int it = 1; it <= settings.max_iter; ++it) {
    const Eigen::VectorXd rhs = settings.sigma * x - qp.q + qp.A.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = kkt.solve(rhs);
    const Eigen::VectorXd z_tilde = qp.A * x_tilde;

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Eigen::VectorXd z_relaxed = settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    const Eigen::VectorXd z_next = (z_relaxed + y.cwiseQuotient(rho_vec)).cwiseMax(qp.l).cwiseMin(qp.u);
    y += rho_vec.cwiseProduct(z_relaxed - z_next);
    z = z_next;

    sol.primal_residual = inf_norm(qp.A * x - z);
    sol.dual_residual = inf_norm(qp.P * x + qp.q + qp.A.transpose() * y);
    sol.iterations = it;
    if (sol.primal_residual < settings.eps_primal && sol.dual_residual < settings.eps_dual) {
      sol.converged = true;
      break;
    }
    if (settings.adaptive_rho && it % settings.adapt_interval == 0) {
      double next = rho;
      if (sol.primal_residual > settings.adapt_ratio * sol.dual_residual) next = rho * 10.0;
      else if (sol.dual_residual > settings.adapt_ratio * sol.primal_residual) next = rho / 10.0;
      next = std::clamp(next, kRhoMin, kRhoMax);
      if (next != rho) {
        rho_vec *= next / rho;
        rho = next;
        factorize();
      }
    }
  }
  sol.x = std::move(x);
  sol.z = std::move(z);
  sol.y = std::move(y);
  sol.rho = rho;
  if (sol.converged && settings.polish) sol.polished = polish(qp, settings, sol);
  return sol;
}

}  // namespace rlpp
