#ifndef RLPP_QP_HPP_
#define RLPP_QP_HPP_

#include <optional>

#include <Eigen/Dense>

namespace rlpp {

/// minimize 0.5 x'Px + q'x  subject to  l <= Ax <= u.
/// Rows with l == u are equality constraints; infinite bounds are allowed.
struct QPProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_variables() const { return q.size(); }
  Eigen::Index num_constraints() const { return l.size(); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }

  // Throws std::invalid_argument on inconsistent dimensions, asymmetric P or l > u.
  void validate() const;
};

struct AdmmSettings {
  double rho{0.1};
  double sigma{1e-6};
  double alpha{1.6};  // over-relaxation
  double eps_primal{1e-6};
  double eps_dual{1e-6};
  int max_iter{4000};
  bool adaptive_rho{true};
  int adapt_interval{25};
  double adapt_ratio{10.0};
  double eq_rho_scale{1e3};
  // After convergence, re-solve the KKT system on the guessed active set and
  // keep the result when it is at least as accurate.
  bool polish{true};
  double polish_delta{1e-10};
  int polish_refine{3};
};

struct AdmmIterate {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  Eigen::VectorXd y;
};

struct QPSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // projected constraint values
  Eigen::VectorXd y;  // constraint multipliers
  double primal_residual{0.0};  // ||Ax - z||_inf
  double dual_residual{0.0};    // ||Px + q + A'y||_inf
  int iterations{0};
  bool converged{false};
  bool polished{false};
  double rho{0.0};

  AdmmIterate iterate() const { return {x, z, y}; }
};

/// Operator-splitting ADMM with over-relaxation and residual-balancing
/// penalty updates. A non-converged result is returned with its residuals
/// (converged == false) rather than thrown.
QPSolution admm_solve(const QPProblem& qp, const AdmmSettings& settings = {},
                      const std::optional<AdmmIterate>& warm_start = std::nullopt);

}  // namespace rlpp

#endif  // RLPP_QP_HPP_
