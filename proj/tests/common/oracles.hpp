// Independent reference implementations shared by the unit and acceptance
// suites. Nothing here calls the library routine it is checking.
#ifndef RLPP_TESTS_ORACLES_HPP_
#define RLPP_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rlpp/env.hpp"
#include "rlpp/qp.hpp"

namespace rlpp::oracle {

// Reward written out term by term from the published weights.
inline double reward(double v, double L, double g, double L_prev, double g_prev, double kappa_local,
                     double kappa_max, double dp, bool collision) {
  // Teacher targets, hand-expanded.
  const double L_star = std::min(std::max(0.50 + 0.28 * v - 3.5 * kappa_max, 0.35), 4.0);
  const double g_star = std::min(std::max(0.95 - v / 60.0, 0.45), 1.15);
  double r = 1.8 * v;
  r -= 3.0 * std::fabs(L - L_star);
  r -= 0.0 * std::fabs(g - g_star);
  r -= 0.4 * std::fabs(L - L_prev);
  r -= 0.0 * std::fabs(g - g_prev);
  r -= 1.5 * std::fabs(kappa_local);
  r -= 2.0 * L * kappa_max;
  if (kappa_max > 0.3 && L <= 0.50 + 0.28 * v) r += 1.5;
  if (collision) r -= 10.0;
  if (v < 0.5) r -= 0.5;
  r += 1.0 * dp;
  if (r < -30.0) r = -30.0;
  if (r > 100.0) r = 100.0;
  return r;
}

// Advantages by explicit double loop: A_t = sum_k (gamma*lambda)^(k-t) delta_k
// up to and including the first terminal step.
struct GaeOut {
  std::vector<double> advantages, returns;
};

inline GaeOut gae_brute(const std::vector<double>& r, const std::vector<double>& v,
                        const std::vector<unsigned char>& starts, double last_value, bool last_done, double gamma,
                        double lambda) {
  const std::size_t n = r.size();
  auto terminal = [&](std::size_t t) { return t + 1 < n ? starts[t + 1] != 0 : last_done; };
  auto next_value = [&](std::size_t t) { return t + 1 < n ? v[t + 1] : last_value; };
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) delta[t] = r[t] + (terminal(t) ? 0.0 : gamma * next_value(t)) - v[t];
  GaeOut out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t t = 0; t < n; ++t) {
    double a = 0.0, w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      a += w * delta[k];
      if (terminal(k)) break;
      w *= gamma * lambda;
    }
    out.advantages[t] = a;
    out.returns[t] = a + v[t];
  }
  return out;
}

// Discounted Monte Carlo return with bootstrap, for the lambda = 1 identity.
inline std::vector<double> discounted_returns(const std::vector<double>& r, const std::vector<unsigned char>& starts,
                                              double last_value, bool last_done, double gamma) {
  const std::size_t n = r.size();
  std::vector<double> g(n);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0, w = 1.0;
    std::size_t k = t;
    bool ended = false;
    for (; k < n; ++k) {
      sum += w * r[k];
      const bool term = k + 1 < n ? starts[k + 1] != 0 : last_done;
      if (term) {
        ended = true;
        break;
      }
      w *= gamma;
    }
    if (!ended) sum += w * last_value;
    g[t] = sum;
  }
  return g;
}

// Feasible random QP: rows mix two-sided, one-sided, free and equality bounds.
inline QPProblem random_qp(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.1, 1.0);
  std::uniform_int_distribution<int> kind(0, 5);
  QPProblem qp;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
  qp.P = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.P = 0.5 * (qp.P + qp.P.transpose());
  qp.q.resize(n);
  for (int i = 0; i < n; ++i) qp.q[i] = 3.0 * nd(rng);
  qp.A.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) qp.A(i, j) = nd(rng);
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = 0.5 * nd(rng);
  const Eigen::VectorXd ax = qp.A * x0;
  const double inf = std::numeric_limits<double>::infinity();
  qp.l.resize(m);
  qp.u.resize(m);
  for (int i = 0; i < m; ++i) {
    switch (kind(rng)) {
      case 0: qp.l[i] = qp.u[i] = ax[i]; break;
      case 1: qp.l[i] = -inf; qp.u[i] = ax[i] + ud(rng); break;
      case 2: qp.l[i] = ax[i] - ud(rng); qp.u[i] = inf; break;
      case 3: qp.l[i] = -inf; qp.u[i] = inf; break;
      default: qp.l[i] = ax[i] - ud(rng); qp.u[i] = ax[i] + ud(rng); break;
    }
  }
  return qp;
}

struct KktResiduals {
  double stationarity{0.0};     // ||Px + q + A'y||_inf
  double primal{0.0};           // distance of Ax from [l, u]
  double complementarity{0.0};  // |y+ (u - Ax)| and |y- (Ax - l)| on finite bounds
  double dual_sign{0.0};        // y+ on rows with infinite u, y- on rows with infinite l
  double worst() const { return std::max({stationarity, primal, complementarity, dual_sign}); }
};

inline KktResiduals kkt(const QPProblem& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  KktResiduals k;
  k.stationarity = (qp.P * x + qp.q + qp.A.transpose() * y).lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd ax = qp.A * x;
  for (Eigen::Index i = 0; i < ax.size(); ++i) {
    k.primal = std::max({k.primal, qp.l[i] - ax[i], ax[i] - qp.u[i]});
    const double yp = std::max(y[i], 0.0), ym = std::max(-y[i], 0.0);
    if (std::isfinite(qp.u[i])) k.complementarity = std::max(k.complementarity, yp * std::fabs(qp.u[i] - ax[i]));
    else k.dual_sign = std::max(k.dual_sign, yp);
    if (std::isfinite(qp.l[i])) k.complementarity = std::max(k.complementarity, ym * std::fabs(ax[i] - qp.l[i]));
    else k.dual_sign = std::max(k.dual_sign, ym);
  }
  return k;
}

// Brute-force minimum of 0.5 x'Px + q'x over a 2-D box on a regular grid.
inline double grid_min_2d(const Eigen::Matrix2d& P, const Eigen::Vector2d& q, double lo0, double hi0, double lo1,
                          double hi1, double step) {
  double best = std::numeric_limits<double>::infinity();
  const long n0 = std::lround((hi0 - lo0) / step), n1 = std::lround((hi1 - lo1) / step);
  for (long i = 0; i <= n0; ++i) {
    const double a = lo0 + i * step;
    const double ca = 0.5 * P(0, 0) * a * a + q[0] * a;
    const double cb = P(0, 1) * a + q[1];
    for (long j = 0; j <= n1; ++j) {
      const double b = lo1 + j * step;
      best = std::min(best, ca + b * (cb + 0.5 * P(1, 1) * b));
    }
  }
  return best;
}

// Largest relative mismatch between an analytic gradient and central
// differences of `f`, with an absolute floor on the denominator.
template <class F>
double fd_mismatch(F&& f, Eigen::VectorXd theta, const Eigen::VectorXd& grad, double h = 1e-5, double floor = 1e-7) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    const double fp = f(theta);
    theta[i] = orig - h;
    const double fm = f(theta);
    theta[i] = orig;
    const double fd = (fp - fm) / (2 * h);
    const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), floor});
    worst = std::max(worst, std::fabs(fd - grad[i]) / denom);
  }
  return worst;
}

}  // namespace rlpp::oracle

#endif  // RLPP_TESTS_ORACLES_HPP_
