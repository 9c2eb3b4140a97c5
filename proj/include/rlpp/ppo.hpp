#ifndef RLPP_PPO_HPP_
#define RLPP_PPO_HPP_

#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rlpp/nn.hpp"

namespace rlpp {

enum class LrSchedule { kLinear, kCosine };

LrSchedule parse_lr_schedule(std::string_view name);
std::string_view lr_schedule_name(LrSchedule s);

/// `remaining` is the fraction of training left, 1 at the start and 0 at the end.
double lr_schedule(LrSchedule kind, double base_lr, double remaining);

struct PPOConfig {
  int n_steps{4096};
  int n_envs{1};
  int minibatch{256};
  int epochs{5};
  double gamma{0.99};
  double gae_lambda{0.98};
  double clip_range{0.2};
  double target_kl{0.015};
  double entropy_coef{0.02};
  double value_coef{0.6};
  double max_grad_norm{0.7};
  double learning_rate{2.4e-4};
  LrSchedule schedule{LrSchedule::kLinear};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-8};
  double advantage_eps{1e-8};
  std::vector<int> hidden{64, 64};
  double initial_log_std{-0.6931471805599453};  // ln 0.5

  void validate() const;
};

/// On-policy storage, laid out time-major: entry (t, e) lives at t*n_envs + e.
struct RolloutBuffer {
  RolloutBuffer(int n_steps, int n_envs, int obs_dim, int action_dim);

  int n_steps, n_envs;
  int size{0};  // number of filled time steps
  Eigen::MatrixXd observations;  // obs_dim x (n_steps*n_envs)
  Eigen::MatrixXd actions;       // action_dim x (n_steps*n_envs)
  Eigen::VectorXd log_probs, rewards, values;
  std::vector<unsigned char> episode_starts;
  Eigen::VectorXd advantages, returns;

  bool full() const { return size == n_steps; }
  void clear() { size = 0; }
  int capacity() const { return n_steps * n_envs; }
};

/// GAE for one environment's sequence. episode_starts[t] marks that step t
/// begins a new episode, so step t-1 was terminal. `last_done` flags the
/// final step as terminal (no bootstrap).
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const unsigned char> episode_starts, double last_value, bool last_done, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns);

void compute_gae(RolloutBuffer& buffer, std::span<const double> last_values, std::span<const unsigned char> last_dones,
                 double gamma, double lambda);

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n, double beta1, double beta2, double eps);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }
  long steps() const { return t_; }
  void set_state(Eigen::VectorXd m, Eigen::VectorXd v, long t);

 private:
  Eigen::VectorXd m_, v_;
  long t_{0};
  double beta1_{0.9}, beta2_{0.999}, eps_{1e-8};
};

/// Scales `grad` in place so its Euclidean norm is at most max_norm; returns
/// the pre-clip norm.
double clip_grad_norm(Eigen::VectorXd& grad, double max_norm);

struct PPOBatch {
  Eigen::MatrixXd observations;  // obs_dim x B (normalised)
  Eigen::MatrixXd actions;       // action_dim x B (normalised, unclipped)
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;    // already standardised
  Eigen::VectorXd returns;
};

struct LossBreakdown {
  double policy_loss{0.0};
  double value_loss{0.0};  // mean squared error
  double entropy{0.0};
  double total{0.0};
  double approx_kl{0.0};
  double clip_fraction{0.0};
};

struct LossGradient {
  LossBreakdown loss;
  Eigen::VectorXd policy_grad;  // GaussianPolicy::params() layout
  Eigen::VectorXd value_grad;   // DenseNet::params() layout
};

/// Full PPO objective: -L_clip + c_v * MSE(V, R) - c_s * H, with exact
/// reverse-mode gradients when `with_grad` is set.
LossGradient ppo_loss(const GaussianPolicy& policy, const DenseNet& value_net, const PPOBatch& batch,
                      const PPOConfig& cfg, bool with_grad = true);

/// Low-variance estimator mean(log_old - log_new + r - 1).
double approx_kl(std::span<const double> old_log_probs, std::span<const double> new_log_probs);

Eigen::VectorXd standardize(const Eigen::VectorXd& x, double eps);

struct Diagnostics {
  double approx_kl{0.0};
  double clip_fraction{0.0};
  Eigen::VectorXd action_std;
  double value_loss{0.0};
  double policy_loss{0.0};
  double entropy{0.0};
  double learning_rate{0.0};
  double grad_norm{0.0};
  int epochs_run{0};
  bool early_stopped{false};
  bool aborted{false};  // non-finite loss
};

/// One PPO update over a filled buffer with computed advantages.
Diagnostics ppo_update(GaussianPolicy& policy, DenseNet& value_net, Adam& optimizer, const RolloutBuffer& buffer,
                       const PPOConfig& cfg, double learning_rate, std::mt19937_64& rng);

}  // namespace rlpp

#endif  // RLPP_PPO_HPP_
