#include "rlpp/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rlpp {

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "linear") return LrSchedule::kLinear;
  if (name == "cosine") return LrSchedule::kCosine;
  throw std::invalid_argument("unknown learning-rate schedule '" + std::string(name) + "'");
}

std::string_view lr_schedule_name(LrSchedule s) { return s == LrSchedule::kLinear ? "linear" : "cosine"; }

double lr_schedule(LrSchedule kind, double base_lr, double remaining) {
  const double f = std::clamp(remaining, 0.0, 1.0);
  if (kind == LrSchedule::kLinear) return base_lr * f;
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * (1.0 - f)));
}

void PPOConfig::validate() const {
  if (n_steps < 1 || n_envs < 1 || minibatch < 1 || epochs < 1) {
    throw std::invalid_argument("PPOConfig: sizes must be positive");
  }
  if ((n_steps * n_envs) % minibatch != 0) {
    throw std::invalid_argument("PPOConfig: minibatch must divide n_steps * n_envs");
  }
  if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda > 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("PPOConfig: gamma and lambda must lie in (0, 1]");
  }
  if (!(clip_range > 0.0) || !(learning_rate > 0.0) || !(max_grad_norm > 0.0)) {
    throw std::invalid_argument("PPOConfig: clip range, learning rate and grad norm must be positive");
  }
}

RolloutBuffer::RolloutBuffer(int steps, int envs, int obs_dim, int action_dim)
    : n_steps(steps),
      n_envs(envs),
      observations(obs_dim, steps * envs),
      actions(action_dim, steps * envs),
      log_probs(steps * envs),
      rewards(steps * envs),
      values(steps * envs),
      episode_starts(static_cast<std::size_t>(steps * envs), 0),
      advantages(steps * envs),
      returns(steps * envs) {}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const unsigned char> episode_starts, double last_value, bool last_done, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || episode_starts.size() != n || advantages.size() != n || returns.size() != n) {
    throw std::invalid_argument("compute_gae: sequence lengths differ");
  }
  double next_advantage = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    double next_value, non_terminal;
    if (t + 1 == n) {
      next_value = last_value;
      non_terminal = last_done ? 0.0 : 1.0;
    } else {
      next_value = values[t + 1];
      non_terminal = episode_starts[t + 1] ? 0.0 : 1.0;
    }
    const double delta = rewards[t] + gamma * next_value * non_terminal - values[t];
    next_advantage = delta + gamma * lambda * non_terminal * next_advantage;
    advantages[t] = next_advantage;
    returns[t] = next_advantage + values[t];
  }
}

void compute_gae(RolloutBuffer& buffer, std::span<const double> last_values, std::span<const unsigned char> last_dones,
                 double gamma, double lambda) {
  const auto envs = static_cast<std::size_t>(buffer.n_envs);
  const auto steps = static_cast<std::size_t>(buffer.size);
  if (last_values.size() != envs || last_dones.size() != envs) {
    throw std::invalid_argument("compute_gae: need one bootstrap value per environment");
  }
  std::vector<double> r(steps), v(steps), adv(steps), ret(steps);
  std::vector<unsigned char> starts(steps);
  for (std::size_t e = 0; e < envs; ++e) {
    for (std::size_t t = 0; t < steps; ++t) {
      const auto k = static_cast<Eigen::Index>(t * envs + e);
      r[t] = buffer.rewards[k];
      v[t] = buffer.values[k];
      starts[t] = buffer.episode_starts[static_cast<std::size_t>(k)];
    }
    compute_gae(r, v, starts, last_values[e], last_dones[e] != 0, gamma, lambda, adv, ret);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto k = static_cast<Eigen::Index>(t * envs + e);
      buffer.advantages[k] = adv[t];
      buffer.returns[k] = ret[t];
    }
  }
}

Adam::Adam(Eigen::Index n, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::set_state(Eigen::VectorXd m, Eigen::VectorXd v, long t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

double clip_grad_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / (norm + 1e-12);
  return norm;
}

double approx_kl(std::span<const double> old_log_probs, std::span<const double> new_log_probs) {
  if (old_log_probs.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < old_log_probs.size(); ++i) {
    const double log_ratio = new_log_probs[i] - old_log_probs[i];
    sum += std::expm1(log_ratio) - log_ratio;
  }
  return sum / static_cast<double>(old_log_probs.size());
}

Eigen::VectorXd standardize(const Eigen::VectorXd& x, double eps) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  // eps only guards a degenerate batch; as a floor rather than an offset it
  // leaves the result exactly invariant to positive rescaling of x.
  return (x.array() - mean) / std::max(std::sqrt(var), eps);
}

LossGradient ppo_loss(const GaussianPolicy& policy, const DenseNet& value_net, const PPOBatch& batch,
                      const PPOConfig& cfg, bool with_grad) {
  const auto b = batch.observations.cols();
  const double inv_b = 1.0 / static_cast<double>(b);
  DenseNet::Cache pcache, vcache;
  const Eigen::MatrixXd means = policy.mean_net().forward(batch.observations, with_grad ? &pcache : nullptr);
  const Eigen::VectorXd new_lp = policy.log_prob(means, batch.actions);
  const Eigen::VectorXd values = value_net.forward(batch.observations, with_grad ? &vcache : nullptr).row(0).transpose();

  LossGradient out;
  auto& loss = out.loss;
  Eigen::VectorXd dloss_dlogp(b);
  double surrogate = 0.0;
  int clipped = 0;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double log_ratio = new_lp[i] - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantages[i];
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range) * adv;
    if (unclipped <= clipped_term) {
      surrogate += unclipped;
      dloss_dlogp[i] = -inv_b * unclipped;
    } else {
      surrogate += clipped_term;
      dloss_dlogp[i] = 0.0;
    }
    if (std::abs(ratio - 1.0) > cfg.clip_range) ++clipped;
    kl += std::expm1(log_ratio) - log_ratio;
  }
  loss.policy_loss = -surrogate * inv_b;
  loss.value_loss = (values - batch.returns).squaredNorm() * inv_b;
  loss.entropy = policy.entropy();
  loss.total = loss.policy_loss + cfg.value_coef * loss.value_loss - cfg.entropy_coef * loss.entropy;
  loss.approx_kl = kl * inv_b;
  loss.clip_fraction = static_cast<double>(clipped) * inv_b;
  if (!with_grad) return out;

  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std().array()).exp();
  const Eigen::MatrixXd diff = batch.actions - means;
  Eigen::MatrixXd grad_means = (diff.array().colwise() * inv_var).matrix();
  grad_means *= dloss_dlogp.asDiagonal();
  // d logp / d log_std_j = z_j^2 - 1; the entropy term contributes -c_s.
  const Eigen::MatrixXd z2 = (diff.array().square().colwise() * inv_var).matrix();
  const Eigen::VectorXd grad_log_std =
      (z2.array() - 1.0).matrix() * dloss_dlogp - Eigen::VectorXd::Constant(policy.action_dim(), cfg.entropy_coef);

  out.policy_grad.resize(policy.num_params());
  out.policy_grad << policy.mean_net().backward(pcache, grad_means), grad_log_std;
  const Eigen::MatrixXd grad_values = (2.0 * cfg.value_coef * inv_b) * (values - batch.returns).transpose();
  out.value_grad = value_net.backward(vcache, grad_values);
  return out;
}

namespace {

PPOBatch gather(const RolloutBuffer& buf, const Eigen::VectorXd& advantages, std::span<const Eigen::Index> idx) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  PPOBatch batch;
  batch.observations.resize(buf.observations.rows(), b);
  batch.actions.resize(buf.actions.rows(), b);
  batch.old_log_probs.resize(b);
  batch.advantages.resize(b);
  batch.returns.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto k = idx[static_cast<std::size_t>(i)];
    batch.observations.col(i) = buf.observations.col(k);
    batch.actions.col(i) = buf.actions.col(k);
    batch.old_log_probs[i] = buf.log_probs[k];
    batch.advantages[i] = advantages[k];
    batch.returns[i] = buf.returns[k];
  }
  return batch;
}

}  // namespace

Diagnostics ppo_update(GaussianPolicy& policy, DenseNet& value_net, Adam& optimizer, const RolloutBuffer& buffer,
                       const PPOConfig& cfg, double learning_rate, std::mt19937_64& rng) {
  const auto total = static_cast<Eigen::Index>(buffer.size) * buffer.n_envs;
  if (total % cfg.minibatch != 0) throw std::invalid_argument("ppo_update: minibatch must divide the buffer size");
  const auto np = policy.num_params();
  const auto nv = value_net.num_params();

  const Eigen::VectorXd advantages = standardize(buffer.advantages.head(total), cfg.advantage_eps);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);

  Diagnostics diag;
  diag.learning_rate = learning_rate;
  double clip_sum = 0.0, value_sum = 0.0, policy_sum = 0.0, norm_sum = 0.0;
  int minibatches = 0;
  Eigen::VectorXd params(np + nv);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < total; start += cfg.minibatch) {
      const auto batch = gather(buffer, advantages,
                                std::span<const Eigen::Index>(order).subspan(static_cast<std::size_t>(start),
                                                                             static_cast<std::size_t>(cfg.minibatch)));
      auto lg = ppo_loss(policy, value_net, batch, cfg, true);
      if (!std::isfinite(lg.loss.total)) {
        diag.aborted = true;
        return diag;
      }
      Eigen::VectorXd grad(np + nv);
      grad << lg.policy_grad, lg.value_grad;
      norm_sum += clip_grad_norm(grad, cfg.max_grad_norm);
      params << policy.params(), value_net.params();
      optimizer.step(params, grad, learning_rate);
      policy.set_params(params.head(np));
      value_net.set_params(params.tail(nv));
      clip_sum += lg.loss.clip_fraction;
      value_sum += lg.loss.value_loss;
      policy_sum += lg.loss.policy_loss;
      ++minibatches;
    }
    ++diag.epochs_run;
    const Eigen::MatrixXd obs = buffer.observations.leftCols(total);
    const Eigen::VectorXd new_lp = policy.log_prob(policy.mean_net().forward(obs), buffer.actions.leftCols(total));
    diag.approx_kl = approx_kl(std::span<const double>(buffer.log_probs.data(), static_cast<std::size_t>(total)),
                               std::span<const double>(new_lp.data(), static_cast<std::size_t>(total)));
    if (diag.approx_kl > cfg.target_kl) {
      diag.early_stopped = epoch + 1 < cfg.epochs;
      break;
    }
  }
  diag.clip_fraction = clip_sum / minibatches;
  diag.value_loss = value_sum / minibatches;
  diag.policy_loss = policy_sum / minibatches;
  diag.grad_norm = norm_sum / minibatches;
  diag.entropy = policy.entropy();
  diag.action_std = policy.log_std().array().exp();
  return diag;
}

}  // namespace rlpp
