#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../common/oracles.hpp"
#include "rlpp/nn.hpp"
#include "rlpp/ppo.hpp"

using namespace rlpp;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

GaussianPolicy small_policy(std::mt19937_64& rng) {
  GaussianPolicy p({5, 8, 8, 2}, Eigen::Vector2d(0.35, 0.45), Eigen::Vector2d(4.0, 1.15), std::log(0.5));
  p.mean_net().init_orthogonal(rng, 1.0);
  // Non-zero biases so their gradients are exercised too.
  Eigen::VectorXd theta = p.params();
  theta += 0.1 * random_matrix(rng, theta.size(), 1).col(0);
  p.set_params(theta);
  return p;
}

// Batch whose ratios sit away from the clip kinks at 1 +- eps.
PPOBatch batch_for(const GaussianPolicy& pol, std::mt19937_64& rng, int b) {
  PPOBatch batch;
  batch.observations = random_matrix(rng, 5, b);
  const Eigen::MatrixXd means = pol.mean_net().forward(batch.observations);
  batch.actions = means + 0.5 * random_matrix(rng, 2, b);
  const Eigen::VectorXd lp = pol.log_prob(means, batch.actions);
  std::uniform_real_distribution<double> shift(-0.4, 0.4);
  batch.old_log_probs.resize(b);
  for (int i = 0; i < b; ++i) {
    double s;
    do s = shift(rng);
    while (std::abs(std::exp(-s) - 0.8) < 0.02 || std::abs(std::exp(-s) - 1.2) < 0.02);
    batch.old_log_probs[i] = lp[i] + s;
  }
  batch.advantages = random_matrix(rng, b, 1).col(0);
  batch.returns = random_matrix(rng, b, 1).col(0);
  return batch;
}

}  // namespace

TEST_CASE("dense net forward examples") {
  DenseNet zero({3, 4, 2});
  CHECK(zero.forward(Eigen::Vector3d(1, 2, 3)).norm() == 0.0);

  DenseNet one({1, 1, 1});
  one.layers()[0].weight(0, 0) = 2.0;
  one.layers()[0].bias[0] = 0.5;
  one.layers()[1].weight(0, 0) = -3.0;
  one.layers()[1].bias[0] = 1.0;
  const double x = 0.3;
  CHECK(one.forward(Eigen::MatrixXd::Constant(1, 1, x))(0, 0) == doctest::Approx(-3.0 * std::tanh(2 * x + 0.5) + 1.0));

  std::mt19937_64 rng(2);
  DenseNet net({5, 8, 8, 2});
  net.init_orthogonal(rng, 0.01);
  const Eigen::MatrixXd in = random_matrix(rng, 5, 6);
  const Eigen::MatrixXd out = net.forward(in);
  for (int c = 0; c < 6; ++c) CHECK((net.forward(in.col(c)) - out.col(c)).norm() < 1e-15);
}

TEST_CASE("orthogonal initialisation") {
  std::mt19937_64 rng(3);
  DenseNet net({5, 64, 64, 2});
  net.init_orthogonal(rng, 0.01);
  const auto& w = net.layers()[1].weight;
  const Eigen::MatrixXd gram = w * w.transpose() / 2.0;
  CHECK((gram - Eigen::MatrixXd::Identity(64, 64)).norm() < 1e-10);
  CHECK(net.layers()[0].bias.norm() == 0.0);
}

TEST_CASE("backward examples") {
  // Linear single layer, squared loss (w x - y)^2.
  DenseNet lin({1, 1});
  lin.layers()[0].weight(0, 0) = 1.5;
  const double xv = 2.0, yv = 1.0;
  DenseNet::Cache cache;
  const double pred = lin.forward(Eigen::MatrixXd::Constant(1, 1, xv), &cache)(0, 0);
  const auto g = lin.backward(cache, Eigen::MatrixXd::Constant(1, 1, 2.0 * (pred - yv)));
  CHECK(g[0] == doctest::Approx(2.0 * (1.5 * xv - yv) * xv));
  CHECK(g[1] == doctest::Approx(2.0 * (1.5 * xv - yv)));

  std::mt19937_64 rng(4);
  DenseNet net({5, 8, 8, 2});
  net.init_orthogonal(rng, 1.0);
  DenseNet::Cache c2;
  net.forward(random_matrix(rng, 5, 3), &c2);
  CHECK(net.backward(c2, Eigen::MatrixXd::Zero(2, 3)).norm() == 0.0);
}

TEST_CASE("Gaussian policy") {
  std::mt19937_64 rng(5);
  auto pol = small_policy(rng);
  const Eigen::VectorXd obs = random_matrix(rng, 5, 1).col(0);
  const Eigen::VectorXd mean = pol.mean_action(obs);
  const double lp = pol.log_prob(mean, mean)[0];
  CHECK(lp == doctest::Approx(-pol.log_std().sum() - std::log(2 * std::numbers::pi)).epsilon(1e-14));

  std::mt19937_64 a(9), b(9);
  CHECK(pol.sample(obs, a).action == pol.sample(obs, b).action);

  pol.log_std().setConstant(-40.0);
  CHECK((pol.sample(obs, a).action - mean).norm() < 1e-12);

  const auto phys = pol.to_physical(Eigen::Vector2d(5.0, -5.0));
  CHECK(phys[0] == 4.0);
  CHECK(phys[1] == 0.45);
  const auto mid = pol.to_physical(Eigen::Vector2d(0.0, 0.0));
  CHECK(mid[0] == doctest::Approx(2.175));
}

TEST_CASE("PPO loss gradient matches finite differences") {
  std::mt19937_64 rng(6);
  const auto pol = small_policy(rng);
  DenseNet value({5, 8, 8, 1});
  value.init_orthogonal(rng, 1.0);
  const PPOConfig cfg;
  const auto batch = batch_for(pol, rng, 16);
  const auto lg = ppo_loss(pol, value, batch, cfg, true);

  const double pol_err = oracle::fd_mismatch(
      [&](const Eigen::VectorXd& th) {
        GaussianPolicy p = pol;
        p.set_params(th);
        return ppo_loss(p, value, batch, cfg, false).loss.total;
      },
      pol.params(), lg.policy_grad);
  const double val_err = oracle::fd_mismatch(
      [&](const Eigen::VectorXd& th) {
        DenseNet v = value;
        v.set_params(th);
        return ppo_loss(pol, v, batch, cfg, false).loss.total;
      },
      value.params(), lg.value_grad);
  CHECK(pol_err < 1e-4);
  CHECK(val_err < 1e-4);
  // Some ratios clip and some do not, so both branches are covered.
  CHECK(lg.loss.clip_fraction > 0.0);
  CHECK(lg.loss.clip_fraction < 1.0);
}

TEST_CASE("clipped surrogate hand examples") {
  std::mt19937_64 rng(7);
  auto pol = small_policy(rng);
  DenseNet value({5, 8, 8, 1});
  PPOConfig cfg;
  cfg.entropy_coef = 0.0;
  cfg.value_coef = 0.0;
  PPOBatch b;
  b.observations = random_matrix(rng, 5, 1);
  b.actions = pol.mean_net().forward(b.observations);
  const double lp = pol.log_prob(b.actions, b.actions)[0];
  b.returns = Eigen::VectorXd::Zero(1);

  b.advantages = Eigen::VectorXd::Constant(1, 1.0);
  b.old_log_probs = Eigen::VectorXd::Constant(1, lp - std::log(1.5));
  auto l = ppo_loss(pol, value, b, cfg, false).loss;
  CHECK(l.policy_loss == doctest::Approx(-1.2).epsilon(1e-12));
  CHECK(l.clip_fraction == 1.0);

  b.advantages = Eigen::VectorXd::Constant(1, -1.0);
  b.old_log_probs = Eigen::VectorXd::Constant(1, lp - std::log(0.5));
  l = ppo_loss(pol, value, b, cfg, false).loss;
  CHECK(l.policy_loss == doctest::Approx(0.8).epsilon(1e-12));

  b.old_log_probs = Eigen::VectorXd::Constant(1, lp);
  l = ppo_loss(pol, value, b, cfg, false).loss;
  CHECK(std::abs(l.approx_kl) < 1e-12);
  CHECK(l.clip_fraction == 0.0);
  CHECK(l.policy_loss == doctest::Approx(1.0));
}

TEST_CASE("approx_kl") {
  const std::vector<double> a{-1.0, -2.0, 0.5};
  CHECK(std::abs(approx_kl(a, a)) < 1e-12);
  const std::vector<double> b{-1.1, -1.8, 0.5};
  const double expected = ((std::exp(-0.1) - 1 + 0.1) + (std::exp(0.2) - 1 - 0.2)) / 3.0;
  CHECK(approx_kl(a, b) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(approx_kl(a, b) >= 0.0);
}

TEST_CASE("GAE examples") {
  const std::vector<double> r{1, 1}, v{0.5, 0.5};
  const std::vector<unsigned char> s{0, 0};
  std::vector<double> adv(2), ret(2);
  compute_gae(r, v, s, 0.5, false, 0.99, 0.98, adv, ret);
  CHECK(std::abs(adv[1] - 0.995) < 1e-12);
  CHECK(std::abs(adv[0] - (0.995 + 0.99 * 0.98 * 0.995)) < 1e-12);
  CHECK(adv[0] == doctest::Approx(1.960349).epsilon(1e-6));
  CHECK(ret[0] == doctest::Approx(adv[0] + 0.5));
}

TEST_CASE("GAE against brute force and limit identities") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution term(0.05);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 200;
    std::vector<double> r(n), v(n), adv(n), ret(n);
    std::vector<unsigned char> s(n);
    for (int t = 0; t < n; ++t) {
      r[t] = nd(rng);
      v[t] = nd(rng);
      s[t] = t > 0 && term(rng);
    }
    const double last = nd(rng);
    const bool last_done = trial % 3 == 0;
    compute_gae(r, v, s, last, last_done, 0.99, 0.98, adv, ret);
    const auto o = oracle::gae_brute(r, v, s, last, last_done, 0.99, 0.98);
    for (int t = 0; t < n; ++t) {
      CHECK(std::abs(adv[t] - o.advantages[t]) <= 1e-12);
      CHECK(std::abs(ret[t] - o.returns[t]) <= 1e-12);
    }

    compute_gae(r, v, s, last, last_done, 0.99, 0.0, adv, ret);
    for (int t = 0; t < n; ++t) {
      const bool terminal = t + 1 < n ? s[t + 1] != 0 : last_done;
      const double next = t + 1 < n ? v[t + 1] : last;
      CHECK(std::abs(adv[t] - (r[t] + (terminal ? 0.0 : 0.99 * next) - v[t])) <= 1e-12);
    }

    compute_gae(r, v, s, last, last_done, 0.99, 1.0, adv, ret);
    const auto mc = oracle::discounted_returns(r, s, last, last_done, 0.99);
    for (int t = 0; t < n; ++t) CHECK(std::abs(adv[t] - (mc[t] - v[t])) <= 1e-12);
  }
}

TEST_CASE("buffer GAE handles interleaved environments") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  RolloutBuffer buf(50, 3, 5, 2);
  buf.size = 50;
  std::vector<std::vector<double>> r(3), v(3);
  std::vector<std::vector<unsigned char>> s(3);
  for (int t = 0; t < 50; ++t) {
    for (int e = 0; e < 3; ++e) {
      const int k = t * 3 + e;
      buf.rewards[k] = nd(rng);
      buf.values[k] = nd(rng);
      buf.episode_starts[k] = (t * 7 + e) % 13 == 0;
      r[e].push_back(buf.rewards[k]);
      v[e].push_back(buf.values[k]);
      s[e].push_back(buf.episode_starts[k]);
    }
  }
  const std::vector<double> last{0.1, -0.2, 0.3};
  const std::vector<unsigned char> dones{0, 1, 0};
  compute_gae(buf, last, dones, 0.99, 0.98);
  for (int e = 0; e < 3; ++e) {
    const auto o = oracle::gae_brute(r[e], v[e], s[e], last[e], dones[e], 0.99, 0.98);
    for (int t = 0; t < 50; ++t) CHECK(std::abs(buf.advantages[t * 3 + e] - o.advantages[t]) <= 1e-12);
  }
}

TEST_CASE("learning-rate schedules") {
  const double l0 = 2.4e-4;
  CHECK(std::abs(lr_schedule(LrSchedule::kLinear, l0, 1.0) - l0) <= 1e-12);
  CHECK(std::abs(lr_schedule(LrSchedule::kLinear, l0, 0.5) - l0 / 2) <= 1e-12);
  CHECK(std::abs(lr_schedule(LrSchedule::kLinear, l0, 0.0)) <= 1e-12);
  CHECK(std::abs(lr_schedule(LrSchedule::kCosine, l0, 1.0) - l0) <= 1e-12);
  CHECK(std::abs(lr_schedule(LrSchedule::kCosine, l0, 0.5) - 1.2e-4) <= 1e-12);
  CHECK(std::abs(lr_schedule(LrSchedule::kCosine, l0, 0.0)) <= 1e-12);
  CHECK(parse_lr_schedule("cosine") == LrSchedule::kCosine);
  CHECK_THROWS(parse_lr_schedule("step"));
}

TEST_CASE("global-norm clipping") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd g = random_matrix(rng, 30, 1, (i % 5) * 0.2).col(0);
    const Eigen::VectorXd before = g;
    const double n = clip_grad_norm(g, 0.7);
    CHECK(n == doctest::Approx(before.norm()));
    CHECK(g.norm() <= 0.7 + 1e-9);
    if (before.norm() <= 0.7) CHECK(g == before);
  }
}

TEST_CASE("Adam step") {
  Adam opt(2, 0.9, 0.999, 1e-8);
  Eigen::VectorXd p(2);
  p << 1.0, -1.0;
  opt.step(p, Eigen::Vector2d(0.5, -2.0), 0.1);
  // First bias-corrected step moves each coordinate by lr * sign(g).
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(-0.9).epsilon(1e-7));
  CHECK(opt.steps() == 1);
}

TEST_CASE("update is invariant to positive advantage scaling") {
  std::mt19937_64 rng(13);
  const auto pol0 = small_policy(rng);
  DenseNet val0({5, 8, 8, 1});
  val0.init_orthogonal(rng, 1.0);
  RolloutBuffer buf(64, 1, 5, 2);
  buf.size = 64;
  buf.observations = random_matrix(rng, 5, 64);
  const Eigen::MatrixXd means = pol0.mean_net().forward(buf.observations);
  buf.actions = means + 0.5 * random_matrix(rng, 2, 64);
  buf.log_probs = pol0.log_prob(means, buf.actions);
  buf.advantages = random_matrix(rng, 64, 1).col(0);
  buf.returns = random_matrix(rng, 64, 1).col(0);
  PPOConfig cfg;
  cfg.minibatch = 16;

  auto run = [&](double scale, double shift) {
    GaussianPolicy p = pol0;
    DenseNet v = val0;
    RolloutBuffer b = buf;
    b.advantages = (scale * buf.advantages.array() + shift).matrix();
    Adam opt(p.num_params() + v.num_params(), 0.9, 0.999, 1e-8);
    std::mt19937_64 r(99);
    ppo_update(p, v, opt, b, cfg, 2.4e-4, r);
    return p.params();
  };
  const Eigen::VectorXd a = run(1.0, 0.0);
  const Eigen::VectorXd b = run(7.5, 0.0);
  CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((a - pol0.params()).norm() > 0.0);
}

TEST_CASE("unchanged policy has zero kl and no clipping") {
  std::mt19937_64 rng(14);
  const auto pol = small_policy(rng);
  DenseNet val({5, 8, 8, 1});
  PPOBatch b;
  b.observations = random_matrix(rng, 5, 32);
  const Eigen::MatrixXd means = pol.mean_net().forward(b.observations);
  b.actions = means + 0.5 * random_matrix(rng, 2, 32);
  b.old_log_probs = pol.log_prob(means, b.actions);
  b.advantages = standardize(random_matrix(rng, 32, 1).col(0), 1e-8);
  b.returns = Eigen::VectorXd::Zero(32);
  const auto l = ppo_loss(pol, val, b, PPOConfig{}, false).loss;
  CHECK(std::abs(l.approx_kl) <= 1e-12);
  CHECK(l.clip_fraction == 0.0);
  CHECK(std::abs(l.policy_loss + b.advantages.mean()) < 1e-12);
}
