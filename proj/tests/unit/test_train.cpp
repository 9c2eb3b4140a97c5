#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "rlpp/io.hpp"
#include "rlpp/normalizer.hpp"
#include "rlpp/train.hpp"

using namespace rlpp;

namespace {

std::shared_ptr<const Raceline> small_oval() {
  TrackSpec s;
  s.length = 10.0;
  s.radius = 2.0;
  s.spacing = 0.25;
  s.half_width = 0.6;
  s.speed = {10.0, 4.0, 3.0};
  return std::make_shared<const Raceline>(synthesize_track(s));
}

EnvFactory factory(EnvConfig cfg = {}) {
  auto track = small_oval();
  return [track, cfg](int) { return std::make_unique<RacingEnv>(track, cfg); };
}

TrainConfig quick_config() {
  TrainConfig tc;
  tc.ppo.n_steps = 512;
  tc.ppo.minibatch = 128;
  tc.total_steps = 1024;
  tc.eval_every = 512;
  tc.checkpoint_every = 0;
  return tc;
}

}  // namespace

TEST_CASE("running statistics match batch statistics") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(3.0, 2.0);
  Eigen::MatrixXd data(3, 1000);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = nd(rng) * (1 + i % 3);
  RunningMeanStd rms(3);
  for (Eigen::Index start = 0; start < 1000; start += 37) {
    const auto n = std::min<Eigen::Index>(37, 1000 - start);
    rms.update(Eigen::MatrixXd(data.middleCols(start, n)));
  }
  const Eigen::VectorXd mean = data.rowwise().mean();
  const Eigen::VectorXd var = (data.colwise() - mean).array().square().rowwise().mean();
  CHECK((rms.mean() - mean).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((rms.var() - var).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(rms.count() == 1000.0);

  RunningMeanStd one_by_one(3);
  for (Eigen::Index c = 0; c < 1000; ++c) one_by_one.update(Eigen::VectorXd(data.col(c)));
  CHECK((one_by_one.mean() - mean).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((one_by_one.var() - var).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("normaliser apply") {
  RunningMeanStd rms(1);
  for (int i = 0; i < 100; ++i) rms.update(Eigen::VectorXd::Constant(1, 4.0));
  CHECK(std::abs(rms.apply(Eigen::VectorXd::Constant(1, 4.0))[0]) < 1e-12);

  RunningMeanStd unit(1);
  unit.set_state(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 10.0);
  CHECK(unit.apply(Eigen::VectorXd::Constant(1, 50.0))[0] == 10.0);
  CHECK(unit.apply(Eigen::VectorXd::Constant(1, -50.0))[0] == -10.0);
  CHECK(unit.apply(Eigen::VectorXd::Constant(1, 2.0))[0] == doctest::Approx(2.0));
}

TEST_CASE("return normaliser divides by the running return std") {
  ReturnNormalizer rn(0.99, 10.0, 1e-8, 0.0);
  for (int i = 0; i < 500; ++i) rn.normalize(1.0, i % 50 == 49);
  const double expected = 1.0 / std::sqrt(rn.stats().var()[0] + 1e-8);
  CHECK(rn.scale(1.0) == doctest::Approx(expected));
  // Scaling, not centring: zero reward stays zero.
  CHECK(rn.scale(0.0) == 0.0);
}

TEST_CASE("checkpoint round trip restores deterministic evaluation") {
  std::mt19937_64 rng(2);
  auto bundle = PolicyBundle::create(ActionMode::kJoint, 0.9, PPOConfig{}, rng);
  Eigen::MatrixXd obs(5, 20);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = nd(rng);
  bundle.obs_norm.update(obs);
  bundle.step = 1234;
  const auto text = checkpoint_to_string(bundle);
  const auto back = checkpoint_from_string(text);
  CHECK(back.obs_norm == bundle.obs_norm);
  CHECK(back.policy.params() == bundle.policy.params());
  CHECK(back.value_net.params() == bundle.value_net.params());
  CHECK(back.step == 1234);
  const Observation o{5.0, 0.2, 0.3, 0.1, -0.1};
  CHECK(back.act(o).lookahead == bundle.act(o).lookahead);
  CHECK(back.act(o).gain == bundle.act(o).gain);

  const auto dir = std::filesystem::temp_directory_path() / "rlpp_ckpt_test";
  save_checkpoint((dir / "c.json").string(), bundle);
  CHECK(load_checkpoint((dir / "c.json").string()).policy.params() == bundle.policy.params());
  std::filesystem::remove_all(dir);

  CHECK_THROWS(checkpoint_from_string("{\"format\": \"something-else\"}"));
}

TEST_CASE("lookahead-only bundles pin the gain") {
  std::mt19937_64 rng(3);
  const auto b = PolicyBundle::create(ActionMode::kLookaheadOnly, 0.7, PPOConfig{}, rng);
  CHECK(b.policy.action_dim() == 1);
  CHECK(b.act({}).gain == 0.7);
}

TEST_CASE("evaluation never touches the normaliser") {
  std::mt19937_64 rng(4);
  auto bundle = PolicyBundle::create(ActionMode::kJoint, 0.9, PPOConfig{}, rng);
  Eigen::MatrixXd obs = Eigen::MatrixXd::Random(5, 50) * 3.0;
  bundle.obs_norm.update(obs);
  const RunningMeanStd before = bundle.obs_norm;
  auto env = factory()(-1);
  const auto stats = evaluate_policy(bundle, *env, 2, 11);
  CHECK(stats.episodes == 2);
  CHECK(bundle.obs_norm == before);
  CHECK(std::memcmp(bundle.obs_norm.mean().data(), before.mean().data(), 5 * sizeof(double)) == 0);
  CHECK(std::memcmp(bundle.obs_norm.var().data(), before.var().data(), 5 * sizeof(double)) == 0);
}

TEST_CASE("update cadence") {
  TrainConfig tc;
  tc.total_steps = 8192;
  tc.eval_every = 0;
  tc.checkpoint_every = 0;
  tc.eval_at_start = false;
  const auto r = train_loop(factory(), tc);
  CHECK(r.updates == 2);
  CHECK(r.steps == 8192);
  CHECK(r.metrics.size() == 2);
}

TEST_CASE("training is reproducible from the seed") {
  const auto tc = quick_config();
  const auto a = train_loop(factory(), tc);
  const auto b = train_loop(factory(), tc);
  CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
  CHECK(a.final_bundle.policy.params() == b.final_bundle.policy.params());
  auto tc2 = tc;
  tc2.seed = 1;
  CHECK(metrics_csv(train_loop(factory(), tc2).metrics) != metrics_csv(a.metrics));
}

TEST_CASE("outputs: metrics, checkpoints and the best snapshot") {
  const auto dir = std::filesystem::temp_directory_path() / "rlpp_train_test";
  std::filesystem::remove_all(dir);
  auto tc = quick_config();
  tc.checkpoint_every = 512;
  tc.out_dir = dir.string();
  const auto r = train_loop(factory(), tc);
  CHECK(std::filesystem::exists(dir / "metrics.csv"));
  CHECK(std::filesystem::exists(dir / "best.json"));
  CHECK(std::filesystem::exists(dir / "final.json"));
  CHECK(std::filesystem::exists(dir / "checkpoint_512.json"));
  CHECK(std::filesystem::exists(dir / "checkpoint_1024.json"));
  CHECK(r.evals.size() == 3);  // steps 0, 512, 1024
  double best = -1e300;
  for (const auto& e : r.evals) best = std::max(best, e.stats.mean_return);
  CHECK(r.best_eval_return == best);
  const auto loaded = load_checkpoint((dir / "best.json").string());
  CHECK(loaded.policy.params() == r.best_bundle.policy.params());
  const auto csv = read_file((dir / "metrics.csv").string());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + r.updates);
  for (const auto& m : r.metrics) {
    CHECK(m.clip_fraction >= 0.0);
    CHECK(m.clip_fraction <= 1.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("critic regresses a constant-zero reward") {
  EnvConfig ec;
  ec.weights = RewardWeights{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  TrainConfig tc = quick_config();
  tc.total_steps = 512 * 8;
  tc.eval_every = 0;
  const auto r = train_loop(factory(ec), tc);
  REQUIRE(r.metrics.size() == 8);
  CHECK(r.metrics.back().value_loss < r.metrics.front().value_loss);
}
