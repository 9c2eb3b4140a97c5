#include "rlpp/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rlpp/io.hpp"

namespace rlpp {

namespace {

using nlohmann::json;

constexpr const char* kCheckpointFormat = "rlpp-checkpoint";
constexpr int kCheckpointVersion = 1;

Eigen::VectorXd obs_vector(const Observation& obs) {
  const auto a = obs.to_array();
  return Eigen::Map<const Eigen::VectorXd>(a.data(), kObservationDim);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json net_json(const DenseNet& net) { return {{"sizes", net.sizes()}, {"params", to_std(net.params())}}; }

DenseNet net_from_json(const json& j) {
  DenseNet net(j.at("sizes").get<std::vector<int>>());
  net.set_params(from_std(j.at("params").get<std::vector<double>>()));
  return net;
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

PolicyBundle PolicyBundle::create(ActionMode mode, double fixed_gain, const PPOConfig& cfg, std::mt19937_64& rng) {
  PolicyBundle b;
  b.mode = mode;
  b.fixed_gain = fixed_gain;
  Eigen::VectorXd low, high;
  if (mode == ActionMode::kJoint) {
    low = Eigen::Vector2d(kLookaheadMin, kGainMin);
    high = Eigen::Vector2d(kLookaheadMax, kGainMax);
  } else {
    low = Eigen::VectorXd::Constant(1, kLookaheadMin);
    high = Eigen::VectorXd::Constant(1, kLookaheadMax);
  }
  const int action_dim = static_cast<int>(low.size());
  b.policy = GaussianPolicy(layer_sizes(kObservationDim, cfg.hidden, action_dim), low, high, cfg.initial_log_std);
  b.policy.mean_net().init_orthogonal(rng, 0.01);
  b.value_net = DenseNet(layer_sizes(kObservationDim, cfg.hidden, 1));
  b.value_net.init_orthogonal(rng, 1.0);
  return b;
}

Eigen::VectorXd PolicyBundle::normalise(const Observation& obs) const { return obs_norm.apply(obs_vector(obs)); }

PPParams PolicyBundle::to_params(const Eigen::VectorXd& normalised_action) const {
  const Eigen::VectorXd phys = policy.to_physical(normalised_action);
  if (mode == ActionMode::kJoint) return {phys[0], phys[1]};
  return {phys[0], fixed_gain};
}

PPParams PolicyBundle::act(const Observation& obs) const { return to_params(policy.mean_action(normalise(obs))); }

std::string checkpoint_to_string(const PolicyBundle& b) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["mode"] = b.mode == ActionMode::kJoint ? "joint" : "ld-only";
  j["fixed_gain"] = b.fixed_gain;
  j["step"] = b.step;
  j["policy"] = net_json(b.policy.mean_net());
  j["log_std"] = to_std(b.policy.log_std());
  j["action_low"] = to_std(b.policy.action_low());
  j["action_high"] = to_std(b.policy.action_high());
  j["value"] = net_json(b.value_net);
  j["obs_norm"] = {{"mean", to_std(b.obs_norm.mean())},
                   {"var", to_std(b.obs_norm.var())},
                   {"count", b.obs_norm.count()},
                   {"clip", b.obs_norm.clip()},
                   {"epsilon", b.obs_norm.epsilon()}};
  return j.dump(1);
}

PolicyBundle checkpoint_from_string(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != kCheckpointFormat) throw std::runtime_error("not an rlpp checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  PolicyBundle b;
  b.mode = j.at("mode").get<std::string>() == "joint" ? ActionMode::kJoint : ActionMode::kLookaheadOnly;
  b.fixed_gain = j.at("fixed_gain").get<double>();
  b.step = j.at("step").get<long>();
  const DenseNet mean_net = net_from_json(j.at("policy"));
  const auto log_std = from_std(j.at("log_std").get<std::vector<double>>());
  b.policy = GaussianPolicy(mean_net.sizes(), from_std(j.at("action_low").get<std::vector<double>>()),
                            from_std(j.at("action_high").get<std::vector<double>>()), 0.0);
  b.policy.mean_net() = mean_net;
  b.policy.log_std() = log_std;
  b.value_net = net_from_json(j.at("value"));
  const auto& n = j.at("obs_norm");
  b.obs_norm = RunningMeanStd(kObservationDim, n.at("clip").get<double>(), n.at("epsilon").get<double>());
  b.obs_norm.set_state(from_std(n.at("mean").get<std::vector<double>>()),
                       from_std(n.at("var").get<std::vector<double>>()), n.at("count").get<double>());
  return b;
}

void save_checkpoint(const std::string& path, const PolicyBundle& bundle) {
  write_file_atomic(path, checkpoint_to_string(bundle));
}

PolicyBundle load_checkpoint(const std::string& path) { return checkpoint_from_string(read_file(path)); }

EvalStats evaluate_policy(const PolicyBundle& bundle, RacingEnv& env, int episodes, std::uint64_t seed) {
  EvalStats stats;
  double total_return = 0.0, gap = 0.0, lateral = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env.reset(seed + static_cast<std::uint64_t>(ep));
    while (true) {
      const auto res = env.step(bundle.act(obs));
      total_return += res.reward;
      gap += std::abs(res.info.applied.lookahead - res.info.teacher.lookahead);
      lateral += std::abs(res.info.lateral_error);
      ++stats.steps;
      obs = res.observation;
      if (res.done.any()) {
        if (res.done.collision) ++stats.collisions;
        break;
      }
    }
    ++stats.episodes;
  }
  if (stats.episodes > 0) {
    stats.mean_return = total_return / stats.episodes;
    stats.mean_length = static_cast<double>(stats.steps) / stats.episodes;
  }
  if (stats.steps > 0) {
    stats.mean_teacher_gap = gap / static_cast<double>(stats.steps);
    stats.mean_abs_lateral = lateral / static_cast<double>(stats.steps);
  }
  return stats;
}

TrainResult train_loop(const EnvFactory& make_env, const TrainConfig& cfg) {
  cfg.ppo.validate();
  if (cfg.total_steps < 1) throw std::invalid_argument("train_loop: total_steps must be positive");
  const int n_envs = cfg.ppo.n_envs;
  std::mt19937_64 master(cfg.seed);

  TrainResult result;
  PolicyBundle bundle = PolicyBundle::create(cfg.mode, cfg.fixed_gain, cfg.ppo, master);
  const int action_dim = bundle.policy.action_dim();
  Adam adam(bundle.policy.num_params() + bundle.value_net.num_params(), cfg.ppo.adam_beta1, cfg.ppo.adam_beta2,
            cfg.ppo.adam_eps);

  std::vector<std::unique_ptr<RacingEnv>> envs;
  std::vector<std::mt19937_64> env_rngs;
  std::vector<ReturnNormalizer> ret_norms;
  std::vector<Observation> current;
  std::vector<unsigned char> starts(static_cast<std::size_t>(n_envs), 1);
  std::vector<double> episode_returns(static_cast<std::size_t>(n_envs), 0.0);
  for (int e = 0; e < n_envs; ++e) {
    envs.push_back(make_env(e));
    env_rngs.emplace_back(cfg.seed * 0x9E3779B97F4A7C15ULL + 1000 + static_cast<std::uint64_t>(e));
    ret_norms.emplace_back(cfg.ppo.gamma);
    current.push_back(envs.back()->reset(env_rngs.back()()));
  }
  auto eval_env = make_env(-1);
  const std::uint64_t eval_seed = cfg.seed * 0x9E3779B97F4A7C15ULL + 777;

  auto run_eval = [&](long step) {
    const auto stats = evaluate_policy(bundle, *eval_env, cfg.eval_episodes, eval_seed);
    result.evals.push_back({step, stats});
    if (stats.mean_return > result.best_eval_return) {
      result.best_eval_return = stats.mean_return;
      result.best_bundle = bundle;
      result.best_bundle.step = step;
      if (!cfg.out_dir.empty()) save_checkpoint(join_path(cfg.out_dir, "best.json"), result.best_bundle);
    }
  };

  if (cfg.eval_at_start) run_eval(0);

  RolloutBuffer buffer(cfg.ppo.n_steps, n_envs, kObservationDim, action_dim);
  std::vector<double> finished_returns;
  long steps = 0;
  while (steps < cfg.total_steps && !result.halted) {
    buffer.clear();
    finished_returns.clear();
    for (int t = 0; t < cfg.ppo.n_steps; ++t) {
      for (int e = 0; e < n_envs; ++e) {
        const auto k = static_cast<Eigen::Index>(t) * n_envs + e;
        const auto ue = static_cast<std::size_t>(e);
        const Eigen::VectorXd raw = obs_vector(current[ue]);
        bundle.obs_norm.update(raw);
        const Eigen::VectorXd obs = bundle.obs_norm.apply(raw);
        const auto sample = bundle.policy.sample(obs, env_rngs[ue]);
        const double value = bundle.value_net.forward(obs)(0, 0);

        const auto res = envs[ue]->step(bundle.to_params(sample.action));
        episode_returns[ue] += res.reward;
        const bool done = res.done.any();
        double reward = ret_norms[ue].normalize(res.reward, done);
        if (done && !res.done.collision) {
          // Truncated episode: bootstrap from the final observation.
          const Eigen::VectorXd last = bundle.obs_norm.apply(obs_vector(res.observation));
          reward += cfg.ppo.gamma * bundle.value_net.forward(last)(0, 0);
        }
        buffer.observations.col(k) = obs;
        buffer.actions.col(k) = sample.action;
        buffer.log_probs[k] = sample.log_prob;
        buffer.rewards[k] = reward;
        buffer.values[k] = value;
        buffer.episode_starts[static_cast<std::size_t>(k)] = starts[ue];
        starts[ue] = done ? 1 : 0;
        if (done) {
          finished_returns.push_back(episode_returns[ue]);
          episode_returns[ue] = 0.0;
          current[ue] = envs[ue]->reset(env_rngs[ue]());
        } else {
          current[ue] = res.observation;
        }
        ++steps;
        if (cfg.eval_every > 0 && steps % cfg.eval_every == 0) run_eval(steps);
        if (cfg.checkpoint_every > 0 && steps % cfg.checkpoint_every == 0 && !cfg.out_dir.empty()) {
          bundle.step = steps;
          save_checkpoint(join_path(cfg.out_dir, "checkpoint_" + std::to_string(steps) + ".json"), bundle);
        }
      }
      buffer.size = t + 1;
    }

    std::vector<double> last_values;
    for (int e = 0; e < n_envs; ++e) {
      last_values.push_back(bundle.value_net.forward(bundle.obs_norm.apply(obs_vector(current[static_cast<std::size_t>(e)])))(0, 0));
    }
    compute_gae(buffer, last_values, starts, cfg.ppo.gamma, cfg.ppo.gae_lambda);

    const double remaining = 1.0 - static_cast<double>(steps) / static_cast<double>(cfg.total_steps);
    const double lr = lr_schedule(cfg.ppo.schedule, cfg.ppo.learning_rate, remaining);
    const auto diag = ppo_update(bundle.policy, bundle.value_net, adam, buffer, cfg.ppo, lr, master);
    ++result.updates;
    if (diag.aborted) {
      result.halted = true;
      result.halt_reason = "non-finite loss at step " + std::to_string(steps);
    } else if (!all_finite(bundle.policy.params()) || !all_finite(bundle.value_net.params())) {
      result.halted = true;
      result.halt_reason = "non-finite parameters at step " + std::to_string(steps);
    }

    MetricRow row;
    row.step = steps;
    row.approx_kl = diag.approx_kl;
    row.clip_fraction = diag.clip_fraction;
    row.action_std = to_std(diag.action_std.size() ? diag.action_std : Eigen::VectorXd(bundle.policy.log_std().array().exp()));
    row.value_loss = diag.value_loss;
    row.policy_loss = diag.policy_loss;
    row.entropy = diag.entropy;
    row.learning_rate = lr;
    row.epochs_run = diag.epochs_run;
    if (!result.evals.empty()) {
      row.eval_return = result.evals.back().stats.mean_return;
      row.teacher_gap = result.evals.back().stats.mean_teacher_gap;
    }
    if (!finished_returns.empty()) {
      double s = 0.0;
      for (double r : finished_returns) s += r;
      row.mean_episode_return = s / static_cast<double>(finished_returns.size());
    }
    result.metrics.push_back(row);
    if (!cfg.out_dir.empty()) write_file_atomic(join_path(cfg.out_dir, "metrics.csv"), metrics_csv(result.metrics));
  }

  bundle.step = steps;
  result.steps = steps;
  result.final_bundle = bundle;
  if (result.evals.empty() || result.best_eval_return == -1e300) result.best_bundle = bundle;
  if (!cfg.out_dir.empty()) {
    save_checkpoint(join_path(cfg.out_dir, "final.json"), bundle);
    if (result.halted) {
      write_file_atomic(join_path(cfg.out_dir, "halt.txt"), result.halt_reason + "\n" + checkpoint_to_string(bundle));
    }
  }
  return result;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "step,approx_kl,clip_fraction,std_lookahead,std_gain,value_loss,policy_loss,entropy,eval_return,"
         "teacher_gap,lr,mean_episode_return,epochs\n";
  for (const auto& r : rows) {
    out << r.step << ',' << format_double(r.approx_kl) << ',' << format_double(r.clip_fraction) << ','
        << format_double(r.action_std.empty() ? 0.0 : r.action_std[0]) << ','
        << (r.action_std.size() > 1 ? format_double(r.action_std[1]) : std::string("")) << ','
        << format_double(r.value_loss) << ',' << format_double(r.policy_loss) << ',' << format_double(r.entropy)
        << ',' << format_double(r.eval_return) << ',' << format_double(r.teacher_gap) << ','
        << format_double(r.learning_rate) << ',' << format_double(r.mean_episode_return) << ',' << r.epochs_run
        << '\n';
  }
  return out.str();
}

}  // namespace rlpp
