#ifndef RLPP_TRAIN_HPP_
#define RLPP_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rlpp/env.hpp"
#include "rlpp/nn.hpp"
#include "rlpp/normalizer.hpp"
#include "rlpp/ppo.hpp"

namespace rlpp {

/// Everything needed to run the trained policy deterministically.
struct PolicyBundle {
  GaussianPolicy policy;
  DenseNet value_net;
  RunningMeanStd obs_norm{kObservationDim, 10.0, 1e-8, 1e-4};
  ActionMode mode{ActionMode::kJoint};
  double fixed_gain{0.9};
  long step{0};

  static PolicyBundle create(ActionMode mode, double fixed_gain, const PPOConfig& cfg, std::mt19937_64& rng);

  /// Mean-action PP parameters for a raw (unnormalised) observation.
  PPParams act(const Observation& obs) const;
  PPParams to_params(const Eigen::VectorXd& normalised_action) const;
  Eigen::VectorXd normalise(const Observation& obs) const;
};

void save_checkpoint(const std::string& path, const PolicyBundle& bundle);
PolicyBundle load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const PolicyBundle& bundle);
PolicyBundle checkpoint_from_string(const std::string& text);

struct EvalStats {
  double mean_return{0.0};
  double mean_teacher_gap{0.0};  // mean |L_applied - L*| over all steps
  double mean_abs_lateral{0.0};
  double mean_length{0.0};
  long steps{0};
  int episodes{0};
  int collisions{0};
};

/// Deterministic-policy episodes. Reads the bundle's normaliser, never updates it.
EvalStats evaluate_policy(const PolicyBundle& bundle, RacingEnv& env, int episodes, std::uint64_t seed);

struct TrainConfig {
  PPOConfig ppo{};
  long total_steps{1'200'000};
  long eval_every{5000};
  long checkpoint_every{25000};
  int eval_episodes{1};
  std::uint64_t seed{0};
  ActionMode mode{ActionMode::kJoint};
  double fixed_gain{0.9};
  std::string out_dir;  // empty: nothing written
  bool eval_at_start{true};
};

struct MetricRow {
  long step{0};
  double approx_kl{0.0};
  double clip_fraction{0.0};
  std::vector<double> action_std;
  double value_loss{0.0};
  double policy_loss{0.0};
  double entropy{0.0};
  double eval_return{0.0};
  double teacher_gap{0.0};
  double learning_rate{0.0};
  double mean_episode_return{0.0};
  int epochs_run{0};
};

struct EvalRecord {
  long step{0};
  EvalStats stats;
};

struct TrainResult {
  std::vector<MetricRow> metrics;
  std::vector<EvalRecord> evals;
  PolicyBundle final_bundle;
  PolicyBundle best_bundle;
  double best_eval_return{-1e300};
  long steps{0};
  int updates{0};
  bool halted{false};
  std::string halt_reason;
};

/// `make_env(i)` builds training environment i (i >= 0) or the evaluation
/// environment (i == -1).
using EnvFactory = std::function<std::unique_ptr<RacingEnv>(int index)>;

TrainResult train_loop(const EnvFactory& make_env, const TrainConfig& cfg);

std::string metrics_csv(const std::vector<MetricRow>& rows);

}  // namespace rlpp

#endif  // RLPP_TRAIN_HPP_
