#ifndef RLPP_CONFIG_HPP_
#define RLPP_CONFIG_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlpp/env.hpp"
#include "rlpp/harness.hpp"
#include "rlpp/mpc.hpp"
#include "rlpp/ppo.hpp"
#include "rlpp/raceline.hpp"
#include "rlpp/train.hpp"

namespace rlpp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raceline source: a CSV file when `file` is set, the synthesizer otherwise.
struct TrackSource {
  std::string file;
  TrackSpec synth{};

  Raceline build() const;
};

struct RunConfig {
  TrackSource track{};       // training track
  TrackSource eval_track{};  // eval / sweep / compare track
  SimConfig sim{};
  RewardWeights reward{};
  EnvConfig env{};  // sim, weights, mode and fixed_gain are overwritten from the fields above
  PPOConfig ppo{};
  TrainConfig train{};
  MPCConfig mpc{};
  EvalConfig eval{};
  double multiplier{1.0};        // eval speed multiplier
  double train_multiplier{1.3};  // speed-profile scale of the training track
  std::vector<double> sweep_grid{default_multiplier_grid()};
  double sweep_refine{0.01};
  double fixed_gain{0.9};  // g0
  std::vector<double> gain_grid{0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<ControllerSpec> controllers{};
  std::uint64_t seed{0};
  std::string out_dir{"out"};

  EnvConfig env_config() const;
  /// Training / evaluation environments on the training track scaled by train_multiplier.
  EnvFactory env_factory() const;
  TrainConfig train_config() const;
  HarnessContext harness_context() const;
  EvalConfig eval_config() const;
  void validate() const;
};

/// Overlays a JSON document on `base`. Unknown keys are rejected.
RunConfig parse_config(const std::string& json_text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
std::string config_to_json(const RunConfig& cfg);

}  // namespace rlpp

#endif  // RLPP_CONFIG_HPP_
