#ifndef RLPP_NN_HPP_
#define RLPP_NN_HPP_

#include <random>
#include <vector>

#include <Eigen/Dense>

namespace rlpp {

/// Fully connected tanh network with a linear output layer. Samples are
/// columns: inputs are (in x B), outputs (out x B).
class DenseNet {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  // Inputs to every layer plus the final output, filled by forward().
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;
  };

  DenseNet() = default;
  explicit DenseNet(std::vector<int> sizes);

  /// Orthogonal initialisation: gain sqrt(2) on hidden layers, `output_gain`
  /// on the last one, zero biases.
  void init_orthogonal(std::mt19937_64& rng, double output_gain);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;

  /// Gradient of sum_{ij} grad_output(i,j) * output(i,j) with respect to the
  /// flattened parameters (see params()).
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& grad_output) const;

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Flat layout: for each layer, weight (column-major) then bias.
  Eigen::Index num_params() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& flat);

 private:
  std::vector<int> sizes_;
  std::vector<Layer> layers_;
};

/// Diagonal Gaussian over a normalised action space with state-independent
/// log standard deviations. Physical action = centre + half_range * a.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(std::vector<int> sizes, Eigen::VectorXd action_low, Eigen::VectorXd action_high,
                 double initial_log_std);

  DenseNet& mean_net() { return mean_net_; }
  const DenseNet& mean_net() const { return mean_net_; }
  Eigen::VectorXd& log_std() { return log_std_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  const Eigen::VectorXd& action_low() const { return low_; }
  const Eigen::VectorXd& action_high() const { return high_; }
  int action_dim() const { return static_cast<int>(log_std_.size()); }

  struct Sample {
    Eigen::VectorXd action;  // normalised, unclipped
    double log_prob;
  };
  Sample sample(const Eigen::VectorXd& obs, std::mt19937_64& rng) const;
  Eigen::VectorXd mean_action(const Eigen::VectorXd& obs) const;

  /// Physical action clipped to [low, high].
  Eigen::VectorXd to_physical(const Eigen::VectorXd& normalised) const;

  /// Per-sample log density of `actions` (d x B) given means (d x B).
  Eigen::VectorXd log_prob(const Eigen::MatrixXd& means, const Eigen::MatrixXd& actions) const;
  double entropy() const;

  // Flat layout: mean network params then log_std.
  Eigen::Index num_params() const { return mean_net_.num_params() + log_std_.size(); }
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& flat);

 private:
  DenseNet mean_net_;
  Eigen::VectorXd log_std_;
  Eigen::VectorXd low_;
  Eigen::VectorXd high_;
};

}  // namespace rlpp

#endif  // RLPP_NN_HPP_
