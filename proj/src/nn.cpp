#include "rlpp/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rlpp {

DenseNet::DenseNet(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    if (sizes_[i] < 1 || sizes_[i + 1] < 1) throw std::invalid_argument("DenseNet: layer sizes must be positive");
    layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]), Eigen::VectorXd::Zero(sizes_[i + 1])});
  }
}

void DenseNet::init_orthogonal(std::mt19937_64& rng, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    auto& layer = layers_[li];
    const auto rows = layer.weight.rows();
    const auto cols = layer.weight.cols();
    const auto big = std::max(rows, cols);
    Eigen::MatrixXd g(big, std::min(rows, cols));
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, g.cols());
    // Sign fix makes the draw uniform over the orthogonal group.
    const Eigen::MatrixXd r = qr.matrixQR();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      if (r(c, c) < 0.0) q.col(c) = -q.col(c);
    }
    const double gain = li + 1 == layers_.size() ? output_gain : std::numbers::sqrt2;
    layer.weight = gain * (rows >= cols ? q : Eigen::MatrixXd(q.transpose()));
    layer.bias.setZero();
  }
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != input_dim()) throw std::invalid_argument("DenseNet::forward: input dimension mismatch");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd h = input;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Eigen::MatrixXd z = layers_[li].weight * h;
    z.colwise() += layers_[li].bias;
    h = li + 1 < layers_.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
    if (cache) cache->activations.push_back(h);
  }
  return h;
}

Eigen::VectorXd DenseNet::backward(const Cache& cache, const Eigen::MatrixXd& grad_output) const {
  Eigen::VectorXd grad(num_params());
  Eigen::Index offset = num_params();
  Eigen::MatrixXd delta = grad_output;  // gradient w.r.t. pre-activation of current layer
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const auto& input = cache.activations[li];
    const Eigen::MatrixXd gw = delta * input.transpose();
    const Eigen::VectorXd gb = delta.rowwise().sum();
    offset -= layer.bias.size();
    grad.segment(offset, gb.size()) = gb;
    offset -= layer.weight.size();
    grad.segment(offset, gw.size()) = Eigen::Map<const Eigen::VectorXd>(gw.data(), gw.size());
    if (li > 0) {
      // input of this layer is tanh output of the previous one
      delta = (layer.weight.transpose() * delta).cwiseProduct(
          Eigen::MatrixXd((1.0 - input.array().square()).matrix()));
    }
  }
  return grad;
}

Eigen::Index DenseNet::num_params() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Eigen::VectorXd DenseNet::params() const {
  Eigen::VectorXd flat(num_params());
  Eigen::Index o = 0;
  for (const auto& l : layers_) {
    flat.segment(o, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    o += l.weight.size();
    flat.segment(o, l.bias.size()) = l.bias;
    o += l.bias.size();
  }
  return flat;
}

void DenseNet::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params()) throw std::invalid_argument("DenseNet::set_params: size mismatch");
  Eigen::Index o = 0;
  for (auto& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(o, l.weight.size());
    o += l.weight.size();
    l.bias = flat.segment(o, l.bias.size());
    o += l.bias.size();
  }
}

GaussianPolicy::GaussianPolicy(std::vector<int> sizes, Eigen::VectorXd action_low, Eigen::VectorXd action_high,
                               double initial_log_std)
    : mean_net_(std::move(sizes)), low_(std::move(action_low)), high_(std::move(action_high)) {
  if (low_.size() != mean_net_.output_dim() || high_.size() != mean_net_.output_dim()) {
    throw std::invalid_argument("GaussianPolicy: action bounds must match the output dimension");
  }
  if ((high_.array() <= low_.array()).any()) throw std::invalid_argument("GaussianPolicy: empty action box");
  log_std_ = Eigen::VectorXd::Constant(mean_net_.output_dim(), initial_log_std);
}

GaussianPolicy::Sample GaussianPolicy::sample(const Eigen::VectorXd& obs, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd mean = mean_action(obs);
  Sample s;
  s.action.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) s.action[i] = mean[i] + std::exp(log_std_[i]) * normal(rng);
  s.log_prob = log_prob(mean, s.action)[0];
  return s;
}

Eigen::VectorXd GaussianPolicy::mean_action(const Eigen::VectorXd& obs) const { return mean_net_.forward(obs).col(0); }

Eigen::VectorXd GaussianPolicy::to_physical(const Eigen::VectorXd& normalised) const {
  const Eigen::ArrayXd centre = 0.5 * (high_ + low_).array();
  const Eigen::ArrayXd half = 0.5 * (high_ - low_).array();
  return (centre + half * normalised.array()).max(low_.array()).min(high_.array()).matrix();
}

Eigen::VectorXd GaussianPolicy::log_prob(const Eigen::MatrixXd& means, const Eigen::MatrixXd& actions) const {
  const Eigen::ArrayXd inv_std = (-log_std_.array()).exp();
  const Eigen::ArrayXXd z = (actions - means).array().colwise() * inv_std;
  const double constant = -log_std_.sum() - 0.5 * static_cast<double>(log_std_.size()) * std::log(2.0 * std::numbers::pi);
  return (-0.5 * z.square().colwise().sum() + constant).matrix().transpose();
}

double GaussianPolicy::entropy() const {
  return log_std_.sum() + 0.5 * static_cast<double>(log_std_.size()) * (1.0 + std::log(2.0 * std::numbers::pi));
}

Eigen::VectorXd GaussianPolicy::params() const {
  Eigen::VectorXd flat(num_params());
  flat << mean_net_.params(), log_std_;
  return flat;
}

void GaussianPolicy::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params()) throw std::invalid_argument("GaussianPolicy::set_params: size mismatch");
  mean_net_.set_params(flat.head(mean_net_.num_params()));
  log_std_ = flat.tail(log_std_.size());
}

}  // namespace rlpp
