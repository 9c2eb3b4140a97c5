#include "rlpp/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlpp {

RunningMeanStd::RunningMeanStd(Eigen::Index dim, double clip, double epsilon, double prior_count)
    : mean_(Eigen::VectorXd::Zero(dim)),
      var_(Eigen::VectorXd::Ones(dim)),
      count_(prior_count),
      clip_(clip),
      epsilon_(epsilon) {}

void RunningMeanStd::update(const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  if (batch.rows() != mean_.size()) throw std::invalid_argument("RunningMeanStd::update: dimension mismatch");
  const auto n = static_cast<double>(batch.cols());
  if (n == 0.0) return;
  const Eigen::VectorXd batch_mean = batch.rowwise().mean();
  const Eigen::VectorXd batch_var = (batch.colwise() - batch_mean).array().square().rowwise().sum().matrix() / n;
  if (count_ == 0.0) {
    mean_ = batch_mean;
    var_ = batch_var;
    count_ = n;
    return;
  }
  const double total = count_ + n;
  const Eigen::VectorXd delta = batch_mean - mean_;
  const Eigen::VectorXd m2 = var_ * count_ + batch_var * n + delta.cwiseProduct(delta) * (count_ * n / total);
  mean_ += delta * (n / total);
  var_ = m2 / total;
  count_ = total;
}

Eigen::VectorXd RunningMeanStd::apply(const Eigen::VectorXd& x) const {
  return ((x - mean_).array() / (var_.array() + epsilon_).sqrt()).max(-clip_).min(clip_).matrix();
}

void RunningMeanStd::set_state(Eigen::VectorXd mean, Eigen::VectorXd var, double count) {
  if (mean.size() != var.size()) throw std::invalid_argument("RunningMeanStd::set_state: size mismatch");
  mean_ = std::move(mean);
  var_ = std::move(var);
  count_ = count;
}

bool RunningMeanStd::operator==(const RunningMeanStd& o) const {
  return mean_.size() == o.mean_.size() && mean_ == o.mean_ && var_ == o.var_ && count_ == o.count_ &&
         clip_ == o.clip_ && epsilon_ == o.epsilon_;
}

ReturnNormalizer::ReturnNormalizer(double gamma, double clip, double epsilon, double prior_count)
    : stats_(1, clip, epsilon, prior_count), gamma_(gamma) {}

double ReturnNormalizer::normalize(double reward, bool done) {
  ret_ = ret_ * gamma_ + reward;
  stats_.update(Eigen::MatrixXd::Constant(1, 1, ret_));
  const double out = scale(reward);
  if (done) ret_ = 0.0;
  return out;
}

double ReturnNormalizer::scale(double reward) const {
  const double s = reward / std::sqrt(stats_.var()[0] + stats_.epsilon());
  return std::clamp(s, -stats_.clip(), stats_.clip());
}

}  // namespace rlpp
