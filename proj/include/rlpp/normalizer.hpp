#ifndef RLPP_NORMALIZER_HPP_
#define RLPP_NORMALIZER_HPP_

#include <Eigen/Dense>

namespace rlpp {

/// Running per-dimension mean/variance, merged with the parallel
/// (Chan et al.) update so batch order does not matter.
class RunningMeanStd {
 public:
  // prior_count > 0 seeds the statistics with a pseudo-observation of
  // mean 0 / variance 1 carrying that weight.
  explicit RunningMeanStd(Eigen::Index dim = 1, double clip = 10.0, double epsilon = 1e-8, double prior_count = 0.0);

  /// `batch` is (dim x B); a single sample is a column vector.
  void update(const Eigen::Ref<const Eigen::MatrixXd>& batch);

  /// (x - mean) / sqrt(var + eps), clipped to +-clip.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& var() const { return var_; }
  double count() const { return count_; }
  double clip() const { return clip_; }
  double epsilon() const { return epsilon_; }

  void set_state(Eigen::VectorXd mean, Eigen::VectorXd var, double count);

  bool operator==(const RunningMeanStd& o) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
  double count_{0.0};
  double clip_;
  double epsilon_;
};

/// Scales rewards by the running std of the discounted return accumulator.
class ReturnNormalizer {
 public:
  explicit ReturnNormalizer(double gamma = 0.99, double clip = 10.0, double epsilon = 1e-8, double prior_count = 1e-4);

  double normalize(double reward, bool done);
  double scale(double reward) const;

  const RunningMeanStd& stats() const { return stats_; }
  RunningMeanStd& stats() { return stats_; }
  double accumulator() const { return ret_; }

 private:
  RunningMeanStd stats_;
  double gamma_;
  double ret_{0.0};
};

}  // namespace rlpp

#endif  // RLPP_NORMALIZER_HPP_
