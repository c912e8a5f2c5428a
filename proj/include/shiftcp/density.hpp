#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "shiftcp/errors.hpp"

namespace shiftcp::density {

/// Gaussian-kernel density estimate over an n x d sample matrix with a single
/// isotropic bandwidth. Queries are evaluated in log space via log-sum-exp.
class KdeModel {
 public:
  KdeModel(Eigen::MatrixXd samples, double bandwidth);

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// One log density per row of `points`.
  Eigen::VectorXd log_density_rows(const Eigen::Ref<const Eigen::MatrixXd>& points) const;
  /// Log density at x with one kernel's own contribution removed, as if x had
  /// been left out of the fitted sample. Needs n >= 2; -inf when nothing but
  /// the self kernel carries mass at x.
  double log_density_loo(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  int dim() const { return static_cast<int>(samples_.cols()); }
  Eigen::Index size() const { return samples_.rows(); }
  double bandwidth() const { return bandwidth_; }
  const Eigen::MatrixXd& samples() const { return samples_; }

 private:
  Eigen::MatrixXd samples_;
  double bandwidth_;
  double log_norm_;  // -log n - d log h - (d/2) log(2 pi)
};

KdeModel fit_kde(const Eigen::MatrixXd& samples, double bandwidth);
double kde_log_density(const KdeModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// 25 log-spaced candidates from 10^-1.3 to 10^1.
std::vector<double> default_bandwidth_grid();

struct BandwidthSearch {
  std::vector<double> grid = default_bandwidth_grid();
  int folds = 10;
  std::uint64_t seed = 0;

  void validate(Eigen::Index n) const;
};

/// K-fold cross-validation over the candidate grid: folds are a seeded shuffle
/// cut into contiguous chunks, and the winner maximizes the mean held-out log
/// likelihood. Ties go to the smaller bandwidth.
double select_bandwidth(const Eigen::MatrixXd& samples, const BandwidthSearch& search);

/// Likelihood-ratio weights w(x) = p_test(x) / p_cal(x), optionally capped.
struct RatioWeights {
  std::vector<double> cal_weights;
  std::function<double(const Eigen::VectorXd&)> test_weight_of;
  std::optional<double> cap;
  bool converged = true;  // set by the logistic estimator
};

RatioWeights ratio_weights(const KdeModel& test_kde, const KdeModel& cal_kde,
                           const Eigen::MatrixXd& cal_points,
                           std::optional<double> cap = std::nullopt);

struct LogisticRatioConfig {
  double learning_rate = 0.5;
  int max_iters = 2000;
  double tol = 1e-7;
  std::optional<double> cap;
};

/// Density-ratio estimate from a linear logistic classifier separating
/// calibration (label 0) from test (label 1) points; the weight of x is
/// p(x) / (1 - p(x)).
RatioWeights logistic_ratio_weights(const Eigen::MatrixXd& cal_points,
                                    const Eigen::MatrixXd& test_points,
                                    const LogisticRatioConfig& config = {});

}  // namespace shiftcp::density
