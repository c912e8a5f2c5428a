#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "shiftcp/errors.hpp"

namespace shiftcp::pipeline {

struct GaussianComponent {
  Eigen::VectorXd mean;
  double scale = 1.0;  // isotropic standard deviation
  double weight = 1.0;
};

/// Mixture of isotropic Gaussians with an exact density; doubles as the oracle
/// for likelihood-ratio weights on synthetic data.
struct GaussianMixture {
  std::vector<GaussianComponent> components;

  int dim() const;
  void validate() const;
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;

  static GaussianMixture single(Eigen::VectorXd mean, double scale);
};

/// P(Y = 1 | x) shared between the calibration and test distributions.
/// Linear: sigmoid((direction . x - offset) / noise); radial: sigmoid((radius
/// - |x - center|) / noise). Zero noise degenerates to a hard threshold.
struct LabelRule {
  enum class Kind { kLinear, kRadial };
  Kind kind = Kind::kLinear;
  Eigen::VectorXd direction;  // linear
  double offset = 0.0;        // linear
  Eigen::VectorXd center;     // radial
  double radius = 1.0;        // radial
  double noise = 0.5;

  void validate(int dim) const;
  double prob_class1(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Class probabilities (1-p, p); the rule's own conditional makes a
  /// convenient fixed classifier for synthetic studies.
  Eigen::Vector2d class_probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct SyntheticSpec {
  int dim = 2;
  GaussianMixture cal_mixture;
  GaussianMixture test_mixture;
  LabelRule label_rule;
  int n_train = 1000;
  int n_cal = 500;
  int n_test = 500;
  int n_unlabeled = 1000;
  std::uint64_t seed = 0;

  void validate() const;

  /// The standard 2-d covariate-shift fixture: calibration at N(0, I), test at
  /// N(mu, I) with |mu| = shift along the first axis, labels from a smooth
  /// linear rule aligned with the shift.
  static SyntheticSpec standard_shift(double shift, std::uint64_t seed);
};

/// Sampled datasets plus the exact mixture densities behind them. Train and
/// calibration draw from the calibration mixture, test and the unlabeled pool
/// from the test mixture; labels everywhere follow the one shared rule.
struct SyntheticData {
  Eigen::MatrixXd train_x;
  std::vector<int> train_y;
  Eigen::MatrixXd cal_x;
  std::vector<int> cal_y;
  Eigen::MatrixXd test_x;
  std::vector<int> test_y;
  Eigen::MatrixXd unlabeled_x;
  GaussianMixture cal_density;
  GaussianMixture test_density;
  LabelRule label_rule;

  /// Exact likelihood ratio dP_test / dP_cal at x.
  double oracle_weight(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

}  // namespace shiftcp::pipeline
