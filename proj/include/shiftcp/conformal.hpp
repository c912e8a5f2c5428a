#pragma once

#include <Eigen/Core>
#include <limits>
#include <vector>

#include "shiftcp/errors.hpp"

namespace shiftcp::conformal {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Per-example probability vectors over K class labels. Every row must lie on
/// the simplex: entries in [0, 1], summing to 1 within 1e-9.
class ClassProbabilities {
 public:
  explicit ClassProbabilities(Eigen::MatrixXd rows);

  int num_classes() const { return static_cast<int>(rows_.cols()); }
  Eigen::Index size() const { return rows_.rows(); }
  const Eigen::MatrixXd& rows() const { return rows_; }

 private:
  Eigen::MatrixXd rows_;
};

/// Scores 1 - p_y(x) paired with the true class label of each example.
struct NonconformityScores {
  std::vector<double> values;
  std::vector<int> labels;
};

NonconformityScores nonconformity_scores(const ClassProbabilities& probs,
                                         const std::vector<int>& labels);

/// Partition scores into per-class lists, preserving input order within a class.
std::vector<std::vector<double>> group_by_class(const NonconformityScores& scores,
                                                int num_classes);

/// Empirical CDF of a finite sample: F(x) = |{i : v_i <= x}| / N.
class StepCdf {
 public:
  double operator()(double x) const;
  /// inf{x : F(x) >= beta} for beta in (0, 1].
  double quantile(double beta) const;

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& cum_mass() const { return cum_mass_; }

 private:
  friend StepCdf empirical_cdf(const std::vector<double>& values);
  std::vector<double> support_;   // ascending, distinct
  std::vector<double> cum_mass_;  // nondecreasing, ends at 1
};

StepCdf empirical_cdf(const std::vector<double>& values);

/// Weighted empirical CDF with an atom of mass at +infinity: the calibration
/// points carry weights and the test point's own weight sits on the infinity
/// atom. Duplicate scores are merged by summing their weights.
class WeightedStepCdf {
 public:
  WeightedStepCdf(const std::vector<double>& cal_scores,
                  const std::vector<double>& cal_weights, double test_weight);

  double operator()(double x) const;
  /// inf{x : F(x) >= beta}; +infinity when beta exceeds the total finite mass.
  double quantile(double beta) const;

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& point_weights() const { return point_weights_; }
  double infinity_mass() const { return infinity_mass_; }
  double normalizer() const { return normalizer_; }

 private:
  std::vector<double> support_;        // ascending, distinct
  std::vector<double> point_weights_;  // merged weight per support point
  std::vector<double> cum_weight_;     // running sum of point_weights_
  double infinity_mass_ = 0;
  double normalizer_ = 0;
};

WeightedStepCdf weighted_ecdf(const std::vector<double>& cal_scores,
                              const std::vector<double>& cal_weights,
                              double test_weight);

double quantile(double beta, const StepCdf& cdf);
double quantile(double beta, const WeightedStepCdf& cdf);

struct CalibrationConfig {
  double alpha = 0.1;
  bool mondrian = true;

  void validate() const;
};

/// Labels admitted at a given miscoverage level, with the quantile threshold
/// used for each candidate label kept for diagnostics.
struct PredictionSet {
  std::vector<int> labels;                  // ascending subset of {0..K-1}
  std::vector<double> per_label_threshold;  // size K

  bool contains(int label) const;
  std::size_t size() const { return labels.size(); }
};

/// Per-class thresholds t_y = Quantile(1 - alpha) of the class-conditional
/// empirical CDF augmented with one +infinity atom of equal mass.
std::vector<double> mondrian_thresholds_unweighted(
    const std::vector<std::vector<double>>& scores_by_class, double alpha);

PredictionSet prediction_set_unweighted(const Eigen::VectorXd& test_probs,
                                        const std::vector<double>& thresholds);

/// Whether weighted class-conditional CDFs normalize by the class's own weight
/// total (default) or by the weight total over all classes.
enum class WeightNorm { kPerClass, kGlobal };

/// Class-conditional weighted calibration fitted once and queried per test
/// point; sorting and weight accumulation are shared across queries.
class MondrianWeightedCalibrator {
 public:
  MondrianWeightedCalibrator(const std::vector<std::vector<double>>& scores_by_class,
                             const std::vector<std::vector<double>>& weights_by_class,
                             WeightNorm norm = WeightNorm::kPerClass);

  int num_classes() const { return static_cast<int>(classes_.size()); }
  std::vector<double> thresholds(double test_weight, double alpha) const;
  PredictionSet predict(const Eigen::VectorXd& test_probs, double test_weight,
                        double alpha) const;

 private:
  struct ClassAtoms {
    std::vector<double> support;     // ascending, distinct
    std::vector<double> cum_weight;  // running raw-weight sums
    double total = 0;                // finite-atom weight of this class
  };
  std::vector<ClassAtoms> classes_;
  double all_class_total_ = 0;
  WeightNorm norm_;
};

/// Covariate-shift-corrected prediction set: for each candidate label the
/// class-conditional weighted CDF gets the test point's weight on its
/// infinity atom and the label is kept iff 1 - p_y <= Quantile(1 - alpha).
PredictionSet prediction_set_weighted(
    const Eigen::VectorXd& test_probs, double test_weight,
    const std::vector<std::vector<double>>& cal_scores_by_class,
    const std::vector<std::vector<double>>& cal_weights_by_class, double alpha);

}  // namespace shiftcp::conformal
