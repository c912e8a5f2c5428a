#include "shiftcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace shiftcp::conformal {

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0) || !(beta <= 1.0)) {
    throw InputError("quantile level must lie in (0, 1], got " + std::to_string(beta));
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InputError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

void check_unit_scores(const std::vector<double>& scores, const char* what) {
  for (double s : scores) {
    if (!(s >= 0.0) || !(s <= 1.0)) {
      throw InputError(std::string(what) + " must lie in [0, 1], got " + std::to_string(s));
    }
  }
}

// Sorts (value, weight) pairs by value, merging exact duplicates.
void sorted_merged_atoms(const std::vector<double>& values,
                         const std::vector<double>& weights,
                         std::vector<double>& support, std::vector<double>& merged) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  support.clear();
  merged.clear();
  for (std::size_t i : order) {
    if (!support.empty() && support.back() == values[i]) {
      merged.back() += weights[i];
    } else {
      support.push_back(values[i]);
      merged.push_back(weights[i]);
    }
  }
}

}  // namespace

ClassProbabilities::ClassProbabilities(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
  if (rows_.cols() < 2) {
    throw InputError("class probabilities need at least 2 classes");
  }
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    double sum = 0;
    for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
      const double p = rows_(i, j);
      if (!(p >= 0.0) || !(p <= 1.0)) {
        throw InputError("probability out of [0, 1] at row " + std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InputError("probability row " + std::to_string(i) + " sums to " +
                       std::to_string(sum) + ", expected 1");
    }
  }
}

NonconformityScores nonconformity_scores(const ClassProbabilities& probs,
                                         const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.size()) {
    throw InputError("labels and probability rows differ in length");
  }
  const int k = probs.num_classes();
  NonconformityScores out;
  out.values.reserve(labels.size());
  out.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw InputError("label " + std::to_string(labels[i]) + " out of range at index " +
                       std::to_string(i));
    }
    out.values.push_back(1.0 - probs.rows()(static_cast<Eigen::Index>(i), labels[i]));
  }
  return out;
}

std::vector<std::vector<double>> group_by_class(const NonconformityScores& scores,
                                                int num_classes) {
  if (num_classes < 2) throw InputError("need at least 2 classes");
  std::vector<std::vector<double>> grouped(num_classes);
  for (std::size_t i = 0; i < scores.values.size(); ++i) {
    const int y = scores.labels[i];
    if (y < 0 || y >= num_classes) {
      throw InputError("label " + std::to_string(y) + " out of range at index " +
                       std::to_string(i));
    }
    grouped[y].push_back(scores.values[i]);
  }
  return grouped;
}

StepCdf empirical_cdf(const std::vector<double>& values) {
  if (values.empty()) throw InputError("empirical CDF needs a nonempty sample");
  StepCdf cdf;
  std::vector<double> counts;
  std::vector<double> ones(values.size(), 1.0);
  sorted_merged_atoms(values, ones, cdf.support_, counts);
  const double n = static_cast<double>(values.size());
  double running = 0;
  cdf.cum_mass_.reserve(counts.size());
  for (double c : counts) {
    running += c;
    cdf.cum_mass_.push_back(running / n);
  }
  return cdf;
}

double StepCdf::operator()(double x) const {
  auto it = std::upper_bound(support_.begin(), support_.end(), x);
  if (it == support_.begin()) return 0.0;
  return cum_mass_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

double StepCdf::quantile(double beta) const {
  check_beta(beta);
  auto it = std::partition_point(cum_mass_.begin(), cum_mass_.end(),
                                 [&](double m) { return m < beta; });
  if (it == cum_mass_.end()) return support_.back();  // final mass is 1 >= beta
  return support_[static_cast<std::size_t>(it - cum_mass_.begin())];
}

WeightedStepCdf::WeightedStepCdf(const std::vector<double>& cal_scores,
                                 const std::vector<double>& cal_weights,
                                 double test_weight) {
  if (cal_scores.size() != cal_weights.size()) {
    throw InputError("scores and weights differ in length");
  }
  for (double w : cal_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InputError("calibration weights must be finite and nonnegative");
    }
  }
  if (!(test_weight >= 0.0) || !std::isfinite(test_weight)) {
    throw InputError("test weight must be finite and nonnegative");
  }
  sorted_merged_atoms(cal_scores, cal_weights, support_, point_weights_);
  infinity_mass_ = test_weight;
  double running = 0;
  cum_weight_.reserve(point_weights_.size());
  for (double w : point_weights_) {
    running += w;
    cum_weight_.push_back(running);
  }
  normalizer_ = running + infinity_mass_;
  if (!(normalizer_ > 0.0)) {
    throw NumericalError("degenerate weights: total weight is zero");
  }
}

WeightedStepCdf weighted_ecdf(const std::vector<double>& cal_scores,
                              const std::vector<double>& cal_weights,
                              double test_weight) {
  return WeightedStepCdf(cal_scores, cal_weights, test_weight);
}

double WeightedStepCdf::operator()(double x) const {
  if (x == kInfinity) return 1.0;
  auto it = std::upper_bound(support_.begin(), support_.end(), x);
  if (it == support_.begin()) return 0.0;
  return cum_weight_[static_cast<std::size_t>(it - support_.begin()) - 1] / normalizer_;
}

double WeightedStepCdf::quantile(double beta) const {
  check_beta(beta);
  auto it = std::partition_point(cum_weight_.begin(), cum_weight_.end(),
                                 [&](double c) { return c / normalizer_ < beta; });
  if (it == cum_weight_.end()) return kInfinity;
  return support_[static_cast<std::size_t>(it - cum_weight_.begin())];
}

double quantile(double beta, const StepCdf& cdf) { return cdf.quantile(beta); }
double quantile(double beta, const WeightedStepCdf& cdf) { return cdf.quantile(beta); }

void CalibrationConfig::validate() const { check_alpha(alpha); }

bool PredictionSet::contains(int label) const {
  return std::binary_search(labels.begin(), labels.end(), label);
}

std::vector<double> mondrian_thresholds_unweighted(
    const std::vector<std::vector<double>>& scores_by_class, double alpha) {
  check_alpha(alpha);
  std::vector<double> thresholds;
  thresholds.reserve(scores_by_class.size());
  const double beta = 1.0 - alpha;
  for (std::size_t y = 0; y < scores_by_class.size(); ++y) {
    const auto& raw = scores_by_class[y];
    if (raw.empty()) {
      throw InputError("insufficient calibration: class " + std::to_string(y) +
                       " has no calibration scores");
    }
    check_unit_scores(raw, "nonconformity scores");
    std::vector<double> s = raw;
    std::sort(s.begin(), s.end());
    // n+1 atoms of equal mass, the last at +infinity.
    const double n_plus_1 = static_cast<double>(s.size() + 1);
    double t = kInfinity;
    for (std::size_t k = 1; k <= s.size(); ++k) {
      if (static_cast<double>(k) / n_plus_1 >= beta) {
        t = s[k - 1];
        break;
      }
    }
    thresholds.push_back(t);
  }
  return thresholds;
}

PredictionSet prediction_set_unweighted(const Eigen::VectorXd& test_probs,
                                        const std::vector<double>& thresholds) {
  if (static_cast<std::size_t>(test_probs.size()) != thresholds.size()) {
    throw InputError("thresholds must cover all classes");
  }
  PredictionSet set;
  set.per_label_threshold = thresholds;
  for (int y = 0; y < test_probs.size(); ++y) {
    if (1.0 - test_probs[y] <= thresholds[static_cast<std::size_t>(y)]) {
      set.labels.push_back(y);
    }
  }
  return set;
}

MondrianWeightedCalibrator::MondrianWeightedCalibrator(
    const std::vector<std::vector<double>>& scores_by_class,
    const std::vector<std::vector<double>>& weights_by_class, WeightNorm norm)
    : norm_(norm) {
  if (scores_by_class.size() != weights_by_class.size()) {
    throw InputError("per-class scores and weights differ in class count");
  }
  if (scores_by_class.empty()) throw InputError("no classes given");
  classes_.reserve(scores_by_class.size());
  for (std::size_t y = 0; y < scores_by_class.size(); ++y) {
    const auto& scores = scores_by_class[y];
    const auto& weights = weights_by_class[y];
    if (scores.empty()) {
      throw InputError("insufficient calibration: class " + std::to_string(y) +
                       " has no calibration scores");
    }
    if (scores.size() != weights.size()) {
      throw InputError("scores and weights differ in length for class " + std::to_string(y));
    }
    check_unit_scores(scores, "nonconformity scores");
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw InputError("calibration weights must be finite and nonnegative");
      }
    }
    ClassAtoms atoms;
    sorted_merged_atoms(scores, weights, atoms.support, atoms.cum_weight);
    double running = 0;
    for (double& c : atoms.cum_weight) {
      running += c;
      c = running;
    }
    atoms.total = running;
    all_class_total_ += running;
    classes_.push_back(std::move(atoms));
  }
}

std::vector<double> MondrianWeightedCalibrator::thresholds(double test_weight,
                                                           double alpha) const {
  check_alpha(alpha);
  if (!(test_weight >= 0.0) || !std::isfinite(test_weight)) {
    throw InputError("test weight must be finite and nonnegative");
  }
  const double beta = 1.0 - alpha;
  std::vector<double> out;
  out.reserve(classes_.size());
  for (const auto& atoms : classes_) {
    const double normalizer =
        (norm_ == WeightNorm::kPerClass ? atoms.total : all_class_total_) + test_weight;
    if (!(normalizer > 0.0)) {
      throw NumericalError("degenerate weights: total weight is zero");
    }
    auto it = std::partition_point(atoms.cum_weight.begin(), atoms.cum_weight.end(),
                                   [&](double c) { return c / normalizer < beta; });
    out.push_back(it == atoms.cum_weight.end()
                      ? kInfinity
                      : atoms.support[static_cast<std::size_t>(it - atoms.cum_weight.begin())]);
  }
  return out;
}

PredictionSet MondrianWeightedCalibrator::predict(const Eigen::VectorXd& test_probs,
                                                  double test_weight, double alpha) const {
  if (test_probs.size() != static_cast<Eigen::Index>(classes_.size())) {
    throw InputError("probability row does not match the number of classes");
  }
  return prediction_set_unweighted(test_probs, thresholds(test_weight, alpha));
}

PredictionSet prediction_set_weighted(
    const Eigen::VectorXd& test_probs, double test_weight,
    const std::vector<std::vector<double>>& cal_scores_by_class,
    const std::vector<std::vector<double>>& cal_weights_by_class, double alpha) {
  MondrianWeightedCalibrator calibrator(cal_scores_by_class, cal_weights_by_class);
  return calibrator.predict(test_probs, test_weight, alpha);
}

}  // namespace shiftcp::conformal
