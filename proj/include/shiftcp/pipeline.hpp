#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftcp/conformal.hpp"
#include "shiftcp/dataset.hpp"
#include "shiftcp/density.hpp"
#include "shiftcp/energy.hpp"
#include "shiftcp/errors.hpp"
#include "shiftcp/eval.hpp"
#include "shiftcp/splits.hpp"
#include "shiftcp/synthetic.hpp"

namespace shiftcp::pipeline {

enum class Weighting { kNone, kKdeEnergy, kKdeFeature, kLogistic, kOracle };
enum class KdeInput { kLogits, kScalarEnergy, kFeatures };
enum class SplitStrategy { kRandom, kScaffold, kFingerprint };

std::string to_string(Weighting w);
std::string to_string(KdeInput k);
std::string to_string(SplitStrategy s);
Weighting parse_weighting(const std::string& name);
KdeInput parse_kde_input(const std::string& name);
SplitStrategy parse_split_strategy(const std::string& name);

/// Either cross-validated ("cv") or a fixed numeric bandwidth.
struct BandwidthSpec {
  bool cv = true;
  double value = 0;

  static BandwidthSpec parse(const std::string& text);
  std::string to_text() const;
};

struct PipelineConfig {
  Weighting weighting = Weighting::kKdeEnergy;
  KdeInput kde_input = KdeInput::kLogits;
  std::vector<double> alphas = {0.1};
  SplitStrategy split = SplitStrategy::kRandom;
  double test_frac = 0.15;
  double cal_frac = 0.15;
  energy::EnergyConfig energy;
  density::BandwidthSearch bandwidth_search;
  BandwidthSpec bandwidth;
  std::uint64_t seed = 0;
  std::optional<double> weight_cap;
  int min_class_calibration = 10;
  conformal::WeightNorm weight_norm = conformal::WeightNorm::kPerClass;
  // Evaluate each test point's own weight under the test KDE with that point
  // left out of the fit.
  bool kde_loo_test = false;

  void validate() const;
};

/// Resolved inputs for one end-to-end run. Exactly one of {trained model,
/// precomputed logits, labeled training data} must make class probabilities
/// reachable; the oracle weight function exists only for synthetic data.
struct PipelineData {
  Eigen::MatrixXd train_x;
  std::vector<int> train_y;
  Eigen::MatrixXd cal_x;
  std::vector<int> cal_y;
  Eigen::MatrixXd test_x;
  std::vector<int> test_y;  // may stay empty: sets are built, coverage is skipped
  Eigen::MatrixXd unlabeled_x;
  std::vector<std::string> test_ids;  // optional names for the per-point dump
  std::function<double(const Eigen::VectorXd&)> oracle_weight;
  std::optional<energy::EnergyMlp> model;
  std::optional<Eigen::MatrixXd> cal_logits;
  std::optional<Eigen::MatrixXd> test_logits;
  int num_classes = 0;  // inferred from labels or logits when 0

  static PipelineData from_synthetic(const SyntheticData& data);
};

struct AlphaResult {
  double alpha = 0;
  std::vector<conformal::PredictionSet> sets;
  std::optional<eval::CoverageReport> report;  // present when test labels are known
  double macd = 0;                             // over the per-class coverages
  double macd_tail25 = 0;
};

struct PipelineResult {
  std::vector<AlphaResult> alpha_results;
  std::string weighting;
  std::vector<double> cal_weights;   // empty for unweighted runs
  std::vector<double> test_weights;  // one per test point; empty for unweighted runs
  std::optional<double> bandwidth_cal;
  std::optional<double> bandwidth_test;
  std::vector<std::string> warnings;
  std::vector<int> test_labels;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  std::uint64_t energy_seed = 0;
  std::uint64_t bandwidth_seed = 0;
  int num_classes = 0;
  std::optional<energy::EnergyMlp> trained_model;

  nlohmann::json report_json() const;
};

/// End-to-end run: obtain class probabilities (training the energy model if
/// needed), estimate calibration/test densities, weight the calibration
/// scores, and build prediction sets for every alpha. Calibration weights are
/// computed once per test set; only the infinity-atom weight varies per point.
PipelineResult run_pipeline(const PipelineConfig& config, const PipelineData& data);

/// Writes report.json plus one per-point dump (sets_a<alpha>.csv) per alpha.
/// Returns the paths written.
std::vector<std::filesystem::path> emit_report(const PipelineResult& result,
                                               const std::filesystem::path& out_dir);

nlohmann::json model_to_json(const energy::EnergyMlp& model);
energy::EnergyMlp model_from_json(const nlohmann::json& j);
void save_model(const energy::EnergyMlp& model, const std::string& path);
energy::EnergyMlp load_model(const std::string& path);

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::string& path);

}  // namespace shiftcp::pipeline
