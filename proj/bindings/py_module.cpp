// Python bindings for the core operations: conformal set construction,
// density-ratio weighting, the energy-regularized classifier, dataset
// splitting, coverage evaluation, and the end-to-end pipeline.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "shiftcp/pipeline.hpp"

namespace py = pybind11;
using namespace shiftcp;
using namespace shiftcp::pipeline;

namespace {

void bind_conformal(py::module_& m) {
  using namespace shiftcp::conformal;

  py::class_<ClassProbabilities>(m, "ClassProbabilities")
      .def(py::init<Eigen::MatrixXd>(), py::arg("rows"))
      .def_property_readonly("num_classes", &ClassProbabilities::num_classes)
      .def_property_readonly("rows", &ClassProbabilities::rows);

  py::class_<NonconformityScores>(m, "NonconformityScores")
      .def_readonly("values", &NonconformityScores::values)
      .def_readonly("labels", &NonconformityScores::labels);

  m.def(
      "nonconformity_scores",
      [](const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
        return nonconformity_scores(ClassProbabilities(probs), labels);
      },
      py::arg("probs"), py::arg("labels"));
  m.def("group_by_class", &group_by_class, py::arg("scores"), py::arg("num_classes"));

  py::class_<StepCdf>(m, "StepCdf")
      .def("__call__", &StepCdf::operator(), py::arg("x"))
      .def("quantile", &StepCdf::quantile, py::arg("beta"))
      .def_property_readonly("support", &StepCdf::support)
      .def_property_readonly("cum_mass", &StepCdf::cum_mass);

  py::class_<WeightedStepCdf>(m, "WeightedStepCdf")
      .def(py::init<const std::vector<double>&, const std::vector<double>&, double>(),
           py::arg("cal_scores"), py::arg("cal_weights"), py::arg("test_weight"))
      .def("__call__", &WeightedStepCdf::operator(), py::arg("x"))
      .def("quantile", &WeightedStepCdf::quantile, py::arg("beta"))
      .def_property_readonly("support", &WeightedStepCdf::support)
      .def_property_readonly("point_weights", &WeightedStepCdf::point_weights)
      .def_property_readonly("infinity_mass", &WeightedStepCdf::infinity_mass)
      .def_property_readonly("normalizer", &WeightedStepCdf::normalizer);

  m.def("empirical_cdf", &empirical_cdf, py::arg("values"));
  m.def("weighted_ecdf", &weighted_ecdf, py::arg("cal_scores"), py::arg("cal_weights"),
        py::arg("test_weight"));
  m.def("quantile", py::overload_cast<double, const StepCdf&>(&quantile), py::arg("beta"),
        py::arg("cdf"));
  m.def("quantile", py::overload_cast<double, const WeightedStepCdf&>(&quantile),
        py::arg("beta"), py::arg("cdf"));

  py::class_<PredictionSet>(m, "PredictionSet")
      .def_readonly("labels", &PredictionSet::labels)
      .def_readonly("per_label_threshold", &PredictionSet::per_label_threshold)
      .def("contains", &PredictionSet::contains, py::arg("label"))
      .def("__len__", [](const PredictionSet& s) { return s.size(); })
      .def("__contains__", &PredictionSet::contains);

  m.def("mondrian_thresholds_unweighted", &mondrian_thresholds_unweighted,
        py::arg("scores_by_class"), py::arg("alpha"));
  m.def("prediction_set_unweighted", &prediction_set_unweighted, py::arg("test_probs"),
        py::arg("thresholds"));
  m.def("prediction_set_weighted", &prediction_set_weighted, py::arg("test_probs"),
        py::arg("test_weight"), py::arg("cal_scores_by_class"),
        py::arg("cal_weights_by_class"), py::arg("alpha"));

  py::enum_<WeightNorm>(m, "WeightNorm")
      .value("PER_CLASS", WeightNorm::kPerClass)
      .value("GLOBAL", WeightNorm::kGlobal);

  py::class_<MondrianWeightedCalibrator>(m, "MondrianWeightedCalibrator")
      .def(py::init<const std::vector<std::vector<double>>&,
                    const std::vector<std::vector<double>>&, WeightNorm>(),
           py::arg("scores_by_class"), py::arg("weights_by_class"),
           py::arg("norm") = WeightNorm::kPerClass)
      .def("thresholds", &MondrianWeightedCalibrator::thresholds, py::arg("test_weight"),
           py::arg("alpha"))
      .def("predict", &MondrianWeightedCalibrator::predict, py::arg("test_probs"),
           py::arg("test_weight"), py::arg("alpha"));
}

void bind_density(py::module_& m) {
  using namespace shiftcp::density;

  py::class_<KdeModel>(m, "KdeModel")
      .def(py::init<Eigen::MatrixXd, double>(), py::arg("samples"), py::arg("bandwidth"))
      .def("log_density",
           [](const KdeModel& k, const Eigen::VectorXd& x) { return k.log_density(x); },
           py::arg("x"))
      .def("density",
           [](const KdeModel& k, const Eigen::VectorXd& x) { return k.density(x); },
           py::arg("x"))
      .def("log_density_rows",
           [](const KdeModel& k, const Eigen::MatrixXd& xs) { return k.log_density_rows(xs); },
           py::arg("points"))
      .def("log_density_loo",
           [](const KdeModel& k, const Eigen::VectorXd& x) { return k.log_density_loo(x); },
           py::arg("x"))
      .def_property_readonly("dim", &KdeModel::dim)
      .def_property_readonly("bandwidth", &KdeModel::bandwidth);

  m.def("fit_kde", &fit_kde, py::arg("samples"), py::arg("bandwidth"));
  m.def(
      "kde_log_density",
      [](const KdeModel& model, const Eigen::VectorXd& x) { return kde_log_density(model, x); },
      py::arg("model"), py::arg("x"));
  m.def("default_bandwidth_grid", &default_bandwidth_grid);

  py::class_<BandwidthSearch>(m, "BandwidthSearch")
      .def(py::init<>())
      .def_readwrite("grid", &BandwidthSearch::grid)
      .def_readwrite("folds", &BandwidthSearch::folds)
      .def_readwrite("seed", &BandwidthSearch::seed);

  m.def("select_bandwidth", &select_bandwidth, py::arg("samples"), py::arg("search"));

  py::class_<RatioWeights>(m, "RatioWeights")
      .def_readonly("cal_weights", &RatioWeights::cal_weights)
      .def_readonly("cap", &RatioWeights::cap)
      .def_readonly("converged", &RatioWeights::converged)
      .def("test_weight",
           [](const RatioWeights& w, const Eigen::VectorXd& x) { return w.test_weight_of(x); },
           py::arg("x"));

  m.def("ratio_weights", &ratio_weights, py::arg("test_kde"), py::arg("cal_kde"),
        py::arg("cal_points"), py::arg("cap") = std::nullopt);

  py::class_<LogisticRatioConfig>(m, "LogisticRatioConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &LogisticRatioConfig::learning_rate)
      .def_readwrite("max_iters", &LogisticRatioConfig::max_iters)
      .def_readwrite("tol", &LogisticRatioConfig::tol)
      .def_readwrite("cap", &LogisticRatioConfig::cap);

  m.def("logistic_ratio_weights", &logistic_ratio_weights, py::arg("cal_points"),
        py::arg("test_points"), py::arg("config") = LogisticRatioConfig{});
}

void bind_energy(py::module_& m) {
  using namespace shiftcp::energy;

  py::class_<EnergyConfig>(m, "EnergyConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &EnergyConfig::lambda)
      .def_readwrite("margin_in", &EnergyConfig::margin_in)
      .def_readwrite("margin_out", &EnergyConfig::margin_out)
      .def_readwrite("temperature", &EnergyConfig::temperature)
      .def_readwrite("learning_rate", &EnergyConfig::learning_rate)
      .def_readwrite("epochs", &EnergyConfig::epochs)
      .def_readwrite("batch_size", &EnergyConfig::batch_size)
      .def_readwrite("seed", &EnergyConfig::seed)
      .def_readwrite("hidden_dims", &EnergyConfig::hidden_dims);

  py::class_<EnergyMlp>(m, "EnergyMlp")
      .def(py::init<std::vector<int>, double>(), py::arg("layer_dims"),
           py::arg("temperature") = 1.0)
      .def_static("random_init", &EnergyMlp::random_init, py::arg("layer_dims"),
                  py::arg("temperature"), py::arg("seed"))
      .def("forward",
           [](const EnergyMlp& model, const Eigen::VectorXd& x) {
             auto out = model.forward(x);
             return py::make_tuple(out.features, out.logits);
           },
           py::arg("x"))
      .def("logits_rows",
           [](const EnergyMlp& m2, const Eigen::MatrixXd& xs) { return m2.logits_rows(xs); },
           py::arg("xs"))
      .def("features_rows",
           [](const EnergyMlp& m2, const Eigen::MatrixXd& xs) { return m2.features_rows(xs); },
           py::arg("xs"))
      .def("probabilities_rows",
           [](const EnergyMlp& m2, const Eigen::MatrixXd& xs) {
             return m2.probabilities_rows(xs);
           },
           py::arg("xs"))
      .def("energies_rows",
           [](const EnergyMlp& m2, const Eigen::MatrixXd& xs) { return m2.energies_rows(xs); },
           py::arg("xs"))
      .def_property_readonly("layer_dims", &EnergyMlp::layer_dims)
      .def_property_readonly("temperature", &EnergyMlp::temperature)
      .def_property_readonly("weights",
                             [](const EnergyMlp& m2) { return m2.weights(); })
      .def_property_readonly("biases", [](const EnergyMlp& m2) { return m2.biases(); });

  m.def(
      "softmax",
      [](const Eigen::VectorXd& logits, double t) { return softmax(logits, t); },
      py::arg("logits"), py::arg("temperature") = 1.0);
  m.def(
      "energy_score",
      [](const Eigen::VectorXd& logits, double t) { return energy_score(logits, t); },
      py::arg("logits"), py::arg("temperature") = 1.0);
  m.def("energy_margin_loss", &energy_margin_loss, py::arg("in_energies"),
        py::arg("out_energies"), py::arg("margin_in"), py::arg("margin_out"));
  m.def(
      "total_loss",
      [](const Eigen::MatrixXd& in_x, const std::vector<int>& in_y,
         const Eigen::MatrixXd& out_x, const EnergyMlp& model, const EnergyConfig& config) {
        return total_loss(in_x, in_y, out_x, model, config);
      },
      py::arg("in_features"), py::arg("in_labels"), py::arg("out_features"), py::arg("model"),
      py::arg("config"));

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("epoch_losses", &TrainResult::epoch_losses);

  m.def(
      "train_ebm",
      [](const Eigen::MatrixXd& in_x, const std::vector<int>& in_y,
         const Eigen::MatrixXd& out_x, const EnergyConfig& config) {
        return train_ebm(in_x, in_y, out_x, config);
      },
      py::arg("in_features"), py::arg("in_labels"), py::arg("out_features"), py::arg("config"));
  m.def(
      "grad_check",
      [](const EnergyMlp& model, const Eigen::MatrixXd& in_x, const std::vector<int>& in_y,
         const Eigen::MatrixXd& out_x, const EnergyConfig& config, double eps) {
        return grad_check(model, in_x, in_y, out_x, config, eps);
      },
      py::arg("model"), py::arg("in_features"), py::arg("in_labels"), py::arg("out_features"),
      py::arg("config"), py::arg("eps") = 1e-5);
}

void bind_splits(py::module_& m) {
  using namespace shiftcp::splits;

  py::class_<SplitAssignment>(m, "SplitAssignment")
      .def_readonly("train_idx", &SplitAssignment::train_idx)
      .def_readonly("cal_idx", &SplitAssignment::cal_idx)
      .def_readonly("test_idx", &SplitAssignment::test_idx);

  m.def("random_split", &random_split, py::arg("n"), py::arg("test_frac"), py::arg("cal_frac"),
        py::arg("seed"));
  m.def("jaccard", &jaccard, py::arg("a"), py::arg("b"));
  m.def("fingerprint_split", &fingerprint_split, py::arg("fingerprints"), py::arg("test_frac"),
        py::arg("cal_frac"), py::arg("seed"));
  m.def("scaffold_split", &scaffold_split, py::arg("scaffold_ids"), py::arg("test_frac"),
        py::arg("cal_frac"), py::arg("seed"));

  py::enum_<FilterMode>(m, "FilterMode")
      .value("SCAFFOLD", FilterMode::kScaffold)
      .value("TANIMOTO", FilterMode::kTanimoto);
  py::enum_<TanimotoThreshold>(m, "TanimotoThreshold")
      .value("PER_POINT_MAX", TanimotoThreshold::kPerPointMax)
      .value("ALL_PAIRS_MIN", TanimotoThreshold::kAllPairsMin);

  py::class_<MoleculeMeta>(m, "MoleculeMeta")
      .def(py::init<>())
      .def_readwrite("scaffolds", &MoleculeMeta::scaffolds)
      .def_readwrite("fingerprints", &MoleculeMeta::fingerprints);

  m.def("filter_unlabeled", &filter_unlabeled, py::arg("unlabeled"), py::arg("train"),
        py::arg("mode"), py::arg("rule") = TanimotoThreshold::kPerPointMax);
}

void bind_eval(py::module_& m) {
  using namespace shiftcp::eval;

  py::class_<CoverageReport>(m, "CoverageReport")
      .def_readonly("per_class_coverage", &CoverageReport::per_class_coverage)
      .def_readonly("overall_coverage", &CoverageReport::overall_coverage)
      .def_readonly("mean_set_size", &CoverageReport::mean_set_size)
      .def_readonly("empty_set_rate", &CoverageReport::empty_set_rate)
      .def_readonly("counts", &CoverageReport::counts)
      .def_readonly("alpha", &CoverageReport::alpha);

  m.def("coverage_report", &coverage_report, py::arg("sets"), py::arg("true_labels"),
        py::arg("alpha"));
  m.def("macd", &macd, py::arg("coverages"), py::arg("alpha"));
  m.def("macd_tail25", &macd_tail25, py::arg("coverages"), py::arg("alpha"));
  m.def("coverage_gap_reduction", &coverage_gap_reduction, py::arg("method_macd"),
        py::arg("baseline_macd"));
}

void bind_pipeline(py::module_& m) {
  py::class_<GaussianComponent>(m, "GaussianComponent")
      .def(py::init<>())
      .def_readwrite("mean", &GaussianComponent::mean)
      .def_readwrite("scale", &GaussianComponent::scale)
      .def_readwrite("weight", &GaussianComponent::weight);

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def(py::init<>())
      .def_readwrite("components", &GaussianMixture::components)
      .def("log_density",
           [](const GaussianMixture& g, const Eigen::VectorXd& x) { return g.log_density(x); })
      .def("density",
           [](const GaussianMixture& g, const Eigen::VectorXd& x) { return g.density(x); })
      .def_static("single", &GaussianMixture::single, py::arg("mean"), py::arg("scale"));

  py::class_<LabelRule> rule(m, "LabelRule");
  py::enum_<LabelRule::Kind>(rule, "Kind")
      .value("LINEAR", LabelRule::Kind::kLinear)
      .value("RADIAL", LabelRule::Kind::kRadial);
  rule.def(py::init<>())
      .def_readwrite("kind", &LabelRule::kind)
      .def_readwrite("direction", &LabelRule::direction)
      .def_readwrite("offset", &LabelRule::offset)
      .def_readwrite("center", &LabelRule::center)
      .def_readwrite("radius", &LabelRule::radius)
      .def_readwrite("noise", &LabelRule::noise)
      .def("prob_class1",
           [](const LabelRule& r, const Eigen::VectorXd& x) { return r.prob_class1(x); });

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("dim", &SyntheticSpec::dim)
      .def_readwrite("cal_mixture", &SyntheticSpec::cal_mixture)
      .def_readwrite("test_mixture", &SyntheticSpec::test_mixture)
      .def_readwrite("label_rule", &SyntheticSpec::label_rule)
      .def_readwrite("n_train", &SyntheticSpec::n_train)
      .def_readwrite("n_cal", &SyntheticSpec::n_cal)
      .def_readwrite("n_test", &SyntheticSpec::n_test)
      .def_readwrite("n_unlabeled", &SyntheticSpec::n_unlabeled)
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_static("standard_shift", &SyntheticSpec::standard_shift, py::arg("shift"),
                  py::arg("seed"));

  py::class_<SyntheticData>(m, "SyntheticData")
      .def_readonly("train_x", &SyntheticData::train_x)
      .def_readonly("train_y", &SyntheticData::train_y)
      .def_readonly("cal_x", &SyntheticData::cal_x)
      .def_readonly("cal_y", &SyntheticData::cal_y)
      .def_readonly("test_x", &SyntheticData::test_x)
      .def_readonly("test_y", &SyntheticData::test_y)
      .def_readonly("unlabeled_x", &SyntheticData::unlabeled_x)
      .def("oracle_weight",
           [](const SyntheticData& d, const Eigen::VectorXd& x) { return d.oracle_weight(x); });

  m.def("gen_synthetic", &gen_synthetic, py::arg("spec"));

  py::enum_<Weighting>(m, "Weighting")
      .value("NONE", Weighting::kNone)
      .value("KDE_ENERGY", Weighting::kKdeEnergy)
      .value("KDE_FEATURE", Weighting::kKdeFeature)
      .value("LOGISTIC", Weighting::kLogistic)
      .value("ORACLE", Weighting::kOracle);
  py::enum_<KdeInput>(m, "KdeInput")
      .value("LOGITS", KdeInput::kLogits)
      .value("SCALAR_ENERGY", KdeInput::kScalarEnergy)
      .value("FEATURES", KdeInput::kFeatures);

  py::class_<BandwidthSpec>(m, "BandwidthSpec")
      .def(py::init<>())
      .def_readwrite("cv", &BandwidthSpec::cv)
      .def_readwrite("value", &BandwidthSpec::value)
      .def_static("parse", &BandwidthSpec::parse, py::arg("text"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("weighting", &PipelineConfig::weighting)
      .def_readwrite("kde_input", &PipelineConfig::kde_input)
      .def_readwrite("alphas", &PipelineConfig::alphas)
      .def_readwrite("test_frac", &PipelineConfig::test_frac)
      .def_readwrite("cal_frac", &PipelineConfig::cal_frac)
      .def_readwrite("energy", &PipelineConfig::energy)
      .def_readwrite("bandwidth_search", &PipelineConfig::bandwidth_search)
      .def_readwrite("bandwidth", &PipelineConfig::bandwidth)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("weight_cap", &PipelineConfig::weight_cap)
      .def_readwrite("min_class_calibration", &PipelineConfig::min_class_calibration)
      .def_readwrite("weight_norm", &PipelineConfig::weight_norm)
      .def_readwrite("kde_loo_test", &PipelineConfig::kde_loo_test);

  py::class_<PipelineData>(m, "PipelineData")
      .def(py::init<>())
      .def_readwrite("train_x", &PipelineData::train_x)
      .def_readwrite("train_y", &PipelineData::train_y)
      .def_readwrite("cal_x", &PipelineData::cal_x)
      .def_readwrite("cal_y", &PipelineData::cal_y)
      .def_readwrite("test_x", &PipelineData::test_x)
      .def_readwrite("test_y", &PipelineData::test_y)
      .def_readwrite("unlabeled_x", &PipelineData::unlabeled_x)
      .def_readwrite("test_ids", &PipelineData::test_ids)
      .def_readwrite("model", &PipelineData::model)
      .def_readwrite("cal_logits", &PipelineData::cal_logits)
      .def_readwrite("test_logits", &PipelineData::test_logits)
      .def_readwrite("num_classes", &PipelineData::num_classes)
      .def_static("from_synthetic", &PipelineData::from_synthetic, py::arg("data"));

  py::class_<AlphaResult>(m, "AlphaResult")
      .def_readonly("alpha", &AlphaResult::alpha)
      .def_readonly("sets", &AlphaResult::sets)
      .def_readonly("report", &AlphaResult::report)
      .def_readonly("macd", &AlphaResult::macd)
      .def_readonly("macd_tail25", &AlphaResult::macd_tail25);

  py::class_<PipelineResult>(m, "PipelineResult")
      .def_readonly("alpha_results", &PipelineResult::alpha_results)
      .def_readonly("weighting", &PipelineResult::weighting)
      .def_readonly("cal_weights", &PipelineResult::cal_weights)
      .def_readonly("test_weights", &PipelineResult::test_weights)
      .def_readonly("bandwidth_cal", &PipelineResult::bandwidth_cal)
      .def_readonly("bandwidth_test", &PipelineResult::bandwidth_test)
      .def_readonly("warnings", &PipelineResult::warnings)
      .def_readonly("trained_model", &PipelineResult::trained_model)
      .def("report_json", [](const PipelineResult& r) { return r.report_json().dump(2); });

  m.def("run_pipeline", &run_pipeline, py::arg("config"), py::arg("data"),
        py::call_guard<py::gil_scoped_release>());
  m.def("emit_report", &emit_report, py::arg("result"), py::arg("out_dir"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conformal prediction sets under covariate shift";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  bind_conformal(m);
  bind_density(m);
  bind_energy(m);
  bind_splits(m);
  bind_eval(m);
  bind_pipeline(m);
}
