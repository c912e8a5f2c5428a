#include "shiftcp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <utility>

namespace shiftcp::pipeline {

namespace {

using nlohmann::json;

// Rethrows module errors with the pipeline stage prepended, preserving the
// error category so exit codes survive.
template <typename F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    throw InputError(std::string("[") + name + "] " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("[") + name + "] " + e.what());
  } catch (const IoError& e) {
    throw IoError(std::string("[") + name + "] " + e.what());
  }
}

Eigen::VectorXd row_energies_from_logits(const Eigen::MatrixXd& logits, double temperature) {
  Eigen::VectorXd e(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    e[i] = energy::energy_score(logits.row(i).transpose(), temperature);
  }
  return e;
}

Eigen::MatrixXd row_probabilities_from_logits(const Eigen::MatrixXd& logits,
                                              double temperature) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    p.row(i) = energy::softmax(logits.row(i).transpose(), temperature).transpose();
  }
  return p;
}

double apply_cap(double w, const std::optional<double>& cap) {
  return cap ? std::min(w, *cap) : w;
}

}  // namespace

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::kNone: return "none";
    case Weighting::kKdeEnergy: return "kde-energy";
    case Weighting::kKdeFeature: return "kde-feature";
    case Weighting::kLogistic: return "logistic";
    case Weighting::kOracle: return "oracle";
  }
  throw InputError("unknown weighting");
}

std::string to_string(KdeInput k) {
  switch (k) {
    case KdeInput::kLogits: return "logits";
    case KdeInput::kScalarEnergy: return "scalar-energy";
    case KdeInput::kFeatures: return "features";
  }
  throw InputError("unknown kde input");
}

std::string to_string(SplitStrategy s) {
  switch (s) {
    case SplitStrategy::kRandom: return "random";
    case SplitStrategy::kScaffold: return "scaffold";
    case SplitStrategy::kFingerprint: return "fingerprint";
  }
  throw InputError("unknown split strategy");
}

Weighting parse_weighting(const std::string& name) {
  if (name == "none") return Weighting::kNone;
  if (name == "kde-energy") return Weighting::kKdeEnergy;
  if (name == "kde-feature") return Weighting::kKdeFeature;
  if (name == "logistic") return Weighting::kLogistic;
  if (name == "oracle") return Weighting::kOracle;
  throw InputError("unknown weighting '" + name + "'");
}

KdeInput parse_kde_input(const std::string& name) {
  if (name == "logits") return KdeInput::kLogits;
  if (name == "scalar-energy") return KdeInput::kScalarEnergy;
  if (name == "features") return KdeInput::kFeatures;
  throw InputError("unknown kde input '" + name + "'");
}

SplitStrategy parse_split_strategy(const std::string& name) {
  if (name == "random") return SplitStrategy::kRandom;
  if (name == "scaffold") return SplitStrategy::kScaffold;
  if (name == "fingerprint") return SplitStrategy::kFingerprint;
  throw InputError("unknown split strategy '" + name + "'");
}

BandwidthSpec BandwidthSpec::parse(const std::string& text) {
  BandwidthSpec spec;
  if (text == "cv") {
    spec.cv = true;
    return spec;
  }
  try {
    std::size_t used = 0;
    spec.value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw InputError("bandwidth must be 'cv' or a positive number, got '" + text + "'");
  }
  if (!(spec.value > 0.0)) throw InputError("bandwidth must be positive");
  spec.cv = false;
  return spec;
}

std::string BandwidthSpec::to_text() const { return cv ? "cv" : format_double(value); }

void PipelineConfig::validate() const {
  if (alphas.empty()) throw InputError("at least one alpha is required");
  for (double a : alphas) {
    if (!(a > 0.0) || !(a < 1.0)) throw InputError("alpha must lie in (0, 1)");
  }
  if (!(test_frac >= 0.0) || !(cal_frac >= 0.0) || !(test_frac + cal_frac < 1.0)) {
    throw InputError("split fractions must be nonnegative and sum below 1");
  }
  if (weight_cap && !(*weight_cap > 0.0)) throw InputError("weight cap must be positive");
  if (min_class_calibration < 1) throw InputError("minimum class calibration must be positive");
  energy.validate();
  if (!bandwidth.cv && !(bandwidth.value > 0.0)) {
    throw InputError("fixed bandwidth must be positive");
  }
}

PipelineData PipelineData::from_synthetic(const SyntheticData& data) {
  PipelineData out;
  out.train_x = data.train_x;
  out.train_y = data.train_y;
  out.cal_x = data.cal_x;
  out.cal_y = data.cal_y;
  out.test_x = data.test_x;
  out.test_y = data.test_y;
  out.unlabeled_x = data.unlabeled_x;
  out.num_classes = 2;
  const GaussianMixture cal_density = data.cal_density;
  const GaussianMixture test_density = data.test_density;
  out.oracle_weight = [cal_density, test_density](const Eigen::VectorXd& x) {
    return std::exp(test_density.log_density(x) - cal_density.log_density(x));
  };
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineData& data) {
  stage("config", [&] { config.validate(); });

  PipelineResult result;
  result.weighting = to_string(config.weighting);
  result.seed = config.seed;
  result.energy_seed = config.energy.seed;
  result.bandwidth_seed = config.bandwidth_search.seed;
  result.test_labels = data.test_y;
  result.test_ids = data.test_ids;

  if (data.cal_x.rows() < 1 || data.test_x.rows() < 1) {
    throw InputError("[config] calibration and test sets must be nonempty");
  }
  if (!data.test_y.empty() &&
      data.test_y.size() != static_cast<std::size_t>(data.test_x.rows())) {
    throw InputError("[config] test labels and features differ in length");
  }
  if (data.cal_y.size() != static_cast<std::size_t>(data.cal_x.rows())) {
    throw InputError("[config] calibration labels and features differ in length");
  }
  if (config.weighting == Weighting::kOracle && !data.oracle_weight) {
    throw InputError(
        "[config] oracle weighting needs known true densities (synthetic data only)");
  }

  // --- class probabilities -------------------------------------------------
  const bool have_logits = data.cal_logits && data.test_logits;
  std::optional<energy::EnergyMlp> model = data.model;
  Eigen::MatrixXd cal_logits, test_logits;
  stage("train", [&] {
    if (have_logits) {
      cal_logits = *data.cal_logits;
      test_logits = *data.test_logits;
      if (cal_logits.cols() != test_logits.cols()) {
        throw InputError("calibration and test logits disagree on the class count");
      }
      return;
    }
    if (!model) {
      if (data.train_x.rows() < 1) {
        throw InputError("no model, no logits, and no training data");
      }
      model = energy::train_ebm(data.train_x, data.train_y, data.unlabeled_x, config.energy)
                  .model;
      result.trained_model = model;
    }
    cal_logits = model->logits_rows(data.cal_x);
    test_logits = model->logits_rows(data.test_x);
  });
  const double temperature = model ? model->temperature() : config.energy.temperature;

  int num_classes = data.num_classes;
  if (num_classes == 0) num_classes = static_cast<int>(cal_logits.cols());
  if (num_classes != static_cast<int>(cal_logits.cols())) {
    throw InputError("[config] class count disagrees with the logit width");
  }
  result.num_classes = num_classes;

  // --- nonconformity scores ------------------------------------------------
  conformal::NonconformityScores cal_scores;
  std::vector<std::vector<double>> scores_by_class;
  Eigen::MatrixXd test_probs;
  stage("scores", [&] {
    conformal::ClassProbabilities cal_probs(
        row_probabilities_from_logits(cal_logits, temperature));
    cal_scores = conformal::nonconformity_scores(cal_probs, data.cal_y);
    scores_by_class = conformal::group_by_class(cal_scores, num_classes);
    test_probs = row_probabilities_from_logits(test_logits, temperature);
    for (std::size_t y = 0; y < scores_by_class.size(); ++y) {
      const auto n = scores_by_class[y].size();
      if (n == 0) {
        throw InputError("insufficient calibration: class " + std::to_string(y) +
                         " has no calibration points");
      }
      if (n < static_cast<std::size_t>(config.min_class_calibration)) {
        result.warnings.push_back("class " + std::to_string(y) + " has only " +
                                  std::to_string(n) + " calibration points (minimum " +
                                  std::to_string(config.min_class_calibration) + ")");
      }
    }
  });

  // --- likelihood-ratio weights (alpha-independent, computed once) ---------
  const bool weighted = config.weighting != Weighting::kNone;
  stage("weights", [&] {
    if (!weighted) return;
    const Eigen::Index n_cal = data.cal_x.rows();
    const Eigen::Index n_test = data.test_x.rows();
    result.cal_weights.resize(static_cast<std::size_t>(n_cal));
    result.test_weights.resize(static_cast<std::size_t>(n_test));

    if (config.weighting == Weighting::kOracle) {
      for (Eigen::Index i = 0; i < n_cal; ++i) {
        result.cal_weights[static_cast<std::size_t>(i)] =
            apply_cap(data.oracle_weight(data.cal_x.row(i).transpose()), config.weight_cap);
      }
      for (Eigen::Index i = 0; i < n_test; ++i) {
        result.test_weights[static_cast<std::size_t>(i)] =
            apply_cap(data.oracle_weight(data.test_x.row(i).transpose()), config.weight_cap);
      }
      return;
    }

    const KdeInput input = config.weighting == Weighting::kKdeFeature
                               ? KdeInput::kFeatures
                               : config.kde_input;
    Eigen::MatrixXd cal_repr, test_repr;
    switch (input) {
      case KdeInput::kLogits:
        cal_repr = cal_logits;
        test_repr = test_logits;
        break;
      case KdeInput::kScalarEnergy:
        cal_repr = row_energies_from_logits(cal_logits, temperature);
        test_repr = row_energies_from_logits(test_logits, temperature);
        break;
      case KdeInput::kFeatures:
        if (!model) {
          throw InputError("feature weighting needs a model (logits bypass has no features)");
        }
        cal_repr = model->features_rows(data.cal_x);
        test_repr = model->features_rows(data.test_x);
        break;
    }

    if (config.weighting == Weighting::kLogistic) {
      density::LogisticRatioConfig logistic;
      logistic.cap = config.weight_cap;
      const auto ratio = density::logistic_ratio_weights(cal_repr, test_repr, logistic);
      if (!ratio.converged) {
        result.warnings.push_back("logistic ratio estimator did not converge");
      }
      result.cal_weights = ratio.cal_weights;
      for (Eigen::Index i = 0; i < n_test; ++i) {
        result.test_weights[static_cast<std::size_t>(i)] =
            ratio.test_weight_of(test_repr.row(i).transpose());
      }
      return;
    }

    const double h_cal = config.bandwidth.cv
                             ? density::select_bandwidth(cal_repr, config.bandwidth_search)
                             : config.bandwidth.value;
    auto test_search = config.bandwidth_search;
    test_search.seed = config.bandwidth_search.seed + 1;
    const double h_test = config.bandwidth.cv
                              ? density::select_bandwidth(test_repr, test_search)
                              : config.bandwidth.value;
    result.bandwidth_cal = h_cal;
    result.bandwidth_test = h_test;
    density::KdeModel cal_kde(cal_repr, h_cal);
    density::KdeModel test_kde(test_repr, h_test);
    const auto ratio = density::ratio_weights(test_kde, cal_kde, cal_repr, config.weight_cap);
    result.cal_weights = ratio.cal_weights;
    for (Eigen::Index i = 0; i < n_test; ++i) {
      const Eigen::VectorXd x = test_repr.row(i).transpose();
      if (config.kde_loo_test) {
        const double log_cal = cal_kde.log_density(x);
        if (std::isinf(log_cal)) {
          throw NumericalError("zero calibration density underflow at test point " +
                               std::to_string(i));
        }
        double w = std::exp(test_kde.log_density_loo(x) - log_cal);
        result.test_weights[static_cast<std::size_t>(i)] = apply_cap(w, config.weight_cap);
      } else {
        result.test_weights[static_cast<std::size_t>(i)] = ratio.test_weight_of(x);
      }
    }
  });

  // --- prediction sets and coverage ----------------------------------------
  stage("predict", [&] {
    std::optional<conformal::MondrianWeightedCalibrator> calibrator;
    if (weighted) {
      std::vector<std::vector<double>> weights_by_class(static_cast<std::size_t>(num_classes));
      for (std::size_t i = 0; i < cal_scores.values.size(); ++i) {
        weights_by_class[static_cast<std::size_t>(cal_scores.labels[i])].push_back(
            result.cal_weights[i]);
      }
      calibrator.emplace(scores_by_class, weights_by_class, config.weight_norm);
    }
    for (double alpha : config.alphas) {
      AlphaResult ar;
      ar.alpha = alpha;
      if (weighted) {
        for (Eigen::Index i = 0; i < data.test_x.rows(); ++i) {
          ar.sets.push_back(calibrator->predict(test_probs.row(i).transpose(),
                                                result.test_weights[static_cast<std::size_t>(i)],
                                                alpha));
        }
      } else {
        const auto thresholds = conformal::mondrian_thresholds_unweighted(scores_by_class, alpha);
        for (Eigen::Index i = 0; i < data.test_x.rows(); ++i) {
          ar.sets.push_back(
              conformal::prediction_set_unweighted(test_probs.row(i).transpose(), thresholds));
        }
      }
      if (!data.test_y.empty()) {
        ar.report = eval::coverage_report(ar.sets, data.test_y, alpha);
        std::vector<double> class_coverages;
        for (const auto& [cls, cov] : ar.report->per_class_coverage) {
          class_coverages.push_back(cov);
        }
        ar.macd = eval::macd(class_coverages, alpha);
        ar.macd_tail25 = eval::macd_tail25(class_coverages, alpha);
      }
      result.alpha_results.push_back(std::move(ar));
    }
  });

  return result;
}

json PipelineResult::report_json() const {
  json report;
  report["weighting"] = weighting;
  report["kde"] = {{"bandwidth_cal", bandwidth_cal ? json(*bandwidth_cal) : json(nullptr)},
                   {"bandwidth_test", bandwidth_test ? json(*bandwidth_test) : json(nullptr)}};
  report["seeds"] = {{"pipeline", seed}, {"energy", energy_seed}, {"bandwidth", bandwidth_seed}};
  report["warnings"] = warnings;
  report["num_classes"] = num_classes;
  json alphas = json::array();
  for (const auto& ar : alpha_results) {
    json entry;
    entry["alpha"] = ar.alpha;
    double mean_size = 0, empty_rate = 0;
    if (ar.report) {
      json per_class;
      for (const auto& [cls, cov] : ar.report->per_class_coverage) {
        per_class[std::to_string(cls)] = cov;
      }
      json counts;
      for (const auto& [cls, count] : ar.report->counts) {
        counts[std::to_string(cls)] = count;
      }
      entry["per_class_coverage"] = per_class;
      entry["counts"] = counts;
      entry["overall_coverage"] = ar.report->overall_coverage;
      entry["mean_set_size"] = ar.report->mean_set_size;
      entry["empty_set_rate"] = ar.report->empty_set_rate;
      entry["macd"] = ar.macd;
      entry["macd_tail25"] = ar.macd_tail25;
    } else {
      for (const auto& set : ar.sets) {
        mean_size += static_cast<double>(set.size());
        empty_rate += set.labels.empty();
      }
      entry["mean_set_size"] = mean_size / static_cast<double>(ar.sets.size());
      entry["empty_set_rate"] = empty_rate / static_cast<double>(ar.sets.size());
    }
    alphas.push_back(std::move(entry));
  }
  report["alpha_results"] = std::move(alphas);
  return report;
}

std::vector<std::filesystem::path> emit_report(const PipelineResult& result,
                                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "'");

  std::vector<std::filesystem::path> written;
  const auto report_path = out_dir / "report.json";
  {
    std::ofstream out(report_path);
    if (!out) throw IoError("cannot write '" + report_path.string() + "'");
    out << result.report_json().dump(2) << "\n";
    if (!out) throw IoError("failed while writing '" + report_path.string() + "'");
  }
  written.push_back(report_path);

  const bool have_labels = !result.test_labels.empty();
  for (const auto& ar : result.alpha_results) {
    const auto dump_path = out_dir / ("sets_a" + format_double(ar.alpha) + ".csv");
    std::ofstream out(dump_path);
    if (!out) throw IoError("cannot write '" + dump_path.string() + "'");
    out << "index,id,alpha,true_label,weight,set,set_size,covered";
    for (int y = 0; y < result.num_classes; ++y) out << ",t" << y;
    out << "\n";
    for (std::size_t i = 0; i < ar.sets.size(); ++i) {
      const auto& set = ar.sets[i];
      const std::string id =
          i < result.test_ids.size() ? result.test_ids[i] : "t" + std::to_string(i);
      const int label = have_labels ? result.test_labels[i] : -1;
      const double weight =
          result.test_weights.empty() ? 1.0 : result.test_weights[i];
      out << i << "," << id << "," << format_double(ar.alpha) << "," << label << ","
          << format_double(weight) << ",";
      std::string bits(static_cast<std::size_t>(result.num_classes), '0');
      for (int y : set.labels) bits[static_cast<std::size_t>(y)] = '1';
      out << bits << "," << set.size() << ",";
      out << (have_labels ? std::to_string(static_cast<int>(set.contains(label))) : "-1");
      for (int y = 0; y < result.num_classes; ++y) {
        const double t = set.per_label_threshold[static_cast<std::size_t>(y)];
        out << "," << (std::isinf(t) ? "inf" : format_double(t));
      }
      out << "\n";
    }
    if (!out) throw IoError("failed while writing '" + dump_path.string() + "'");
    written.push_back(dump_path);
  }
  return written;
}

json model_to_json(const energy::EnergyMlp& model) {
  json j;
  j["layer_dims"] = model.layer_dims();
  j["temperature"] = model.temperature();
  json weights = json::array();
  json biases = json::array();
  for (const auto& w : model.weights()) {
    std::vector<double> flat;  // row-major
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j2 = 0; j2 < w.cols(); ++j2) flat.push_back(w(i, j2));
    }
    weights.push_back(std::move(flat));
  }
  for (const auto& b : model.biases()) {
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

energy::EnergyMlp model_from_json(const json& j) {
  try {
    const std::vector<int> dims = j.at("layer_dims").get<std::vector<int>>();
    const double temperature = j.at("temperature").get<double>();
    energy::EnergyMlp model(dims, temperature);
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != model.weights().size() || biases.size() != model.biases().size()) {
      throw InputError("model file layer count mismatch");
    }
    for (std::size_t l = 0; l < model.weights().size(); ++l) {
      auto& w = model.weights()[l];
      const auto flat = weights[l].get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(w.size())) {
        throw InputError("model file weight size mismatch at layer " + std::to_string(l));
      }
      std::size_t pos = 0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j2 = 0; j2 < w.cols(); ++j2) w(i, j2) = flat[pos++];
      }
      auto& b = model.biases()[l];
      const auto bflat = biases[l].get<std::vector<double>>();
      if (bflat.size() != static_cast<std::size_t>(b.size())) {
        throw InputError("model file bias size mismatch at layer " + std::to_string(l));
      }
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bflat[static_cast<std::size_t>(i)];
    }
    return model;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const energy::EnergyMlp& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << model_to_json(model).dump(2) << "\n";
  if (!out) throw IoError("failed while writing '" + path + "'");
}

energy::EnergyMlp load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

namespace {

json mixture_to_json(const GaussianMixture& m) {
  json components = json::array();
  for (const auto& c : m.components) {
    components.push_back({{"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                          {"scale", c.scale},
                          {"weight", c.weight}});
  }
  return {{"components", std::move(components)}};
}

GaussianMixture mixture_from_json(const json& j) {
  GaussianMixture m;
  for (const auto& c : j.at("components")) {
    GaussianComponent comp;
    const auto mean = c.at("mean").get<std::vector<double>>();
    comp.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                  static_cast<Eigen::Index>(mean.size()));
    comp.scale = c.at("scale").get<double>();
    comp.weight = c.at("weight").get<double>();
    m.components.push_back(std::move(comp));
  }
  return m;
}

}  // namespace

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  json rule;
  if (spec.label_rule.kind == LabelRule::Kind::kLinear) {
    rule = {{"kind", "linear"},
            {"direction", std::vector<double>(spec.label_rule.direction.data(),
                                              spec.label_rule.direction.data() +
                                                  spec.label_rule.direction.size())},
            {"offset", spec.label_rule.offset},
            {"noise", spec.label_rule.noise}};
  } else {
    rule = {{"kind", "radial"},
            {"center", std::vector<double>(spec.label_rule.center.data(),
                                           spec.label_rule.center.data() +
                                               spec.label_rule.center.size())},
            {"radius", spec.label_rule.radius},
            {"noise", spec.label_rule.noise}};
  }
  return {{"dim", spec.dim},
          {"cal_mixture", mixture_to_json(spec.cal_mixture)},
          {"test_mixture", mixture_to_json(spec.test_mixture)},
          {"label_rule", std::move(rule)},
          {"n_train", spec.n_train},
          {"n_cal", spec.n_cal},
          {"n_test", spec.n_test},
          {"n_unlabeled", spec.n_unlabeled},
          {"seed", spec.seed}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  try {
    SyntheticSpec spec;
    spec.dim = j.at("dim").get<int>();
    spec.cal_mixture = mixture_from_json(j.at("cal_mixture"));
    spec.test_mixture = mixture_from_json(j.at("test_mixture"));
    const auto& rule = j.at("label_rule");
    const std::string kind = rule.at("kind").get<std::string>();
    if (kind == "linear") {
      spec.label_rule.kind = LabelRule::Kind::kLinear;
      const auto dir = rule.at("direction").get<std::vector<double>>();
      spec.label_rule.direction = Eigen::Map<const Eigen::VectorXd>(
          dir.data(), static_cast<Eigen::Index>(dir.size()));
      spec.label_rule.offset = rule.value("offset", 0.0);
    } else if (kind == "radial") {
      spec.label_rule.kind = LabelRule::Kind::kRadial;
      const auto center = rule.at("center").get<std::vector<double>>();
      spec.label_rule.center = Eigen::Map<const Eigen::VectorXd>(
          center.data(), static_cast<Eigen::Index>(center.size()));
      spec.label_rule.radius = rule.at("radius").get<double>();
    } else {
      throw InputError("unknown label rule '" + kind + "'");
    }
    spec.label_rule.noise = rule.value("noise", 0.5);
    spec.n_train = j.value("n_train", spec.n_train);
    spec.n_cal = j.value("n_cal", spec.n_cal);
    spec.n_test = j.value("n_test", spec.n_test);
    spec.n_unlabeled = j.value("n_unlabeled", spec.n_unlabeled);
    spec.seed = j.value("seed", static_cast<std::uint64_t>(0));
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed synthetic spec: ") + e.what());
  }
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
  return synthetic_spec_from_json(j);
}

}  // namespace shiftcp::pipeline
