// Command-line front end: synthetic data generation, dataset splitting,
// energy-model training, conformal calibration/prediction under covariate
// shift, and coverage evaluation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shiftcp/pipeline.hpp"

namespace {

using namespace shiftcp;
using namespace shiftcp::pipeline;
using nlohmann::json;

std::vector<int> parse_hidden_dims(const std::string& text) {
  std::vector<int> dims;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      dims.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InputError("bad hidden layer width '" + item + "'");
    }
  }
  if (dims.empty()) throw InputError("hidden dims must be a comma list like 64,8");
  return dims;
}

// Flags shared by the training-related subcommands.
struct EnergyFlags {
  double lambda = 0.01;
  double m_in = -35.0;
  double m_out = -5.0;
  double temperature = 1.0;
  double learning_rate = 0.01;
  int epochs = 200;
  int batch_size = 64;
  std::string hidden = "64,8";

  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda", lambda, "Energy regularization strength");
    cmd->add_option("--m-in", m_in, "Margin below which in-distribution energies are pushed");
    cmd->add_option("--m-out", m_out, "Margin above which unlabeled energies are pushed");
    cmd->add_option("--temperature", temperature, "Softmax temperature");
    cmd->add_option("--learning-rate", learning_rate, "Gradient-descent step size");
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--batch-size", batch_size, "Minibatch size");
    cmd->add_option("--hidden", hidden, "Hidden layer widths, e.g. 64,8");
  }

  energy::EnergyConfig to_config(std::uint64_t seed) const {
    energy::EnergyConfig config;
    config.lambda = lambda;
    config.margin_in = m_in;
    config.margin_out = m_out;
    config.temperature = temperature;
    config.learning_rate = learning_rate;
    config.epochs = epochs;
    config.batch_size = batch_size;
    config.hidden_dims = parse_hidden_dims(hidden);
    config.seed = seed;
    return config;
  }
};

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
  return j;
}

splits::MoleculeMeta meta_of(const Dataset& data) {
  splits::MoleculeMeta meta;
  meta.scaffolds = data.scaffolds;
  meta.fingerprints = data.fingerprints;
  return meta;
}

Eigen::MatrixXd filtered_pool(const Dataset& unlabeled, const Dataset& train,
                              const std::string& filter_mode) {
  if (filter_mode == "none") return unlabeled.features;
  const auto mode = filter_mode == "scaffold" ? splits::FilterMode::kScaffold
                                              : splits::FilterMode::kTanimoto;
  if (filter_mode != "scaffold" && filter_mode != "tanimoto") {
    throw InputError("unknown unlabeled filter '" + filter_mode + "'");
  }
  const auto kept = splits::filter_unlabeled(meta_of(unlabeled), meta_of(train), mode);
  Eigen::MatrixXd pool(static_cast<Eigen::Index>(kept.size()), unlabeled.features.cols());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    pool.row(static_cast<Eigen::Index>(r)) = unlabeled.features.row(kept[r]);
  }
  return pool;
}

splits::SplitAssignment make_split(const Dataset& data, SplitStrategy strategy,
                                   double test_frac, double cal_frac, std::uint64_t seed) {
  switch (strategy) {
    case SplitStrategy::kRandom:
      return splits::random_split(static_cast<int>(data.size()), test_frac, cal_frac, seed);
    case SplitStrategy::kScaffold:
      if (!data.has_scaffolds()) {
        throw InputError("scaffold split needs a 'scaffold' column in the features file");
      }
      return splits::scaffold_split(data.scaffolds, test_frac, cal_frac, seed);
    case SplitStrategy::kFingerprint:
      if (!data.has_fingerprints()) {
        throw InputError("fingerprint split needs an 'fp' column in the features file");
      }
      return splits::fingerprint_split(data.fingerprints, test_frac, cal_frac, seed);
  }
  throw InputError("unknown split strategy");
}

json split_to_json(const splits::SplitAssignment& split, const std::string& strategy,
                   std::uint64_t seed) {
  return {{"strategy", strategy},
          {"seed", seed},
          {"train_idx", split.train_idx},
          {"cal_idx", split.cal_idx},
          {"test_idx", split.test_idx}};
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& args) {
  SyntheticSpec spec = load_synthetic_spec(args.spec_path);
  if (args.seed) spec.seed = *args.seed;
  const SyntheticData data = gen_synthetic(spec);
  std::filesystem::create_directories(args.out_dir);

  auto to_dataset = [](const Eigen::MatrixXd& x, const std::vector<int>* y,
                       const std::string& prefix) {
    Dataset d;
    d.features = x;
    if (y) {
      d.labels = *y;
      d.num_classes = 2;
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) d.ids.push_back(prefix + std::to_string(i));
    return d;
  };
  const auto dir = std::filesystem::path(args.out_dir);
  write_dataset_csv(to_dataset(data.train_x, &data.train_y, "train"), (dir / "train.csv").string());
  write_dataset_csv(to_dataset(data.cal_x, &data.cal_y, "cal"), (dir / "cal.csv").string());
  write_dataset_csv(to_dataset(data.test_x, &data.test_y, "test"), (dir / "test.csv").string());
  write_dataset_csv(to_dataset(data.unlabeled_x, nullptr, "u"), (dir / "unlabeled.csv").string());
  write_json_file(synthetic_spec_to_json(spec), dir / "spec.json");
  std::cout << "wrote train/cal/test/unlabeled CSVs to " << args.out_dir << "\n";
}

// ---- split ---------------------------------------------------------------

struct SplitArgs {
  std::string features_path;
  std::string strategy = "random";
  double test_frac = 0.15;
  double cal_frac = 0.15;
  std::uint64_t seed = 0;
  std::string out_path = "splits.json";
};

void run_split(const SplitArgs& args) {
  const Dataset data = ingest_dataset(args.features_path);
  const auto strategy = parse_split_strategy(args.strategy);
  const auto split = make_split(data, strategy, args.test_frac, args.cal_frac, args.seed);
  write_json_file(split_to_json(split, args.strategy, args.seed), args.out_path);
  std::cout << "train/cal/test sizes: " << split.train_idx.size() << "/"
            << split.cal_idx.size() << "/" << split.test_idx.size() << "\n";
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string features_path;
  std::string unlabeled_path;
  std::string filter_mode = "none";
  EnergyFlags energy;
  std::uint64_t seed = 0;
  std::string out_path = "model.json";
};

void run_train(const TrainArgs& args) {
  const Dataset train = ingest_dataset(args.features_path);
  if (!train.has_labels()) throw InputError("training data needs a 'label' column");
  Eigen::MatrixXd pool(0, train.dim());
  if (!args.unlabeled_path.empty()) {
    const Dataset unlabeled = ingest_dataset(args.unlabeled_path);
    pool = filtered_pool(unlabeled, train, args.filter_mode);
  }
  const auto config = args.energy.to_config(args.seed);
  const auto result = energy::train_ebm(train.features, train.labels, pool, config);
  save_model(result.model, args.out_path);
  std::cout << "trained " << result.model.layer_dims().size() - 1 << "-layer model; "
            << "first/last epoch loss " << format_double(result.epoch_losses.front()) << " / "
            << format_double(result.epoch_losses.back()) << "\n";
}

// ---- calibrate -----------------------------------------------------------

struct CalibrateArgs {
  std::string features_path;
  std::string model_path;
  std::string logits_path;
  std::string kde_input = "logits";
  std::string bandwidth = "cv";
  int folds = 10;
  std::uint64_t seed = 0;
  std::string out_path = "calib.json";
};

Eigen::MatrixXd representation(KdeInput input, const std::optional<energy::EnergyMlp>& model,
                               const std::optional<Eigen::MatrixXd>& logits,
                               const Eigen::MatrixXd& features, double temperature) {
  Eigen::MatrixXd raw_logits;
  if (logits) {
    raw_logits = *logits;
  } else if (model) {
    raw_logits = model->logits_rows(features);
  } else {
    throw InputError("need --model or --logits to compute representations");
  }
  switch (input) {
    case KdeInput::kLogits:
      return raw_logits;
    case KdeInput::kScalarEnergy: {
      Eigen::MatrixXd e(raw_logits.rows(), 1);
      for (Eigen::Index i = 0; i < raw_logits.rows(); ++i) {
        e(i, 0) = energy::energy_score(raw_logits.row(i).transpose(), temperature);
      }
      return e;
    }
    case KdeInput::kFeatures:
      if (!model) {
        throw InputError("kde input 'features' needs a model (a logits file has no features)");
      }
      return model->features_rows(features);
  }
  throw InputError("unknown kde input");
}

void run_calibrate(const CalibrateArgs& args) {
  const Dataset cal = ingest_dataset(args.features_path);
  if (!cal.has_labels()) throw InputError("calibration data needs a 'label' column");

  std::optional<energy::EnergyMlp> model;
  if (!args.model_path.empty()) model = load_model(args.model_path);
  std::optional<Eigen::MatrixXd> logits;
  if (!args.logits_path.empty()) logits = ingest_logits(args.logits_path);
  if (!model && !logits) throw InputError("pass --model or --logits");
  const double temperature = model ? model->temperature() : 1.0;
  const auto input = parse_kde_input(args.kde_input);

  Eigen::MatrixXd raw_logits = logits ? *logits : model->logits_rows(cal.features);
  if (raw_logits.rows() != cal.size()) {
    throw InputError("logits row count does not match the calibration data");
  }
  conformal::ClassProbabilities probs([&] {
    Eigen::MatrixXd p(raw_logits.rows(), raw_logits.cols());
    for (Eigen::Index i = 0; i < raw_logits.rows(); ++i) {
      p.row(i) = energy::softmax(raw_logits.row(i).transpose(), temperature).transpose();
    }
    return p;
  }());
  const int num_classes = std::max(cal.num_classes, static_cast<int>(raw_logits.cols()));
  const auto scores = conformal::nonconformity_scores(probs, cal.labels);

  const Eigen::MatrixXd repr = representation(input, model, logits, cal.features, temperature);
  const auto bandwidth = BandwidthSpec::parse(args.bandwidth);
  double h_cal;
  if (bandwidth.cv) {
    density::BandwidthSearch search;
    search.folds = args.folds;
    search.seed = args.seed;
    h_cal = density::select_bandwidth(repr, search);
  } else {
    h_cal = bandwidth.value;
  }

  json calib;
  calib["num_classes"] = num_classes;
  calib["temperature"] = temperature;
  calib["kde_input"] = to_string(input);
  calib["labels"] = scores.labels;
  calib["scores"] = scores.values;
  calib["bandwidth_cal"] = h_cal;
  json repr_rows = json::array();
  for (Eigen::Index i = 0; i < repr.rows(); ++i) {
    repr_rows.push_back(std::vector<double>(repr.row(i).data(), repr.row(i).data() + repr.cols()));
  }
  calib["repr"] = std::move(repr_rows);
  write_json_file(calib, args.out_path);
  std::cout << "calibrated on " << cal.size() << " points; cal bandwidth "
            << format_double(h_cal) << "\n";
}

// ---- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string features_path;
  std::string model_path;
  std::string logits_path;
  std::string calib_path;
  std::string weighting = "kde-energy";
  std::vector<double> alphas;
  std::string bandwidth = "cv";
  int folds = 10;
  std::uint64_t seed = 0;
  double weight_cap = 0;  // 0 means no cap
  std::string weight_norm = "per-class";
  std::string out_dir = "out";
};

conformal::WeightNorm parse_weight_norm(const std::string& name) {
  if (name == "per-class") return conformal::WeightNorm::kPerClass;
  if (name == "global") return conformal::WeightNorm::kGlobal;
  throw InputError("weight norm must be 'per-class' or 'global'");
}

void run_predict(const PredictArgs& args) {
  const Dataset test = ingest_dataset(args.features_path);
  const json calib = read_json_file(args.calib_path);

  std::optional<energy::EnergyMlp> model;
  if (!args.model_path.empty()) model = load_model(args.model_path);
  std::optional<Eigen::MatrixXd> logits;
  if (!args.logits_path.empty()) logits = ingest_logits(args.logits_path);

  int num_classes;
  double temperature;
  KdeInput input;
  std::vector<double> cal_scores;
  std::vector<int> cal_labels;
  Eigen::MatrixXd cal_repr;
  double h_cal;
  try {
    num_classes = calib.at("num_classes").get<int>();
    temperature = calib.at("temperature").get<double>();
    input = parse_kde_input(calib.at("kde_input").get<std::string>());
    cal_scores = calib.at("scores").get<std::vector<double>>();
    cal_labels = calib.at("labels").get<std::vector<int>>();
    const auto rows = calib.at("repr").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw InputError("calibration artifact has no representation rows");
    cal_repr.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < rows.front().size(); ++j) {
        cal_repr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    h_cal = calib.at("bandwidth_cal").get<double>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed calibration artifact: ") + e.what());
  }

  Eigen::MatrixXd test_logits = logits ? *logits : [&] {
    if (!model) throw InputError("need --model or --logits for the test set");
    return model->logits_rows(test.features);
  }();
  if (test_logits.rows() != test.size()) {
    throw InputError("logits row count does not match the test data");
  }

  // Assemble prediction sets directly from the stored calibration artifact.
  const auto weighting = parse_weighting(args.weighting);
  if (weighting == Weighting::kOracle) {
    throw InputError("oracle weighting needs synthetic data; use the pipeline subcommand");
  }
  const Eigen::MatrixXd test_repr =
      representation(input, model, logits, test.features, temperature);

  PipelineResult result;
  result.weighting = args.weighting;
  result.seed = args.seed;
  result.num_classes = num_classes;
  result.test_labels = test.labels;
  result.test_ids = test.ids;

  conformal::NonconformityScores scores{cal_scores, cal_labels};
  const auto scores_by_class = conformal::group_by_class(scores, num_classes);

  const std::optional<double> cap =
      args.weight_cap > 0 ? std::optional<double>(args.weight_cap) : std::nullopt;
  if (weighting != Weighting::kNone) {
    result.cal_weights.resize(cal_scores.size());
    result.test_weights.resize(static_cast<std::size_t>(test.size()));
    if (weighting == Weighting::kLogistic) {
      density::LogisticRatioConfig logistic;
      logistic.cap = cap;
      const auto ratio = density::logistic_ratio_weights(cal_repr, test_repr, logistic);
      if (!ratio.converged) result.warnings.push_back("logistic estimator did not converge");
      result.cal_weights = ratio.cal_weights;
      for (Eigen::Index i = 0; i < test_repr.rows(); ++i) {
        result.test_weights[static_cast<std::size_t>(i)] =
            ratio.test_weight_of(test_repr.row(i).transpose());
      }
    } else {
      const auto bandwidth = BandwidthSpec::parse(args.bandwidth);
      double h_test;
      if (bandwidth.cv) {
        density::BandwidthSearch search;
        search.folds = args.folds;
        search.seed = args.seed;
        h_test = density::select_bandwidth(test_repr, search);
      } else {
        h_test = bandwidth.value;
      }
      result.bandwidth_cal = h_cal;
      result.bandwidth_test = h_test;
      density::KdeModel cal_kde(cal_repr, h_cal);
      density::KdeModel test_kde(test_repr, h_test);
      const auto ratio = density::ratio_weights(test_kde, cal_kde, cal_repr, cap);
      result.cal_weights = ratio.cal_weights;
      for (Eigen::Index i = 0; i < test_repr.rows(); ++i) {
        result.test_weights[static_cast<std::size_t>(i)] =
            ratio.test_weight_of(test_repr.row(i).transpose());
      }
    }
  }

  Eigen::MatrixXd test_probs(test_logits.rows(), test_logits.cols());
  for (Eigen::Index i = 0; i < test_logits.rows(); ++i) {
    test_probs.row(i) =
        energy::softmax(test_logits.row(i).transpose(), temperature).transpose();
  }

  std::vector<double> alphas = args.alphas.empty() ? std::vector<double>{0.1} : args.alphas;
  std::optional<conformal::MondrianWeightedCalibrator> calibrator;
  if (weighting != Weighting::kNone) {
    std::vector<std::vector<double>> weights_by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < cal_labels.size(); ++i) {
      weights_by_class[static_cast<std::size_t>(cal_labels[i])].push_back(result.cal_weights[i]);
    }
    calibrator.emplace(scores_by_class, weights_by_class, parse_weight_norm(args.weight_norm));
  }
  for (double alpha : alphas) {
    AlphaResult ar;
    ar.alpha = alpha;
    std::vector<double> unweighted_thresholds;
    if (!calibrator) {
      unweighted_thresholds = conformal::mondrian_thresholds_unweighted(scores_by_class, alpha);
    }
    for (Eigen::Index i = 0; i < test_probs.rows(); ++i) {
      if (calibrator) {
        ar.sets.push_back(calibrator->predict(test_probs.row(i).transpose(),
                                              result.test_weights[static_cast<std::size_t>(i)],
                                              alpha));
      } else {
        ar.sets.push_back(conformal::prediction_set_unweighted(test_probs.row(i).transpose(),
                                                               unweighted_thresholds));
      }
    }
    if (test.has_labels()) {
      ar.report = eval::coverage_report(ar.sets, test.labels, alpha);
      std::vector<double> coverages;
      for (const auto& [cls, cov] : ar.report->per_class_coverage) coverages.push_back(cov);
      ar.macd = eval::macd(coverages, alpha);
      ar.macd_tail25 = eval::macd_tail25(coverages, alpha);
    }
    result.alpha_results.push_back(std::move(ar));
  }

  const auto written = emit_report(result, args.out_dir);
  std::cout << "wrote " << written.size() << " files to " << args.out_dir << "\n";
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> sets_paths;
  std::string out_path = "report.json";
};

void run_evaluate(const EvaluateArgs& args) {
  if (args.sets_paths.empty()) throw InputError("pass at least one --sets dump");
  json report;
  json alpha_results = json::array();
  for (const auto& path : args.sets_paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty dump");
    std::vector<conformal::PredictionSet> sets;
    std::vector<int> labels;
    double alpha = -1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream stream(line);
      std::string field;
      while (std::getline(stream, field, ',')) fields.push_back(field);
      if (fields.size() < 8) {
        throw InputError(path + ", line " + std::to_string(line_no) + ": short row");
      }
      try {
        alpha = std::stod(fields[2]);
        const int label = std::stoi(fields[3]);
        if (label < 0) {
          throw InputError(path + ": dump has no true labels; cannot evaluate coverage");
        }
        labels.push_back(label);
        conformal::PredictionSet set;
        const std::string& bits = fields[5];
        set.per_label_threshold.assign(bits.size(), 0.0);
        for (std::size_t y = 0; y < bits.size(); ++y) {
          if (bits[y] == '1') set.labels.push_back(static_cast<int>(y));
        }
        sets.push_back(std::move(set));
      } catch (const InputError&) {
        throw;
      } catch (const std::exception&) {
        throw InputError(path + ", line " + std::to_string(line_no) + ": bad row");
      }
    }
    if (sets.empty()) throw InputError(path + ": no rows");
    const auto cov = eval::coverage_report(sets, labels, alpha);
    std::vector<double> coverages;
    json per_class;
    for (const auto& [cls, c] : cov.per_class_coverage) {
      coverages.push_back(c);
      per_class[std::to_string(cls)] = c;
    }
    alpha_results.push_back({{"alpha", alpha},
                             {"per_class_coverage", per_class},
                             {"overall_coverage", cov.overall_coverage},
                             {"mean_set_size", cov.mean_set_size},
                             {"empty_set_rate", cov.empty_set_rate},
                             {"macd", eval::macd(coverages, alpha)},
                             {"macd_tail25", eval::macd_tail25(coverages, alpha)}});
  }
  report["alpha_results"] = std::move(alpha_results);
  write_json_file(report, args.out_path);
  std::cout << "wrote " << args.out_path << "\n";
}

// ---- pipeline ----------------------------------------------------------------

struct PipelineArgs {
  std::string spec_path;
  std::string features_path;
  std::string unlabeled_path;
  std::string filter_mode = "none";
  std::string model_path;
  std::string weighting = "kde-energy";
  std::string kde_input = "logits";
  std::vector<double> alphas;
  std::string split = "random";
  double test_frac = 0.15;
  double cal_frac = 0.15;
  EnergyFlags energy;
  std::string bandwidth = "cv";
  int folds = 10;
  std::uint64_t seed = 0;
  double weight_cap = 0;
  std::string weight_norm = "per-class";
  int min_class_cal = 10;
  bool kde_loo_test = false;
  std::string out_dir = "out";
};

void run_pipeline_cmd(const PipelineArgs& args) {
  PipelineConfig config;
  config.weighting = parse_weighting(args.weighting);
  config.kde_input = parse_kde_input(args.kde_input);
  if (!args.alphas.empty()) config.alphas = args.alphas;
  config.split = parse_split_strategy(args.split);
  config.test_frac = args.test_frac;
  config.cal_frac = args.cal_frac;
  config.energy = args.energy.to_config(args.seed);
  config.bandwidth = BandwidthSpec::parse(args.bandwidth);
  config.bandwidth_search.folds = args.folds;
  config.bandwidth_search.seed = args.seed;
  config.seed = args.seed;
  if (args.weight_cap > 0) config.weight_cap = args.weight_cap;
  config.weight_norm = parse_weight_norm(args.weight_norm);
  config.min_class_calibration = args.min_class_cal;
  config.kde_loo_test = args.kde_loo_test;

  PipelineData data;
  json split_json;
  if (!args.spec_path.empty()) {
    SyntheticSpec spec = load_synthetic_spec(args.spec_path);
    data = PipelineData::from_synthetic(gen_synthetic(spec));
  } else if (!args.features_path.empty()) {
    const Dataset full = ingest_dataset(args.features_path);
    if (!full.has_labels()) throw InputError("the features file needs a 'label' column");
    const auto split =
        make_split(full, config.split, config.test_frac, config.cal_frac, config.seed);
    split_json = split_to_json(split, args.split, config.seed);
    const Dataset train = full.subset(split.train_idx);
    const Dataset cal = full.subset(split.cal_idx);
    const Dataset test = full.subset(split.test_idx);
    data.train_x = train.features;
    data.train_y = train.labels;
    data.cal_x = cal.features;
    data.cal_y = cal.labels;
    data.test_x = test.features;
    data.test_y = test.labels;
    data.test_ids = test.ids;
    data.num_classes = full.num_classes;
    if (!args.unlabeled_path.empty()) {
      const Dataset unlabeled = ingest_dataset(args.unlabeled_path);
      data.unlabeled_x = filtered_pool(unlabeled, train, args.filter_mode);
    } else {
      data.unlabeled_x.resize(0, full.dim());
    }
  } else {
    throw InputError("pass --spec for synthetic data or --features for a dataset file");
  }
  if (!args.model_path.empty()) data.model = load_model(args.model_path);

  const auto result = run_pipeline(config, data);
  const auto written = emit_report(result, args.out_dir);
  if (result.trained_model) {
    save_model(*result.trained_model, (std::filesystem::path(args.out_dir) / "model.json").string());
  }
  if (!split_json.is_null()) {
    write_json_file(split_json, std::filesystem::path(args.out_dir) / "splits.json");
  }
  for (const auto& ar : result.alpha_results) {
    std::cout << "alpha=" << format_double(ar.alpha);
    if (ar.report) {
      std::cout << " coverage=" << format_double(ar.report->overall_coverage)
                << " mean_set_size=" << format_double(ar.report->mean_set_size)
                << " macd=" << format_double(ar.macd);
    }
    std::cout << "\n";
  }
  for (const auto& warning : result.warnings) std::cout << "warning: " << warning << "\n";
  std::cout << "wrote " << written.size() + (result.trained_model ? 1 : 0) << " files to "
            << args.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction sets for classification under covariate shift"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic shifted datasets");
  synth_cmd->add_option("--spec", synth.spec_path, "Synthetic spec JSON")->required();
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  std::uint64_t synth_seed = 0;
  auto* synth_seed_opt = synth_cmd->add_option("--seed", synth_seed, "Override the spec seed");
  synth_cmd->callback([&] {
    if (*synth_seed_opt) synth.seed = synth_seed;
    run_synth(synth);
  });

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Partition a dataset into train/cal/test");
  split_cmd->add_option("--features", split.features_path, "Features CSV")->required();
  split_cmd->add_option("--split", split.strategy, "random|scaffold|fingerprint");
  split_cmd->add_option("--test-frac", split.test_frac, "Test fraction");
  split_cmd->add_option("--cal-frac", split.cal_frac, "Calibration fraction");
  split_cmd->add_option("--seed", split.seed, "Random seed");
  split_cmd->add_option("--out", split.out_path, "Output JSON path");
  split_cmd->callback([&] { run_split(split); });

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the energy-regularized classifier");
  train_cmd->add_option("--features", train.features_path, "Labeled training CSV")->required();
  train_cmd->add_option("--unlabeled", train.unlabeled_path, "Unlabeled pool CSV");
  train_cmd->add_option("--filter-unlabeled", train.filter_mode,
                        "none|scaffold|tanimoto filter against the training set");
  train.energy.attach(train_cmd);
  train_cmd->add_option("--seed", train.seed, "Random seed");
  train_cmd->add_option("--out", train.out_path, "Model JSON path");
  train_cmd->callback([&] { run_train(train); });

  CalibrateArgs calibrate;
  auto* cal_cmd = app.add_subcommand("calibrate", "Score a calibration set and fit its KDE");
  cal_cmd->add_option("--features", calibrate.features_path, "Calibration CSV")->required();
  cal_cmd->add_option("--model", calibrate.model_path, "Model JSON");
  cal_cmd->add_option("--logits", calibrate.logits_path, "Precomputed logits CSV");
  cal_cmd->add_option("--kde-input", calibrate.kde_input, "logits|scalar-energy|features");
  cal_cmd->add_option("--bandwidth", calibrate.bandwidth, "'cv' or a number");
  cal_cmd->add_option("--folds", calibrate.folds, "Cross-validation folds");
  cal_cmd->add_option("--seed", calibrate.seed, "Random seed");
  cal_cmd->add_option("--out", calibrate.out_path, "Calibration artifact path");
  cal_cmd->callback([&] { run_calibrate(calibrate); });

  PredictArgs predict;
  auto* pred_cmd = app.add_subcommand("predict", "Build prediction sets for a test set");
  pred_cmd->add_option("--features", predict.features_path, "Test CSV")->required();
  pred_cmd->add_option("--model", predict.model_path, "Model JSON");
  pred_cmd->add_option("--logits", predict.logits_path, "Precomputed logits CSV");
  pred_cmd->add_option("--calib", predict.calib_path, "Calibration artifact")->required();
  pred_cmd->add_option("--weighting", predict.weighting, "none|kde-energy|kde-feature|logistic");
  pred_cmd->add_option("--alpha", predict.alphas, "Miscoverage level (repeatable)");
  pred_cmd->add_option("--bandwidth", predict.bandwidth, "'cv' or a number (test KDE)");
  pred_cmd->add_option("--folds", predict.folds, "Cross-validation folds");
  pred_cmd->add_option("--seed", predict.seed, "Random seed");
  pred_cmd->add_option("--weight-cap", predict.weight_cap, "Cap on likelihood ratios (0 = none)");
  pred_cmd->add_option("--weight-norm", predict.weight_norm, "per-class|global");
  pred_cmd->add_option("--out", predict.out_dir, "Output directory");
  pred_cmd->callback([&] { run_predict(predict); });

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Recompute coverage from per-point dumps");
  eval_cmd->add_option("--sets", evaluate.sets_paths, "Per-point dump CSV (repeatable)")
      ->required();
  eval_cmd->add_option("--out", evaluate.out_path, "Report JSON path");
  eval_cmd->callback([&] { run_evaluate(evaluate); });

  PipelineArgs pipeline;
  auto* pipe_cmd = app.add_subcommand("pipeline", "End-to-end run: split, train, weight, predict");
  pipe_cmd->add_option("--spec", pipeline.spec_path, "Synthetic spec JSON");
  pipe_cmd->add_option("--features", pipeline.features_path, "Labeled dataset CSV");
  pipe_cmd->add_option("--unlabeled", pipeline.unlabeled_path, "Unlabeled pool CSV");
  pipe_cmd->add_option("--filter-unlabeled", pipeline.filter_mode, "none|scaffold|tanimoto");
  pipe_cmd->add_option("--model", pipeline.model_path, "Skip training, load this model");
  pipe_cmd->add_option("--weighting", pipeline.weighting,
                       "none|kde-energy|kde-feature|logistic|oracle");
  pipe_cmd->add_option("--kde-input", pipeline.kde_input, "logits|scalar-energy|features");
  pipe_cmd->add_option("--alpha", pipeline.alphas, "Miscoverage level (repeatable)");
  pipe_cmd->add_option("--split", pipeline.split, "random|scaffold|fingerprint");
  pipe_cmd->add_option("--test-frac", pipeline.test_frac, "Test fraction");
  pipe_cmd->add_option("--cal-frac", pipeline.cal_frac, "Calibration fraction");
  pipeline.energy.attach(pipe_cmd);
  pipe_cmd->add_option("--bandwidth", pipeline.bandwidth, "'cv' or a number");
  pipe_cmd->add_option("--folds", pipeline.folds, "Cross-validation folds");
  pipe_cmd->add_option("--seed", pipeline.seed, "Random seed");
  pipe_cmd->add_option("--weight-cap", pipeline.weight_cap, "Cap on likelihood ratios (0 = none)");
  pipe_cmd->add_option("--weight-norm", pipeline.weight_norm, "per-class|global");
  pipe_cmd->add_option("--min-class-cal", pipeline.min_class_cal,
                       "Warn below this many calibration points per class");
  pipe_cmd->add_flag("--kde-loo-test", pipeline.kde_loo_test,
                     "Leave each test point out of its own test-KDE evaluation");
  pipe_cmd->add_option("--out", pipeline.out_dir, "Output directory");
  pipe_cmd->callback([&] { run_pipeline_cmd(pipeline); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const shiftcp::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const shiftcp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const shiftcp::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
