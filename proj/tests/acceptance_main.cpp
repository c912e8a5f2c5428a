// Acceptance suite: statistical and exactness guarantees of the whole
// artifact, one printed verdict per criterion. Exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "shiftcp/pipeline.hpp"

using namespace shiftcp;
using namespace shiftcp::pipeline;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(int number, const std::string& name, const Verdict& verdict, double seconds) {
  std::printf("[%d] %-28s %s  (%.1fs)  %s\n", number, name.c_str(),
              verdict.pass ? "PASS" : "FAIL", seconds, verdict.detail.c_str());
  std::fflush(stdout);
  if (!verdict.pass) ++g_failures;
}

template <typename F>
void criterion(int number, const std::string& name, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict verdict;
  try {
    verdict = body();
  } catch (const std::exception& e) {
    verdict.pass = false;
    verdict.detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(number, name, verdict, seconds);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// --- shared Monte Carlo machinery for criteria 1 and 2 ----------------------

struct Trial {
  Eigen::MatrixXd cal_x, test_x;
  std::vector<int> cal_y, test_y;
  SyntheticData backing;
};

Trial draw_trial(double shift, std::uint64_t seed) {
  SyntheticSpec spec = SyntheticSpec::standard_shift(shift, seed);
  spec.n_train = 0;
  spec.n_unlabeled = 0;
  spec.n_cal = 500;
  spec.n_test = 500;
  Trial trial;
  trial.backing = gen_synthetic(spec);
  trial.cal_x = trial.backing.cal_x;
  trial.cal_y = trial.backing.cal_y;
  trial.test_x = trial.backing.test_x;
  trial.test_y = trial.backing.test_y;
  return trial;
}

// The fixed base classifier for the coverage checks: the label rule's own
// conditional distribution, independent of the calibration draw.
std::vector<std::vector<double>> class_scores(const Trial& trial) {
  std::vector<std::vector<double>> by_class(2);
  for (Eigen::Index i = 0; i < trial.cal_x.rows(); ++i) {
    const auto probs =
        trial.backing.label_rule.class_probabilities(trial.cal_x.row(i).transpose());
    const int y = trial.cal_y[static_cast<std::size_t>(i)];
    by_class[static_cast<std::size_t>(y)].push_back(1.0 - probs[y]);
  }
  return by_class;
}

double unweighted_coverage(const Trial& trial, double alpha) {
  const auto thresholds =
      conformal::mondrian_thresholds_unweighted(class_scores(trial), alpha);
  int covered = 0;
  for (Eigen::Index i = 0; i < trial.test_x.rows(); ++i) {
    const auto probs =
        trial.backing.label_rule.class_probabilities(trial.test_x.row(i).transpose());
    const int y = trial.test_y[static_cast<std::size_t>(i)];
    covered += 1.0 - probs[y] <= thresholds[static_cast<std::size_t>(y)];
  }
  return static_cast<double>(covered) / static_cast<double>(trial.test_x.rows());
}

double oracle_weighted_coverage(const Trial& trial, double alpha) {
  std::vector<std::vector<double>> weights(2);
  const auto scores = class_scores(trial);
  for (Eigen::Index i = 0; i < trial.cal_x.rows(); ++i) {
    const int y = trial.cal_y[static_cast<std::size_t>(i)];
    weights[static_cast<std::size_t>(y)].push_back(
        trial.backing.oracle_weight(trial.cal_x.row(i).transpose()));
  }
  // scores were grouped in the same pass order, so lists stay aligned
  conformal::MondrianWeightedCalibrator calibrator(scores, weights);
  int covered = 0;
  for (Eigen::Index i = 0; i < trial.test_x.rows(); ++i) {
    const Eigen::VectorXd x = trial.test_x.row(i).transpose();
    const auto probs = trial.backing.label_rule.class_probabilities(x);
    const int y = trial.test_y[static_cast<std::size_t>(i)];
    const auto thresholds = calibrator.thresholds(trial.backing.oracle_weight(x), alpha);
    covered += 1.0 - probs[y] <= thresholds[static_cast<std::size_t>(y)];
  }
  return static_cast<double>(covered) / static_cast<double>(trial.test_x.rows());
}

Verdict criterion_unweighted_validity() {
  const int trials = 500;
  Verdict v;
  std::ostringstream detail;
  for (double alpha : {0.1, 0.2}) {
    double total = 0;
    for (int t = 0; t < trials; ++t) {
      total += unweighted_coverage(draw_trial(0.0, 1000 + static_cast<std::uint64_t>(t)), alpha);
    }
    const double mean = total / trials;
    const bool ok = mean >= 1 - alpha - 0.02 && mean <= 1 - alpha + 0.04;
    detail << "alpha=" << alpha << " mean=" << fmt(mean) << " in [" << fmt(1 - alpha - 0.02)
           << "," << fmt(1 - alpha + 0.04) << "]  ";
    v.pass = v.pass && ok;
  }
  v.detail = detail.str();
  return v;
}

Verdict criterion_shift_validity() {
  const int trials = 500;
  Verdict v;
  std::ostringstream detail;
  for (double alpha : {0.1, 0.2}) {
    double total = 0;
    for (int t = 0; t < trials; ++t) {
      total += oracle_weighted_coverage(draw_trial(1.5, 2000 + static_cast<std::uint64_t>(t)),
                                        alpha);
    }
    const double mean = total / trials;
    const bool ok = mean >= 1 - alpha - 0.02;
    detail << "oracle alpha=" << alpha << " mean=" << fmt(mean) << " >= "
           << fmt(1 - alpha - 0.02) << "  ";
    v.pass = v.pass && ok;
  }
  double total_unit = 0;
  for (int t = 0; t < trials; ++t) {
    total_unit +=
        unweighted_coverage(draw_trial(1.5, 2000 + static_cast<std::uint64_t>(t)), 0.1);
  }
  const double mean_unit = total_unit / trials;
  const bool broke = mean_unit <= 1 - 0.1 - 0.05;
  detail << "unit-weight alpha=0.1 mean=" << fmt(mean_unit) << " <= " << fmt(0.85);
  v.pass = v.pass && broke;
  v.detail = detail.str();
  return v;
}

Verdict criterion_gap_reduction() {
  const int trials = 50;
  double gap_kde = 0, gap_unweighted = 0;
  for (int t = 0; t < trials; ++t) {
    SyntheticSpec spec = SyntheticSpec::standard_shift(1.5, 3000 + static_cast<std::uint64_t>(t));
    spec.n_train = 2000;
    spec.n_cal = 1000;
    spec.n_test = 1000;
    spec.n_unlabeled = 2000;
    auto data = PipelineData::from_synthetic(gen_synthetic(spec));

    PipelineConfig config;
    config.weighting = Weighting::kKdeEnergy;
    config.alphas = {0.1};
    config.energy.hidden_dims = {32, 8};
    config.energy.epochs = 60;
    config.energy.seed = 3000 + static_cast<std::uint64_t>(t);
    config.seed = 3000 + static_cast<std::uint64_t>(t);
    config.bandwidth_search.seed = 3000 + static_cast<std::uint64_t>(t);
    auto weighted = run_pipeline(config, data);
    data.model = weighted.trained_model;  // reuse the trained classifier

    PipelineConfig plain = config;
    plain.weighting = Weighting::kNone;
    auto unweighted = run_pipeline(plain, data);

    gap_kde += std::abs(weighted.alpha_results[0].report->overall_coverage - 0.9);
    gap_unweighted += std::abs(unweighted.alpha_results[0].report->overall_coverage - 0.9);
  }
  gap_kde /= trials;
  gap_unweighted /= trials;
  Verdict v;
  const double ratio = gap_kde / gap_unweighted;
  v.pass = gap_kde <= 0.65 * gap_unweighted;
  v.detail = "macd kde=" + fmt(gap_kde) + " unweighted=" + fmt(gap_unweighted) +
             " ratio=" + fmt(ratio) + " <= 0.65";
  return v;
}

Verdict criterion_kde_consistency() {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto sample_normals = [&](int n) {
      std::mt19937_64 rng(4000 + seed * 97);
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::MatrixXd x(n, 1);
      for (int i = 0; i < n; ++i) x(i, 0) = normal(rng);
      return x;
    };
    auto mae = [&](int n) {
      const Eigen::MatrixXd samples = sample_normals(n);
      density::BandwidthSearch search;
      search.seed = seed;
      density::KdeModel model(samples, density::select_bandwidth(samples, search));
      double acc = 0;
      int count = 0;
      for (double x = -4.0; x <= 4.0 + 1e-12; x += 0.05) {
        Eigen::VectorXd q(1);
        q << x;
        acc += std::abs(model.density(q) -
                        std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI));
        ++count;
      }
      return acc / count;
    };
    improved += mae(2000) < mae(100);
  }
  Verdict v;
  v.pass = improved >= 9;
  v.detail = "error shrank from n=100 to n=2000 in " + std::to_string(improved) + "/10 seeds";
  return v;
}

Verdict criterion_weighted_quantile_oracle() {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> scores, weights;
    for (int i = 0; i < n; ++i) {
      scores.push_back(unif(rng));
      weights.push_back(unif(rng));
    }
    const double test_weight = unif(rng);
    const double beta = std::nextafter(unif(rng), 1.0);
    const double expected =
        testing::weighted_quantile_bruteforce(scores, weights, test_weight, beta);
    const double actual = conformal::weighted_ecdf(scores, weights, test_weight).quantile(beta);
    const bool equal = (std::isinf(expected) && std::isinf(actual)) || expected == actual;
    mismatches += !equal;
  }
  Verdict v;
  v.pass = mismatches == 0;
  v.detail = std::to_string(1000 - mismatches) + "/1000 instances bit-identical";
  return v;
}

Verdict criterion_gradient_check() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    energy::EnergyMlp model = energy::EnergyMlp::random_init({2, 4, 2}, 1.0, 6000 + seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd in_x(8, 2), out_x(8, 2);
    std::vector<int> in_y;
    for (int i = 0; i < 8; ++i) {
      in_x(i, 0) = normal(rng);
      in_x(i, 1) = normal(rng);
      out_x(i, 0) = 3 * normal(rng);
      out_x(i, 1) = 3 * normal(rng);
      in_y.push_back(i % 2);
    }
    energy::EnergyConfig config;
    config.lambda = 0.5;
    config.margin_in = -2.0;  // both hinges active at the initial energies
    config.margin_out = 1.0;
    worst = std::max(worst, energy::grad_check(model, in_x, in_y, out_x, config));
  }
  Verdict v;
  v.pass = worst < 1e-4;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max relative error %.2e < 1e-4", worst);
  v.detail = buf;
  return v;
}

Verdict criterion_energy_separation() {
  auto make_fixture = [](int n, std::uint64_t seed, Eigen::MatrixXd& in_x,
                         std::vector<int>& in_y, Eigen::MatrixXd& out_x) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
    in_x.resize(n, 2);
    in_y.resize(static_cast<std::size_t>(n));
    out_x.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      const int label = i % 2;
      in_x(i, 0) = (label == 0 ? -2.0 : 2.0) + 0.7 * normal(rng);
      in_x(i, 1) = 0.7 * normal(rng);
      in_y[static_cast<std::size_t>(i)] = label;
      const double a = angle(rng);
      const double r = 6.0 + 0.3 * normal(rng);
      out_x(i, 0) = r * std::cos(a);
      out_x(i, 1) = r * std::sin(a);
    }
  };
  Eigen::MatrixXd in_x, out_x, held_in, held_out;
  std::vector<int> in_y, held_y;
  make_fixture(512, 71, in_x, in_y, out_x);
  make_fixture(512, 72, held_in, held_y, held_out);

  energy::EnergyConfig config;  // spec defaults throughout
  config.seed = 9;
  const auto trained = energy::train_ebm(in_x, in_y, out_x, config);

  const Eigen::MatrixXd probs = trained.model.probabilities_rows(held_in);
  int correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index argmax;
    probs.row(i).maxCoeff(&argmax);
    correct += static_cast<int>(argmax) == held_y[static_cast<std::size_t>(i)];
  }
  const double accuracy = static_cast<double>(correct) / probs.rows();
  const double mean_in = trained.model.energies_rows(held_in).mean();
  const double mean_out = trained.model.energies_rows(held_out).mean();

  Verdict v;
  v.pass = accuracy > 0.95 && mean_in <= mean_out - 5.0;
  v.detail = "accuracy=" + fmt(accuracy) + " E_in=" + fmt(mean_in) + " E_out=" +
             fmt(mean_out) + " gap=" + fmt(mean_out - mean_in) + " >= 5";
  return v;
}

Verdict criterion_splitting() {
  std::mt19937_64 rng(777);
  int fp_matches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + static_cast<int>(rng() % 6);
    const int len = 3 + static_cast<int>(rng() % 8);
    std::vector<splits::Fingerprint> fps;
    for (int i = 0; i < n; ++i) {
      splits::Fingerprint fp;
      for (int j = 0; j < len; ++j) fp.push_back(static_cast<std::uint8_t>(rng() % 2));
      fps.push_back(std::move(fp));
    }
    const double test_frac = 0.15 + 0.5 * (static_cast<double>(rng() % 100) / 100.0);
    const int n_test = static_cast<int>(n * test_frac);
    const auto split = splits::fingerprint_split(fps, test_frac, 0.1, rep);

    // reference greedy, recomputed from scratch each round
    std::vector<bool> in_test(static_cast<std::size_t>(n), false);
    std::vector<int> expected;
    for (int round = 0; round < n_test; ++round) {
      int best = -1;
      double best_sim = 0;
      for (int i = 0; i < n; ++i) {
        if (in_test[static_cast<std::size_t>(i)]) continue;
        double max_sim = -1;
        for (int j = 0; j < n; ++j) {
          if (j == i || in_test[static_cast<std::size_t>(j)]) continue;
          max_sim = std::max(max_sim, splits::jaccard(fps[static_cast<std::size_t>(i)],
                                                      fps[static_cast<std::size_t>(j)]));
        }
        if (best < 0 || max_sim < best_sim) {
          best = i;
          best_sim = max_sim;
        }
      }
      in_test[static_cast<std::size_t>(best)] = true;
      expected.push_back(best);
    }
    std::sort(expected.begin(), expected.end());
    fp_matches += split.test_idx == expected;
  }

  int pure = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 12 + static_cast<int>(rng() % 30);
    std::vector<std::string> keys;
    for (int i = 0; i < n; ++i) keys.push_back("s" + std::to_string(rng() % 7));
    splits::SplitAssignment split;
    try {
      split = splits::scaffold_split(keys, 0.2, 0.15, rep);
    } catch (const InputError&) {
      ++pure;  // degenerate instance: refusing to split keeps purity vacuously
      continue;
    }
    std::set<std::string> test_keys;
    for (int i : split.test_idx) test_keys.insert(keys[static_cast<std::size_t>(i)]);
    bool overlap = false;
    for (int i : split.train_idx) overlap |= test_keys.contains(keys[static_cast<std::size_t>(i)]);
    for (int i : split.cal_idx) overlap |= test_keys.contains(keys[static_cast<std::size_t>(i)]);
    pure += !overlap;
  }

  Verdict v;
  v.pass = fp_matches == 200 && pure == 100;
  v.detail = "fingerprint greedy " + std::to_string(fp_matches) + "/200, scaffold purity " +
             std::to_string(pure) + "/100";
  return v;
}

Verdict criterion_determinism() {
  SyntheticSpec spec = SyntheticSpec::standard_shift(1.5, 4242);
  spec.n_train = 600;
  spec.n_cal = 400;
  spec.n_test = 400;
  spec.n_unlabeled = 600;
  PipelineConfig config;
  config.alphas = {0.1, 0.2};
  config.energy.hidden_dims = {16, 8};
  config.energy.epochs = 40;

  const auto dir = std::filesystem::temp_directory_path() / "shiftcp_acceptance_det";
  auto run_once = [&](const std::filesystem::path& sub) {
    auto data = PipelineData::from_synthetic(gen_synthetic(spec));
    emit_report(run_pipeline(config, data), sub);
    std::ifstream in(sub / "report.json", std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  };
  const std::string a = run_once(dir / "a");
  const std::string b = run_once(dir / "b");
  std::filesystem::remove_all(dir);

  Verdict v;
  v.pass = !a.empty() && a == b;
  v.detail = "report.json bytes " + std::string(v.pass ? "identical" : "DIFFER") + " (" +
             std::to_string(a.size()) + " bytes)";
  return v;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion(1, "unweighted validity (iid)", criterion_unweighted_validity);
  criterion(2, "oracle-weighted validity", criterion_shift_validity);
  criterion(3, "coverage-gap reduction", criterion_gap_reduction);
  criterion(4, "kde consistency", criterion_kde_consistency);
  criterion(5, "weighted-quantile oracle", criterion_weighted_quantile_oracle);
  criterion(6, "gradient correctness", criterion_gradient_check);
  criterion(7, "energy separation", criterion_energy_separation);
  criterion(8, "splitting correctness", criterion_splitting);
  criterion(9, "pipeline determinism", criterion_determinism);
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
