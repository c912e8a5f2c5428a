#include "shiftcp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace shiftcp::eval {

CoverageReport coverage_report(const std::vector<conformal::PredictionSet>& sets,
                               const std::vector<int>& true_labels, double alpha) {
  if (sets.empty()) throw InputError("coverage report needs at least one prediction set");
  if (sets.size() != true_labels.size()) {
    throw InputError("prediction sets and labels differ in length");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InputError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }

  CoverageReport report;
  report.alpha = alpha;
  std::map<int, int> covered_per_class;
  int covered = 0;
  int empty_sets = 0;
  double total_size = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const int y = true_labels[i];
    if (y < 0) throw InputError("labels must be nonnegative");
    report.counts[y] += 1;
    const bool hit = sets[i].contains(y);
    covered_per_class[y] += hit;
    covered += hit;
    empty_sets += sets[i].labels.empty();
    total_size += static_cast<double>(sets[i].size());
  }
  for (const auto& [y, count] : report.counts) {
    report.per_class_coverage[y] =
        static_cast<double>(covered_per_class[y]) / static_cast<double>(count);
  }
  report.overall_coverage = static_cast<double>(covered) / static_cast<double>(sets.size());
  report.mean_set_size = total_size / static_cast<double>(sets.size());
  report.empty_set_rate = static_cast<double>(empty_sets) / static_cast<double>(sets.size());
  return report;
}

double macd(const std::vector<double>& coverages, double alpha) {
  if (coverages.empty()) throw InputError("need at least one coverage value");
  const double target = 1.0 - alpha;
  double acc = 0;
  for (double c : coverages) acc += std::abs(c - target);
  return acc / static_cast<double>(coverages.size());
}

double macd_tail25(const std::vector<double>& coverages, double alpha) {
  if (coverages.empty()) throw InputError("need at least one coverage value");
  const double target = 1.0 - alpha;
  std::vector<double> deviations;
  deviations.reserve(coverages.size());
  for (double c : coverages) deviations.push_back(std::abs(c - target));
  std::sort(deviations.begin(), deviations.end(), std::greater<>());
  const std::size_t take = (deviations.size() + 3) / 4;  // ceil(n / 4)
  double acc = 0;
  for (std::size_t i = 0; i < take; ++i) acc += deviations[i];
  return acc / static_cast<double>(take);
}

double coverage_gap_reduction(double method_macd, double baseline_macd) {
  if (!(baseline_macd > 0.0)) {
    throw InputError("coverage-gap reduction is undefined for a zero baseline");
  }
  return 100.0 * (baseline_macd - method_macd) / baseline_macd;
}

}  // namespace shiftcp::eval
