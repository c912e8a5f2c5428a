#pragma once

#include <map>
#include <vector>

#include "shiftcp/conformal.hpp"
#include "shiftcp/errors.hpp"

namespace shiftcp::eval {

/// Coverage and set-size statistics of a batch of prediction sets. Classes
/// without any test point are absent from the per-class map rather than
/// reported as zero.
struct CoverageReport {
  std::map<int, double> per_class_coverage;
  double overall_coverage = 0;
  double mean_set_size = 0;
  double empty_set_rate = 0;
  std::map<int, int> counts;
  double alpha = 0;
};

CoverageReport coverage_report(const std::vector<conformal::PredictionSet>& sets,
                               const std::vector<int>& true_labels, double alpha);

/// Mean absolute deviation of realized coverages from the target 1 - alpha.
double macd(const std::vector<double>& coverages, double alpha);

/// Mean absolute deviation over the worst quartile (rounded up) of the inputs.
double macd_tail25(const std::vector<double>& coverages, double alpha);

/// 100 * (baseline - method) / baseline; negative when the method is worse.
double coverage_gap_reduction(double method_macd, double baseline_macd);

}  // namespace shiftcp::eval
