#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftcp/errors.hpp"

namespace shiftcp::splits {

/// Fixed-length 0/1 bit vector.
using Fingerprint = std::vector<std::uint8_t>;

/// Disjoint index lists covering a dataset.
struct SplitAssignment {
  std::vector<int> train_idx;
  std::vector<int> cal_idx;
  std::vector<int> test_idx;
};

/// Seeded shuffle, then the first floor(n * test_frac) indices go to test, the
/// next floor(n * cal_frac) to calibration, and the remainder to train.
SplitAssignment random_split(int n, double test_frac, double cal_frac, std::uint64_t seed);

/// |a AND b| / |a OR b|; 1 when both vectors are all-zero.
double jaccard(const Fingerprint& a, const Fingerprint& b);

/// Greedy dissimilarity split: repeatedly move to test the point whose maximum
/// Jaccard similarity to the points still outside test is smallest (ties to
/// the lower index); the rest is split randomly into calibration and train.
SplitAssignment fingerprint_split(const std::vector<Fingerprint>& fingerprints,
                                  double test_frac, double cal_frac, std::uint64_t seed);

/// Whole scaffold groups, rarest first, fill the test set; remaining points
/// are split randomly. No scaffold key ever spans test and train/cal.
SplitAssignment scaffold_split(const std::vector<std::string>& scaffold_ids,
                               double test_frac, double cal_frac, std::uint64_t seed);

enum class FilterMode { kScaffold, kTanimoto };

/// Which statistic of the training set defines the Tanimoto threshold: the
/// minimum over per-point maximum similarities (default) or the minimum over
/// all pairwise similarities.
enum class TanimotoThreshold { kPerPointMax, kAllPairsMin };

struct MoleculeMeta {
  std::vector<std::string> scaffolds;     // empty when unavailable
  std::vector<Fingerprint> fingerprints;  // empty when unavailable
};

/// Indices of unlabeled points that survive the similarity filter against the
/// training set. Scaffold mode drops points whose scaffold occurs in train;
/// tanimoto mode keeps points whose maximum similarity to train is strictly
/// below the training set's own threshold. An empty training set retains all.
std::vector<int> filter_unlabeled(const MoleculeMeta& unlabeled, const MoleculeMeta& train,
                                  FilterMode mode,
                                  TanimotoThreshold rule = TanimotoThreshold::kPerPointMax);

}  // namespace shiftcp::splits
