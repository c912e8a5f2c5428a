#include "shiftcp/splits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

namespace shiftcp::splits {

namespace {

void check_fracs(int n, double test_frac, double cal_frac) {
  if (n < 3) throw InputError("need at least 3 points to split");
  if (!(test_frac >= 0.0) || !(cal_frac >= 0.0) || !(test_frac + cal_frac < 1.0)) {
    throw InputError("split fractions must be nonnegative and sum below 1");
  }
}

void check_same_length(const std::vector<Fingerprint>& fps) {
  for (const auto& fp : fps) {
    if (fp.size() != fps.front().size() || fp.empty()) {
      throw InputError("all fingerprints must share one positive length");
    }
  }
}

// Splits `rest` (already ordered) into cal/train by a seeded shuffle.
void assign_rest(std::vector<int> rest, int n_cal, std::uint64_t seed,
                 SplitAssignment& out) {
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  out.cal_idx.assign(rest.begin(), rest.begin() + n_cal);
  out.train_idx.assign(rest.begin() + n_cal, rest.end());
  std::sort(out.cal_idx.begin(), out.cal_idx.end());
  std::sort(out.train_idx.begin(), out.train_idx.end());
}

}  // namespace

SplitAssignment random_split(int n, double test_frac, double cal_frac, std::uint64_t seed) {
  check_fracs(n, test_frac, cal_frac);
  const int n_test = static_cast<int>(std::floor(n * test_frac));
  const int n_cal = static_cast<int>(std::floor(n * cal_frac));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitAssignment out;
  out.test_idx.assign(order.begin(), order.begin() + n_test);
  out.cal_idx.assign(order.begin() + n_test, order.begin() + n_test + n_cal);
  out.train_idx.assign(order.begin() + n_test + n_cal, order.end());
  std::sort(out.test_idx.begin(), out.test_idx.end());
  std::sort(out.cal_idx.begin(), out.cal_idx.end());
  std::sort(out.train_idx.begin(), out.train_idx.end());
  return out;
}

double jaccard(const Fingerprint& a, const Fingerprint& b) {
  if (a.size() != b.size()) throw InputError("fingerprint lengths differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ba = a[i] != 0;
    const bool bb = b[i] != 0;
    inter += ba && bb;
    uni += ba || bb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SplitAssignment fingerprint_split(const std::vector<Fingerprint>& fingerprints,
                                  double test_frac, double cal_frac, std::uint64_t seed) {
  const int n = static_cast<int>(fingerprints.size());
  check_fracs(n, test_frac, cal_frac);
  check_same_length(fingerprints);
  const int n_test = static_cast<int>(std::floor(n * test_frac));
  const int n_cal = static_cast<int>(std::floor(n * cal_frac));

  std::vector<bool> in_test(static_cast<std::size_t>(n), false);
  // cached max similarity over the current pool, with the witness index;
  // entries go stale only when their witness leaves the pool
  std::vector<double> max_sim(static_cast<std::size_t>(n), -1.0);
  std::vector<int> witness(static_cast<std::size_t>(n), -1);

  auto recompute = [&](int i) {
    double best = -1.0;
    int arg = -1;
    for (int j = 0; j < n; ++j) {
      if (j == i || in_test[static_cast<std::size_t>(j)]) continue;
      const double s = jaccard(fingerprints[static_cast<std::size_t>(i)],
                               fingerprints[static_cast<std::size_t>(j)]);
      if (s > best) {
        best = s;
        arg = j;
      }
    }
    max_sim[static_cast<std::size_t>(i)] = best;
    witness[static_cast<std::size_t>(i)] = arg;
  };

  for (int i = 0; i < n; ++i) recompute(i);

  SplitAssignment out;
  for (int round = 0; round < n_test; ++round) {
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (in_test[static_cast<std::size_t>(i)]) continue;
      const int w = witness[static_cast<std::size_t>(i)];
      if (w >= 0 && in_test[static_cast<std::size_t>(w)]) recompute(i);
      if (pick < 0 || max_sim[static_cast<std::size_t>(i)] < max_sim[static_cast<std::size_t>(pick)]) {
        pick = i;  // strict < keeps ties at the lower index
      }
    }
    in_test[static_cast<std::size_t>(pick)] = true;
    out.test_idx.push_back(pick);
  }
  std::sort(out.test_idx.begin(), out.test_idx.end());

  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (!in_test[static_cast<std::size_t>(i)]) rest.push_back(i);
  }
  assign_rest(std::move(rest), n_cal, seed, out);
  return out;
}

SplitAssignment scaffold_split(const std::vector<std::string>& scaffold_ids,
                               double test_frac, double cal_frac, std::uint64_t seed) {
  const int n = static_cast<int>(scaffold_ids.size());
  check_fracs(n, test_frac, cal_frac);
  std::map<std::string, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[scaffold_ids[static_cast<std::size_t>(i)]].push_back(i);

  std::vector<const std::pair<const std::string, std::vector<int>>*> ordered;
  ordered.reserve(groups.size());
  for (const auto& g : groups) ordered.push_back(&g);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    if (a->second.size() != b->second.size()) return a->second.size() < b->second.size();
    return a->first < b->first;
  });

  const int n_test = static_cast<int>(std::floor(n * test_frac));
  const int n_cal = static_cast<int>(std::floor(n * cal_frac));

  SplitAssignment out;
  std::size_t gi = 0;
  while (static_cast<int>(out.test_idx.size()) < n_test && gi < ordered.size()) {
    const auto& members = ordered[gi]->second;
    out.test_idx.insert(out.test_idx.end(), members.begin(), members.end());
    ++gi;
  }
  if (static_cast<int>(out.test_idx.size()) >= n) {
    throw InputError("cannot split: the selected scaffolds cover the whole dataset");
  }
  std::sort(out.test_idx.begin(), out.test_idx.end());

  std::vector<int> rest;
  for (; gi < ordered.size(); ++gi) {
    rest.insert(rest.end(), ordered[gi]->second.begin(), ordered[gi]->second.end());
  }
  std::sort(rest.begin(), rest.end());
  if (static_cast<int>(rest.size()) <= n_cal) {
    throw InputError("cannot split: no training points remain after the scaffold overshoot");
  }
  assign_rest(std::move(rest), n_cal, seed, out);
  return out;
}

std::vector<int> filter_unlabeled(const MoleculeMeta& unlabeled, const MoleculeMeta& train,
                                  FilterMode mode, TanimotoThreshold rule) {
  if (mode == FilterMode::kScaffold) {
    if (unlabeled.scaffolds.empty() && !unlabeled.fingerprints.empty()) {
      throw InputError("scaffold filter needs scaffold ids for the unlabeled pool");
    }
    std::unordered_set<std::string> train_keys(train.scaffolds.begin(), train.scaffolds.end());
    std::vector<int> kept;
    for (std::size_t i = 0; i < unlabeled.scaffolds.size(); ++i) {
      if (!train_keys.contains(unlabeled.scaffolds[i])) kept.push_back(static_cast<int>(i));
    }
    return kept;
  }

  const auto& ufp = unlabeled.fingerprints;
  const auto& tfp = train.fingerprints;
  if (ufp.empty()) throw InputError("tanimoto filter needs fingerprints for the unlabeled pool");
  check_same_length(ufp);
  std::vector<int> all(ufp.size());
  std::iota(all.begin(), all.end(), 0);
  if (tfp.empty()) return all;  // vacuous filter
  check_same_length(tfp);
  if (tfp.front().size() != ufp.front().size()) {
    throw InputError("unlabeled and training fingerprint lengths differ");
  }

  double threshold = 1.0;  // degenerate single-point training set keeps sub-identical points
  if (tfp.size() > 1) {
    threshold = std::numeric_limits<double>::infinity();
    if (rule == TanimotoThreshold::kPerPointMax) {
      for (std::size_t i = 0; i < tfp.size(); ++i) {
        double max_to_others = 0.0;
        for (std::size_t j = 0; j < tfp.size(); ++j) {
          if (i != j) max_to_others = std::max(max_to_others, jaccard(tfp[i], tfp[j]));
        }
        threshold = std::min(threshold, max_to_others);
      }
    } else {
      for (std::size_t i = 0; i < tfp.size(); ++i) {
        for (std::size_t j = i + 1; j < tfp.size(); ++j) {
          threshold = std::min(threshold, jaccard(tfp[i], tfp[j]));
        }
      }
    }
  }

  std::vector<int> kept;
  for (std::size_t u = 0; u < ufp.size(); ++u) {
    double max_sim = 0.0;
    for (const auto& t : tfp) max_sim = std::max(max_sim, jaccard(ufp[u], t));
    if (max_sim < threshold) kept.push_back(static_cast<int>(u));
  }
  return kept;
}

}  // namespace shiftcp::splits
