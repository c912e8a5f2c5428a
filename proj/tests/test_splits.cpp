#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "shiftcp/splits.hpp"

using namespace shiftcp;
using namespace shiftcp::splits;

namespace {

Fingerprint fp(std::initializer_list<int> bits) {
  Fingerprint out;
  for (int b : bits) out.push_back(static_cast<std::uint8_t>(b));
  return out;
}

// Reference greedy selection recomputing every maximum from scratch each round.
std::vector<int> greedy_test_selection_bruteforce(const std::vector<Fingerprint>& fps,
                                                  int n_test) {
  const int n = static_cast<int>(fps.size());
  std::vector<bool> in_test(static_cast<std::size_t>(n), false);
  std::vector<int> picked;
  for (int round = 0; round < n_test; ++round) {
    int best = -1;
    double best_sim = 0;
    for (int i = 0; i < n; ++i) {
      if (in_test[static_cast<std::size_t>(i)]) continue;
      double max_sim = -1;
      for (int j = 0; j < n; ++j) {
        if (j == i || in_test[static_cast<std::size_t>(j)]) continue;
        max_sim = std::max(max_sim, jaccard(fps[static_cast<std::size_t>(i)],
                                            fps[static_cast<std::size_t>(j)]));
      }
      if (best < 0 || max_sim < best_sim) {
        best = i;
        best_sim = max_sim;
      }
    }
    in_test[static_cast<std::size_t>(best)] = true;
    picked.push_back(best);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

void check_partition(const SplitAssignment& split, int n) {
  std::set<int> seen;
  for (const auto* part : {&split.train_idx, &split.cal_idx, &split.test_idx}) {
    for (int i : *part) {
      CHECK(i >= 0);
      CHECK(i < n);
      CHECK(seen.insert(i).second);  // pairwise disjoint
    }
  }
  CHECK(static_cast<int>(seen.size()) == n);  // total
}

std::vector<Fingerprint> random_fps(int n, int len, std::mt19937_64& rng) {
  std::vector<Fingerprint> fps;
  for (int i = 0; i < n; ++i) {
    Fingerprint f;
    for (int j = 0; j < len; ++j) f.push_back(static_cast<std::uint8_t>(rng() % 2));
    fps.push_back(std::move(f));
  }
  return fps;
}

}  // namespace

TEST_CASE("random split sizes follow floor arithmetic") {
  auto split = random_split(10, 0.15, 0.15, 3);
  CHECK(split.test_idx.size() == 1);
  CHECK(split.cal_idx.size() == 1);
  CHECK(split.train_idx.size() == 8);
  check_partition(split, 10);

  auto again = random_split(10, 0.15, 0.15, 3);
  CHECK(split.train_idx == again.train_idx);
  CHECK(split.cal_idx == again.cal_idx);
  CHECK(split.test_idx == again.test_idx);

  auto empty_test = random_split(10, 0.0, 0.3, 3);
  CHECK(empty_test.test_idx.empty());
  CHECK(empty_test.cal_idx.size() == 3);

  CHECK_THROWS_AS(random_split(2, 0.1, 0.1, 0), InputError);
  CHECK_THROWS_AS(random_split(10, 0.6, 0.5, 0), InputError);
  CHECK_THROWS_AS(random_split(10, -0.1, 0.5, 0), InputError);
}

TEST_CASE("jaccard similarity") {
  CHECK(jaccard(fp({1, 0, 1, 1}), fp({1, 0, 1, 1})) == 1.0);
  CHECK(jaccard(fp({1, 1, 0, 0}), fp({0, 0, 1, 1})) == 0.0);
  CHECK(jaccard(fp({1, 0, 1, 1}), fp({1, 1, 0, 1})) == 0.5);
  CHECK(jaccard(fp({0, 0}), fp({0, 0})) == 1.0);
  CHECK_THROWS_AS(jaccard(fp({1, 0}), fp({1, 0, 1})), InputError);
}

TEST_CASE("fingerprint split prefers the most dissimilar point") {
  std::vector<Fingerprint> fps{fp({1, 1, 0}), fp({1, 0, 0}), fp({0, 0, 1})};
  auto split = fingerprint_split(fps, 0.34, 0.33, 7);  // one test slot
  CHECK(split.test_idx == std::vector<int>{2});
  check_partition(split, 3);
}

TEST_CASE("identical fingerprints tie-break to the lowest indices") {
  std::vector<Fingerprint> fps(6, fp({1, 0, 1}));
  auto split = fingerprint_split(fps, 0.5, 0.2, 1);
  CHECK(split.test_idx == std::vector<int>{0, 1, 2});
  check_partition(split, 6);
}

TEST_CASE("fingerprint split matches the brute-force greedy on small instances") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 150; ++rep) {
    const int n = 3 + static_cast<int>(rng() % 6);  // 3..8
    const int len = 3 + static_cast<int>(rng() % 6);
    const auto fps = random_fps(n, len, rng);
    const double test_frac = 0.15 + 0.5 * (static_cast<double>(rng() % 100) / 100.0);
    const double cal_frac = 0.1;
    const int n_test = static_cast<int>(n * test_frac);
    auto split = fingerprint_split(fps, test_frac, cal_frac, rep);
    auto expected = greedy_test_selection_bruteforce(fps, n_test);
    CHECK(split.test_idx == expected);
    check_partition(split, n);
  }
}

TEST_CASE("fingerprint split is deterministic") {
  std::mt19937_64 rng(5);
  const auto fps = random_fps(40, 16, rng);
  auto a = fingerprint_split(fps, 0.2, 0.2, 42);
  auto b = fingerprint_split(fps, 0.2, 0.2, 42);
  CHECK(a.train_idx == b.train_idx);
  CHECK(a.cal_idx == b.cal_idx);
  CHECK(a.test_idx == b.test_idx);
}

TEST_CASE("test points of a fingerprint split are less similar to train than random") {
  std::mt19937_64 rng(17);
  // two loose clusters of bit patterns
  std::vector<Fingerprint> fps;
  for (int i = 0; i < 200; ++i) {
    Fingerprint f(24, 0);
    const int base = (i % 2) * 12;
    for (int j = 0; j < 12; ++j) f[static_cast<std::size_t>(base + j)] = rng() % 3 != 0;
    fps.push_back(std::move(f));
  }
  auto mean_max_sim = [&](const SplitAssignment& split) {
    double acc = 0;
    for (int t : split.test_idx) {
      double max_sim = 0;
      for (int tr : split.train_idx) {
        max_sim = std::max(max_sim, jaccard(fps[static_cast<std::size_t>(t)],
                                            fps[static_cast<std::size_t>(tr)]));
      }
      acc += max_sim;
    }
    return acc / static_cast<double>(split.test_idx.size());
  };
  auto greedy = fingerprint_split(fps, 0.15, 0.15, 3);
  auto random = random_split(200, 0.15, 0.15, 3);
  CHECK(mean_max_sim(greedy) <= mean_max_sim(random));
}

TEST_CASE("scaffold split takes whole rare groups first") {
  // counts A:5, B:3, C:2 over 10 points
  std::vector<std::string> keys{"A", "A", "B", "C", "A", "B", "C", "A", "B", "A"};
  auto split = scaffold_split(keys, 0.2, 0.2, 11);
  CHECK(split.test_idx == std::vector<int>{3, 6});  // exactly C's indices
  check_partition(split, 10);
  // purity
  std::set<std::string> test_keys, rest_keys;
  for (int i : split.test_idx) test_keys.insert(keys[static_cast<std::size_t>(i)]);
  for (int i : split.train_idx) rest_keys.insert(keys[static_cast<std::size_t>(i)]);
  for (int i : split.cal_idx) rest_keys.insert(keys[static_cast<std::size_t>(i)]);
  for (const auto& k : test_keys) CHECK(!rest_keys.contains(k));
}

TEST_CASE("unique scaffolds fill test in key order") {
  std::vector<std::string> keys{"d", "b", "a", "c", "e", "f"};
  auto split = scaffold_split(keys, 0.34, 0.2, 0);
  // two slots; the least keys are "a" (index 2) and "b" (index 1)
  CHECK(split.test_idx == std::vector<int>{1, 2});
}

TEST_CASE("scaffold split may overshoot by one group but never splits one") {
  std::vector<std::string> keys{"A", "A", "A", "B", "B", "B", "B", "B"};
  auto split = scaffold_split(keys, 0.25, 0.2, 0);  // quota 2, group A has 3
  CHECK(split.test_idx == std::vector<int>{0, 1, 2});
  check_partition(split, 8);
}

TEST_CASE("a single scaffold covering everything cannot be split") {
  std::vector<std::string> keys(6, "only");
  CHECK_THROWS_AS(scaffold_split(keys, 0.2, 0.2, 0), InputError);
}

TEST_CASE("scaffold purity holds on random instances") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 10 + static_cast<int>(rng() % 40);
    std::vector<std::string> keys;
    for (int i = 0; i < n; ++i) keys.push_back("s" + std::to_string(rng() % 8));
    SplitAssignment split;
    try {
      split = scaffold_split(keys, 0.2, 0.15, rep);
    } catch (const InputError&) {
      continue;  // all points under one scaffold
    }
    check_partition(split, n);
    std::set<std::string> test_keys;
    for (int i : split.test_idx) test_keys.insert(keys[static_cast<std::size_t>(i)]);
    for (int i : split.train_idx) CHECK(!test_keys.contains(keys[static_cast<std::size_t>(i)]));
    for (int i : split.cal_idx) CHECK(!test_keys.contains(keys[static_cast<std::size_t>(i)]));
  }
}

TEST_CASE("scaffold filter drops unlabeled points sharing a training scaffold") {
  MoleculeMeta unlabeled;
  unlabeled.scaffolds = {"x", "y", "z", "y"};
  MoleculeMeta train;
  train.scaffolds = {"y", "w"};
  auto kept = filter_unlabeled(unlabeled, train, FilterMode::kScaffold);
  CHECK(kept == std::vector<int>{0, 2});
}

TEST_CASE("tanimoto filter keeps only sufficiently dissimilar points") {
  // training pair with per-point max similarity 1/3
  MoleculeMeta train;
  train.fingerprints = {fp({1, 1, 0, 0}), fp({0, 1, 1, 0})};
  MoleculeMeta unlabeled;
  unlabeled.fingerprints = {
      fp({1, 1, 0, 0}),  // similarity 1 to train: dropped
      fp({1, 0, 0, 1}),  // max similarity 1/3: not strictly below: dropped
      fp({0, 0, 0, 1}),  // max similarity 0: kept
  };
  auto kept = filter_unlabeled(unlabeled, train, FilterMode::kTanimoto);
  CHECK(kept == std::vector<int>{2});
}

TEST_CASE("the all-pairs-min threshold rule is exposed") {
  MoleculeMeta train;
  train.fingerprints = {fp({1, 1, 0, 0}), fp({0, 1, 1, 0}), fp({1, 1, 1, 0})};
  // pairwise sims: (0,1)=1/3, (0,2)=2/3, (1,2)=2/3
  // per-point maxima: 2/3, 2/3, 2/3 -> threshold 2/3
  // all-pairs min -> threshold 1/3
  MoleculeMeta unlabeled;
  unlabeled.fingerprints = {fp({0, 1, 0, 1})};  // max sim to train = 1/3
  auto per_point = filter_unlabeled(unlabeled, train, FilterMode::kTanimoto,
                                    TanimotoThreshold::kPerPointMax);
  CHECK(per_point == std::vector<int>{0});  // 1/3 < 2/3
  auto all_pairs = filter_unlabeled(unlabeled, train, FilterMode::kTanimoto,
                                    TanimotoThreshold::kAllPairsMin);
  CHECK(all_pairs.empty());  // 1/3 is not strictly below 1/3
}

TEST_CASE("an empty training set retains every unlabeled point") {
  MoleculeMeta unlabeled;
  unlabeled.scaffolds = {"a", "b"};
  unlabeled.fingerprints = {fp({1, 0}), fp({0, 1})};
  MoleculeMeta train;
  CHECK(filter_unlabeled(unlabeled, train, FilterMode::kScaffold) == std::vector<int>{0, 1});
  CHECK(filter_unlabeled(unlabeled, train, FilterMode::kTanimoto) == std::vector<int>{0, 1});
}

TEST_CASE("missing metadata raises an input error") {
  MoleculeMeta unlabeled;
  unlabeled.fingerprints = {fp({1, 0})};
  MoleculeMeta train;
  train.fingerprints = {fp({1, 0})};
  CHECK_THROWS_AS(filter_unlabeled(unlabeled, train, FilterMode::kScaffold), InputError);
  MoleculeMeta no_fp;
  no_fp.scaffolds = {"a"};
  CHECK_THROWS_AS(filter_unlabeled(no_fp, train, FilterMode::kTanimoto), InputError);
}
