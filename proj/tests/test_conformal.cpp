#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shiftcp/conformal.hpp"

using namespace shiftcp;
using namespace shiftcp::conformal;

namespace {

Eigen::MatrixXd rows2(std::initializer_list<std::initializer_list<double>> vals) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(vals.size()),
                    static_cast<Eigen::Index>(vals.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : vals) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("nonconformity scores are probability complements") {
  ClassProbabilities probs(rows2({{0.9, 0.1}, {0.9, 0.1}}));
  auto s = nonconformity_scores(probs, {0, 1});
  CHECK(s.values[0] == doctest::Approx(0.1));
  CHECK(s.values[1] == doctest::Approx(0.9));

  ClassProbabilities uniform(rows2({{0.25, 0.25, 0.25, 0.25}}));
  for (int y = 0; y < 4; ++y) {
    CHECK(nonconformity_scores(uniform, {y}).values[0] == doctest::Approx(0.75));
  }

  CHECK_THROWS_AS(nonconformity_scores(probs, {0, 2}), InputError);
  CHECK_THROWS_AS(nonconformity_scores(probs, {0}), InputError);
}

TEST_CASE("class probabilities validate the simplex") {
  CHECK_THROWS_AS(ClassProbabilities(rows2({{0.9, 0.2}})), InputError);
  CHECK_THROWS_AS(ClassProbabilities(rows2({{1.1, -0.1}})), InputError);
  CHECK_THROWS_AS(ClassProbabilities(Eigen::MatrixXd::Ones(2, 1)), InputError);
}

TEST_CASE("empirical cdf") {
  auto cdf = empirical_cdf({1.0, 2.0, 3.0});
  CHECK(cdf(0.0) == 0.0);
  CHECK(cdf(3.0) == 1.0);
  CHECK(cdf(2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(cdf(10.0) == 1.0);
  CHECK_THROWS_AS(empirical_cdf({}), InputError);

  // duplicates merge
  auto dup = empirical_cdf({1.0, 1.0, 2.0});
  CHECK(dup.support().size() == 2);
  CHECK(dup(1.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("quantile of weighted cdf with equal atoms") {
  // atoms {0.1, 0.2, 0.3, 0.4, inf}, each mass 1/5
  auto cdf = weighted_ecdf({0.1, 0.2, 0.3, 0.4}, {1, 1, 1, 1}, 1.0);
  CHECK(quantile(0.8, cdf) == 0.4);
  CHECK(quantile(0.2, cdf) == 0.1);
  CHECK(quantile(0.81, cdf) == kInfinity);
}

TEST_CASE("weighted quantile with an infinity atom") {
  auto cdf = weighted_ecdf({0.2, 0.6}, {0.25, 0.25}, 0.5);
  CHECK(cdf(0.2) == doctest::Approx(0.25));
  CHECK(cdf(0.6) == doctest::Approx(0.5));
  CHECK(quantile(0.5, cdf) == 0.6);
  CHECK(quantile(0.9, cdf) == kInfinity);
  CHECK_THROWS_AS(quantile(0.0, cdf), InputError);
  CHECK_THROWS_AS(quantile(1.5, cdf), InputError);
}

TEST_CASE("weighted ecdf construction and edge weights") {
  // single calibration point, heavy test weight
  auto cdf = weighted_ecdf({0.5}, {1.0}, 3.0);
  CHECK(cdf(0.5) == doctest::Approx(0.25));
  CHECK(cdf(kInfinity) == 1.0);
  CHECK(cdf(0.49) == 0.0);

  // all calibration mass on the infinity atom
  auto degenerate = weighted_ecdf({0.1, 0.2}, {0.0, 0.0}, 1.0);
  CHECK(degenerate(0.2) == 0.0);
  CHECK(degenerate(100.0) == 0.0);
  CHECK(quantile(0.5, degenerate) == kInfinity);

  CHECK_THROWS_AS(weighted_ecdf({0.1}, {0.0}, 0.0), NumericalError);
  CHECK_THROWS_AS(weighted_ecdf({0.1}, {-1.0}, 1.0), InputError);
  CHECK_THROWS_AS(weighted_ecdf({0.1, 0.2}, {1.0}, 1.0), InputError);
}

TEST_CASE("equal weights reduce the weighted cdf to the empirical cdf") {
  std::vector<double> scores{0.3, 0.1, 0.7, 0.1, 0.5};
  auto weighted = weighted_ecdf(scores, std::vector<double>(scores.size(), 1.0), 1.0);
  auto plain = empirical_cdf(scores);
  // On the finite support, F_w(x) = F(x) * N/(N+1).
  for (double x : {0.05, 0.1, 0.3, 0.5, 0.7, 0.9}) {
    CHECK(weighted(x) == doctest::Approx(plain(x) * 5.0 / 6.0).epsilon(1e-12));
  }
}

TEST_CASE("unweighted mondrian thresholds") {
  auto t = mondrian_thresholds_unweighted({{0.1, 0.3, 0.5, 0.7}}, 0.2);
  CHECK(t[0] == 0.7);

  auto t_inf = mondrian_thresholds_unweighted({{0.5}}, 0.2);
  CHECK(t_inf[0] == kInfinity);

  auto t_min = mondrian_thresholds_unweighted({{0.5, 0.2, 0.9}}, 0.999);
  CHECK(t_min[0] == 0.2);

  CHECK_THROWS_WITH_AS(mondrian_thresholds_unweighted({{0.1}, {}}, 0.2).front(),
                       doctest::Contains("class 1"), InputError);
  CHECK_THROWS_AS(mondrian_thresholds_unweighted({{0.1}}, 0.0), InputError);
  CHECK_THROWS_AS(mondrian_thresholds_unweighted({{1.5}}, 0.1), InputError);
}

TEST_CASE("unweighted prediction sets") {
  Eigen::Vector2d probs(0.9, 0.1);
  auto set = prediction_set_unweighted(probs, {0.5, 0.5});
  CHECK(set.labels == std::vector<int>{0});
  CHECK(set.contains(0));
  CHECK(!set.contains(1));

  auto all = prediction_set_unweighted(probs, {kInfinity, kInfinity});
  CHECK(all.labels == std::vector<int>{0, 1});

  // boundary inclusion is inclusive
  Eigen::Vector2d half(0.5, 0.5);
  auto boundary = prediction_set_unweighted(half, {0.5, 0.5});
  CHECK(boundary.labels == std::vector<int>{0, 1});

  CHECK_THROWS_AS(prediction_set_unweighted(probs, {0.5}), InputError);
}

TEST_CASE("weighted prediction set with equal weights matches the unweighted set") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::vector<double>> scores(2), weights(2);
    for (int y = 0; y < 2; ++y) {
      const int n = 1 + static_cast<int>(rng() % 10);
      for (int i = 0; i < n; ++i) {
        scores[y].push_back(unif(rng));
        weights[y].push_back(1.0);
      }
    }
    const double p1 = unif(rng);
    Eigen::Vector2d probs(1.0 - p1, p1);
    const double alpha = 0.05 + 0.9 * unif(rng);
    auto weighted = prediction_set_weighted(probs, 1.0, scores, weights, alpha);
    auto unweighted =
        prediction_set_unweighted(probs, mondrian_thresholds_unweighted(scores, alpha));
    CHECK(weighted.labels == unweighted.labels);
    for (int y = 0; y < 2; ++y) {
      CHECK(weighted.per_label_threshold[y] == unweighted.per_label_threshold[y]);
    }
  }
}

TEST_CASE("dominating test weight yields the full label set") {
  std::vector<std::vector<double>> scores{{0.1, 0.2}, {0.3, 0.4}};
  std::vector<std::vector<double>> weights{{1e-12, 1e-12}, {1e-12, 1e-12}};
  Eigen::Vector2d probs(0.99, 0.01);
  auto set = prediction_set_weighted(probs, 1.0, scores, weights, 0.1);
  CHECK(set.labels == std::vector<int>{0, 1});
  CHECK(set.per_label_threshold[0] == kInfinity);
}

TEST_CASE("two-class toy against the enumeration oracle") {
  std::vector<std::vector<double>> scores{{0.2, 0.6}, {0.3, 0.4}};
  std::vector<std::vector<double>> weights{{1.0, 3.0}, {1.0, 1.0}};
  const double alpha = 0.3;
  const double test_weight = 2.0;
  Eigen::Vector2d probs(0.55, 0.45);
  auto set = prediction_set_weighted(probs, test_weight, scores, weights, alpha);
  for (int y = 0; y < 2; ++y) {
    const double expected = testing::weighted_quantile_bruteforce(
        scores[y], weights[y], test_weight, 1.0 - alpha);
    CHECK(set.per_label_threshold[y] == expected);
    const bool member = 1.0 - probs[y] <= expected;
    CHECK(set.contains(y) == member);
  }
  // class 0: cum masses {1/6, 4/6} then infinity; 0.7 needs the infinity atom
  CHECK(set.per_label_threshold[0] == kInfinity);
  // class 1: cum masses {0.25, 0.5}; 0.7 needs infinity as well
  CHECK(set.per_label_threshold[1] == kInfinity);

  // heavier tail weight pulls the quantile to a finite score
  auto finite = prediction_set_weighted(probs, 0.1, scores, weights, 0.3);
  CHECK(finite.per_label_threshold[0] ==
        testing::weighted_quantile_bruteforce({0.2, 0.6}, {1.0, 3.0}, 0.1, 0.7));
  CHECK(finite.per_label_threshold[0] == 0.6);

  CHECK_THROWS_AS(
      prediction_set_weighted(probs, 0.0, scores, {{0.0, 0.0}, {0.0, 0.0}}, 0.3),
      NumericalError);
  CHECK_THROWS_AS(prediction_set_weighted(probs, 1.0, {{0.2}, {}}, {{1.0}, {}}, 0.3),
                  InputError);
}

TEST_CASE("prediction sets shrink as alpha grows") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::vector<double>> scores(3), weights(3);
    for (int y = 0; y < 3; ++y) {
      const int n = 2 + static_cast<int>(rng() % 8);
      for (int i = 0; i < n; ++i) {
        scores[y].push_back(unif(rng));
        weights[y].push_back(0.1 + unif(rng));
      }
    }
    Eigen::Vector3d probs;
    probs << 0.2, 0.5, 0.3;
    double a1 = 0.05 + 0.4 * unif(rng);
    double a2 = a1 + 0.3 * unif(rng);
    const double test_weight = unif(rng);
    auto s1 = prediction_set_weighted(probs, test_weight, scores, weights, a1);
    auto s2 = prediction_set_weighted(probs, test_weight, scores, weights, a2);
    for (int y : s2.labels) CHECK(s1.contains(y));
  }
}

TEST_CASE("quantile postcondition: F(q) >= beta and F(x) < beta below q") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> scores, weights;
    for (int i = 0; i < n; ++i) {
      scores.push_back(unif(rng));
      weights.push_back(unif(rng));
    }
    auto cdf = weighted_ecdf(scores, weights, unif(rng));
    const double beta = std::nextafter(unif(rng), 1.0);
    const double q = cdf.quantile(beta);
    if (q != kInfinity) {
      CHECK(cdf(q) >= beta);
    }
    for (double x : cdf.support()) {
      if (x < q) CHECK(cdf(x) < beta);
    }
  }
}

TEST_CASE("weighted quantile equals brute-force enumeration on random instances") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> scores, weights;
    for (int i = 0; i < n; ++i) {
      scores.push_back(unif(rng));
      weights.push_back(unif(rng));
    }
    const double test_weight = unif(rng);
    const double beta = std::nextafter(unif(rng), 1.0);
    auto cdf = weighted_ecdf(scores, weights, test_weight);
    const double expected =
        testing::weighted_quantile_bruteforce(scores, weights, test_weight, beta);
    const double actual = cdf.quantile(beta);
    CHECK(actual == expected);
  }
}

TEST_CASE("duplicate scores merge by summing masses") {
  auto cdf = weighted_ecdf({0.4, 0.4, 0.2}, {1.0, 2.0, 1.0}, 1.0);
  CHECK(cdf.support() == std::vector<double>{0.2, 0.4});
  CHECK(cdf.point_weights() == std::vector<double>{1.0, 3.0});
  CHECK(cdf.infinity_mass() == 1.0);
  CHECK(cdf.normalizer() == doctest::Approx(5.0));
  // integer-valued weights keep the merged scan exact
  CHECK(cdf.quantile(0.8) ==
        testing::weighted_quantile_bruteforce({0.4, 0.4, 0.2}, {1.0, 2.0, 1.0}, 1.0, 0.8));
}

TEST_CASE("calibration config validates alpha") {
  CalibrationConfig cfg;
  cfg.alpha = 0.1;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}
