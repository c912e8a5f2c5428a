#include "shiftcp/synthetic.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace shiftcp::pipeline {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double lse2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

int GaussianMixture::dim() const {
  if (components.empty()) throw InputError("mixture has no components");
  return static_cast<int>(components.front().mean.size());
}

void GaussianMixture::validate() const {
  if (components.empty()) throw InputError("mixture has no components");
  const Eigen::Index d = components.front().mean.size();
  if (d < 1) throw InputError("mixture dimension must be positive");
  double total = 0;
  for (const auto& c : components) {
    if (c.mean.size() != d) throw InputError("mixture components differ in dimension");
    if (!c.mean.allFinite()) throw InputError("mixture means must be finite");
    if (!(c.scale > 0.0) || !std::isfinite(c.scale)) {
      throw InputError("degenerate covariance: component scale must be positive");
    }
    if (!(c.weight >= 0.0)) throw InputError("component weights must be nonnegative");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError("component weights sum to " + std::to_string(total) + ", expected 1");
  }
}

double GaussianMixture::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double d = static_cast<double>(x.size());
  double acc = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (const auto& c : components) {
    if (c.weight == 0.0) continue;
    const double d2 = (x - c.mean).squaredNorm();
    const double term = std::log(c.weight) - 0.5 * d * kLogTwoPi - d * std::log(c.scale) -
                        d2 / (2 * c.scale * c.scale);
    acc = first ? term : lse2(acc, term);
    first = false;
  }
  return acc;
}

double GaussianMixture::density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::exp(log_density(x));
}

Eigen::VectorXd GaussianMixture::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0;
  std::size_t pick = components.size() - 1;
  for (std::size_t i = 0; i < components.size(); ++i) {
    cum += components[i].weight;
    if (u <= cum) {
      pick = i;
      break;
    }
  }
  const auto& c = components[pick];
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(c.mean.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = c.mean[j] + c.scale * normal(rng);
  return x;
}

GaussianMixture GaussianMixture::single(Eigen::VectorXd mean, double scale) {
  GaussianMixture m;
  m.components.push_back({std::move(mean), scale, 1.0});
  return m;
}

void LabelRule::validate(int dim) const {
  if (!(noise >= 0.0)) throw InputError("label noise must be nonnegative");
  if (kind == Kind::kLinear) {
    if (direction.size() != dim) throw InputError("label rule direction dimension mismatch");
    if (direction.norm() == 0.0) throw InputError("label rule direction must be nonzero");
  } else {
    if (center.size() != dim) throw InputError("label rule center dimension mismatch");
    if (!(radius > 0.0)) throw InputError("label rule radius must be positive");
  }
}

double LabelRule::prob_class1(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double score = kind == Kind::kLinear ? direction.dot(x) - offset
                                             : radius - (x - center).norm();
  if (noise == 0.0) return score > 0.0 ? 1.0 : 0.0;
  return sigmoid(score / noise);
}

Eigen::Vector2d LabelRule::class_probabilities(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double p1 = prob_class1(x);
  return {1.0 - p1, p1};
}

void SyntheticSpec::validate() const {
  if (dim < 1) throw InputError("dimension must be positive");
  cal_mixture.validate();
  test_mixture.validate();
  if (cal_mixture.dim() != dim || test_mixture.dim() != dim) {
    throw InputError("mixtures must match the spec dimension");
  }
  label_rule.validate(dim);
  if (n_cal < 1 || n_test < 1) throw InputError("need calibration and test samples");
  if (n_train < 0 || n_unlabeled < 0) throw InputError("sample counts must be nonnegative");
}

SyntheticSpec SyntheticSpec::standard_shift(double shift, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = 2;
  spec.cal_mixture = GaussianMixture::single(Eigen::Vector2d::Zero(), 1.0);
  Eigen::Vector2d mu(shift, 0.0);
  spec.test_mixture = GaussianMixture::single(mu, 1.0);
  spec.label_rule.kind = LabelRule::Kind::kLinear;
  spec.label_rule.direction = Eigen::Vector2d(1.0, 0.0);
  spec.label_rule.offset = 1.5;
  spec.label_rule.noise = 0.5;
  spec.seed = seed;
  return spec;
}

double SyntheticData::oracle_weight(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::exp(test_density.log_density(x) - cal_density.log_density(x));
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto draw = [&](const GaussianMixture& mixture, int n, Eigen::MatrixXd& x,
                  std::vector<int>* y) {
    x.resize(n, spec.dim);
    if (y) y->resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd point = mixture.sample(rng);
      x.row(i) = point.transpose();
      const double u = unif(rng);  // always drawn, keeping streams aligned
      if (y) {
        (*y)[static_cast<std::size_t>(i)] = u < spec.label_rule.prob_class1(point) ? 1 : 0;
      }
    }
  };

  SyntheticData data;
  data.cal_density = spec.cal_mixture;
  data.test_density = spec.test_mixture;
  data.label_rule = spec.label_rule;
  draw(spec.cal_mixture, spec.n_train, data.train_x, &data.train_y);
  draw(spec.cal_mixture, spec.n_cal, data.cal_x, &data.cal_y);
  draw(spec.test_mixture, spec.n_test, data.test_x, &data.test_y);
  draw(spec.test_mixture, spec.n_unlabeled, data.unlabeled_x, nullptr);
  return data;
}

}  // namespace shiftcp::pipeline
