#include "shiftcp/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace shiftcp::density {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw InputError(std::string(what) + " must be finite");
  }
}

// log sum exp of -d2 / (2 h^2) over a vector of squared distances
double lse_sq_dists(const Eigen::VectorXd& d2, double h) {
  const double scale = -0.5 / (h * h);
  const double m = d2.minCoeff() * scale;  // largest exponent
  if (!std::isfinite(m)) return kNegInf;
  double acc = 0;
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    acc += std::exp(d2[i] * scale - m);
  }
  return m + std::log(acc);
}

}  // namespace

KdeModel::KdeModel(Eigen::MatrixXd samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (samples_.rows() < 1 || samples_.cols() < 1) {
    throw InputError("KDE needs at least one sample with at least one dimension");
  }
  check_finite(samples_, "KDE samples");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
    throw InputError("KDE bandwidth must be positive, got " + std::to_string(bandwidth_));
  }
  const double n = static_cast<double>(samples_.rows());
  const double d = static_cast<double>(samples_.cols());
  log_norm_ = -std::log(n) - d * std::log(bandwidth_) - 0.5 * d * kLogTwoPi;
}

double KdeModel::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != samples_.cols()) {
    throw InputError("query dimension " + std::to_string(x.size()) +
                     " does not match KDE dimension " + std::to_string(samples_.cols()));
  }
  if (!x.allFinite()) throw InputError("KDE query must be finite");
  const Eigen::VectorXd d2 = (samples_.rowwise() - x.transpose()).rowwise().squaredNorm();
  return log_norm_ + lse_sq_dists(d2, bandwidth_);
}

double KdeModel::density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::exp(log_density(x));
}

Eigen::VectorXd KdeModel::log_density_rows(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[i] = log_density(points.row(i).transpose());
  }
  return out;
}

double KdeModel::log_density_loo(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::Index n = samples_.rows();
  if (n < 2) throw InputError("leave-one-out density needs at least 2 samples");
  const double lp = log_density(x);
  // the self kernel contributes exactly K(0) / (n h^d), whose log is log_norm_
  const double diff = lp <= log_norm_ ? kNegInf : lp + std::log1p(-std::exp(log_norm_ - lp));
  return diff + std::log(static_cast<double>(n) / static_cast<double>(n - 1));
}

KdeModel fit_kde(const Eigen::MatrixXd& samples, double bandwidth) {
  return KdeModel(samples, bandwidth);
}

double kde_log_density(const KdeModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.log_density(x);
}

std::vector<double> default_bandwidth_grid() {
  std::vector<double> grid;
  grid.reserve(25);
  const double lo = -1.3, hi = 1.0;
  for (int i = 0; i < 25; ++i) {
    grid.push_back(std::pow(10.0, lo + (hi - lo) * i / 24.0));
  }
  return grid;
}

void BandwidthSearch::validate(Eigen::Index n) const {
  if (grid.empty()) throw InputError("bandwidth grid must be nonempty");
  for (double h : grid) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw InputError("bandwidth candidates must be positive");
    }
  }
  if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
  if (static_cast<Eigen::Index>(folds) > n) {
    throw InputError("more folds than samples");
  }
}

double select_bandwidth(const Eigen::MatrixXd& samples, const BandwidthSearch& search) {
  const Eigen::Index n = samples.rows();
  search.validate(n);
  check_finite(samples, "KDE samples");

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(search.seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  // contiguous chunks, remainder spread over the earliest folds
  const int k = search.folds;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> fold_ranges;  // [begin, end)
  Eigen::Index begin = 0;
  for (int f = 0; f < k; ++f) {
    Eigen::Index size = n / k + (f < static_cast<int>(n % k) ? 1 : 0);
    fold_ranges.emplace_back(begin, begin + size);
    begin += size;
  }

  const double d = static_cast<double>(samples.cols());
  std::vector<double> scores(search.grid.size(), 0.0);

  for (const auto& [fb, fe] : fold_ranges) {
    const Eigen::Index held = fe - fb;
    const Eigen::Index rest = n - held;
    if (rest < 1) throw InputError("cross-validation fold leaves no training samples");
    Eigen::MatrixXd train(rest, samples.cols());
    Eigen::MatrixXd holdout(held, samples.cols());
    Eigen::Index ti = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i >= fb && i < fe) {
        holdout.row(i - fb) = samples.row(perm[static_cast<std::size_t>(i)]);
      } else {
        train.row(ti++) = samples.row(perm[static_cast<std::size_t>(i)]);
      }
    }
    // pairwise squared distances, shared across the candidate grid
    Eigen::MatrixXd d2(held, rest);
    for (Eigen::Index i = 0; i < held; ++i) {
      d2.row(i) = (train.rowwise() - holdout.row(i)).rowwise().squaredNorm().transpose();
    }
    for (std::size_t gi = 0; gi < search.grid.size(); ++gi) {
      const double h = search.grid[gi];
      const double log_norm =
          -std::log(static_cast<double>(rest)) - d * std::log(h) - 0.5 * d * kLogTwoPi;
      double fold_mean = 0;
      for (Eigen::Index i = 0; i < held; ++i) {
        const double ll = log_norm + lse_sq_dists(d2.row(i).transpose(), h);
        fold_mean += ll;
      }
      scores[gi] += fold_mean / static_cast<double>(held) / k;
    }
  }

  std::size_t best = search.grid.size();
  for (std::size_t gi = 0; gi < search.grid.size(); ++gi) {
    if (std::isfinite(scores[gi]) && (best == search.grid.size() || scores[gi] > scores[best])) {
      best = gi;
    }
  }
  if (best == search.grid.size()) {
    throw NumericalError("bandwidth selection failed: no candidate has finite held-out likelihood");
  }
  return search.grid[best];
}

RatioWeights ratio_weights(const KdeModel& test_kde, const KdeModel& cal_kde,
                           const Eigen::MatrixXd& cal_points, std::optional<double> cap) {
  if (test_kde.dim() != cal_kde.dim()) {
    throw InputError("test and calibration KDEs have different dimensions");
  }
  if (cal_points.cols() != cal_kde.dim()) {
    throw InputError("calibration points do not match the KDE dimension");
  }
  if (cap && !(*cap > 0.0)) throw InputError("weight cap must be positive");

  auto one_weight = [test_kde, cal_kde, cap](const Eigen::VectorXd& x) {
    const double log_cal = cal_kde.log_density(x);
    if (log_cal == kNegInf) {
      throw NumericalError("zero calibration density underflow at a query point");
    }
    const double log_test = test_kde.log_density(x);
    double w = std::exp(log_test - log_cal);
    if (cap) w = std::min(w, *cap);
    if (!std::isfinite(w)) {
      throw NumericalError("non-finite likelihood ratio; consider setting a weight cap");
    }
    return w;
  };

  RatioWeights out;
  out.cap = cap;
  out.cal_weights.reserve(static_cast<std::size_t>(cal_points.rows()));
  for (Eigen::Index i = 0; i < cal_points.rows(); ++i) {
    const Eigen::VectorXd x = cal_points.row(i).transpose();
    const double log_cal = cal_kde.log_density(x);
    if (log_cal == kNegInf) {
      throw NumericalError("zero calibration density underflow at calibration point " +
                           std::to_string(i));
    }
    const double log_test = test_kde.log_density(x);
    double w = std::exp(log_test - log_cal);
    if (cap) w = std::min(w, *cap);
    if (!std::isfinite(w)) {
      throw NumericalError("non-finite likelihood ratio at calibration point " +
                           std::to_string(i) + "; consider setting a weight cap");
    }
    out.cal_weights.push_back(w);
  }
  out.test_weight_of = one_weight;
  return out;
}

RatioWeights logistic_ratio_weights(const Eigen::MatrixXd& cal_points,
                                    const Eigen::MatrixXd& test_points,
                                    const LogisticRatioConfig& config) {
  if (cal_points.rows() < 1 || test_points.rows() < 1) {
    throw InputError("both point sets must be nonempty");
  }
  if (cal_points.cols() != test_points.cols()) {
    throw InputError("calibration and test points have different dimensions");
  }
  check_finite(cal_points, "calibration points");
  check_finite(test_points, "test points");
  if (!(config.learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (config.cap && !(*config.cap > 0.0)) throw InputError("weight cap must be positive");

  const Eigen::Index n0 = cal_points.rows();
  const Eigen::Index n1 = test_points.rows();
  const Eigen::Index n = n0 + n1;
  const Eigen::Index d = cal_points.cols();

  Eigen::MatrixXd X(n, d);
  X.topRows(n0) = cal_points;
  X.bottomRows(n1) = test_points;
  Eigen::VectorXd y(n);
  y.head(n0).setZero();
  y.tail(n1).setOnes();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  Eigen::VectorXd best_w = w;
  double best_b = b;
  double best_loss = std::numeric_limits<double>::infinity();
  bool converged = false;

  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };

  for (int iter = 0; iter < config.max_iters; ++iter) {
    Eigen::VectorXd z = X * w;
    z.array() += b;
    Eigen::VectorXd p = z.unaryExpr(sigmoid);
    // mean cross-entropy via the logit form, stable for |z| large
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      loss += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
    }
    loss /= static_cast<double>(n);
    if (loss < best_loss) {
      best_loss = loss;
      best_w = w;
      best_b = b;
    }
    const Eigen::VectorXd resid = p - y;
    const Eigen::VectorXd gw = X.transpose() * resid / static_cast<double>(n);
    const double gb = resid.mean();
    if (gw.lpNorm<Eigen::Infinity>() < config.tol && std::abs(gb) < config.tol) {
      converged = true;
      break;
    }
    w -= config.learning_rate * gw;
    b -= config.learning_rate * gb;
  }

  const Eigen::VectorXd final_w = best_w;
  const double final_b = best_b;
  const auto cap = config.cap;
  auto weight_of = [final_w, final_b, cap](const Eigen::VectorXd& x) {
    // p / (1 - p) for the logistic model is exp(w . x + b)
    double z = final_w.dot(x) + final_b;
    z = std::clamp(z, -700.0, 700.0);
    double ratio = std::exp(z);
    if (cap) ratio = std::min(ratio, *cap);
    return ratio;
  };

  RatioWeights out;
  out.cap = cap;
  out.converged = converged;
  out.cal_weights.reserve(static_cast<std::size_t>(n0));
  for (Eigen::Index i = 0; i < n0; ++i) {
    out.cal_weights.push_back(weight_of(cal_points.row(i).transpose()));
  }
  out.test_weight_of = weight_of;
  return out;
}

}  // namespace shiftcp::density
