#include "shiftcp/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace shiftcp::energy {

namespace {

void check_finite_vec(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) {
  if (!v.allFinite()) throw InputError(std::string(what) + " must be finite");
}

double lse(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double m = z.maxCoeff();
  double acc = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) acc += std::exp(z[i] - m);
  return m + std::log(acc);
}

struct BatchPass {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> act;   // act[0] is the input batch
};

BatchPass forward_batch(const EnergyMlp& model, const Eigen::Ref<const Eigen::MatrixXd>& xs) {
  BatchPass pass;
  pass.act.push_back(xs);
  const auto& ws = model.weights();
  const auto& bs = model.biases();
  for (std::size_t l = 0; l < ws.size(); ++l) {
    Eigen::MatrixXd z = pass.act.back() * ws[l].transpose();
    z.rowwise() += bs[l].transpose();
    pass.pre.push_back(z);
    if (l + 1 < ws.size()) {
      pass.act.push_back(z.cwiseMax(0.0));
    } else {
      pass.act.push_back(std::move(z));
    }
  }
  return pass;
}

// Unvalidated row-wise softmax and energies for internal batch math; NaN and
// infinity propagate to the loss where the divergence guard picks them up.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits, double temperature) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::VectorXd z = logits.row(i).transpose() / temperature;
    const double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    p.row(i) = (e / e.sum()).transpose();
  }
  return p;
}

Eigen::VectorXd row_energies(const Eigen::MatrixXd& logits, double temperature) {
  Eigen::VectorXd e(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    e[i] = -temperature * lse(logits.row(i).transpose() / temperature);
  }
  return e;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  explicit Gradients(const EnergyMlp& model) {
    for (const auto& w : model.weights()) weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : model.biases()) biases.push_back(Eigen::VectorXd::Zero(b.size()));
  }
};

void backprop_into(const EnergyMlp& model, const BatchPass& pass,
                   const Eigen::MatrixXd& dlogits, Gradients& grads) {
  const auto& ws = model.weights();
  Eigen::MatrixXd delta = dlogits;
  for (int l = static_cast<int>(ws.size()) - 1; l >= 0; --l) {
    grads.weights[l] += delta.transpose() * pass.act[static_cast<std::size_t>(l)];
    grads.biases[l] += delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd da = delta * ws[static_cast<std::size_t>(l)];
      delta = da.cwiseProduct(
          (pass.pre[static_cast<std::size_t>(l) - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

void check_train_inputs(const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                        const std::vector<int>& in_labels,
                        const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                        const EnergyConfig& config) {
  config.validate();
  if (in_features.rows() < 1) throw InputError("labeled batch must be nonempty");
  if (static_cast<std::size_t>(in_features.rows()) != in_labels.size()) {
    throw InputError("features and labels differ in length");
  }
  if (!in_features.allFinite()) throw InputError("labeled features must be finite");
  if (config.lambda > 0.0) {
    if (out_features.rows() < 1) {
      throw InputError("unlabeled batch must be nonempty when lambda > 0");
    }
    if (!out_features.allFinite()) throw InputError("unlabeled features must be finite");
    if (out_features.cols() != in_features.cols()) {
      throw InputError("labeled and unlabeled feature dimensions differ");
    }
  }
}

// Loss and parameter gradients for one paired batch.
double loss_and_grads(const EnergyMlp& model, const Eigen::Ref<const Eigen::MatrixXd>& in_x,
                      const std::vector<int>& in_y,
                      const Eigen::Ref<const Eigen::MatrixXd>& out_x,
                      const EnergyConfig& config, Gradients& grads) {
  const double t = model.temperature();
  const double b_in = static_cast<double>(in_x.rows());
  BatchPass in_pass = forward_batch(model, in_x);
  const Eigen::MatrixXd& in_logits = in_pass.act.back();
  const Eigen::MatrixXd in_p = row_softmax(in_logits, t);

  double loss = 0;
  for (Eigen::Index i = 0; i < in_logits.rows(); ++i) {
    loss += lse(in_logits.row(i).transpose() / t) - in_logits(i, in_y[static_cast<std::size_t>(i)]) / t;
  }
  loss /= b_in;

  Eigen::MatrixXd din = in_p;
  for (Eigen::Index i = 0; i < din.rows(); ++i) {
    din(i, in_y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  din /= (t * b_in);

  if (config.lambda > 0.0) {
    const Eigen::VectorXd in_e = row_energies(in_logits, t);
    double margin = 0;
    for (Eigen::Index i = 0; i < in_e.size(); ++i) {
      const double hinge = std::max(0.0, in_e[i] - config.margin_in);
      margin += hinge * hinge / b_in;
      // dE/df_j = -p_j
      din.row(i) += (config.lambda * 2.0 * hinge / b_in) * (-in_p.row(i));
    }
    backprop_into(model, in_pass, din, grads);

    const double b_out = static_cast<double>(out_x.rows());
    BatchPass out_pass = forward_batch(model, out_x);
    const Eigen::MatrixXd& out_logits = out_pass.act.back();
    const Eigen::MatrixXd out_p = row_softmax(out_logits, t);
    const Eigen::VectorXd out_e = row_energies(out_logits, t);
    Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(out_logits.rows(), out_logits.cols());
    for (Eigen::Index i = 0; i < out_e.size(); ++i) {
      const double hinge = std::max(0.0, config.margin_out - out_e[i]);
      margin += hinge * hinge / b_out;
      dout.row(i) = (config.lambda * 2.0 * hinge / b_out) * out_p.row(i);
    }
    backprop_into(model, out_pass, dout, grads);
    loss += config.lambda * margin;
  } else {
    backprop_into(model, in_pass, din, grads);
  }
  return loss;
}

}  // namespace

void EnergyConfig::validate() const {
  if (!(lambda >= 0.0)) throw InputError("lambda must be nonnegative");
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  if (epochs < 0) throw InputError("epochs must be nonnegative");
  if (batch_size < 1) throw InputError("batch size must be at least 1");
  if (!(margin_in < margin_out)) {
    throw InputError("margin_in must lie below margin_out so in-distribution energies "
                     "separate beneath the unlabeled ones");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw InputError("hidden widths must be positive");
  }
}

EnergyMlp::EnergyMlp(std::vector<int> layer_dims, double temperature)
    : layer_dims_(std::move(layer_dims)), temperature_(temperature) {
  if (layer_dims_.size() < 2) throw InputError("network needs input and output dimensions");
  for (int d : layer_dims_) {
    if (d < 1) throw InputError("layer dimensions must be positive");
  }
  if (layer_dims_.back() < 2) throw InputError("output layer needs at least 2 classes");
  if (!(temperature_ > 0.0)) throw InputError("temperature must be positive");
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(layer_dims_[l + 1], layer_dims_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(layer_dims_[l + 1]));
  }
}

EnergyMlp EnergyMlp::random_init(std::vector<int> layer_dims, double temperature,
                                 std::uint64_t seed) {
  EnergyMlp model(std::move(layer_dims), temperature);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < model.weights_.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(model.layer_dims_[l]));
    std::uniform_real_distribution<double> unif(-scale, scale);
    auto& w = model.weights_[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = unif(rng);
    }
    auto& b = model.biases_[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = unif(rng);
  }
  return model;
}

EnergyMlp::Forward EnergyMlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != layer_dims_.front()) {
    throw InputError("input dimension " + std::to_string(x.size()) + " does not match " +
                     std::to_string(layer_dims_.front()));
  }
  check_finite_vec(x, "network input");
  Eigen::VectorXd act = x;
  Forward out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * act + biases_[l];
    if (l + 1 < weights_.size()) {
      act = z.cwiseMax(0.0);
    } else {
      out.features = act;
      out.logits = std::move(z);
    }
  }
  return out;
}

Eigen::MatrixXd EnergyMlp::logits_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const {
  if (xs.cols() != layer_dims_.front()) throw InputError("batch feature dimension mismatch");
  return forward_batch(*this, xs).act.back();
}

Eigen::MatrixXd EnergyMlp::features_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const {
  if (xs.cols() != layer_dims_.front()) throw InputError("batch feature dimension mismatch");
  auto pass = forward_batch(*this, xs);
  return pass.act[pass.act.size() - 2];
}

Eigen::MatrixXd EnergyMlp::probabilities_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const {
  return row_softmax(logits_rows(xs), temperature_);
}

Eigen::VectorXd EnergyMlp::energies_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const {
  return row_energies(logits_rows(xs), temperature_);
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature) {
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  check_finite_vec(logits, "logits");
  const Eigen::VectorXd z = logits / temperature;
  const double m = z.maxCoeff();
  Eigen::VectorXd e(z.size());
  double total = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    e[i] = std::exp(z[i] - m);
    total += e[i];
  }
  return e / total;
}

double energy_score(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature) {
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  check_finite_vec(logits, "logits");
  return -temperature * lse(logits / temperature);
}

double energy_margin_loss(const std::vector<double>& in_energies,
                          const std::vector<double>& out_energies, double margin_in,
                          double margin_out) {
  if (in_energies.empty() || out_energies.empty()) {
    throw InputError("energy margin loss needs nonempty energy lists");
  }
  double in_term = 0;
  for (double e : in_energies) {
    const double hinge = std::max(0.0, e - margin_in);
    in_term += hinge * hinge;
  }
  double out_term = 0;
  for (double e : out_energies) {
    const double hinge = std::max(0.0, margin_out - e);
    out_term += hinge * hinge;
  }
  return in_term / static_cast<double>(in_energies.size()) +
         out_term / static_cast<double>(out_energies.size());
}

double total_loss(const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                  const std::vector<int>& in_labels,
                  const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                  const EnergyMlp& model, const EnergyConfig& config) {
  check_train_inputs(in_features, in_labels, out_features, config);
  const double t = model.temperature();
  const Eigen::MatrixXd in_logits = model.logits_rows(in_features);
  double loss = 0;
  for (Eigen::Index i = 0; i < in_logits.rows(); ++i) {
    const int y = in_labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= model.num_classes()) {
      throw InputError("label out of range at index " + std::to_string(i));
    }
    loss += lse(in_logits.row(i).transpose() / t) - in_logits(i, y) / t;
  }
  loss /= static_cast<double>(in_logits.rows());
  if (config.lambda > 0.0) {
    const Eigen::VectorXd in_e = row_energies(in_logits, t);
    const Eigen::VectorXd out_e = model.energies_rows(out_features);
    loss += config.lambda *
            energy_margin_loss({in_e.data(), in_e.data() + in_e.size()},
                               {out_e.data(), out_e.data() + out_e.size()},
                               config.margin_in, config.margin_out);
  }
  return loss;
}

LossGradients loss_gradients(const EnergyMlp& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                             const std::vector<int>& in_labels,
                             const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                             const EnergyConfig& config) {
  check_train_inputs(in_features, in_labels, out_features, config);
  Gradients grads(model);
  LossGradients out;
  out.loss = loss_and_grads(model, in_features, in_labels, out_features, config, grads);
  out.weight_grads = std::move(grads.weights);
  out.bias_grads = std::move(grads.biases);
  return out;
}

TrainResult train_ebm(const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                      const std::vector<int>& in_labels,
                      const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                      const EnergyConfig& config) {
  check_train_inputs(in_features, in_labels, out_features, config);
  int num_classes = 0;
  for (int y : in_labels) {
    if (y < 0) throw InputError("labels must be nonnegative");
    num_classes = std::max(num_classes, y + 1);
  }
  if (num_classes < 2) {
    throw InputError("training needs examples from at least 2 classes");
  }

  std::vector<int> dims;
  dims.push_back(static_cast<int>(in_features.cols()));
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(num_classes);

  TrainResult result{EnergyMlp::random_init(dims, config.temperature, config.seed), {}};
  EnergyMlp& model = result.model;

  std::mt19937_64 rng(config.seed + 0x9e3779b97f4a7c15ull);
  const Eigen::Index n = in_features.rows();
  const Eigen::Index pool = out_features.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::Index> pool_idx(static_cast<std::size_t>(pool));
  std::iota(pool_idx.begin(), pool_idx.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd in_x(b, in_features.cols());
      std::vector<int> in_y(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        in_x.row(i) = in_features.row(order[static_cast<std::size_t>(start + i)]);
        in_y[static_cast<std::size_t>(i)] =
            in_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
      }
      Eigen::MatrixXd out_x(0, in_features.cols());
      if (config.lambda > 0.0) {
        out_x.resize(b, out_features.cols());
        if (pool >= b) {
          std::vector<Eigen::Index> chosen;
          chosen.reserve(static_cast<std::size_t>(b));
          std::sample(pool_idx.begin(), pool_idx.end(), std::back_inserter(chosen),
                      static_cast<std::size_t>(b), rng);
          for (Eigen::Index i = 0; i < b; ++i) {
            out_x.row(i) = out_features.row(chosen[static_cast<std::size_t>(i)]);
          }
        } else {
          std::uniform_int_distribution<Eigen::Index> pick(0, pool - 1);
          for (Eigen::Index i = 0; i < b; ++i) {
            out_x.row(i) = out_features.row(pick(rng));
          }
        }
      }
      Gradients grads(model);
      const double loss = loss_and_grads(model, in_x, in_y, out_x, config, grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                             " with learning rate " + std::to_string(config.learning_rate));
      }
      for (std::size_t l = 0; l < model.weights().size(); ++l) {
        model.weights()[l] -= config.learning_rate * grads.weights[l];
        model.biases()[l] -= config.learning_rate * grads.biases[l];
      }
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / batches);
  }
  return result;
}

double grad_check(const EnergyMlp& model, const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                  const std::vector<int>& in_labels,
                  const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                  const EnergyConfig& config, double eps) {
  if (!(eps > 0.0)) throw InputError("finite-difference step must be positive");
  const LossGradients grads =
      loss_gradients(model, in_features, in_labels, out_features, config);

  EnergyMlp probe = model;
  double max_rel = 0;
  auto update = [&](double analytic, double& param) {
    const double saved = param;
    param = saved + eps;
    const double hi = total_loss(in_features, in_labels, out_features, probe, config);
    param = saved - eps;
    const double lo = total_loss(in_features, in_labels, out_features, probe, config);
    param = saved;
    const double numeric = (hi - lo) / (2 * eps);
    const double rel = std::abs(analytic - numeric) /
                       std::max({1.0, std::abs(analytic), std::abs(numeric)});
    max_rel = std::max(max_rel, rel);
  };

  for (std::size_t l = 0; l < probe.weights().size(); ++l) {
    auto& w = probe.weights()[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) update(grads.weight_grads[l](i, j), w(i, j));
    }
    auto& b = probe.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) update(grads.bias_grads[l][i], b[i]);
  }
  return max_rel;
}

}  // namespace shiftcp::energy
