#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "shiftcp/errors.hpp"

namespace shiftcp::energy {

struct EnergyConfig {
  double lambda = 0.01;       // energy regularization strength
  double margin_in = -35.0;   // in-distribution energies are pushed below this
  double margin_out = -5.0;   // out-of-distribution energies are pushed above this
  double temperature = 1.0;
  double learning_rate = 0.01;
  int epochs = 200;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::vector<int> hidden_dims = {64, 8};

  void validate() const;
};

/// Fully connected rectifier network: affine layers with ReLU on the hidden
/// layers and identity on the K output logits. The penultimate activation is
/// exposed as the feature vector.
class EnergyMlp {
 public:
  /// Zero-initialized network with the given layer sizes (input, hidden..., K).
  explicit EnergyMlp(std::vector<int> layer_dims, double temperature = 1.0);
  /// Uniform init in [-s, s] with s = fan_in^(-1/2), reproducible from the seed.
  static EnergyMlp random_init(std::vector<int> layer_dims, double temperature,
                               std::uint64_t seed);

  struct Forward {
    Eigen::VectorXd features;  // last hidden activation (the input if no hidden layer)
    Eigen::VectorXd logits;
  };
  Forward forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Batch helpers; one row per example.
  Eigen::MatrixXd logits_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const;
  Eigen::MatrixXd features_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const;
  Eigen::MatrixXd probabilities_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const;
  Eigen::VectorXd energies_rows(const Eigen::Ref<const Eigen::MatrixXd>& xs) const;

  const std::vector<int>& layer_dims() const { return layer_dims_; }
  int input_dim() const { return layer_dims_.front(); }
  int num_classes() const { return layer_dims_.back(); }
  double temperature() const { return temperature_; }

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  std::vector<int> layer_dims_;
  std::vector<Eigen::MatrixXd> weights_;  // weights_[l] is (dims[l+1] x dims[l])
  std::vector<Eigen::VectorXd> biases_;
  double temperature_;
};

/// Temperature softmax computed with a max shift.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature);

/// E(x) = -T log sum_y exp(f_y / T), via log-sum-exp.
double energy_score(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature);

/// Squared-hinge margin penalty: mean over in of max(0, E - m_in)^2 plus mean
/// over out of max(0, m_out - E)^2.
double energy_margin_loss(const std::vector<double>& in_energies,
                          const std::vector<double>& out_energies, double margin_in,
                          double margin_out);

/// Mean cross-entropy over the labeled batch plus lambda times the margin
/// penalty over both batches' energies.
double total_loss(const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                  const std::vector<int>& in_labels,
                  const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                  const EnergyMlp& model, const EnergyConfig& config);

struct LossGradients {
  double loss = 0;
  std::vector<Eigen::MatrixXd> weight_grads;
  std::vector<Eigen::VectorXd> bias_grads;
};

/// Analytic gradient of total_loss with respect to every parameter.
LossGradients loss_gradients(const EnergyMlp& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                             const std::vector<int>& in_labels,
                             const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                             const EnergyConfig& config);

struct TrainResult {
  EnergyMlp model;
  std::vector<double> epoch_losses;
};

/// Minibatch gradient descent on the joint objective. Each labeled batch is
/// paired with an equally sized unlabeled batch, drawn with replacement when
/// the pool is smaller than the batch. Deterministic given the seed; lambda=0
/// draws no unlabeled batches at all.
TrainResult train_ebm(const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                      const std::vector<int>& in_labels,
                      const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                      const EnergyConfig& config);

/// Max relative error between analytic gradients of total_loss and central
/// finite differences, parameter by parameter.
double grad_check(const EnergyMlp& model, const Eigen::Ref<const Eigen::MatrixXd>& in_features,
                  const std::vector<int>& in_labels,
                  const Eigen::Ref<const Eigen::MatrixXd>& out_features,
                  const EnergyConfig& config, double eps = 1e-5);

}  // namespace shiftcp::energy
