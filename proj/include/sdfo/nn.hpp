#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdfo/data.hpp"

namespace sdfo {

enum class Activation { linear, tanh, sigmoid, softplus, relu, hardsigmoid };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);
bool is_piecewise(Activation a);

double activation_eval(Activation kind, double z);
double activation_grad(Activation kind, double z);

/// layer_sizes = [inputs, hidden..., outputs]; at least one hidden layer.
struct NetworkShape {
  std::vector<int> layer_sizes;
  Activation activation = Activation::tanh;
  bool is_classifier = false;

  void validate() const;
  int inputs() const { return layer_sizes.front(); }
  int outputs() const { return layer_sizes.back(); }
  int hidden_layers() const { return static_cast<int>(layer_sizes.size()) - 2; }
};

/// weights[l] maps layer l to layer l+1 (shape N_{l+1} x N_l).
struct NetworkParams {
  NetworkShape shape;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  /// uniform(-1/sqrt(N_l), 1/sqrt(N_l)) per layer, seeded.
  static NetworkParams initialize(const NetworkShape& shape, std::uint64_t seed);

  void validate() const;
  double squared_weight_norm() const;
};

enum class Loss { mse, bce_logits };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 1000;
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  Loss loss = Loss::mse;
  // 0 disables early stopping; otherwise stop after this many epochs without
  // improvement of the full-batch cost and keep the best parameters.
  std::size_t patience = 0;

  void validate() const;
};

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);
/// One output row per input row.
Eigen::MatrixXd forward_rows(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x);

struct LossCost {
  double loss = 0.0;
  double cost = 0.0;
};

/// loss is the mean over all n*p entries; cost = loss + delta/(2n) * sum w^2.
LossCost loss_and_cost(const TrainConfig& cfg, const Eigen::MatrixXd& predictions,
                       const Eigen::MatrixXd& targets, const NetworkParams& params);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Gradient of the cost of one batch (rows of batch_x / batch_y).
Gradients backprop(const NetworkParams& params, const Eigen::MatrixXd& batch_x, const Eigen::MatrixXd& batch_y,
                   const TrainConfig& cfg);

struct TrainResult {
  NetworkParams params;
  std::vector<double> loss_history;  // full-batch cost after each epoch
  std::size_t epochs_run = 0;
};

TrainResult train(const NetworkShape& shape, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  const TrainConfig& cfg);

/// Scaled training rows of a standardised dataset: regression networks use
/// the converged rows and scaled outputs, classifiers all rows against t.
TrainResult train(const NetworkShape& shape, const Dataset& ds, const TrainConfig& cfg);

double predict_proba(const NetworkParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);
int predict_class(const NetworkParams& params, const Eigen::Ref<const Eigen::VectorXd>& x, double threshold = 0.5);

}  // namespace sdfo
