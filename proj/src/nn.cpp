#include "sdfo/nn.hpp"

#include <cmath>
#include <numeric>

#include "sdfo/error.hpp"
#include "sdfo/rng.hpp"

namespace sdfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softplus") return Activation::softplus;
  if (name == "relu") return Activation::relu;
  if (name == "hardsigmoid") return Activation::hardsigmoid;
  fail(ErrorKind::parameter, "unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
    case Activation::relu: return "relu";
    case Activation::hardsigmoid: return "hardsigmoid";
  }
  return "?";
}

bool is_piecewise(Activation a) { return a == Activation::relu || a == Activation::hardsigmoid; }

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double activation_eval(Activation kind, double z) {
  switch (kind) {
    case Activation::linear: return z;
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return sigmoid(z);
    case Activation::softplus: return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::hardsigmoid:
      if (z <= -3) return 0.0;
      if (z >= 3) return 1.0;
      return z / 6.0 + 0.5;
  }
  return 0.0;
}

double activation_grad(Activation kind, double z) {
  switch (kind) {
    case Activation::linear: return 1.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::softplus: return sigmoid(z);
    case Activation::relu: return z > 0 ? 1.0 : 0.0;
    case Activation::hardsigmoid: return (z > -3 && z < 3) ? 1.0 / 6.0 : 0.0;
  }
  return 0.0;
}

void NetworkShape::validate() const {
  require(layer_sizes.size() >= 3, ErrorKind::parameter, "network needs at least one hidden layer");
  for (int s : layer_sizes) require(s >= 1, ErrorKind::parameter, "every layer needs at least one node");
}

NetworkParams NetworkParams::initialize(const NetworkShape& shape, std::uint64_t seed) {
  shape.validate();
  Rng rng(seed);
  NetworkParams p;
  p.shape = shape;
  for (std::size_t l = 0; l + 1 < shape.layer_sizes.size(); ++l) {
    const int rows = shape.layer_sizes[l + 1], cols = shape.layer_sizes[l];
    const double r = 1.0 / std::sqrt(static_cast<double>(cols));
    MatrixXd w(rows, cols);
    VectorXd b(rows);
    // row-major fill order so the stream does not depend on Eigen's storage
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-r, r);
    for (int i = 0; i < rows; ++i) b[i] = rng.uniform(-r, r);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

void NetworkParams::validate() const {
  shape.validate();
  const auto layers = shape.layer_sizes.size() - 1;
  require(weights.size() == layers && biases.size() == layers, ErrorKind::shape,
          "expected " + std::to_string(layers) + " weight matrices and bias vectors");
  for (std::size_t l = 0; l < layers; ++l) {
    require(weights[l].rows() == shape.layer_sizes[l + 1] && weights[l].cols() == shape.layer_sizes[l],
            ErrorKind::shape, "weight matrix " + std::to_string(l) + " has the wrong shape");
    require(biases[l].size() == shape.layer_sizes[l + 1], ErrorKind::shape,
            "bias vector " + std::to_string(l) + " has the wrong length");
    require(weights[l].allFinite() && biases[l].allFinite(), ErrorKind::numeric,
            "layer " + std::to_string(l) + " has non-finite parameters");
  }
}

double NetworkParams::squared_weight_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  return s;
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::parameter, "batch_size must be >= 1");
  require(epochs >= 1, ErrorKind::parameter, "epochs must be >= 1");
  require(learning_rate >= 0 && std::isfinite(learning_rate), ErrorKind::parameter, "learning rate must be >= 0");
  require(weight_decay >= 0 && std::isfinite(weight_decay), ErrorKind::parameter, "weight decay must be >= 0");
}

namespace {

MatrixXd apply(Activation a, const MatrixXd& z) {
  return z.unaryExpr([a](double v) { return activation_eval(a, v); });
}

MatrixXd apply_grad(Activation a, const MatrixXd& z) {
  return z.unaryExpr([a](double v) { return activation_grad(a, v); });
}

// Column-per-sample forward pass keeping pre-activations and activations.
struct Trace {
  std::vector<MatrixXd> z;  // z[l] = input to layer l+1
  std::vector<MatrixXd> a;  // a[0] = inputs, a[l] = activation of hidden layer l
};

Trace run(const NetworkParams& p, const MatrixXd& xt) {
  Trace tr;
  tr.a.push_back(xt);
  const auto layers = p.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    MatrixXd z = p.weights[l] * tr.a.back();
    z.colwise() += p.biases[l];
    if (!z.allFinite()) fail(ErrorKind::numeric, "non-finite pre-activation in layer " + std::to_string(l + 1));
    if (l + 1 < layers) tr.a.push_back(apply(p.shape.activation, z));
    tr.z.push_back(std::move(z));
  }
  return tr;
}

double bce_logit(double z, double t) { return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

VectorXd forward(const NetworkParams& params, const Eigen::Ref<const VectorXd>& x) {
  require(x.size() == params.shape.inputs(), ErrorKind::shape,
          "network expects " + std::to_string(params.shape.inputs()) + " inputs, got " + std::to_string(x.size()));
  MatrixXd xt = x;
  return run(params, xt).z.back().col(0);
}

MatrixXd forward_rows(const NetworkParams& params, const Eigen::Ref<const MatrixXd>& x) {
  require(x.cols() == params.shape.inputs(), ErrorKind::shape,
          "network expects " + std::to_string(params.shape.inputs()) + " input columns");
  return run(params, x.transpose()).z.back().transpose();
}

LossCost loss_and_cost(const TrainConfig& cfg, const MatrixXd& predictions, const MatrixXd& targets,
                       const NetworkParams& params) {
  require(predictions.rows() == targets.rows() && predictions.cols() == targets.cols(), ErrorKind::shape,
          "predictions and targets differ in shape");
  const auto n = static_cast<double>(predictions.rows());
  const auto count = static_cast<double>(predictions.size());
  double loss = 0.0;
  if (cfg.loss == Loss::mse) {
    loss = (predictions - targets).squaredNorm() / count;
  } else {
    for (Eigen::Index i = 0; i < predictions.size(); ++i) loss += bce_logit(predictions.data()[i], targets.data()[i]);
    loss /= count;
  }
  return {loss, loss + cfg.weight_decay / (2.0 * n) * params.squared_weight_norm()};
}

Gradients backprop(const NetworkParams& params, const MatrixXd& batch_x, const MatrixXd& batch_y,
                   const TrainConfig& cfg) {
  require(batch_x.rows() > 0, ErrorKind::empty_request, "empty batch");
  require(batch_x.rows() == batch_y.rows() && batch_y.cols() == params.shape.outputs(), ErrorKind::shape,
          "batch targets do not match the network outputs");
  const Trace tr = run(params, batch_x.transpose());
  const auto n = static_cast<double>(batch_x.rows());
  const auto count = n * static_cast<double>(batch_y.cols());
  const auto layers = params.weights.size();

  // error signal at the output layer (no output activation)
  MatrixXd eps;
  const MatrixXd yt = batch_y.transpose();
  if (cfg.loss == Loss::mse) {
    eps = 2.0 * (tr.z.back() - yt) / count;
  } else {
    eps = tr.z.back().unaryExpr([](double z) { return activation_eval(Activation::sigmoid, z); }) - yt;
    eps /= count;
  }

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = eps * tr.a[l].transpose() + (cfg.weight_decay / n) * params.weights[l];
    g.biases[l] = eps.rowwise().sum();
    if (!g.weights[l].allFinite() || !g.biases[l].allFinite())
      fail(ErrorKind::numeric, "non-finite gradient in layer " + std::to_string(l));
    if (l > 0) eps = (params.weights[l].transpose() * eps).cwiseProduct(apply_grad(params.shape.activation, tr.z[l - 1]));
  }
  return g;
}

TrainResult train(const NetworkShape& shape, const MatrixXd& x, const MatrixXd& y, const TrainConfig& cfg) {
  shape.validate();
  cfg.validate();
  require(x.rows() > 0, ErrorKind::empty_request, "no training rows");
  require(x.rows() == y.rows(), ErrorKind::shape, "x and y row counts differ");
  require(x.cols() == shape.inputs() && y.cols() == shape.outputs(), ErrorKind::shape,
          "training data does not match the network shape");
  if (shape.is_classifier) {
    require(cfg.loss == Loss::bce_logits, ErrorKind::parameter, "classifiers train with bce_logits");
    require(shape.outputs() == 1, ErrorKind::parameter, "classifiers have a single logit output");
  }

  TrainResult res;
  res.params = NetworkParams::initialize(shape, cfg.seed);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  NetworkParams best = res.params;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const auto bn = static_cast<Eigen::Index>(stop - start);
      MatrixXd bx(bn, x.cols()), by(bn, y.cols());
      for (Eigen::Index i = 0; i < bn; ++i) {
        bx.row(i) = x.row(order[start + static_cast<std::size_t>(i)]);
        by.row(i) = y.row(order[start + static_cast<std::size_t>(i)]);
      }
      Gradients g;
      try {
        g = backprop(res.params, bx, by, cfg);
      } catch (const Error& e) {
        fail(ErrorKind::training_diverged, "epoch " + std::to_string(epoch + 1) + ": " + e.what() +
                                               " (last finite epoch " + std::to_string(epoch) + ")");
      }
      for (std::size_t l = 0; l < g.weights.size(); ++l) {
        res.params.weights[l] -= cfg.learning_rate * g.weights[l];
        res.params.biases[l] -= cfg.learning_rate * g.biases[l];
      }
    }
    double cost = std::numeric_limits<double>::quiet_NaN();
    try {
      cost = loss_and_cost(cfg, forward_rows(res.params, x), y, res.params).cost;
    } catch (const Error&) {
    }
    if (!std::isfinite(cost))
      fail(ErrorKind::training_diverged,
           "cost became non-finite in epoch " + std::to_string(epoch + 1) + " (last finite epoch " +
               std::to_string(epoch) + ")");
    res.loss_history.push_back(cost);
    res.epochs_run = epoch + 1;
    if (cfg.patience > 0) {
      if (cost < best_cost) {
        best_cost = cost;
        best = res.params;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        res.params = best;
        break;
      }
    }
  }
  return res;
}

TrainResult train(const NetworkShape& shape, const Dataset& ds, const TrainConfig& cfg) {
  require(ds.is_scaled(), ErrorKind::parameter, "network training needs a standardised dataset");
  if (shape.is_classifier) {
    require(ds.t.has_value(), ErrorKind::parameter, "classifier training needs convergence targets");
    const auto rows = ds.fit_rows();
    const auto t = ds.rows_t(rows);
    MatrixXd y(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = t[i];
    return train(shape, ds.scale_x_rows(ds.rows_x(rows)), y, cfg);
  }
  const auto rows = ds.converged_fit_rows();
  return train(shape, ds.scale_x_rows(ds.rows_x(rows)), ds.scale_y_rows(ds.rows_y(rows)), cfg);
}

double predict_proba(const NetworkParams& params, const Eigen::Ref<const VectorXd>& x) {
  require(params.shape.is_classifier, ErrorKind::mode, "predict_proba needs a classifier network");
  return activation_eval(Activation::sigmoid, forward(params, x)[0]);
}

int predict_class(const NetworkParams& params, const Eigen::Ref<const VectorXd>& x, double threshold) {
  return predict_proba(params, x) >= threshold ? 1 : 0;
}

}  // namespace sdfo
