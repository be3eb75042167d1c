#include <cmath>

#include "doctest.h"
#include "sdfo/error.hpp"
#include "sdfo/nn.hpp"
#include "sdfo/rng.hpp"

using namespace sdfo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

NetworkParams constant_net(Activation a, double w, double b) {
  NetworkShape s{{1, 1, 1}, a, false};
  auto p = NetworkParams::initialize(s, 0);
  for (auto& m : p.weights) m.setConstant(w);
  for (auto& v : p.biases) v.setConstant(b);
  return p;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("activation values") {
  CHECK(activation_eval(Activation::relu, -1) == 0.0);
  CHECK(activation_eval(Activation::relu, 2) == 2.0);
  CHECK(activation_eval(Activation::hardsigmoid, 0) == 0.5);
  CHECK(activation_eval(Activation::hardsigmoid, 4) == 1.0);
  CHECK(activation_eval(Activation::hardsigmoid, -4) == 0.0);
  CHECK(activation_eval(Activation::tanh, 0) == 0.0);
  CHECK(activation_grad(Activation::tanh, 0) == 1.0);
  CHECK(activation_eval(Activation::sigmoid, 0) == 0.5);
  CHECK(activation_grad(Activation::sigmoid, 0) == 0.25);
  CHECK(activation_eval(Activation::softplus, 0) == doctest::Approx(std::log(2.0)));
  CHECK(activation_eval(Activation::softplus, 800) == 800.0);
  CHECK(activation_eval(Activation::sigmoid, -800) >= 0.0);
  for (double z = -10; z <= 10; z += 0.37) {
    CHECK(activation_eval(Activation::relu, z) >= 0.0);
    const double h = activation_eval(Activation::hardsigmoid, z);
    CHECK((h >= 0.0 && h <= 1.0));
    for (auto a : {Activation::linear, Activation::tanh, Activation::sigmoid, Activation::softplus}) {
      const double fd = (activation_eval(a, z + 1e-6) - activation_eval(a, z - 1e-6)) / 2e-6;
      CHECK(std::abs(fd - activation_grad(a, z)) < 1e-6);
    }
  }
  CHECK(parse_activation("hardsigmoid") == Activation::hardsigmoid);
  CHECK_THROWS_AS(parse_activation("gelu"), Error);
}

TEST_CASE("forward") {
  auto p = constant_net(Activation::linear, 1.0, 0.0);
  CHECK(forward(p, VectorXd::Constant(1, 3.0))[0] == 3.0);

  NetworkShape s{{2, 3, 1}, Activation::relu, false};
  auto dead = NetworkParams::initialize(s, 4);
  dead.weights[0].setZero();
  dead.biases[0].setConstant(-10);
  dead.biases[1].setConstant(0.75);
  CHECK(forward(dead, VectorXd::Random(2))[0] == 0.75);

  CHECK_THROWS_AS(forward(dead, VectorXd::Zero(3)), Error);
  auto huge = constant_net(Activation::linear, 1e300, 0.0);
  try {
    forward(huge, VectorXd::Constant(1, 1e300));
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("loss and cost") {
  TrainConfig cfg;
  cfg.weight_decay = 0.5;
  auto p = constant_net(Activation::linear, 2.0, 0.0);
  MatrixXd y(2, 1);
  y << 1, 2;
  const auto lc = loss_and_cost(cfg, y, y, p);
  CHECK(lc.loss == 0.0);
  CHECK(lc.cost == doctest::Approx(0.5 / 4.0 * 8.0));  // delta/(2n) * (4 + 4)

  cfg.weight_decay = 0.0;
  CHECK(loss_and_cost(cfg, MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1), p).loss == 1.0);
  cfg.loss = Loss::bce_logits;
  CHECK(loss_and_cost(cfg, MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), p).loss == doctest::Approx(std::log(2.0)));
  CHECK(std::isfinite(loss_and_cost(cfg, MatrixXd::Constant(1, 1, -1000.0), MatrixXd::Ones(1, 1), p).loss));
}

TEST_CASE("backprop matches central finite differences") {
  Rng rng(123);
  for (auto act : {Activation::linear, Activation::tanh, Activation::sigmoid, Activation::softplus}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int depth = 1 + static_cast<int>(rng.below(2));
      std::vector<int> sizes{1 + static_cast<int>(rng.below(4))};
      for (int d = 0; d < depth; ++d) sizes.push_back(1 + static_cast<int>(rng.below(8)));
      sizes.push_back(1 + static_cast<int>(rng.below(3)));
      const bool cls = trial % 2 == 1;
      if (cls) sizes.back() = 1;
      NetworkShape shape{sizes, act, cls};
      auto p = NetworkParams::initialize(shape, 100 + trial);
      TrainConfig cfg;
      cfg.weight_decay = 0.3;
      cfg.loss = cls ? Loss::bce_logits : Loss::mse;
      const int n = 5;
      MatrixXd bx(n, sizes.front()), by(n, sizes.back());
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < bx.cols(); ++j) bx(i, j) = rng.uniform(-2, 2);
        for (int j = 0; j < by.cols(); ++j) by(i, j) = cls ? static_cast<double>(rng.below(2)) : rng.normal();
      }
      const auto g = backprop(p, bx, by, cfg);
      auto cost = [&](const NetworkParams& q) { return loss_and_cost(cfg, forward_rows(q, bx), by, q).cost; };
      for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (Eigen::Index k = 0; k < p.weights[l].size(); ++k) {
          auto a = p, b = p;
          a.weights[l].data()[k] += 1e-6;
          b.weights[l].data()[k] -= 1e-6;
          const double fd = (cost(a) - cost(b)) / 2e-6;
          CHECK(relative_error(fd, g.weights[l].data()[k]) <= 1e-4);
        }
        for (Eigen::Index k = 0; k < p.biases[l].size(); ++k) {
          auto a = p, b = p;
          a.biases[l][k] += 1e-6;
          b.biases[l][k] -= 1e-6;
          const double fd = (cost(a) - cost(b)) / 2e-6;
          CHECK(relative_error(fd, g.biases[l][k]) <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("backprop closed forms") {
  // 1-1-1 linear network: yhat = w1 (w0 x + b0) + b1
  auto p = constant_net(Activation::linear, 1.0, 0.0);
  p.weights[0](0, 0) = 0.5;
  p.biases[0][0] = 0.25;
  p.weights[1](0, 0) = -1.5;
  p.biases[1][0] = 2.0;
  TrainConfig cfg;
  MatrixXd x(1, 1), y(1, 1);
  x << 2.0;
  y << 1.0;
  const double h = 0.5 * 2.0 + 0.25, yhat = -1.5 * h + 2.0, r = 2.0 * (yhat - 1.0);
  const auto g = backprop(p, x, y, cfg);
  CHECK(g.biases[1][0] == doctest::Approx(r));
  CHECK(g.weights[1](0, 0) == doctest::Approx(r * h));
  CHECK(g.biases[0][0] == doctest::Approx(r * -1.5));
  CHECK(g.weights[0](0, 0) == doctest::Approx(r * -1.5 * 2.0));

  // exact fit, no decay -> zero gradient
  y << yhat;
  const auto z = backprop(p, x, y, cfg);
  for (const auto& w : z.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : z.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);

  // decay at a stationary point of the loss shrinks every weight
  cfg.weight_decay = 0.1;
  cfg.learning_rate = 0.1;
  const auto d = backprop(p, x, y, cfg);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double w = p.weights[l](0, 0), w2 = w - cfg.learning_rate * d.weights[l](0, 0);
    CHECK(std::abs(w2) < std::abs(w));
  }
}

TEST_CASE("training") {
  SUBCASE("regression y = 2x") {
    MatrixXd x(50, 1), y(50, 1);
    for (int i = 0; i < 50; ++i) {
      x(i, 0) = -1.0 + 2.0 * i / 49.0;
      y(i, 0) = 2.0 * x(i, 0);
    }
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 5;
    cfg.seed = 7;
    const auto r = train({{1, 8, 1}, Activation::tanh, false}, x, y, cfg);
    CHECK(r.loss_history.size() == 2000);
    CHECK(r.loss_history.back() <= 1e-3);
    const auto r2 = train({{1, 8, 1}, Activation::tanh, false}, x, y, cfg);
    for (std::size_t l = 0; l < r.params.weights.size(); ++l) {
      CHECK(r.params.weights[l] == r2.params.weights[l]);
      CHECK(r.params.biases[l] == r2.params.biases[l]);
    }
  }
  SUBCASE("separable blobs") {
    Rng rng(5);
    MatrixXd x(60, 2), y(60, 1);
    for (int i = 0; i < 60; ++i) {
      const int c = i % 2;
      x(i, 0) = (c ? 1.5 : -1.5) + 0.4 * rng.normal();
      x(i, 1) = (c ? 1.0 : -1.0) + 0.4 * rng.normal();
      y(i, 0) = c;
    }
    TrainConfig cfg;
    cfg.loss = Loss::bce_logits;
    cfg.epochs = 300;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 8;
    const auto r = train({{2, 6, 1}, Activation::sigmoid, true}, x, y, cfg);
    int correct = 0;
    for (int i = 0; i < 60; ++i) correct += predict_class(r.params, x.row(i).transpose()) == static_cast<int>(y(i, 0));
    CHECK(correct == 60);
  }
  SUBCASE("zero learning rate keeps the initialisation") {
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.0;
    cfg.seed = 3;
    NetworkShape s{{2, 4, 1}, Activation::relu, false};
    const auto r = train(s, MatrixXd::Random(7, 2), MatrixXd::Random(7, 1), cfg);
    const auto init = NetworkParams::initialize(s, 3);
    for (std::size_t l = 0; l < init.weights.size(); ++l) CHECK(r.params.weights[l] == init.weights[l]);
  }
  SUBCASE("divergence is reported") {
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 1e6;
    try {
      train({{1, 4, 1}, Activation::linear, false}, MatrixXd::Random(10, 1) * 10, MatrixXd::Random(10, 1), cfg);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::training_diverged);
    }
  }
  SUBCASE("early stopping keeps the best parameters") {
    TrainConfig cfg;
    cfg.epochs = 5000;
    cfg.patience = 5;
    cfg.learning_rate = 0.05;
    const auto r = train({{1, 4, 1}, Activation::tanh, false}, MatrixXd::Random(20, 1), MatrixXd::Random(20, 1), cfg);
    CHECK(r.epochs_run < 5000);
  }
}

TEST_CASE("classifier predictions") {
  NetworkShape s{{1, 1, 1}, Activation::linear, true};
  auto p = NetworkParams::initialize(s, 0);
  p.weights[0].setConstant(1.0);
  p.weights[1].setConstant(1.0);
  p.biases[0].setZero();
  p.biases[1].setZero();
  CHECK(predict_proba(p, VectorXd::Zero(1)) == 0.5);
  CHECK(predict_class(p, VectorXd::Zero(1)) == 1);
  CHECK(predict_proba(p, VectorXd::Constant(1, 10.0)) > 0.9999);
  CHECK(predict_class(p, VectorXd::Constant(1, 10.0), 1.0) == 0);
  auto reg = constant_net(Activation::linear, 1.0, 0.0);
  try {
    predict_proba(reg, VectorXd::Zero(1));
    FAIL("expected mode error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::mode);
  }
}
