#include <cmath>
#include <set>

#include "doctest.h"
#include "sdfo/error.hpp"
#include "sdfo/formul.hpp"
#include "sdfo/rng.hpp"

using namespace sdfo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SearchSpace box2() { return SearchSpace({{-1.5, 1.5}, {-0.5, 2.0}}); }

VectorXd random_in(Rng& rng, const SearchSpace& s) {
  VectorXd x(s.dim());
  for (int j = 0; j < s.dim(); ++j) x[j] = rng.uniform(s[j].lower, s[j].upper);
  return x;
}

NetworkParams random_net(Activation act, bool classifier, std::uint64_t seed) {
  NetworkShape shape{{2, 5, 4, classifier ? 1 : 2}, act, classifier};
  auto p = NetworkParams::initialize(shape, seed);
  // widen the weights so piecewise nets actually switch inside the box
  for (auto& w : p.weights) w *= 3.0;
  return p;
}

MatrixXd fixture_x() {
  MatrixXd x(6, 2);
  x << 0.1, 0.2, 0.5, -0.3, -0.7, 0.4, 0.9, 0.9, -0.2, -0.8, 0.3, 0.6;
  return x;
}

VectorXd fixture_y() {
  VectorXd y(6);
  y << 0.5, -1.0, 0.3, 2.0, -0.4, 0.8;
  return y;
}

}  // namespace

TEST_CASE("expression folding and evaluation") {
  const Expr x = Expr::var("x"), y = Expr::var("y");
  CHECK((Expr(2.0) + Expr(3.0)).is_constant());
  CHECK((x + Expr(0.0)).id() == x.id());
  CHECK((Expr(1.0) * x).id() == x.id());
  CHECK(pow(x, 1.0).id() == x.id());
  CHECK(sum({Expr(0.0), x}).id() == x.id());

  const Expr e = exp(x) * y - log(y) / pow(x, 2.0) + sum({x, y, Expr(1.0)});
  const double v = evaluate(e, {{"x", 0.7}, {"y", 2.5}});
  CHECK(v == doctest::Approx(std::exp(0.7) * 2.5 - std::log(2.5) / 0.49 + 0.7 + 2.5 + 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate(e, {{"x", 1.0}}), Error);

  CHECK(is_linear(Expr(2.0) * x - y / Expr(4.0) + Expr(1.0)));
  CHECK_FALSE(is_linear(x * y));
  CHECK_FALSE(is_linear(exp(x)));
  CHECK(is_linear(exp(Expr(1.0)) * x));
  CHECK(variables_of(e) == std::set<std::string>{"x", "y"});

  const Expr s = substitute(e, [&](const std::string& n) -> std::optional<Expr> {
    if (n == "x") return Expr(0.7);
    return std::nullopt;
  });
  CHECK(variables_of(s) == std::set<std::string>{"y"});
  CHECK(evaluate(s, {{"y", 2.5}}) == doctest::Approx(v).epsilon(1e-15));

  CHECK(to_string(Expr(2.0) * x + exp(-y)) == "((2 * x) + exp(-(y)))");
}

TEST_CASE("interval extension is sound") {
  const Expr x = Expr::var("x"), y = Expr::var("y");
  const Expr e = pow(x, 2.0) - Expr(3.0) * x * y + exp(y) / (Expr(2.0) + x);
  auto b = [](const std::string& n) { return n == "x" ? Interval{-0.5, 1.0} : Interval{-1.0, 0.3}; };
  const Interval iv = interval_of(e, b);
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double xv = rng.uniform(-0.5, 1.0), yv = rng.uniform(-1.0, 0.3);
    const double v = evaluate(e, {{"x", xv}, {"y", yv}});
    CHECK(v >= iv.lo);
    CHECK(v <= iv.hi);
  }
  CHECK(std::isinf(interval_of(Expr(1.0) / x, b).hi));
}

TEST_CASE("identity network block returns its input") {
  NetworkShape shape{{2, 2, 2}, Activation::linear, false};
  NetworkParams p = NetworkParams::initialize(shape, 0);
  p.weights[0] = MatrixXd::Identity(2, 2);
  p.weights[1] = MatrixXd::Identity(2, 2);
  p.biases[0].setZero();
  p.biases[1].setZero();
  const auto f = nn_block(p);
  CHECK(f.declared == ProblemClass::LP);
  VectorXd x(2);
  x << 0.3, -4.0;
  const auto r = eval_formulation(f, x);
  CHECK(r.outputs.at("y0") == 0.3);
  CHECK(r.outputs.at("y1") == -4.0);
}

TEST_CASE("network blocks match the forward pass") {
  const SearchSpace box = box2();
  for (Activation act : {Activation::linear, Activation::tanh, Activation::sigmoid, Activation::softplus,
                         Activation::relu, Activation::hardsigmoid}) {
    CAPTURE(to_string(act));
    const auto p = random_net(act, false, 11);
    const auto f = nn_block(p, box);
    f.validate();
    CHECK(f.scan_class() == f.declared);
    const double tol = is_piecewise(act) ? 1e-6 : 1e-8;
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      const VectorXd x = random_in(rng, box);
      const VectorXd y = forward(p, x);
      const auto r = eval_formulation(f, x);
      CHECK(std::abs(r.outputs.at("y0") - y[0]) <= tol);
      CHECK(std::abs(r.outputs.at("y1") - y[1]) <= tol);
    }
  }
}

TEST_CASE("classifier block exposes the logit") {
  const auto p = random_net(Activation::tanh, true, 2);
  const auto f = nn_block(p, box2());
  VectorXd x(2);
  x << 0.2, 0.1;
  const auto r = eval_formulation(f, x);
  CHECK(r.outputs.at("latent") == r.outputs.at("y0"));
  CHECK(r.outputs.at("latent") == doctest::Approx(forward(p, x)[0]).epsilon(1e-12));
}

TEST_CASE("big-M bounds contain every reachable pre-activation") {
  const SearchSpace box = box2();
  for (Activation act : {Activation::relu, Activation::hardsigmoid, Activation::tanh}) {
    const auto p = random_net(act, false, 17);
    const auto zb = nn_preactivation_bounds(p, box);
    REQUIRE(zb.size() == 2);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      VectorXd a = random_in(rng, box);
      for (std::size_t l = 0; l < zb.size(); ++l) {
        const VectorXd z = p.weights[l] * a + p.biases[l];
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          CHECK(z[j] >= zb[l][static_cast<std::size_t>(j)].lo);
          CHECK(z[j] <= zb[l][static_cast<std::size_t>(j)].hi);
        }
        a = z.unaryExpr([&](double v) { return activation_eval(act, v); });
      }
    }
  }
}

TEST_CASE("relu binaries follow the sign of z") {
  const SearchSpace box = box2();
  const auto p = random_net(Activation::relu, false, 21);
  const auto f = nn_block(p, box);
  CHECK(f.declared == ProblemClass::MILP);
  Rng rng(1);
  int on = 0, off = 0;
  for (int i = 0; i < 200; ++i) {
    const auto r = eval_formulation(f, random_in(rng, box));
    for (const auto& g : f.groups) {
      const double z = r.values.at(g.z), pv = r.values.at(g.p);
      if (z > 0) {
        CHECK(pv == 1.0);
        ++on;
      } else if (z < 0) {
        CHECK(pv == 0.0);
        ++off;
      }
    }
  }
  CHECK(on > 0);
  CHECK(off > 0);
}

TEST_CASE("big-M rows admit only the true activation") {
  // at a fixed input, flipping any binary must violate some constraint
  const SearchSpace box = box2();
  for (Activation act : {Activation::relu, Activation::hardsigmoid}) {
    const auto p = random_net(act, false, 4);
    const auto f = nn_block(p, box);
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
      const auto r = eval_formulation(f, random_in(rng, box));
      std::unordered_map<std::string, double> vals(r.values.begin(), r.values.end());
      CHECK(max_violation(f, vals) <= 1e-9);
      for (const auto& g : f.groups) {
        const double z = vals[g.z];
        if (std::abs(z) < 1e-6 || std::abs(std::abs(z) - 3.0) < 1e-6) continue;
        auto flipped = vals;
        flipped[g.p] = 1.0 - flipped[g.p];
        CHECK(max_violation(f, flipped) > 1e-9);
      }
    }
  }
}

TEST_CASE("hardsigmoid middle piece at z = 0") {
  NetworkShape shape{{1, 1, 1}, Activation::hardsigmoid, false};
  NetworkParams p = NetworkParams::initialize(shape, 0);
  p.weights[0](0, 0) = 2.0;
  p.biases[0][0] = 0.0;
  p.weights[1](0, 0) = 1.0;
  p.biases[1][0] = 0.0;
  const auto f = nn_block(p, SearchSpace({{-4.0, 4.0}}));
  VectorXd x(1);
  x << 0.0;
  auto r = eval_formulation(f, x);
  CHECK(r.values.at("a1_0") == 0.5);
  CHECK(r.values.at("p1_0") == 1.0);
  CHECK(r.values.at("q1_0") == 0.0);
  // breakpoints resolve to the middle piece too
  x << 1.5;
  r = eval_formulation(f, x);
  CHECK(r.values.at("a1_0") == 1.0);
  CHECK(r.values.at("q1_0") == 0.0);
  x << -3.5;
  r = eval_formulation(f, x);
  CHECK(r.outputs.at("y0") == 0.0);
  x << 3.5;
  CHECK(eval_formulation(f, x).outputs.at("y0") == 1.0);
}

TEST_CASE("piecewise networks need input bounds") {
  const auto p = random_net(Activation::relu, false, 1);
  try {
    nn_block(p);
    FAIL("expected bounds error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::bounds_required);
  }
  CHECK_NOTHROW(nn_block(random_net(Activation::softplus, false, 1)));
}

TEST_CASE("GPR blocks match prediction") {
  const SearchSpace box({{-1.0, 1.0}, {-1.0, 1.0}});
  for (const KernelSpec spec : {KernelSpec{KernelKind::sqexp, 1}, KernelSpec{KernelKind::poly, 2}}) {
    const KernelParams hp = spec.kind == KernelKind::sqexp ? KernelParams{0.7, 1.3, 0.0} : KernelParams{1.0, 1.3, 0.5};
    const auto model = gpr_condition(fixture_x(), fixture_y(), spec, hp, 1e-6);
    const auto mean = gpr_mean_block(model, box);
    const auto unc = gpr_uncertainty_block(model, box);
    mean.validate();
    unc.validate();
    CHECK(mean.declared == ProblemClass::NLP);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
      const VectorXd x = random_in(rng, box);
      const auto pr = gpr_predict(model, x);
      CHECK(std::abs(eval_formulation(mean, x).outputs.at("y") - pr.mean) <= 1e-10);
      const auto u = eval_formulation(unc, x).outputs;
      CHECK(std::abs(std::max(0.0, u.at("variance")) - pr.variance) <= 1e-8);
      CHECK(u.at("proxy") == doctest::Approx(gpr_proxy_sum(model, x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("GPR block limits") {
  const KernelSpec se{KernelKind::sqexp, 1};
  const auto model = gpr_condition(fixture_x(), fixture_y(), se, {0.5, 1.0, 0.0}, 1e-10);
  const auto mean = gpr_mean_block(model);
  const auto unc = gpr_uncertainty_block(model);
  for (int i = 0; i < model.n(); ++i) {
    const VectorXd x = model.x_train.row(i).transpose();
    CHECK(eval_formulation(mean, x).outputs.at("y") == doctest::Approx(model.y_train[i]).epsilon(1e-6));
    CHECK(model.hp.sigma_f2 - eval_formulation(unc, x).outputs.at("proxy") <= model.noise + 1e-6);
  }
  VectorXd far(2);
  far << 40.0, -40.0;
  CHECK(std::abs(eval_formulation(unc, far).outputs.at("variance") - 1.0) < 1e-12);

  auto zero = model;
  zero.alpha.setZero();
  const auto z = gpr_mean_block(zero);
  CHECK(eval_formulation(z, far).outputs.at("y") == 0.0);
  CHECK(z.declared == ProblemClass::LP);
}

TEST_CASE("linear kernel mean block is an LP") {
  const auto model = gpr_condition(fixture_x(), fixture_y(), {KernelKind::poly, 1}, {1.0, 1.0, 0.2}, 1e-6);
  const auto f = gpr_mean_block(model);
  CHECK(f.declared == ProblemClass::LP);
  CHECK(gpr_uncertainty_block(model).declared == ProblemClass::NLP);
}

TEST_CASE("GPC block matches prediction") {
  VectorXd t(6);
  t << 1, 0, 1, 1, 0, 0;
  const auto model = gpc_condition(fixture_x(), t, {0.8, 2.0, 0.0});
  const SearchSpace box({{-1.0, 1.0}, {-1.0, 1.0}});
  const auto f = gpc_block(model, box);
  f.validate();
  CHECK(f.declared == ProblemClass::NLP);
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const VectorXd x = random_in(rng, box);
    const auto r = eval_formulation(f, x).outputs;
    CHECK(std::abs(r.at("p") - gpc_predict(model, x)) <= 1e-8);
    CHECK((r.at("latent") >= 0) == (r.at("p") >= 0.5));
  }
  VectorXd far(2);
  far << 50.0, 50.0;
  const auto r = eval_formulation(gpc_block(model), far).outputs;
  CHECK(r.at("latent") == 0.0);
  CHECK(r.at("p") == 0.5);
}

TEST_CASE("embedded blocks share nothing but inputs") {
  const auto model = gpr_condition(fixture_x(), fixture_y(), {KernelKind::sqexp, 1}, {0.7, 1.3, 0.0}, 1e-6);
  const SearchSpace box({{-1.0, 1.0}, {-1.0, 1.0}});
  const auto mean = gpr_mean_block(model, box);
  const auto unc = gpr_uncertainty_block(model, box);

  Formulation host;
  const Expr u0 = host.add_variable("u0", -1.0, 1.0), u1 = host.add_variable("u1", -2.0, 1.0);
  host.inputs = {"u0", "u1"};
  const auto mo = host.embed(mean, {u0, u1}, "mean");
  const auto uo = host.embed(unc, {u0, u1}, "unc");
  host.define("obj", mo.at("y") - Expr(2.0) * uo.at("variance"));
  host.add_output("obj", "obj");
  host.validate();
  CHECK(host.declared == ProblemClass::NLP);

  std::set<std::string> names;
  for (const auto& v : host.variables) CHECK(names.insert(v.name).second);
  CHECK(names.count("mean.y"));
  CHECK(names.count("unc.k0"));
  CHECK_FALSE(names.count("mean.x0"));

  // u1 range exceeds the block's box, so only its bounds become constraints
  int bound_rows = 0;
  for (const auto& c : host.constraints) bound_rows += c.name.find("x1_lo") != std::string::npos;
  CHECK(bound_rows == 2);
  for (const auto& c : host.constraints) CHECK(c.name.find("x0_") == std::string::npos);

  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const VectorXd x = random_in(rng, box);
    const auto pr = gpr_predict(model, x);
    CHECK(eval_formulation(host, x).outputs.at("obj") == doctest::Approx(pr.mean - 2.0 * pr.variance).epsilon(1e-9));
  }
  VectorXd out(2);
  out << 0.0, -1.5;
  CHECK_THROWS_AS(eval_formulation(host, out), Error);
}

TEST_CASE("class scanner and validation") {
  Formulation f;
  const Expr x = f.add_variable("x", 0, 1);
  const Expr b = f.add_variable("b", 0, 1, VarKind::binary);
  f.inputs = {"x"};
  f.add_constraint("c", x + b, Relation::le, Expr(1.5));
  CHECK(f.scan_class() == ProblemClass::MILP);
  f.set_objective(exp(x), ObjSense::min);
  CHECK(f.scan_class() == ProblemClass::MINLP);
  f.declared = ProblemClass::MILP;
  CHECK_THROWS_AS(f.validate(), Error);
  f.declared = ProblemClass::MINLP;
  CHECK_NOTHROW(f.validate());
  f.add_constraint("d", Expr::var("ghost"), Relation::ge, Expr(0.0));
  CHECK_THROWS_AS(f.validate(), Error);
  CHECK_THROWS_AS(f.add_variable("x"), Error);
  CHECK_THROWS_AS(f.add_variable("lohi", 2, 1), Error);
  CHECK_THROWS_AS(parse_sense("maximise"), Error);
}

TEST_CASE("evaluation reports infeasibility and ambiguity") {
  Formulation f;
  const Expr x = f.add_variable("x", 0, 1);
  f.inputs = {"x"};
  f.define("y", Expr(2.0) * x);
  f.add_constraint("cap", Expr::var("y"), Relation::le, Expr(1.0));
  f.add_output("y", "y");
  VectorXd v(1);
  v << 0.25;
  CHECK(eval_formulation(f, v).outputs.at("y") == 0.5);
  v << 0.75;
  CHECK_THROWS_AS(eval_formulation(f, v), Error);
  v << 1.5;
  CHECK_THROWS_AS(eval_formulation(f, v), Error);
  f.add_variable("free", 0, 1);
  v << 0.25;
  CHECK_THROWS_AS(eval_formulation(f, v), Error);
}

TEST_CASE("dump is stable") {
  Formulation f;
  const Expr x = f.add_variable("x0", -1, 2);
  const Expr p = f.add_variable("p", 0, 1, VarKind::binary);
  f.inputs = {"x0"};
  f.define("y", Expr(3.0) * x - Expr(0.5));
  f.add_constraint("link", Expr::var("y"), Relation::le, Expr(4.0) * p);
  f.set_objective(pow(Expr::var("y"), 2.0), ObjSense::max);
  f.add_output("out", "y");
  f.declared = f.scan_class();
  const std::string expected =
      "class MINLP\n"
      "variables\n"
      "  x0 in [-1, 2]\n"
      "  p binary in [0, 1]\n"
      "  y in [-inf, inf]\n"
      "constraints\n"
      "  def def_y: y == ((3 * x0) - 0.5)\n"
      "  link: y <= (4 * p)\n"
      "objective\n"
      "  max (y ^ 2)\n"
      "inputs x0\n"
      "outputs out=y\n";
  CHECK(f.dump() == expected);
  CHECK(f.dump() == Formulation(f).dump());
}
