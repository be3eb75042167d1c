#include <cmath>
#include <limits>

#include "doctest.h"
#include "sdfo/error.hpp"
#include "sdfo/formul.hpp"
#include "sdfo/lp.hpp"
#include "sdfo/rng.hpp"
#include "sdfo/solve.hpp"
#include "sdfo/tape.hpp"

using namespace sdfo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Formulation quadratic_1d(double target, ObjSense sense = ObjSense::min) {
  Formulation f;
  const Expr x = f.add_variable("x", 0.0, 1.0);
  f.inputs = {"x"};
  f.set_objective(pow(x - Expr(target), 2.0), sense);
  f.declared = ProblemClass::NLP;
  return f;
}

// max of c.x over {x in box, a x <= b} in 2-D by enumerating vertices
double polygon_max(const MatrixXd& a, const VectorXd& b, const VectorXd& c) {
  double best = -std::numeric_limits<double>::infinity();
  const auto rows = a.rows();
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = i + 1; j < rows; ++j) {
      Eigen::Matrix2d m;
      m << a(i, 0), a(i, 1), a(j, 0), a(j, 1);
      if (std::abs(m.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = m.fullPivLu().solve(Eigen::Vector2d(b[i], b[j]));
      if (((a * v - b).array() <= 1e-9).all()) best = std::max(best, c.dot(v));
    }
  }
  return best;
}

NetworkParams tiny_relu(std::uint64_t seed) {
  auto p = NetworkParams::initialize({{2, 4, 1}, Activation::relu, false}, seed);
  for (auto& w : p.weights) w *= 3.0;
  return p;
}

}  // namespace

TEST_CASE("tape gradients agree with finite differences") {
  const Expr x = Expr::var("x"), y = Expr::var("y");
  const std::vector<Expr> roots{exp(x * y) / (Expr(1.0) + pow(y, 2.0)), log(x + Expr(2.0)) - sum({x, y, x * x}),
                                pow(Expr(1.0) + x * x, -0.5), -(x / y)};
  const Tape t(roots, {"x", "y"});
  VectorXd p(2);
  p << 0.4, -0.7;
  MatrixXd jac;
  const VectorXd v = t.values(p, jac);
  CHECK(v.isApprox(t.values(p), 0.0));
  for (int j = 0; j < 2; ++j) {
    VectorXd hp = p, hm = p;
    hp[j] += 1e-6;
    hm[j] -= 1e-6;
    const VectorXd fd = (t.values(hp) - t.values(hm)) / 2e-6;
    for (int r = 0; r < 4; ++r) CHECK(jac(r, j) == doctest::Approx(fd[r]).epsilon(1e-7));
  }
  CHECK(v[0] == doctest::Approx(std::exp(-0.28) / 1.49).epsilon(1e-15));
  CHECK_THROWS_AS(Tape({Expr::var("z")}, {"x"}), Error);
}

TEST_CASE("simplex on small programs") {
  // max 3x + 2y  s.t.  x + y <= 4, x + 3y <= 6, x <= 3
  LpProblem lp;
  lp.c = VectorXd(2);
  lp.c << -3, -2;
  lp.a = MatrixXd(2, 2);
  lp.a << 1, 1, 1, 3;
  lp.rel = {Relation::le, Relation::le};
  lp.b = VectorXd(2);
  lp.b << 4, 6;
  lp.upper = VectorXd(2);
  lp.upper << 3, std::numeric_limits<double>::infinity();
  auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.objective == doctest::Approx(-11.0));
  CHECK(r.x[0] == doctest::Approx(3.0));
  CHECK(r.x[1] == doctest::Approx(1.0));

  // equality plus >= rows: min x + y s.t. x - y = 1, x + 2y >= 4
  lp.c << 1, 1;
  lp.a << 1, -1, 1, 2;
  lp.rel = {Relation::eq, Relation::ge};
  lp.b << 1, 4;
  lp.upper.setConstant(std::numeric_limits<double>::infinity());
  r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.x[0] == doctest::Approx(2.0));
  CHECK(r.x[1] == doctest::Approx(1.0));

  // negative right-hand side: x - y <= -2 with x, y <= 1 is infeasible
  lp.a << 1, -1, 0, 0;
  lp.rel = {Relation::le, Relation::le};
  lp.b << -2, 0;
  lp.upper.setOnes();
  CHECK(solve_lp(lp).status == LpStatus::infeasible);

  lp.c << -1, 0;
  lp.a.setZero();
  lp.b.setZero();
  lp.upper.setConstant(std::numeric_limits<double>::infinity());
  CHECK(solve_lp(lp).status == LpStatus::unbounded);
}

TEST_CASE("simplex survives degenerate vertices") {
  // several constraints tight at the optimum (0, 1)
  LpProblem lp;
  lp.c = VectorXd(2);
  lp.c << 0, -1;
  lp.a = MatrixXd(4, 2);
  lp.a << 1, 1, -1, 1, 0, 1, 2, 1;
  lp.rel = std::vector<Relation>(4, Relation::le);
  lp.b = VectorXd(4);
  lp.b << 1, 1, 1, 1;
  lp.upper = VectorXd::Constant(2, 5.0);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.objective == doctest::Approx(-1.0));
}

TEST_CASE("unconstrained quadratic") {
  const auto s = solve_nlp(quadratic_1d(0.3));
  CHECK(s.status == SolveStatus::optimal_local);
  CHECK(std::abs(s.at("x") - 0.3) <= 1e-6);
  CHECK(s.starts_log.size() == 16);
  for (const auto& r : s.starts_log) CHECK(s.objective <= r.objective + 1e-15);

  const auto m = solve_nlp(quadratic_1d(0.3, ObjSense::max));
  CHECK(m.at("x") == 1.0);
  CHECK(m.objective == doctest::Approx(0.49));
}

TEST_CASE("active inequality") {
  auto f = quadratic_1d(0.3);
  f.add_constraint("floor", Expr::var("x"), Relation::ge, Expr(0.8));
  const auto s = solve_nlp(f);
  CHECK(s.status == SolveStatus::optimal_local);
  CHECK(std::abs(s.at("x") - 0.8) <= 1e-6);
  CHECK(s.violation <= 1e-6);
}

TEST_CASE("equality constraint through the multipliers") {
  Formulation f;
  const Expr x = f.add_variable("x", -2, 2), y = f.add_variable("y", -2, 2);
  f.add_constraint("line", x + Expr(2.0) * y, Relation::eq, Expr(1.0));
  f.set_objective(pow(x, 2.0) + pow(y, 2.0), ObjSense::min);
  const auto s = solve_nlp(f);
  CHECK(s.status == SolveStatus::optimal_local);
  CHECK(s.at("x") == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(s.at("y") == doctest::Approx(0.4).epsilon(1e-5));
  CHECK(s.violation <= 1e-6);
}

TEST_CASE("nonconvex constraint region") {
  // min x + y on the outside of the unit disk inside [0,2]^2
  Formulation f;
  const Expr x = f.add_variable("x", 0, 2), y = f.add_variable("y", 0, 2);
  f.add_constraint("disk", pow(x, 2.0) + pow(y, 2.0), Relation::ge, Expr(1.0));
  f.set_objective(x + y, ObjSense::min);
  const auto s = solve_nlp(f);
  CHECK(s.status == SolveStatus::optimal_local);
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.violation <= 1e-6);
}

TEST_CASE("infeasible NLP") {
  auto f = quadratic_1d(0.3);
  f.add_constraint("impossible", Expr::var("x"), Relation::ge, Expr(2.0));
  const auto s = solve_nlp(f);
  CHECK(s.status == SolveStatus::infeasible);
  CHECK(s.violation > 0.5);
}

TEST_CASE("GP mean minimum matches a fine grid") {
  MatrixXd x(7, 1);
  x << -1.0, -0.6, -0.3, 0.05, 0.4, 0.7, 1.0;
  VectorXd y(7);
  y << 0.8, -0.2, 0.5, -0.9, 0.1, 0.6, -0.3;
  const auto model = gpr_condition(x, y, {KernelKind::sqexp, 1}, {0.35, 1.0, 0.0}, 1e-8);
  auto f = gpr_mean_block(model, SearchSpace({{-1.0, 1.0}}));
  f.set_objective(f.output("y"), ObjSense::min);
  const auto s = solve_nlp(f);

  double best = std::numeric_limits<double>::infinity(), arg = 0;
  for (int i = 0; i <= 20000; ++i) {
    VectorXd p(1);
    p << -1.0 + 2.0 * i / 20000.0;
    const double v = gpr_predict(model, p).mean;
    if (v < best) best = v, arg = p[0];
  }
  CHECK(std::abs(s.at("x0") - arg) <= 1e-3);
  CHECK(s.objective <= best + 1e-9);
}

TEST_CASE("NLP is deterministic per seed") {
  Formulation f;
  const Expr x = f.add_variable("x", -3, 3), y = f.add_variable("y", -2, 2);
  // six-hump camel
  f.set_objective(Expr(4.0) * pow(x, 2.0) - Expr(2.1) * pow(x, 4.0) + pow(x, 6.0) / Expr(3.0) + x * y -
                      Expr(4.0) * pow(y, 2.0) + Expr(4.0) * pow(y, 4.0),
                  ObjSense::min);
  SolveConfig cfg;
  cfg.seed = 42;
  const auto a = solve_nlp(f, cfg), b = solve_nlp(f, cfg);
  CHECK(a.objective == doctest::Approx(-1.0316284535).epsilon(1e-8));
  CHECK(a.values == b.values);
  REQUIRE(a.starts_log.size() == b.starts_log.size());
  for (std::size_t i = 0; i < a.starts_log.size(); ++i) {
    CHECK(a.starts_log[i].x == b.starts_log[i].x);
    CHECK(a.starts_log[i].iterations == b.starts_log[i].iterations);
  }
  cfg.seed = 43;
  CHECK(solve_nlp(f, cfg).starts_log[0].start != a.starts_log[0].start);
}

TEST_CASE("relu network maximum equals pattern enumeration") {
  const SearchSpace box({{-1.0, 1.0}, {-1.0, 1.0}});
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto p = tiny_relu(seed);
    auto f = nn_block(p, box);
    f.set_objective(f.output("y0"), ObjSense::max);
    const auto s = solve_milp(f);
    REQUIRE(s.status == SolveStatus::optimal_exact);
    CHECK(s.violation <= 1e-6);

    // oracle: for each of the 16 patterns, maximise the induced affine map
    double best = -std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 16; ++mask) {
      MatrixXd a(8, 2);
      VectorXd b(8), c = VectorXd::Zero(2);
      double c0 = p.biases[1][0];
      for (int j = 0; j < 4; ++j) {
        const bool on = (mask >> j) & 1;
        const Eigen::RowVector2d w = p.weights[0].row(j);
        const double bj = p.biases[0][j];
        // on: w.x + b >= 0, off: w.x + b <= 0
        a.row(j) = on ? -w : w;
        b[j] = on ? bj : -bj;
        if (on) {
          c += p.weights[1](0, j) * w.transpose();
          c0 += p.weights[1](0, j) * bj;
        }
      }
      a.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
      b.tail(4) << 1, 1, 1, 1;
      const double v = polygon_max(a, b, c);
      if (std::isfinite(v)) best = std::max(best, v + c0);
    }
    CHECK(s.objective == doctest::Approx(best).epsilon(1e-9));
    VectorXd xs(2);
    xs << s.at("x0"), s.at("x1");
    CHECK(forward(p, xs)[0] == doctest::Approx(best).epsilon(1e-7));
  }
}

TEST_CASE("branch-and-bound equals enumeration") {
  const SearchSpace box({{-1.0, 1.0}, {-1.0, 1.0}});
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (Activation act : {Activation::relu, Activation::hardsigmoid}) {
      // relu: 12 binaries; hardsigmoid: 2 x 3 nodes x 2 binaries = 12
      const std::vector<int> sizes = act == Activation::relu ? std::vector<int>{2, 6, 6, 1} : std::vector<int>{2, 3, 3, 1};
      auto p = NetworkParams::initialize({sizes, act, false}, seed);
      for (auto& w : p.weights) w *= 4.0;
      auto f = nn_block(p, box);
      f.set_objective(f.output("y0"), seed % 2 ? ObjSense::max : ObjSense::min);
      SolveConfig cfg;
      const auto bb = solve_milp(f, cfg);
      cfg.milp_enumerate = true;
      const auto en = solve_milp(f, cfg);
      REQUIRE(bb.status == SolveStatus::optimal_exact);
      REQUIRE(en.status == SolveStatus::optimal_exact);
      CHECK(bb.objective == doctest::Approx(en.objective).epsilon(1e-9));
      CHECK(en.nodes == 4096);
      CHECK(bb.nodes < en.nodes);
    }
  }
}

TEST_CASE("fixed input recovers the forced pattern") {
  const auto p = tiny_relu(7);
  VectorXd x(2);
  x << 0.3, -0.6;
  auto f = nn_block(p, SearchSpace({{-1.0, 1.0}, {-1.0, 1.0}}));
  f.find("x0")->lo = f.find("x0")->hi = 0.3;
  f.find("x1")->lo = f.find("x1")->hi = -0.6;
  f.set_objective(f.output("y0"), ObjSense::max);
  const auto s = solve_milp(f);
  REQUIRE(s.status == SolveStatus::optimal_exact);
  const VectorXd z = p.weights[0] * x + p.biases[0];
  for (int j = 0; j < 4; ++j) {
    if (std::abs(z[j]) < 1e-9) continue;
    CHECK(s.at("p1_" + std::to_string(j)) == (z[j] > 0 ? 1.0 : 0.0));
  }
  CHECK(s.objective == doctest::Approx(forward(p, x)[0]).epsilon(1e-9));
}

TEST_CASE("choose-one selection matches the argmax") {
  const std::vector<double> score{0.3, 1.7, -0.2, 1.7, 0.9};
  Formulation f;
  std::vector<Expr> ys, terms;
  for (std::size_t k = 0; k < score.size(); ++k) {
    ys.push_back(f.add_variable("y" + std::to_string(k), 0, 1, VarKind::binary));
    terms.push_back(Expr(score[k]) * ys.back());
  }
  f.add_constraint("one", sum(ys), Relation::eq, Expr(1.0));
  f.set_objective(sum(terms), ObjSense::max);
  for (bool enumerate : {false, true}) {
    SolveConfig cfg;
    cfg.milp_enumerate = enumerate;
    const auto s = solve_milp(f, cfg);
    CHECK(s.objective == 1.7);
    CHECK(s.at("y1") + s.at("y3") == 1.0);
  }
  f.add_constraint("none", sum(ys), Relation::le, Expr(0.0));
  CHECK(solve_milp(f).status == SolveStatus::infeasible);
}

TEST_CASE("linear models reject nonlinear terms") {
  Formulation f;
  const Expr x = f.add_variable("x", 0, 1);
  f.set_objective(x * x, ObjSense::min);
  CHECK_THROWS_AS(solve_milp(f), Error);
  Formulation g;
  g.add_variable("x", 0, kInf);
  g.set_objective(Expr::var("x"), ObjSense::min);
  CHECK_THROWS_AS(solve(g), Error);
}

TEST_CASE("superstructure picks the feasible branch") {
  auto good = quadratic_1d(0.6);
  auto bad = quadratic_1d(0.1);
  bad.add_constraint("never", Expr::var("x"), Relation::ge, Expr(3.0));
  const auto s = solve_superstructure({{"bad", bad}, {"good", good}});
  CHECK(s.branch == 1);
  CHECK(s.at("x") == doctest::Approx(0.6).epsilon(1e-6));
  REQUIRE(s.branches.size() == 2);
  CHECK(s.branches[0].status == SolveStatus::infeasible);
  CHECK(s.branches[1].status == SolveStatus::optimal_local);

  const auto none = solve_superstructure({{"bad", bad}, {"bad again", bad}});
  CHECK(none.status == SolveStatus::infeasible);
  CHECK(none.branches.size() == 2);
}

TEST_CASE("duplicate branches tie to the lowest index") {
  auto a = quadratic_1d(0.6);
  a.add_constraint("cap", Expr::var("x"), Relation::le, Expr(0.4));
  const auto s = solve_superstructure({{"worse", quadratic_1d(0.0)}, {"first", a}, {"second", a}});
  // branch 0 reaches 0, so make the duplicates the best by maximising instead
  CHECK(s.branch == 0);
  auto b = a;
  b.objective->sense = ObjSense::max;
  const auto t = solve_superstructure({{"low", quadratic_1d(0.5, ObjSense::max)}, {"first", b}, {"second", b}});
  CHECK(t.branch == 1);
  CHECK(t.branches[1].objective == t.branches[2].objective);
}

TEST_CASE("time budget is reported") {
  SolveConfig cfg;
  cfg.time_budget = 1e-9;
  const auto s = solve_nlp(quadratic_1d(0.3), cfg);
  CHECK(s.status == SolveStatus::budget_exhausted);
  bool skipped = false;
  for (const auto& r : s.starts_log) skipped |= r.skipped;
  CHECK(skipped);
}
