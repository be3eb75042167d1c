#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "sdfo/adaptive.hpp"
#include "sdfo/error.hpp"
#include "sdfo/rng.hpp"
#include "sdfo/solve.hpp"

using namespace sdfo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

AcquisitionSpec acq(AcquisitionKind k, double xi = 0.0, ObjSense s = ObjSense::max) { return {k, xi, s}; }

// E[max(Y - c, 0)] for Y ~ N(mu, s^2): composite Simpson over [max(c, mu - 12 s), mu + 12 s]
double ei_quadrature(double mu, double s, double c) {
  const int n = 20000;
  const double a = std::max(c, mu - 12 * s), b = std::max(a, mu + 12 * s), h = (b - a) / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double y = a + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::max(y - c, 0.0) * std::exp(-0.5 * (y - mu) * (y - mu) / (s * s)) / (s * std::sqrt(2 * std::numbers::pi));
  }
  return acc * h / 3;
}

Formulation latent_block(int m, const std::function<Expr(const std::vector<Expr>&)>& latent) {
  Formulation f;
  std::vector<Expr> x;
  for (int j = 0; j < m; ++j) {
    x.push_back(f.add_variable("x" + std::to_string(j)));
    f.inputs.push_back("x" + std::to_string(j));
  }
  f.define("latent", latent(x));
  f.add_output("latent", "latent");
  f.declared = f.scan_class();
  return f;
}

GprModel model_1d(const std::vector<double>& xs, const std::vector<double>& ys, double l = 0.3) {
  MatrixXd x(static_cast<Eigen::Index>(xs.size()), 1);
  VectorXd y(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = xs[i];
    y[static_cast<Eigen::Index>(i)] = ys[i];
  }
  return gpr_condition(x, y, {KernelKind::sqexp, 1}, {l, 1.0, 0.0}, 1e-8);
}

double mod_ei(const GprModel& m, const VectorXd& x, double y_best, double xi, ObjSense sense) {
  const auto p = gpr_predict(m, x);
  const double v = std::max(p.variance, 0.0) + 1e-12;
  const double d = (sense == ObjSense::max ? 1.0 : -1.0) * (p.mean - y_best) - xi;
  return std::sqrt(v / (2 * std::numbers::pi)) * std::exp(-d * d / (2 * v));
}

}  // namespace

TEST_CASE("normal distribution helpers") {
  CHECK(std::abs(normal_cdf(1.0) - 0.8413447460685429) < 1e-15);
  CHECK(std::abs(normal_cdf(-3.0) - 0.0013498980316300946) < 1e-16);
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(std::abs(normal_pdf(0.0) - 0.3989422804014327) < 1e-16);
}

TEST_CASE("acquisition limits") {
  CHECK(acquisition_value(acq(AcquisitionKind::ei), 1.0, 0.0, 1.0) == 0.0);
  CHECK(acquisition_value(acq(AcquisitionKind::modified_ei), 1.0, 0.0, 1.0) == 0.0);
  CHECK(acquisition_value(acq(AcquisitionKind::ei), 1.5, 0.0, 1.0) == 0.5);
  CHECK(acquisition_value(acq(AcquisitionKind::pi, 0.25), 1.25, 0.3, 1.0) == 0.5);
  CHECK(acquisition_value(acq(AcquisitionKind::pi), 2.0, 0.0, 1.0) == 1.0);
  CHECK(acquisition_value(acq(AcquisitionKind::pi), 0.0, 0.0, 1.0) == 0.0);
  CHECK(acquisition_value(acq(AcquisitionKind::ucb, 2.0), 1.0, 0.5, 0.0) == 2.0);
  CHECK_THROWS_AS(acquisition_value(acq(AcquisitionKind::max_std), 1.0, 0.5, 0.0), Error);
  CHECK_THROWS_AS(acquisition_value(acq(AcquisitionKind::ei, -1.0), 1.0, 0.5, 0.0), Error);
  CHECK(parse_acquisition("modified_ei") == AcquisitionKind::modified_ei);
  CHECK_THROWS_AS(parse_acquisition("thompson"), Error);
}

TEST_CASE("EI matches quadrature and stays non-negative") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double mu = rng.uniform(-5, 5), s = rng.uniform(1e-6, 3), best = rng.uniform(-5, 5);
    const double ei = acquisition_value(acq(AcquisitionKind::ei), mu, s, best);
    const double pi = acquisition_value(acq(AcquisitionKind::pi), mu, s, best);
    CHECK(ei >= 0.0);
    CHECK(pi >= 0.0);
    CHECK(pi <= 1.0);
    CHECK(acquisition_value(acq(AcquisitionKind::modified_ei), mu, s, best) >= 0.0);
    CHECK(acquisition_value(acq(AcquisitionKind::ucb, 0.5), mu, s, best) <=
          acquisition_value(acq(AcquisitionKind::ucb, 0.6), mu, s, best));
  }
  for (int i = 0; i < 20; ++i) {
    const double mu = rng.uniform(-2, 2), s = rng.uniform(0.2, 2), best = rng.uniform(-2, 2);
    CHECK(acquisition_value(acq(AcquisitionKind::ei, 0.05), mu, s, best) ==
          doctest::Approx(ei_quadrature(mu, s, best + 0.05)).epsilon(1e-8));
  }
  // minimisation negates both sides
  CHECK(acquisition_value(acq(AcquisitionKind::ei, 0.0, ObjSense::min), -1.0, 0.4, 0.5) ==
        acquisition_value(acq(AcquisitionKind::ei), 1.0, 0.4, -0.5));
}

TEST_CASE("relative error and departure") {
  CHECK(relative_sq_error(2.0, 2.0) == 0.0);
  CHECK(relative_sq_error(2.0, 1.0) == 0.25);
  try {
    relative_sq_error(0.0, 1.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::division_by_zero);
  }

  const std::vector<double> xs{0.0, 0.2, 0.45, 0.6, 0.9}, ys{1.0, -0.5, 0.7, 0.2, -1.1};
  const auto full = model_1d(xs, ys, 0.25);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    auto xm = xs, ym = ys;
    xm.erase(xm.begin() + static_cast<long>(j));
    ym.erase(ym.begin() + static_cast<long>(j));
    const auto loo = model_1d(xm, ym, 0.25);
    VectorXd x(1);
    x << xs[j];
    CHECK(departure(full, loo, x) == doctest::Approx(ys[j] - gpr_predict(loo, x).mean).epsilon(1e-6));
  }
}

TEST_CASE("max-uncertainty problem finds the largest gap") {
  const auto m = model_1d({0.2, 0.4}, {0.3, -0.2}, 0.15);
  const SearchSpace box({{0.0, 1.0}});
  const auto s = solve_nlp(build_max_std_problem(m, box));
  REQUIRE(s.status == SolveStatus::optimal_local);
  double best = -1, arg = 0;
  for (int i = 0; i <= 1000; ++i) {
    VectorXd p(1);
    p << i / 1000.0;
    const double v = gpr_predict(m, p).variance;
    if (v > best) best = v, arg = p[0];
  }
  CHECK(std::abs(s.at("x0") - arg) <= 1e-3);
  CHECK(s.at("x0") >= 0.0);
  CHECK(s.at("x0") <= 1.0);

  const auto sym = model_1d({0.0, 1.0}, {0.5, 0.5}, 0.3);
  const auto c = solve_nlp(build_max_std_problem(sym, box));
  CHECK(std::abs(c.at("x0") - 0.5) <= 1e-3);
}

TEST_CASE("modified-EI problem matches a grid") {
  SUBCASE("1-D") {
    const auto m = model_1d({0.05, 0.3, 0.55, 0.8}, {0.2, 0.9, 0.4, -0.3}, 0.2);
    const SearchSpace box({{0.0, 1.0}});
    for (ObjSense sense : {ObjSense::max, ObjSense::min}) {
      const double best = sense == ObjSense::max ? 0.9 : -0.3;
      const auto s = solve_nlp(build_modified_ei_problem(m, best, 0.01, sense, box));
      REQUIRE(s.status == SolveStatus::optimal_local);
      double gv = -1, garg = 0;
      for (int i = 0; i <= 1000; ++i) {
        VectorXd p(1);
        p << i / 1000.0;
        const double v = mod_ei(m, p, best, 0.01, sense);
        if (v > gv) gv = v, garg = p[0];
      }
      CHECK(std::abs(s.at("x0") - garg) <= 1e-2);
      CHECK(s.objective >= gv - 1e-9);
      VectorXd xt(1);
      xt << 0.3;
      CHECK(mod_ei(m, xt, best, 0.01, sense) <= s.objective + 1e-12);
    }
  }
  SUBCASE("2-D") {
    MatrixXd x(5, 2);
    x << 0.1, 0.1, 0.8, 0.2, 0.5, 0.5, 0.2, 0.9, 0.9, 0.8;
    VectorXd y(5);
    y << 0.1, 0.5, -0.3, 0.8, 0.2;
    const auto m = gpr_condition(x, y, {KernelKind::sqexp, 1}, {0.3, 1.0, 0.0}, 1e-8);
    const SearchSpace box({{0.0, 1.0}, {0.0, 1.0}});
    const auto s = solve_nlp(build_modified_ei_problem(m, 0.8, 0.01, ObjSense::max, box));
    double gv = -1;
    VectorXd garg(2);
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; j <= 1000; j += 1) {
        VectorXd p(2);
        p << i / 1000.0, j / 1000.0;
        const double v = mod_ei(m, p, 0.8, 0.01, ObjSense::max);
        if (v > gv) gv = v, garg = p;
      }
    VectorXd sx(2);
    sx << s.at("x0"), s.at("x1");
    CHECK((sx - garg).norm() <= 1e-2);
  }
}

TEST_CASE("larger xi favours higher uncertainty") {
  const auto m = model_1d({0.1, 0.35, 0.5, 0.9}, {0.0, 0.0, 0.0, 0.0}, 0.2);
  const SearchSpace box({{0.0, 1.0}});
  // flat mean: s phi(xi / s) grows with s, so every xi lands on the widest gap
  double smax = 0;
  for (int i = 0; i <= 1000; ++i) {
    VectorXd p(1);
    p << i / 1000.0;
    smax = std::max(smax, std::sqrt(gpr_predict(m, p).variance));
  }
  for (double xi : {0.01, 0.3, 1.0}) {
    const auto s = solve_nlp(build_modified_ei_problem(m, 0.0, xi, ObjSense::max, box));
    VectorXd p(1);
    p << s.at("x0");
    CHECK(std::sqrt(gpr_predict(m, p).variance) >= smax - 1e-6);
  }
}

TEST_CASE("explore picks the largest triangle") {
  MatrixXd pts(5, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1, 0.3, 0.6;
  const SearchSpace box({{0.0, 1.0}, {0.0, 1.0}});
  auto rs = build_explore_triangle_problem(pts, box, false);
  CHECK(rs.eligible.size() == 4);
  rs.solve();
  // shoelace areas: 0.5 * distance from (0.3, 0.6) to each side -> right side wins
  CHECK(rs.scores[std::distance(rs.eligible.begin(), std::find(rs.eligible.begin(), rs.eligible.end(), *rs.chosen))] ==
        doctest::Approx(0.35));
  CHECK(rs.x[0] == doctest::Approx(2.3 / 3));
  CHECK(rs.x[1] == doctest::Approx(1.6 / 3));

  const auto milp = solve_milp(rs.as_formulation());
  CHECK(milp.objective == doctest::Approx(0.35));
  CHECK(milp.at("x0") == doctest::Approx(rs.x[0]));

  MatrixXd sq(4, 2);
  sq << 0, 0, 1, 0, 0, 1, 1, 1;
  auto tie = build_explore_triangle_problem(sq, box, false);
  REQUIRE(tie.eligible.size() == 2);
  tie.solve();
  CHECK(*tie.chosen == tie.eligible[0]);
  CHECK(box.contains(tie.x));
}

TEST_CASE("region selection equals brute force on random instances") {
  Rng rng(6);
  const SearchSpace box({{-1.0, 1.0}, {0.0, 2.0}});
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd pts(8, 2);
    for (int i = 0; i < 8; ++i) pts.row(i) << rng.uniform(-1, 1), rng.uniform(0, 2);
    auto rs = build_explore_triangle_problem(pts, box, true);
    rs.solve();
    double best = -1;
    std::size_t arg = 0;
    for (std::size_t s = 0; s < rs.triangulation.size(); ++s) {
      const double a = simplex_measure(rs.triangulation.vertices(s));
      if (a > best + 1e-15) best = a, arg = s;
    }
    CHECK(rs.triangulation.volumes[*rs.chosen] == doctest::Approx(best).epsilon(1e-12));
    CHECK(*rs.chosen == arg);
    CHECK(solve_milp(rs.as_formulation()).objective == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("current bounds filter the regions") {
  MatrixXd pts(5, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1, 0.3, 0.6;
  const SearchSpace box({{0.0, 1.0}, {0.0, 1.0}});
  const SearchSpace left({{0.0, 0.2}, {0.0, 1.0}});
  auto rs = build_explore_triangle_problem(pts, box, false, left);
  REQUIRE(rs.eligible.size() == 1);
  rs.solve();
  CHECK(left.contains(rs.x));
  CHECK_THROWS_AS(build_explore_triangle_problem(pts, box, false, SearchSpace({{0.95, 1.0}, {0.95, 1.0}})), Error);
}

TEST_CASE("exploit restricts to the best sample's simplices") {
  const SearchSpace line({{0.0, 1.0}});
  MatrixXd p1(3, 1);
  p1 << 0.0, 0.4, 1.0;
  VectorXd y(3);
  y << 0.1, 0.9, 0.2;
  auto rs = build_exploit_triangle_problem(p1, y, ObjSense::max, line, false);
  CHECK(rs.eligible.size() == 2);
  rs.solve();
  CHECK(rs.x[0] == doctest::Approx(0.7));

  auto flipped = build_exploit_triangle_problem(p1, -y, ObjSense::min, line, false);
  flipped.solve();
  CHECK(*flipped.chosen == *rs.chosen);

  // corner best in 2-D: every eligible simplex has it as a vertex, and no other does
  Rng rng(12);
  MatrixXd pts(10, 2);
  for (int i = 0; i < 10; ++i) pts.row(i) << rng.uniform(), rng.uniform();
  pts.row(3) << 0.0, 0.0;
  VectorXd v = VectorXd::Zero(10);
  v[3] = -5;
  const SearchSpace box({{0.0, 1.0}, {0.0, 1.0}});
  const auto ex = build_exploit_triangle_problem(pts, v, ObjSense::min, box, false);
  const auto& tri = ex.triangulation;
  const Eigen::RowVector2d corner(0.0, 0.0);
  for (std::size_t s = 0; s < tri.size(); ++s) {
    const MatrixXd vs = tri.vertices(s);
    bool has = false;
    for (int r = 0; r < vs.rows(); ++r) has |= vs.row(r) == corner;
    CHECK(has == (std::find(ex.eligible.begin(), ex.eligible.end(), s) != ex.eligible.end()));
  }
}

TEST_CASE("bounds adjustment") {
  const SearchSpace unit({{0.0, 1.0}, {-2.0, 2.0}});
  CHECK(adjust_bounds(unit, unit.center(), 1.0) == unit);
  VectorXd c(2);
  c << 0.5, 0.0;
  const auto half = adjust_bounds(unit, c, 0.5);
  CHECK(half[0].lower == 0.25);
  CHECK(half[0].upper == 0.75);
  CHECK(half[1].lower == -1.0);
  c << 0.95, 1.9;
  const auto clipped = adjust_bounds(unit, c, 0.3);
  CHECK(clipped[0].upper == 1.0);
  CHECK(clipped[0].lower == doctest::Approx(0.8));
  CHECK(clipped[1].upper == 2.0);
  c << 1.5, 0.0;
  CHECK_THROWS_AS(adjust_bounds(unit, c, 0.5), Error);
  CHECK_THROWS_AS(adjust_bounds(unit, unit.center(), 0.0), Error);
}

TEST_CASE("feasibility plug-in") {
  const SearchSpace box({{0.0, 1.0}});
  const auto m = model_1d({0.2, 0.4}, {0.3, -0.2}, 0.15);
  const auto base = solve_nlp(build_max_std_problem(m, box));

  const auto always = latent_block(1, [](const std::vector<Expr>&) { return Expr(1.0); });
  const auto same = solve_nlp(with_feasibility(build_max_std_problem(m, box), always));
  CHECK(same.at("x0") == doctest::Approx(base.at("x0")).epsilon(1e-9));

  // feasible only for x <= 0.7: the unconstrained answer (x = 1) is cut off
  const auto half = latent_block(1, [](const std::vector<Expr>& x) { return Expr(0.7) - x[0]; });
  const auto cut = solve_nlp(with_feasibility(build_max_std_problem(m, box), half));
  REQUIRE(cut.status == SolveStatus::optimal_local);
  CHECK(cut.at("x0") <= 0.7 + 1e-6);
  CHECK(cut.at("x0") == doctest::Approx(0.7).epsilon(1e-5));
}

TEST_CASE("feasibility with a trained classifier") {
  MatrixXd x(8, 2);
  VectorXd t(8);
  x << 0.1, 0.2, 0.3, 0.8, 0.2, 0.5, 0.35, 0.1, 0.7, 0.3, 0.9, 0.9, 0.8, 0.6, 0.65, 0.05;
  t << 1, 1, 1, 1, 0, 0, 0, 0;  // feasible when x0 < 0.5
  const auto cls = gpc_condition(x, t, {0.3, 4.0, 0.0});
  const SearchSpace box({{0.0, 1.0}, {0.0, 1.0}});
  const auto gm = gpr_condition(x, VectorXd::LinSpaced(8, -1, 1), {KernelKind::sqexp, 1}, {0.3, 1.0, 0.0}, 1e-8);
  const auto s = solve_nlp(with_feasibility(build_max_std_problem(gm, box), gpc_block(cls, box)));
  REQUIRE(s.status == SolveStatus::optimal_local);
  VectorXd p(2);
  p << s.at("x0"), s.at("x1");
  CHECK(gpc_latent(cls, p) >= -1e-6);

  MatrixXd pts(5, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1, 0.3, 0.6;
  const auto rs = build_explore_triangle_problem(pts, box, false);
  // only the left triangle's centroid (0.1, 0.53) has x0 < 0.2
  auto only = with_feasibility(rs, latent_block(2, [](const std::vector<Expr>& v) { return Expr(0.2) - v[0]; }));
  REQUIRE(only.eligible.size() == 1);
  only.solve();
  CHECK(only.x[0] == doctest::Approx(0.1));
  CHECK_THROWS_AS(with_feasibility(rs, latent_block(2, [](const std::vector<Expr>&) { return Expr(-1.0); })), Error);
}
