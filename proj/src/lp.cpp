#include "sdfo/lp.hpp"

#include <cmath>
#include <limits>

#include "sdfo/error.hpp"

namespace sdfo {

namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kCostEps = 1e-9;
constexpr int kMaxPivots = 200000;

class Tableau {
 public:
  Tableau(int rows, int cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows, -1), rows_(rows), cols_(cols) {}

  double& at(int r, int c) { return t_(r, c); }
  double& rhs(int r) { return t_(r, cols_); }
  double& cost(int c) { return t_(rows_, c); }
  int& basis(int r) { return basis_[static_cast<std::size_t>(r)]; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
    ++pivots;
  }

  // cost row := c - c_B B^-1 A, with -z in the rhs slot
  void set_costs(const Eigen::VectorXd& c) {
    t_.row(rows_).setZero();
    t_.row(rows_).head(cols_) = c.transpose();
    for (int i = 0; i < rows_; ++i) {
      const double cb = c[basis_[static_cast<std::size_t>(i)]];
      if (cb != 0.0) t_.row(rows_) -= cb * t_.row(i);
    }
  }

  /// Bland's rule until optimal; false when unbounded.
  bool run(const std::vector<bool>& barred) {
    while (true) {
      int enter = -1;
      for (int j = 0; j < cols_; ++j) {
        if (!barred[static_cast<std::size_t>(j)] && t_(rows_, j) < -kCostEps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotEps) continue;
        const double ratio = t_(i, cols_) / a;
        if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && basis_[static_cast<std::size_t>(i)] <
                                                                           basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      require(pivots < kMaxPivots, ErrorKind::numeric, "simplex pivot limit reached");
    }
  }

  double objective() const { return -t_(rows_, cols_); }

  int pivots = 0;

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
  int rows_, cols_;
};

}  // namespace

LpResult solve_lp(const LpProblem& lp) {
  const int n = static_cast<int>(lp.c.size());
  require(lp.a.cols() == n && lp.upper.size() == n, ErrorKind::shape, "LP column counts disagree");
  require(lp.a.rows() == lp.b.size() && static_cast<std::size_t>(lp.a.rows()) == lp.rel.size(), ErrorKind::shape,
          "LP row counts disagree");

  // gather rows: explicit constraints, then finite upper bounds
  struct Row {
    Eigen::VectorXd a;
    Relation rel;
    double b;
  };
  std::vector<Row> rows;
  for (Eigen::Index i = 0; i < lp.a.rows(); ++i) rows.push_back({lp.a.row(i).transpose(), lp.rel[static_cast<std::size_t>(i)], lp.b[i]});
  for (int j = 0; j < n; ++j) {
    require(lp.upper[j] >= 0, ErrorKind::parameter, "LP upper bound below zero");
    if (std::isfinite(lp.upper[j])) rows.push_back({Eigen::VectorXd::Unit(n, j), Relation::le, lp.upper[j]});
  }
  for (auto& r : rows) {
    if (r.b < 0) {
      r.a = -r.a;
      r.b = -r.b;
      if (r.rel == Relation::le) r.rel = Relation::ge;
      else if (r.rel == Relation::ge) r.rel = Relation::le;
    }
  }
  const int m = static_cast<int>(rows.size());
  int n_slack = 0, n_art = 0;
  for (const auto& r : rows) {
    n_slack += r.rel != Relation::eq;
    n_art += r.rel != Relation::le;
  }
  const int cols = n + n_slack + n_art;
  Tableau t(m, cols);
  std::vector<bool> artificial(static_cast<std::size_t>(cols), false);
  int s = n, art = n + n_slack;
  for (int i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) t.at(i, j) = r.a[j];
    t.rhs(i) = r.b;
    if (r.rel == Relation::le) {
      t.at(i, s) = 1.0;
      t.basis(i) = s++;
    } else {
      if (r.rel == Relation::ge) t.at(i, s++) = -1.0;
      t.at(i, art) = 1.0;
      artificial[static_cast<std::size_t>(art)] = true;
      t.basis(i) = art++;
    }
  }

  LpResult res;
  std::vector<bool> barred(static_cast<std::size_t>(cols), false);
  if (n_art > 0) {
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(cols);
    for (int j = 0; j < cols; ++j)
      if (artificial[static_cast<std::size_t>(j)]) c1[j] = 1.0;
    t.set_costs(c1);
    t.run(barred);
    double bscale = 1.0;
    for (const auto& r : rows) bscale = std::max(bscale, std::abs(r.b));
    if (t.objective() > 1e-9 * bscale) {
      res.status = LpStatus::infeasible;
      res.pivots = t.pivots;
      return res;
    }
    // drive remaining zero-level artificials out where possible
    for (int i = 0; i < m; ++i) {
      if (!artificial[static_cast<std::size_t>(t.basis(i))]) continue;
      for (int j = 0; j < cols; ++j) {
        if (!artificial[static_cast<std::size_t>(j)] && std::abs(t.at(i, j)) > 1e-9) {
          t.pivot(i, j);
          break;
        }
      }
    }
    barred = artificial;
  }
  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(cols);
  c2.head(n) = lp.c;
  t.set_costs(c2);
  const bool bounded = t.run(barred);
  res.pivots = t.pivots;
  if (!bounded) {
    res.status = LpStatus::unbounded;
    return res;
  }
  res.status = LpStatus::optimal;
  res.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (t.basis(i) < n) res.x[t.basis(i)] = std::max(0.0, t.rhs(i));
  res.objective = lp.c.dot(res.x);
  return res;
}

}  // namespace sdfo
