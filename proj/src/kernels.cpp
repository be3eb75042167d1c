#include "sdfo/kernels.hpp"

#include <cmath>

#include "sdfo/error.hpp"

namespace sdfo::kernels {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

inline double element(const KernelSpec& spec, const KernelParams& hp, const MatrixXd& a, Index i, const MatrixXd& b,
                      Index j) {
  if (spec.kind == KernelKind::sqexp) {
    double d2 = 0.0;
    for (Index c = 0; c < a.cols(); ++c) {
      const double d = a(i, c) - b(j, c);
      d2 += d * d;
    }
    return hp.sigma_f2 * std::exp(-d2 / (2.0 * hp.length_scale * hp.length_scale));
  }
  double dot = 0.0;
  for (Index c = 0; c < a.cols(); ++c) dot += a(i, c) * b(j, c);
  return hp.sigma_f2 * std::pow(hp.sigma_02 + dot, spec.order);
}

void check(const KernelSpec& spec, const KernelParams& hp, const MatrixXd& a, const MatrixXd& b) {
  spec.validate();
  hp.validate(spec);
  require(a.cols() == b.cols(), ErrorKind::shape, "point sets differ in dimension");
}

}  // namespace

MatrixXd gram_serial(const KernelSpec& spec, const KernelParams& hp, const MatrixXd& a, const MatrixXd& b) {
  check(spec, hp, a, b);
  MatrixXd k(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) k(i, j) = element(spec, hp, a, i, b, j);
  return k;
}

MatrixXd gram_parallel(const KernelSpec& spec, const KernelParams& hp, const MatrixXd& a, const MatrixXd& b) {
  check(spec, hp, a, b);
  MatrixXd k(a.rows(), b.rows());
  const Index rows = a.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < b.rows(); ++j) k(i, j) = element(spec, hp, a, i, b, j);
  return k;
}

MatrixXd gram_sym_serial(const KernelSpec& spec, const KernelParams& hp, const MatrixXd& a) {
  check(spec, hp, a, a);
  MatrixXd k(a.rows(), a.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = element(spec, hp, a, i, a, j);
  return k;
}

MatrixXd gram_sym_parallel(const KernelSpec& spec, const KernelParams& hp, const MatrixXd& a) {
  check(spec, hp, a, a);
  MatrixXd k(a.rows(), a.rows());
  const Index rows = a.rows();
  // rows have different lengths in the lower triangle
#pragma omp parallel for schedule(dynamic, 8)
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = element(spec, hp, a, i, a, j);
  return k;
}

namespace {

void predict_row(const GprModel& model, const MatrixXd& x, Index r, MatrixXd& out) {
  VectorXd k(model.n());
  for (Index i = 0; i < model.n(); ++i) k[i] = element(model.spec, model.hp, model.x_train, i, x, r);
  out(r, 0) = k.dot(model.alpha);
  const double prior = model.spec.kind == KernelKind::sqexp ? model.hp.sigma_f2 : element(model.spec, model.hp, x, r, x, r);
  out(r, 1) = std::max(0.0, prior - gpr_quadratic(model, k));
}

}  // namespace

MatrixXd predict_rows_serial(const GprModel& model, const MatrixXd& x) {
  require(x.cols() == model.dim(), ErrorKind::shape, "prediction points have the wrong dimension");
  MatrixXd out(x.rows(), 2);
  for (Index r = 0; r < x.rows(); ++r) predict_row(model, x, r, out);
  return out;
}

MatrixXd predict_rows_parallel(const GprModel& model, const MatrixXd& x) {
  require(x.cols() == model.dim(), ErrorKind::shape, "prediction points have the wrong dimension");
  MatrixXd out(x.rows(), 2);
  const Index rows = x.rows();
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) predict_row(model, x, r, out);
  return out;
}

VectorXd evaluate_rows_serial(const PointFn& f, const MatrixXd& x) {
  VectorXd out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) out[r] = f(x.row(r).transpose());
  return out;
}

VectorXd evaluate_rows_parallel(const PointFn& f, const MatrixXd& x) {
  VectorXd out(x.rows());
  const Index rows = x.rows();
#pragma omp parallel for schedule(dynamic, 16)
  for (Index r = 0; r < rows; ++r) out[r] = f(x.row(r).transpose());
  return out;
}

MatrixXd grid_points(const VectorXd& lo, const VectorXd& hi, const std::vector<int>& steps) {
  const auto m = lo.size();
  require(hi.size() == m && static_cast<Index>(steps.size()) == m, ErrorKind::shape, "grid bounds and steps disagree");
  Index total = 1;
  for (int s : steps) {
    require(s >= 1, ErrorKind::parameter, "grid needs at least one step per dimension");
    total *= s;
  }
  MatrixXd g(total, m);
  for (Index r = 0; r < total; ++r) {
    Index rem = r;
    for (Index j = m; j-- > 0;) {
      const int s = steps[static_cast<std::size_t>(j)];
      const Index k = rem % s;
      rem /= s;
      if (s == 1)
        g(r, j) = 0.5 * (lo[j] + hi[j]);
      else
        g(r, j) = k == s - 1 ? hi[j] : lo[j] + (hi[j] - lo[j]) * static_cast<double>(k) / (s - 1);
    }
  }
  return g;
}

}  // namespace sdfo::kernels
