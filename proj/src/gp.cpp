#include "sdfo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sdfo/error.hpp"
#include "sdfo/kernels.hpp"
#include "sdfo/log.hpp"
#include "sdfo/optim.hpp"
#include "sdfo/sobol.hpp"

namespace sdfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

KernelKind parse_kernel(const std::string& name) {
  if (name == "sqexp") return KernelKind::sqexp;
  if (name == "poly") return KernelKind::poly;
  fail(ErrorKind::parameter, "unknown kernel '" + name + "'");
}

std::string to_string(KernelKind k) { return k == KernelKind::sqexp ? "sqexp" : "poly"; }

void KernelSpec::validate() const {
  if (kind == KernelKind::poly) require(order >= 1, ErrorKind::parameter, "polynomial order must be >= 1");
}

void KernelParams::validate(const KernelSpec& spec) const {
  require(sigma_f2 > 0 && std::isfinite(sigma_f2), ErrorKind::parameter, "sigma_f2 must be positive");
  if (spec.kind == KernelKind::sqexp)
    require(length_scale > 0 && std::isfinite(length_scale), ErrorKind::parameter, "length scale must be positive");
  else
    require(sigma_02 >= 0 && std::isfinite(sigma_02), ErrorKind::parameter, "sigma_02 must be >= 0");
}

double kernel_eval(const KernelSpec& spec, const KernelParams& hp, const Eigen::Ref<const VectorXd>& a,
                   const Eigen::Ref<const VectorXd>& b) {
  require(a.size() == b.size(), ErrorKind::shape, "kernel arguments differ in length");
  spec.validate();
  hp.validate(spec);
  if (spec.kind == KernelKind::sqexp) {
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
    return hp.sigma_f2 * std::exp(-d2 / (2.0 * hp.length_scale * hp.length_scale));
  }
  double dot = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) dot += a[j] * b[j];
  return hp.sigma_f2 * std::pow(hp.sigma_02 + dot, spec.order);
}

double kernel_prior(const KernelSpec& spec, const KernelParams& hp, const Eigen::Ref<const VectorXd>& x) {
  if (spec.kind == KernelKind::sqexp) return hp.sigma_f2;
  return kernel_eval(spec, hp, x, x);
}

namespace {

// Rows sorted lexicographically so a fit does not depend on input row order.
std::vector<Eigen::Index> canonical_order(const MatrixXd& x, const VectorXd& y) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    return y[a] < y[b];
  });
  return idx;
}

void reorder(MatrixXd& x, VectorXd& y) {
  const auto idx = canonical_order(x, y);
  MatrixXd xs(x.rows(), x.cols());
  VectorXd ys(y.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    xs.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    ys[static_cast<Eigen::Index>(i)] = y[idx[i]];
  }
  x = std::move(xs);
  y = std::move(ys);
}

struct HyperBox {
  VectorXd lo, hi;
};

// Search coordinates: sqexp (log l, log sf2); poly (log sf2, s02).
HyperBox hyper_box(const KernelSpec& spec) {
  HyperBox b{VectorXd(2), VectorXd(2)};
  if (spec.kind == KernelKind::sqexp) {
    b.lo << std::log(1e-2), std::log(1e-4);
    b.hi << std::log(1e2), std::log(1e4);
  } else {
    b.lo << std::log(1e-4), 0.0;
    b.hi << std::log(1e4), 1e2;
  }
  return b;
}

KernelParams from_theta(const KernelSpec& spec, const VectorXd& th) {
  KernelParams hp;
  if (spec.kind == KernelKind::sqexp) {
    hp.length_scale = std::exp(th[0]);
    hp.sigma_f2 = std::exp(th[1]);
  } else {
    hp.sigma_f2 = std::exp(th[0]);
    hp.sigma_02 = th[1];
  }
  return hp;
}

// NLL and its gradient in search coordinates: 0.5 tr((K^-1 - a a') dK).
double nll_with_grad(const MatrixXd& x, const VectorXd& y, const KernelSpec& spec, const VectorXd& th, double noise,
                     VectorXd* grad) {
  const auto hp = from_theta(spec, th);
  const auto n = x.rows();
  MatrixXd Kf = kernels::gram_sym_parallel(spec, hp, x);
  MatrixXd K = Kf;
  K.diagonal().array() += noise;
  Eigen::LLT<MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const VectorXd alpha = llt.solve(y);
  const MatrixXd& L = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));
  const double nll = 0.5 * y.dot(alpha) + logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(nll)) return std::numeric_limits<double>::infinity();
  if (grad) {
    const MatrixXd Q = llt.solve(MatrixXd::Identity(n, n)) - alpha * alpha.transpose();
    grad->resize(2);
    if (spec.kind == KernelKind::sqexp) {
      const double l2 = hp.length_scale * hp.length_scale;
      double gl = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) gl += Q(i, j) * Kf(i, j) * (x.row(i) - x.row(j)).squaredNorm() / l2;
      (*grad)[0] = 0.5 * gl;
      (*grad)[1] = 0.5 * Q.cwiseProduct(Kf).sum();
    } else {
      (*grad)[0] = 0.5 * Q.cwiseProduct(Kf).sum();
      const MatrixXd dot = x * x.transpose();
      double g0 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          g0 += Q(i, j) * hp.sigma_f2 * spec.order * std::pow(hp.sigma_02 + dot(i, j), spec.order - 1);
      (*grad)[1] = 0.5 * g0;
    }
    if (!grad->allFinite()) return std::numeric_limits<double>::infinity();
  }
  return nll;
}

void check_training(const MatrixXd& x, Eigen::Index targets) {
  require(x.rows() >= 2, ErrorKind::parameter, "GP fitting needs at least two points");
  require(x.rows() == targets, ErrorKind::shape, "x and targets differ in row count");
  require(x.allFinite(), ErrorKind::parameter, "training inputs must be finite");
}

}  // namespace

double gpr_nll(const MatrixXd& x, const VectorXd& y, const KernelSpec& spec, const KernelParams& hp, double noise) {
  VectorXd th(2);
  if (spec.kind == KernelKind::sqexp)
    th << std::log(hp.length_scale), std::log(hp.sigma_f2);
  else
    th << std::log(hp.sigma_f2), hp.sigma_02;
  return nll_with_grad(x, y, spec, th, noise, nullptr);
}

GprModel gpr_condition(const MatrixXd& x_in, const VectorXd& y_in, const KernelSpec& spec, const KernelParams& hp,
                       double noise) {
  spec.validate();
  hp.validate(spec);
  check_training(x_in, y_in.size());
  require(noise >= 0, ErrorKind::parameter, "noise must be >= 0");
  MatrixXd x = x_in;
  VectorXd y = y_in;
  reorder(x, y);

  const auto n = x.rows();
  const MatrixXd Kf = kernels::gram_sym_parallel(spec, hp, x);
  double nug = noise;
  for (;;) {
    MatrixXd K = Kf;
    K.diagonal().array() += nug;
    Eigen::LLT<MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) {
      GprModel m;
      m.spec = spec;
      m.hp = hp;
      m.noise = nug;
      m.x_train = std::move(x);
      m.y_train = std::move(y);
      m.alpha = llt.solve(m.y_train);
      m.inv_K = llt.solve(MatrixXd::Identity(n, n));
      m.inv_K = 0.5 * (m.inv_K + m.inv_K.transpose()).eval();
      m.chol = llt.matrixL();
      m.nll = gpr_nll(m.x_train, m.y_train, spec, hp, nug);
      if (nug != noise) {
        std::ostringstream os;
        os << "GP nugget raised from " << noise << " to " << nug;
        diag::warn(os.str());
      }
      return m;
    }
    const double next = std::max(nug, 1e-12) * 10.0;
    if (next > 1e-4 * (1 + 1e-12)) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(K, Eigen::EigenvaluesOnly);
      const auto ev = es.eigenvalues();
      std::ostringstream os;
      os << "Cholesky failed with nugget " << nug << "; eigenvalue range [" << ev.minCoeff() << ", " << ev.maxCoeff()
         << "], condition estimate " << ev.maxCoeff() / std::max(std::abs(ev.minCoeff()), 1e-300);
      fail(ErrorKind::ill_conditioned, os.str());
    }
    nug = next;
  }
}

GprModel gpr_fit(const MatrixXd& x_in, const VectorXd& y_in, const KernelSpec& spec, double noise,
                 const GpFitOptions& opts) {
  spec.validate();
  check_training(x_in, y_in.size());
  if (!opts.optimize) return gpr_condition(x_in, y_in, spec, opts.initial, noise);
  require(opts.starts >= 1, ErrorKind::parameter, "need at least one multistart");
  MatrixXd x = x_in;
  VectorXd y = y_in;
  reorder(x, y);

  const auto box = hyper_box(spec);
  const MatrixXd design = shifted_sobol_points(static_cast<std::size_t>(opts.starts), 2, opts.seed);
  auto fn = [&](const VectorXd& th, VectorXd* g) { return nll_with_grad(x, y, spec, th, noise, g); };

  std::vector<double> start_nll(static_cast<std::size_t>(opts.starts));
  std::vector<BoxMinResult> results(static_cast<std::size_t>(opts.starts));
  for (int s = 0; s < opts.starts; ++s) {
    const VectorXd th0 = box.lo + design.row(s).transpose().cwiseProduct(box.hi - box.lo);
    start_nll[static_cast<std::size_t>(s)] = fn(th0, nullptr);
    BoxMinOptions bo;
    bo.max_iters = 200;
    bo.gtol = 1e-7;
    results[static_cast<std::size_t>(s)] = minimize_box(fn, th0, box.lo, box.hi, bo);
  }
  int best = -1;
  for (int s = 0; s < opts.starts; ++s) {
    const auto& r = results[static_cast<std::size_t>(s)];
    if (std::isfinite(r.f) && (best < 0 || r.f < results[static_cast<std::size_t>(best)].f)) best = s;
  }
  if (best < 0) fail(ErrorKind::ill_conditioned, "no multistart produced a factorisable covariance matrix");

  auto model = gpr_condition(x, y, spec, from_theta(spec, results[static_cast<std::size_t>(best)].x), noise);
  model.start_nll = std::move(start_nll);
  return model;
}

GpPrediction gpr_predict(const GprModel& model, const Eigen::Ref<const VectorXd>& x) {
  require(x.size() == model.dim(), ErrorKind::shape, "prediction point has the wrong dimension");
  VectorXd k(model.n());
  for (int i = 0; i < model.n(); ++i) k[i] = kernel_eval(model.spec, model.hp, model.x_train.row(i).transpose(), x);
  GpPrediction p;
  p.mean = k.dot(model.alpha);
  p.variance = std::max(0.0, kernel_prior(model.spec, model.hp, x) - gpr_quadratic(model, k));
  return p;
}

double gpr_quadratic(const GprModel& model, const Eigen::Ref<const VectorXd>& k) {
  if (model.chol.rows() != model.n()) return k.dot(model.inv_K * k);
  const VectorXd v = model.chol.triangularView<Eigen::Lower>().solve(k);
  return v.squaredNorm();
}

void gpr_refactor(GprModel& model) {
  MatrixXd K = kernels::gram_sym_serial(model.spec, model.hp, model.x_train);
  K.diagonal().array() += model.noise;
  Eigen::LLT<MatrixXd> llt(K);
  model.chol = llt.info() == Eigen::Success ? MatrixXd(llt.matrixL()) : MatrixXd();
}

double gpr_mean_sum(const GprModel& model, const Eigen::Ref<const VectorXd>& x) {
  double s = 0.0;
  for (int i = 0; i < model.n(); ++i)
    s += model.alpha[i] * kernel_eval(model.spec, model.hp, model.x_train.row(i).transpose(), x);
  return s;
}

double gpr_proxy_sum(const GprModel& model, const Eigen::Ref<const VectorXd>& x) {
  VectorXd k(model.n());
  for (int i = 0; i < model.n(); ++i) k[i] = kernel_eval(model.spec, model.hp, model.x_train.row(i).transpose(), x);
  double s = 0.0;
  for (int i = 0; i < model.n(); ++i) {
    double inner = 0.0;
    for (int j = 0; j < model.n(); ++j) inner += model.inv_K(i, j) * k[j];
    s += k[i] * inner;
  }
  return s;
}

// ------------------------------------------------------------------------ GPC

namespace {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log1pexp(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// log-likelihood of the labels plus the Gaussian prior term, up to constants
double psi(const VectorXd& a, const VectorXd& f, const VectorXd& t) {
  double s = -0.5 * a.dot(f);
  for (Eigen::Index i = 0; i < f.size(); ++i) s += t[i] * f[i] - log1pexp(f[i]);
  return s;
}

struct NewtonFactor {
  VectorXd pi, w, sw;
  Eigen::LLT<MatrixXd> llt;
};

NewtonFactor factor(const MatrixXd& K, const VectorXd& f) {
  NewtonFactor nf;
  nf.pi = f.unaryExpr([](double v) { return logistic(v); });
  nf.w = nf.pi.cwiseProduct((1.0 - nf.pi.array()).matrix());
  nf.sw = nf.w.cwiseSqrt();
  MatrixXd B = nf.sw.asDiagonal() * K * nf.sw.asDiagonal();
  B.diagonal().array() += 1.0;
  nf.llt.compute(B);
  return nf;
}

void check_labels(const VectorXd& t) {
  bool zero = false, one = false;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    require(t[i] == 0.0 || t[i] == 1.0, ErrorKind::parameter, "classification targets must be 0 or 1");
    zero |= t[i] == 0.0;
    one |= t[i] == 1.0;
  }
  require(zero && one, ErrorKind::degenerate_targets, "classification needs both classes in the targets");
}

}  // namespace

LaplaceMode gpc_mode(const MatrixXd& x, const VectorXd& t, const KernelParams& hp) {
  const KernelSpec spec{KernelKind::sqexp, 1};
  hp.validate(spec);
  const MatrixXd K = kernels::gram_sym_parallel(spec, hp, x);
  const auto n = x.rows();
  LaplaceMode m;
  m.f = VectorXd::Zero(n);
  m.a = VectorXd::Zero(n);
  double step = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= 100; ++it) {
    const auto nf = factor(K, m.f);
    if (nf.llt.info() != Eigen::Success) fail(ErrorKind::fit, "Laplace Newton step: B is not positive definite");
    const VectorXd b = nf.w.cwiseProduct(m.f) + (t - nf.pi);
    const VectorXd c = nf.sw.cwiseProduct(nf.llt.solve(nf.sw.cwiseProduct(K * b)));
    VectorXd a_new = b - c;
    VectorXd f_new = K * a_new;
    // damped step: halve until the objective does not decrease
    const double psi_old = psi(m.a, m.f, t);
    for (int h = 0; h < 30 && psi(a_new, f_new, t) < psi_old - 1e-12 * std::abs(psi_old); ++h) {
      a_new = 0.5 * (a_new + m.a);
      f_new = K * a_new;
    }
    step = (f_new - m.f).lpNorm<Eigen::Infinity>();
    m.f = std::move(f_new);
    m.a = std::move(a_new);
    m.iterations = it;
    if (!m.f.allFinite()) fail(ErrorKind::fit, "Laplace iteration produced non-finite latent values");
    if (step <= 1e-8) {
      const auto nf2 = factor(K, m.f);
      double logdet = 0.0;
      const MatrixXd& L = nf2.llt.matrixLLT();
      for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));
      m.nll = -psi(m.a, m.f, t) + logdet;
      return m;
    }
  }
  std::ostringstream os;
  os << "Laplace mode did not converge in 100 iterations (last step " << step << ", max |f| "
     << m.f.lpNorm<Eigen::Infinity>() << ", l " << hp.length_scale << ", sigma_f2 " << hp.sigma_f2 << ")";
  fail(ErrorKind::fit, os.str());
}

GpcModel gpc_condition(const MatrixXd& x_in, const VectorXd& t_in, const KernelParams& hp) {
  check_training(x_in, t_in.size());
  check_labels(t_in);
  MatrixXd x = x_in;
  VectorXd t = t_in;
  reorder(x, t);
  const auto mode = gpc_mode(x, t, hp);
  const KernelSpec spec{KernelKind::sqexp, 1};
  const MatrixXd K = kernels::gram_sym_parallel(spec, hp, x);
  const auto nf = factor(K, mode.f);
  const auto n = x.rows();

  GpcModel g;
  g.x_train = std::move(x);
  g.t_train = std::move(t);
  g.hp = hp;
  g.u_hat = mode.f;
  g.a_hat = mode.a;
  g.delta = g.t_train - nf.pi;
  g.w = nf.w;
  g.inv_P = nf.sw.asDiagonal() * nf.llt.solve(MatrixXd::Identity(n, n)) * nf.sw.asDiagonal();
  g.inv_P = 0.5 * (g.inv_P + g.inv_P.transpose()).eval();
  g.nll = mode.nll;
  g.newton_iterations = mode.iterations;
  return g;
}

GpcModel gpc_fit(const MatrixXd& x_in, const VectorXd& t_in, const GpFitOptions& opts) {
  check_training(x_in, t_in.size());
  check_labels(t_in);
  if (!opts.optimize) return gpc_condition(x_in, t_in, opts.initial);
  MatrixXd x = x_in;
  VectorXd t = t_in;
  reorder(x, t);

  const KernelSpec spec{KernelKind::sqexp, 1};
  const auto box = hyper_box(spec);
  auto value = [&](const VectorXd& th) {
    try {
      return gpc_mode(x, t, from_theta(spec, th)).nll;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto fn = [&](const VectorXd& th, VectorXd* g) {
    const double f = value(th);
    if (g && std::isfinite(f)) *g = numeric_gradient(value, th, box.lo, box.hi, 1e-6);
    return f;
  };
  const MatrixXd design = shifted_sobol_points(static_cast<std::size_t>(opts.starts), 2, opts.seed);
  std::vector<double> start_nll;
  int best = -1;
  BoxMinResult best_r;
  for (int s = 0; s < opts.starts; ++s) {
    const VectorXd th0 = box.lo + design.row(s).transpose().cwiseProduct(box.hi - box.lo);
    start_nll.push_back(value(th0));
    BoxMinOptions bo;
    bo.max_iters = 100;
    bo.gtol = 1e-6;
    auto r = minimize_box(fn, th0, box.lo, box.hi, bo);
    if (std::isfinite(r.f) && (best < 0 || r.f < best_r.f)) {
      best = s;
      best_r = std::move(r);
    }
  }
  if (best < 0) fail(ErrorKind::fit, "Laplace approximation failed at every multistart point");
  auto model = gpc_condition(x, t, from_theta(spec, best_r.x));
  model.start_nll = std::move(start_nll);
  return model;
}

double gpc_latent(const GpcModel& model, const Eigen::Ref<const VectorXd>& x) {
  require(x.size() == model.dim(), ErrorKind::shape, "prediction point has the wrong dimension");
  const KernelSpec spec{KernelKind::sqexp, 1};
  VectorXd k(model.n());
  for (int i = 0; i < model.n(); ++i) k[i] = kernel_eval(spec, model.hp, model.x_train.row(i).transpose(), x);
  const double mean = k.dot(model.delta);
  const double var = model.hp.sigma_f2 - k.dot(model.inv_P * k);
  return mean / std::sqrt(1.0 + std::numbers::pi / 8.0 * var);
}

double gpc_predict(const GpcModel& model, const Eigen::Ref<const VectorXd>& x) {
  return logistic(gpc_latent(model, x));
}

double gpc_mode_residual(const GpcModel& model) {
  VectorXd r(model.n());
  for (int i = 0; i < model.n(); ++i) r[i] = model.t_train[i] - logistic(model.u_hat[i]) - model.a_hat[i];
  return r.lpNorm<Eigen::Infinity>();
}

}  // namespace sdfo
