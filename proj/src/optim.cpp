#include "sdfo/optim.hpp"

#include <cmath>
#include <limits>

namespace sdfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd project(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Infinity norm of x - P(x - g): zero exactly at a KKT point of the box problem.
double projected_gradient_norm(const VectorXd& x, const VectorXd& g, const VectorXd& lo,
                               const VectorXd& hi) {
  return (x - project(x - g, lo, hi)).lpNorm<Eigen::Infinity>();
}

}  // namespace

BoxMinResult minimize_box(const ObjGrad& fn, VectorXd x0, const VectorXd& lo, const VectorXd& hi,
                          const BoxMinOptions& opts) {
  const auto n = x0.size();
  BoxMinResult res;
  res.x = project(x0, lo, hi);
  if (n == 0) {
    res.f = fn(res.x, nullptr);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }

  VectorXd g(n);
  res.f = fn(res.x, &g);
  ++res.evaluations;
  if (!std::isfinite(res.f) || !g.allFinite()) return res;

  MatrixXd H = MatrixXd::Identity(n, n);
  bool fresh = true;  // H is the identity (or a scaled one)

  for (int it = 0; it < opts.max_iters; ++it) {
    res.iterations = it + 1;
    if (projected_gradient_norm(res.x, g, lo, hi) <= opts.gtol) {
      res.converged = true;
      break;
    }

    // active set: on a bound with the gradient pointing out of the box
    std::vector<bool> active(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      active[i] = (res.x[i] <= lo[i] && g[i] > 0) || (res.x[i] >= hi[i] && g[i] < 0) || lo[i] == hi[i];
    }
    VectorXd gf = g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) gf[i] = 0;

    VectorXd d = -(H * gf);
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) d[i] = 0;
    if (!(d.dot(gf) < 0)) {
      H.setIdentity();
      fresh = true;
      d = -gf;
    }

    // Armijo backtracking along the projected path
    double t = 1.0;
    VectorXd xn, gn(n);
    double fn_val = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = project(res.x + t * d, lo, hi);
      if ((xn - res.x).lpNorm<Eigen::Infinity>() == 0.0) break;
      fn_val = fn(xn, &gn);
      ++res.evaluations;
      if (std::isfinite(fn_val) && gn.allFinite() && fn_val <= res.f + 1e-4 * g.dot(xn - res.x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        H.setIdentity();
        fresh = true;
        continue;
      }
      res.converged = projected_gradient_norm(res.x, g, lo, hi) <= std::sqrt(opts.gtol);
      break;
    }

    const VectorXd s = xn - res.x;
    const VectorXd y = gn - g;
    const double f_old = res.f;
    res.x = xn;
    res.f = fn_val;
    g = gn;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        H *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const VectorXd Hy = H * y;
      H += ((sy + y.dot(Hy)) * rho * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    if (std::abs(f_old - res.f) <= opts.ftol * std::max(1.0, std::abs(res.f)) &&
        s.lpNorm<Eigen::Infinity>() <= opts.xtol * std::max(1.0, res.x.lpNorm<Eigen::Infinity>())) {
      res.converged = true;
      break;
    }
  }
  return res;
}

VectorXd numeric_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                          const VectorXd& lo, const VectorXd& hi, double rel_step) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, hi[i] - lo[i]);
    VectorXd a = x, b = x;
    a[i] = std::min(hi[i], x[i] + h);
    b[i] = std::max(lo[i], x[i] - h);
    const double span = a[i] - b[i];
    g[i] = span > 0 ? (f(a) - f(b)) / span : 0.0;
  }
  return g;
}

}  // namespace sdfo
