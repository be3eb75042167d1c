#pragma once

#include <functional>

#include <Eigen/Dense>

namespace sdfo {

/// Objective returning f(x); writes the gradient into *grad when non-null.
/// A non-finite return value marks x as unusable (the line search backs off).
using ObjGrad = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoxMinOptions {
  int max_iters = 400;
  double gtol = 1e-9;   // projected-gradient infinity norm
  double ftol = 1e-15;  // relative decrease below which we stop
  double xtol = 1e-14;
};

struct BoxMinResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected BFGS for min f(x) over lo <= x <= hi. Variables sitting on a
/// bound with the gradient pushing outward are frozen for the step.
BoxMinResult minimize_box(const ObjGrad& fn, Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi, const BoxMinOptions& opts = {});

/// Central finite-difference gradient with a step relative to the box width.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi, double rel_step = 1e-6);

}  // namespace sdfo
