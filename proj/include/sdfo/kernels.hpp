#pragma once

#include <functional>

#include <Eigen/Dense>

#include "sdfo/gp.hpp"

// Data-parallel kernels. Each has a plain serial reference and an OpenMP
// version; the two must agree exactly (same per-element arithmetic).
namespace sdfo::kernels {

Eigen::MatrixXd gram_serial(const KernelSpec& spec, const KernelParams& hp, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b);
Eigen::MatrixXd gram_parallel(const KernelSpec& spec, const KernelParams& hp, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

/// Symmetric Gram matrix of one point set (fills both triangles).
Eigen::MatrixXd gram_sym_serial(const KernelSpec& spec, const KernelParams& hp, const Eigen::MatrixXd& a);
Eigen::MatrixXd gram_sym_parallel(const KernelSpec& spec, const KernelParams& hp, const Eigen::MatrixXd& a);

/// Mean and variance columns for every row of x.
Eigen::MatrixXd predict_rows_serial(const GprModel& model, const Eigen::MatrixXd& x);
Eigen::MatrixXd predict_rows_parallel(const GprModel& model, const Eigen::MatrixXd& x);

/// f evaluated at every row of x (f must be thread-safe for the parallel one).
using PointFn = std::function<double(const Eigen::VectorXd&)>;
Eigen::VectorXd evaluate_rows_serial(const PointFn& f, const Eigen::MatrixXd& x);
Eigen::VectorXd evaluate_rows_parallel(const PointFn& f, const Eigen::MatrixXd& x);

/// Row-major grid with `steps[j]` evenly spaced values per dimension between
/// lo and hi inclusive; the first dimension varies slowest.
Eigen::MatrixXd grid_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const std::vector<int>& steps);

}  // namespace sdfo::kernels
