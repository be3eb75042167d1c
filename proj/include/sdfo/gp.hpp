#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sdfo {

enum class KernelKind { sqexp, poly };

KernelKind parse_kernel(const std::string& name);
std::string to_string(KernelKind k);

struct KernelSpec {
  KernelKind kind = KernelKind::sqexp;
  int order = 1;  // poly only; 1 is the linear kernel

  void validate() const;
};

struct KernelParams {
  double length_scale = 1.0;  // sqexp
  double sigma_f2 = 1.0;
  double sigma_02 = 0.0;  // poly

  void validate(const KernelSpec& spec) const;
};

double kernel_eval(const KernelSpec& spec, const KernelParams& hp, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b);

/// k(x, x): sigma_f2 for sqexp, sigma_f2 (sigma_02 + x.x)^order for poly.
double kernel_prior(const KernelSpec& spec, const KernelParams& hp, const Eigen::Ref<const Eigen::VectorXd>& x);

struct GprModel {
  KernelSpec spec;
  KernelParams hp;
  double noise = 1e-10;  // nugget actually used (after escalation)
  Eigen::MatrixXd x_train;  // scaled space
  Eigen::VectorXd y_train;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd inv_K;
  Eigen::MatrixXd chol;  // lower factor of K + noise I; not serialised, rebuilt on load
  double nll = 0.0;
  std::vector<double> start_nll;  // objective at each multistart initial point

  int dim() const { return static_cast<int>(x_train.cols()); }
  int n() const { return static_cast<int>(x_train.rows()); }
};

struct GpFitOptions {
  int starts = 8;
  std::uint64_t seed = 0;
  bool optimize = true;  // false: condition on `initial` only
  KernelParams initial;
};

/// Negative log marginal likelihood; +inf when K cannot be factorised.
double gpr_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const KernelSpec& spec, const KernelParams& hp,
               double noise);

/// Multi-start MLE of the hyperparameters, then conditioning on the data.
GprModel gpr_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const KernelSpec& spec, double noise = 1e-10,
                 const GpFitOptions& opts = {});

/// Conditioning with fixed hyperparameters (nugget escalation applies).
GprModel gpr_condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const KernelSpec& spec,
                       const KernelParams& hp, double noise = 1e-10);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// k' (K + noise I)^-1 k. Uses the Cholesky factor when present: the explicit
/// inverse loses digits to cancellation once K is badly conditioned.
double gpr_quadratic(const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& k);
/// Recompute the Cholesky factor from x_train, hp and noise (empty on failure).
void gpr_refactor(GprModel& model);

GpPrediction gpr_predict(const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// The two summation forms used by the algebraic blocks: sum_i alpha_i k_i
/// and sum_i k_i sum_j invK_ij k_j, evaluated term by term.
double gpr_mean_sum(const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double gpr_proxy_sum(const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Laplace-approximation classifier with a squared-exponential kernel.
struct GpcModel {
  Eigen::MatrixXd x_train;
  Eigen::VectorXd t_train;
  KernelParams hp;
  Eigen::VectorXd u_hat;
  Eigen::VectorXd a_hat;  // K^-1 u_hat, carried by the Newton iteration
  Eigen::VectorXd delta;  // t - sigmoid(u_hat)
  Eigen::VectorXd w;      // diagonal of W
  Eigen::MatrixXd inv_P;  // (W^-1 + K)^-1 in the stabilised form
  double nll = 0.0;
  int newton_iterations = 0;
  std::vector<double> start_nll;

  int dim() const { return static_cast<int>(x_train.cols()); }
  int n() const { return static_cast<int>(x_train.rows()); }
};

struct LaplaceMode {
  Eigen::VectorXd f;
  Eigen::VectorXd a;  // K^-1 f
  double nll = 0.0;
  int iterations = 0;
};

/// Newton iteration for the latent mode at fixed hyperparameters.
LaplaceMode gpc_mode(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const KernelParams& hp);

GpcModel gpc_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const GpFitOptions& opts = {});
GpcModel gpc_condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const KernelParams& hp);

/// Argument of the sigmoid: k.delta / sqrt(1 + pi/8 (sigma_f2 - k' inv_P k)).
double gpc_latent(const GpcModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double gpc_predict(const GpcModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Infinity norm of t - sigmoid(u) - K^-1 u at the stored mode.
double gpc_mode_residual(const GpcModel& model);

}  // namespace sdfo
