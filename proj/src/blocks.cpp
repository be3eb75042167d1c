// Surrogate models rendered as algebraic formulations.
#include <cmath>
#include <numbers>

#include "sdfo/error.hpp"
#include "sdfo/formul.hpp"

namespace sdfo {

namespace {

std::vector<Expr> add_inputs(Formulation& f, int m, const std::optional<SearchSpace>& space) {
  if (space) require(space->dim() == m, ErrorKind::shape, "input box dimension does not match the model");
  std::vector<Expr> x;
  for (int j = 0; j < m; ++j) {
    const std::string name = "x" + std::to_string(j);
    x.push_back(space ? f.add_variable(name, (*space)[j].lower, (*space)[j].upper) : f.add_variable(name));
    f.inputs.push_back(name);
  }
  return x;
}

std::string idx(int l, int j) { return std::to_string(l) + "_" + std::to_string(j); }

Expr smooth_activation(Activation act, const Expr& z) {
  switch (act) {
    case Activation::linear: return z;
    case Activation::tanh: return Expr(1.0) - Expr(2.0) / (exp(Expr(2.0) * z) + Expr(1.0));
    case Activation::sigmoid: return Expr(1.0) / (Expr(1.0) + exp(-z));
    case Activation::softplus: return log(Expr(1.0) + exp(z));
    default: break;
  }
  fail(ErrorKind::internal, "not a smooth activation");
}

Interval activation_interval(Activation act, Interval z) {
  // every supported activation is monotone non-decreasing
  return {activation_eval(act, z.lo), activation_eval(act, z.hi)};
}

// sum_i c_i * x_i + b, dropping exact zeros
Expr affine(const Eigen::Ref<const Eigen::VectorXd>& c, const std::vector<Expr>& x, double b) {
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = c[static_cast<Eigen::Index>(i)];
    if (w != 0.0) terms.push_back(Expr(w) * x[i]);
  }
  terms.push_back(Expr(b));
  return sum(terms);
}

Expr kernel_expr(const KernelSpec& spec, const KernelParams& hp, const std::vector<Expr>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& xi) {
  std::vector<Expr> terms;
  if (spec.kind == KernelKind::sqexp) {
    for (std::size_t j = 0; j < x.size(); ++j) terms.push_back(pow(x[j] - Expr(xi[static_cast<Eigen::Index>(j)]), 2.0));
    return Expr(hp.sigma_f2) * exp(-sum(terms) / Expr(2.0 * hp.length_scale * hp.length_scale));
  }
  for (std::size_t j = 0; j < x.size(); ++j) terms.push_back(Expr(xi[static_cast<Eigen::Index>(j)]) * x[j]);
  terms.push_back(Expr(hp.sigma_02));
  return Expr(hp.sigma_f2) * pow(sum(terms), static_cast<double>(spec.order));
}

// prior variance k(x, x) as an expression
Expr prior_expr(const KernelSpec& spec, const KernelParams& hp, const std::vector<Expr>& x) {
  if (spec.kind == KernelKind::sqexp) return Expr(hp.sigma_f2);
  std::vector<Expr> terms;
  for (const auto& xj : x) terms.push_back(pow(xj, 2.0));
  terms.push_back(Expr(hp.sigma_02));
  return Expr(hp.sigma_f2) * pow(sum(terms), static_cast<double>(spec.order));
}

std::vector<Expr> define_kernels(Formulation& f, const KernelSpec& spec, const KernelParams& hp,
                                 const std::vector<Expr>& x, const Eigen::MatrixXd& xt) {
  std::vector<Expr> k;
  for (Eigen::Index i = 0; i < xt.rows(); ++i)
    k.push_back(f.define("k" + std::to_string(i), kernel_expr(spec, hp, x, xt.row(i).transpose())));
  return k;
}

// sum_i k_i sum_j A_ij k_j
Expr quadratic(const Eigen::MatrixXd& a, const std::vector<Expr>& k) {
  std::vector<Expr> outer;
  for (std::size_t i = 0; i < k.size(); ++i) {
    std::vector<Expr> inner;
    for (std::size_t j = 0; j < k.size(); ++j) {
      const double c = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (c != 0.0) inner.push_back(Expr(c) * k[j]);
    }
    outer.push_back(k[i] * sum(inner));
  }
  return sum(outer);
}

}  // namespace

std::vector<std::vector<Interval>> nn_preactivation_bounds(const NetworkParams& params, const SearchSpace& space) {
  params.validate();
  const auto& sizes = params.shape.layer_sizes;
  require(space.dim() == sizes.front(), ErrorKind::shape, "input box dimension does not match the network");
  std::vector<Interval> a;
  for (int j = 0; j < space.dim(); ++j) a.push_back({space[j].lower, space[j].upper});
  std::vector<std::vector<Interval>> out;
  for (std::size_t l = 0; l + 1 < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    std::vector<Interval> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double lo = params.biases[l][r], hi = lo;
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double wc = w(r, c);
        const auto& ac = a[static_cast<std::size_t>(c)];
        lo += wc >= 0 ? wc * ac.lo : wc * ac.hi;
        hi += wc >= 0 ? wc * ac.hi : wc * ac.lo;
      }
      z[static_cast<std::size_t>(r)] = {lo, hi};
    }
    a.clear();
    for (const auto& zi : z) a.push_back(activation_interval(params.shape.activation, zi));
    out.push_back(std::move(z));
  }
  return out;
}

Formulation nn_block(const NetworkParams& params, const std::optional<SearchSpace>& input_space) {
  params.validate();
  const Activation act = params.shape.activation;
  const bool piecewise = is_piecewise(act);
  require(!piecewise || input_space.has_value(), ErrorKind::bounds_required,
          to_string(act) + " layers need finite input bounds to derive big-M constants");
  Formulation f;
  std::vector<Expr> a = add_inputs(f, params.shape.layer_sizes.front(), input_space);
  std::vector<std::vector<Interval>> zb;
  if (input_space) zb = nn_preactivation_bounds(params, *input_space);

  const std::size_t hidden = params.weights.size() - 1;
  for (std::size_t l = 0; l < hidden; ++l) {
    const int layer = static_cast<int>(l) + 1;
    const auto& w = params.weights[l];
    std::vector<Expr> next;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const int j = static_cast<int>(r);
      Expr z = f.define("z" + idx(layer, j), affine(w.row(r).transpose(), a, params.biases[l][r]));
      if (!piecewise) {
        next.push_back(f.define("a" + idx(layer, j), smooth_activation(act, z)));
        continue;
      }
      const Interval iv = zb[l][static_cast<std::size_t>(r)];
      const std::string an = "a" + idx(layer, j), pn = "p" + idx(layer, j), qn = "q" + idx(layer, j);
      if (act == Activation::relu) {
        const double big = std::max(std::abs(iv.lo), std::abs(iv.hi)) + 1.0;
        Expr av = f.add_variable(an, 0.0, std::max(0.0, iv.hi));
        Expr p = f.add_variable(pn, 0.0, 1.0, VarKind::binary);
        f.add_constraint("relu_lb_" + idx(layer, j), av, Relation::ge, z);
        f.add_constraint("relu_on_" + idx(layer, j), av, Relation::le, Expr(big) * p);
        f.add_constraint("relu_off_" + idx(layer, j), av, Relation::le, z + Expr(big) * (Expr(1.0) - p));
        f.groups.push_back({PieceKind::relu, "z" + idx(layer, j), an, pn, ""});
        next.push_back(av);
      } else {
        // +4 rather than +1: the breakpoints sit at +-3, so the relaxed
        // constraints must stay slack by 3 beyond the interval of z
        const double big = std::max(std::abs(iv.lo), std::abs(iv.hi)) + 4.0;
        Expr av = f.add_variable(an, 0.0, 1.0);
        Expr p = f.add_variable(pn, 0.0, 1.0, VarKind::binary);
        Expr q = f.add_variable(qn, 0.0, 1.0, VarKind::binary);
        const Expr m(big);
        const std::string s = "_" + idx(layer, j);
        f.add_constraint("hs_p_lo" + s, z, Relation::ge, Expr(-3.0) - m * (Expr(1.0) - p));
        f.add_constraint("hs_p_hi" + s, z, Relation::le, Expr(-3.0) + m * p);
        f.add_constraint("hs_q_lo" + s, z, Relation::ge, Expr(3.0) - m * (Expr(1.0) - q));
        f.add_constraint("hs_q_hi" + s, z, Relation::le, Expr(3.0) + m * q);
        f.add_constraint("hs_a_p" + s, av, Relation::le, p);
        f.add_constraint("hs_a_q" + s, av, Relation::ge, q);
        const Expr slack = m * (Expr(1.0) - p + q);
        const Expr mid = z / Expr(6.0) + Expr(0.5);
        f.add_constraint("hs_mid_lo" + s, av, Relation::ge, mid - slack);
        f.add_constraint("hs_mid_hi" + s, av, Relation::le, mid + slack);
        f.groups.push_back({PieceKind::hardsigmoid, "z" + idx(layer, j), an, pn, qn});
        next.push_back(av);
      }
    }
    a = std::move(next);
  }
  const auto& w = params.weights.back();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    const std::string name = "y" + std::to_string(r);
    f.define(name, affine(w.row(r).transpose(), a, params.biases.back()[r]));
    f.add_output(name, name);
  }
  if (params.shape.is_classifier) f.add_output("latent", "y0");

  if (act == Activation::linear) f.declared = ProblemClass::LP;
  else f.declared = piecewise ? ProblemClass::MILP : ProblemClass::NLP;
  return f;
}

Formulation gpr_mean_block(const GprModel& model, const std::optional<SearchSpace>& input_space) {
  Formulation f;
  const auto x = add_inputs(f, model.dim(), input_space);
  std::vector<Expr> terms;
  for (int i = 0; i < model.n(); ++i) {
    if (model.alpha[i] == 0.0) continue;
    terms.push_back(Expr(model.alpha[i]) * kernel_expr(model.spec, model.hp, x, model.x_train.row(i).transpose()));
  }
  f.define("y", sum(terms));
  f.add_output("y", "y");
  f.declared = f.scan_class();
  return f;
}

Formulation gpr_uncertainty_block(const GprModel& model, const std::optional<SearchSpace>& input_space) {
  Formulation f;
  const auto x = add_inputs(f, model.dim(), input_space);
  const auto k = define_kernels(f, model.spec, model.hp, x, model.x_train);
  Expr proxy = f.define("proxy", quadratic(model.inv_K, k));
  f.define("variance", prior_expr(model.spec, model.hp, x) - proxy);
  f.add_output("proxy", "proxy");
  f.add_output("variance", "variance");
  f.declared = f.scan_class();
  return f;
}

Formulation gpc_block(const GpcModel& model, const std::optional<SearchSpace>& input_space) {
  Formulation f;
  const auto x = add_inputs(f, model.dim(), input_space);
  const KernelSpec spec{KernelKind::sqexp, 1};
  const auto k = define_kernels(f, spec, model.hp, x, model.x_train);
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < k.size(); ++i) terms.push_back(Expr(model.delta[static_cast<Eigen::Index>(i)]) * k[i]);
  Expr mean = f.define("mean_latent", sum(terms));
  Expr quad = f.define("quad", quadratic(model.inv_P, k));
  Expr scale = pow(Expr(1.0) + Expr(std::numbers::pi / 8.0) * (Expr(model.hp.sigma_f2) - quad), -0.5);
  Expr latent = f.define("latent", mean * scale);
  f.define("p", Expr(1.0) / (Expr(1.0) + exp(-latent)));
  f.add_output("latent", "latent");
  f.add_output("p", "p");
  f.declared = f.scan_class();
  return f;
}

}  // namespace sdfo
