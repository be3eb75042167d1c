#include "sdfo/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "sdfo/error.hpp"

namespace sdfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

AcquisitionKind parse_acquisition(const std::string& name) {
  if (name == "ei") return AcquisitionKind::ei;
  if (name == "modified_ei") return AcquisitionKind::modified_ei;
  if (name == "pi") return AcquisitionKind::pi;
  if (name == "ucb") return AcquisitionKind::ucb;
  if (name == "max_std") return AcquisitionKind::max_std;
  if (name == "explore_triangle") return AcquisitionKind::explore_triangle;
  if (name == "exploit_triangle") return AcquisitionKind::exploit_triangle;
  fail(ErrorKind::parameter, "unknown acquisition '" + name + "'");
}

std::string to_string(AcquisitionKind k) {
  switch (k) {
    case AcquisitionKind::ei: return "ei";
    case AcquisitionKind::modified_ei: return "modified_ei";
    case AcquisitionKind::pi: return "pi";
    case AcquisitionKind::ucb: return "ucb";
    case AcquisitionKind::max_std: return "max_std";
    case AcquisitionKind::explore_triangle: return "explore_triangle";
    case AcquisitionKind::exploit_triangle: return "exploit_triangle";
  }
  return "?";
}

void AcquisitionSpec::validate() const {
  require(std::isfinite(xi) && xi >= 0, ErrorKind::parameter, "xi must be finite and >= 0");
}

double normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

// erfc keeps full relative accuracy in the lower tail
double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

double acquisition_value(const AcquisitionSpec& spec, double mean, double s, double y_best) {
  spec.validate();
  require(s >= 0, ErrorKind::parameter, "standard deviation must be >= 0");
  if (spec.sense == ObjSense::min) {
    mean = -mean;
    y_best = -y_best;
  }
  const double d = mean - y_best - spec.xi;
  switch (spec.kind) {
    case AcquisitionKind::ei: {
      if (s == 0.0) return std::max(d, 0.0);
      const double u = d / s;
      // s (u Phi(u) + phi(u)) form: never negative after rounding
      return std::max(0.0, s * (u * normal_cdf(u) + normal_pdf(u)));
    }
    case AcquisitionKind::modified_ei: {
      if (s == 0.0) return 0.0;
      return s * normal_pdf(d / s);
    }
    case AcquisitionKind::pi:
      if (s == 0.0) return d > 0 ? 1.0 : 0.0;
      return normal_cdf(d / s);
    case AcquisitionKind::ucb: return mean + spec.xi * s;
    default: break;
  }
  fail(ErrorKind::parameter, to_string(spec.kind) + " has no pointwise value");
}

double acquisition_value(const AcquisitionSpec& spec, const GprModel& model, const Eigen::Ref<const VectorXd>& x,
                         double y_best) {
  const auto p = gpr_predict(model, x);
  return acquisition_value(spec, p.mean, std::sqrt(p.variance), y_best);
}

double relative_sq_error(double y_true, double y_pred) {
  require(y_true != 0.0, ErrorKind::division_by_zero, "relative error needs a nonzero true value");
  const double r = (y_true - y_pred) / y_true;
  return r * r;
}

double departure(const GprModel& full, const GprModel& minus_j, const Eigen::Ref<const VectorXd>& x) {
  return gpr_predict(full, x).mean - gpr_predict(minus_j, x).mean;
}

namespace {

Formulation host_for(const SearchSpace& space) {
  Formulation f;
  for (int j = 0; j < space.dim(); ++j) {
    const std::string name = "x" + std::to_string(j);
    f.add_variable(name, space[j].lower, space[j].upper);
    f.inputs.push_back(name);
  }
  return f;
}

std::vector<Expr> host_inputs(const Formulation& f) {
  std::vector<Expr> x;
  for (const auto& n : f.inputs) x.push_back(Expr::var(n));
  return x;
}

}  // namespace

Formulation build_max_std_problem(const GprModel& model, const SearchSpace& space) {
  require(space.dim() == model.dim(), ErrorKind::shape, "box dimension does not match the model");
  Formulation f = host_for(space);
  const auto out = f.embed(gpr_uncertainty_block(model, space), host_inputs(f), "unc");
  if (model.spec.kind == KernelKind::sqexp)
    f.set_objective(out.at("proxy"), ObjSense::min);
  else
    f.set_objective(out.at("variance"), ObjSense::max);  // prior varies with x
  f.declared = f.scan_class();
  return f;
}

Formulation build_modified_ei_problem(const GprModel& model, double y_best, double xi, ObjSense sense,
                                      const SearchSpace& space) {
  require(space.dim() == model.dim(), ErrorKind::shape, "box dimension does not match the model");
  require(std::isfinite(xi) && xi >= 0, ErrorKind::parameter, "xi must be finite and >= 0");
  Formulation f = host_for(space);
  const auto x = host_inputs(f);
  const auto mean = f.embed(gpr_mean_block(model, space), x, "mean").at("y");
  const auto var = f.embed(gpr_uncertainty_block(model, space), x, "unc").at("variance");
  const double sgn = sense == ObjSense::max ? 1.0 : -1.0;
  // tiny floor keeps the expression finite where the variance rounds to <= 0
  const Expr v = f.define("ei_var", var + Expr(1e-12));
  const Expr d = f.define("ei_gap", Expr(sgn) * (mean - Expr(y_best)) - Expr(xi));
  f.set_objective(pow(v / Expr(2.0 * std::numbers::pi), 0.5) * exp(-pow(d, 2.0) / (Expr(2.0) * v)), ObjSense::max);
  f.declared = f.scan_class();
  return f;
}

// ------------------------------------------------------------------- regions

void RegionSelection::solve() {
  require(!eligible.empty(), ErrorKind::empty_eligible, "no eligible region");
  std::size_t best = 0;
  for (std::size_t i = 1; i < eligible.size(); ++i)
    if (scores[i] > scores[best]) best = i;  // strict: earlier index wins ties
  chosen = eligible[best];
  x = triangulation.centroids.row(static_cast<Eigen::Index>(*chosen)).transpose();
}

Formulation RegionSelection::as_formulation() const {
  require(!eligible.empty(), ErrorKind::empty_eligible, "no eligible region");
  Formulation f;
  std::vector<Expr> z, score, coord(static_cast<std::size_t>(triangulation.dim()));
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    z.push_back(f.add_variable("z" + std::to_string(eligible[i]), 0, 1, VarKind::binary));
    score.push_back(Expr(scores[i]) * z.back());
  }
  f.add_constraint("choose_one", sum(z), Relation::eq, Expr(1.0));
  for (int j = 0; j < triangulation.dim(); ++j) {
    std::vector<Expr> terms;
    for (std::size_t i = 0; i < eligible.size(); ++i)
      terms.push_back(Expr(triangulation.centroids(static_cast<Eigen::Index>(eligible[i]), j)) * z[i]);
    f.define("x" + std::to_string(j), sum(terms));
    f.add_output("x" + std::to_string(j), "x" + std::to_string(j));
  }
  f.set_objective(sum(score), ObjSense::max);
  f.declared = ProblemClass::MILP;
  return f;
}

namespace {

RegionSelection select_from(Triangulation tri, const std::optional<SearchSpace>& current,
                            const std::function<bool(std::size_t)>& keep) {
  RegionSelection rs;
  for (std::size_t s = 0; s < tri.size(); ++s) {
    if (!keep(s)) continue;
    if (current && !current->contains(tri.centroids.row(static_cast<Eigen::Index>(s)).transpose(), 1e-12)) continue;
    rs.eligible.push_back(s);
    rs.scores.push_back(tri.volumes[s]);
  }
  rs.triangulation = std::move(tri);
  require(!rs.eligible.empty(), ErrorKind::empty_eligible, "no simplex centroid lies inside the current bounds");
  return rs;
}

}  // namespace

RegionSelection build_explore_triangle_problem(const MatrixXd& points, const SearchSpace& space, bool include_vertices,
                                               const std::optional<SearchSpace>& current) {
  return select_from(triangulate(points, space, include_vertices), current, [](std::size_t) { return true; });
}

RegionSelection build_exploit_triangle_problem(const MatrixXd& points, const VectorXd& y, ObjSense sense,
                                               const SearchSpace& space, bool include_vertices,
                                               const std::optional<SearchSpace>& current) {
  require(y.size() == points.rows(), ErrorKind::shape, "y must have one value per point");
  require(y.size() > 0, ErrorKind::empty_request, "no samples");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < y.size(); ++i)
    if (sense == ObjSense::max ? y[i] > y[best] : y[i] < y[best]) best = i;
  Triangulation tri = triangulate(points, space, include_vertices);
  const int vertex = tri.index_of_input[static_cast<std::size_t>(best)];
  std::vector<bool> incident(tri.size(), false);
  for (std::size_t s = 0; s < tri.size(); ++s)
    for (int v : tri.simplices[s]) incident[s] = incident[s] || v == vertex;
  require(std::find(incident.begin(), incident.end(), true) != incident.end(), ErrorKind::internal,
          "best sample is not a triangulation vertex");
  return select_from(std::move(tri), current, [&](std::size_t s) { return incident[s]; });
}

SearchSpace adjust_bounds(const SearchSpace& space, const Eigen::Ref<const VectorXd>& center, double shrink) {
  require(shrink > 0 && shrink <= 1, ErrorKind::parameter, "shrink must be in (0, 1]");
  require(center.size() == space.dim(), ErrorKind::shape, "center dimension does not match the box");
  require(space.contains(center, 1e-12), ErrorKind::parameter, "center lies outside the box");
  std::vector<Bound> b;
  for (int j = 0; j < space.dim(); ++j) {
    const double half = shrink * 0.5 * (space[j].upper - space[j].lower);
    const double c = std::clamp(center[j], space[j].lower, space[j].upper);
    b.push_back({std::max(space[j].lower, c - half), std::min(space[j].upper, c + half)});
  }
  return SearchSpace(std::move(b));
}

Formulation with_feasibility(const Formulation& problem, const Formulation& classifier, double threshold) {
  require(classifier.has_output("latent"), ErrorKind::parameter, "classifier block has no latent output");
  Formulation f = problem;
  std::vector<Expr> x;
  for (const auto& n : problem.inputs) x.push_back(Expr::var(n));
  const auto out = f.embed(classifier, x, "feas");
  f.add_constraint("feasibility", out.at("latent"), Relation::ge, Expr(threshold));
  f.declared = f.scan_class();
  return f;
}

RegionSelection with_feasibility(const RegionSelection& selection, const Formulation& classifier, double threshold) {
  require(classifier.has_output("latent"), ErrorKind::parameter, "classifier block has no latent output");
  RegionSelection rs;
  rs.triangulation = selection.triangulation;
  for (std::size_t i = 0; i < selection.eligible.size(); ++i) {
    const VectorXd c = selection.triangulation.centroids.row(static_cast<Eigen::Index>(selection.eligible[i])).transpose();
    if (eval_formulation(classifier, c).outputs.at("latent") >= threshold) {
      rs.eligible.push_back(selection.eligible[i]);
      rs.scores.push_back(selection.scores[i]);
    }
  }
  require(!rs.eligible.empty(), ErrorKind::empty_eligible, "every candidate region fails the feasibility model");
  return rs;
}

}  // namespace sdfo
