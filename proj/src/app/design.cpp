#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

#include "shared.hpp"
#include "sdfo/log.hpp"

namespace sdfo::app {

using Eigen::VectorXd;
using namespace detail;

namespace {

std::unordered_map<std::string, double> as_assignment(const Solution& s) {
  return {s.values.begin(), s.values.end()};
}

VectorXd point_of(const ModelSet& models, const Solution& s, const std::map<std::string, double>& params = {}) {
  VectorXd x(static_cast<Eigen::Index>(models.inputs.size()));
  for (std::size_t j = 0; j < models.inputs.size(); ++j) {
    const auto& n = models.inputs[j];
    const auto it = params.find(n);
    x[static_cast<Eigen::Index>(j)] = it != params.end() ? it->second : s.at(n);
  }
  return x;
}

// constraints and input bounds holding with equality (within tol) at the solution
json binding_constraints(const Formulation& f, const Solution& s, double tol = 1e-5) {
  json out = json::array();
  const auto vals = as_assignment(s);
  for (const auto& c : f.constraints) {
    if (c.defines) continue;
    const double l = evaluate(c.lhs, vals), r = evaluate(c.rhs, vals);
    if (std::abs(l - r) <= tol * std::max(1.0, std::abs(r))) out.push_back(c.name);
  }
  for (const auto& n : f.inputs) {
    const auto* v = f.find(n);
    if (v->lo == v->hi) continue;
    const double x = s.at(n), w = v->hi - v->lo;
    if (x - v->lo <= tol * w) out.push_back(n + "_lower");
    if (v->hi - x <= tol * w) out.push_back(n + "_upper");
  }
  return out;
}

json outputs_report(const ModelSet& models, const ConfigModels& cm, const VectorXd& x) {
  json out = json::object();
  for (std::size_t v = 0; v < models.outputs.size(); ++v) {
    const auto p = predict_output(cm, v, x);
    out[models.outputs[v]] = {{"mean", p.mean}, {"std", p.std}, {"lower", p.mean - 1.96 * p.std},
                              {"upper", p.mean + 1.96 * p.std}};
  }
  return out;
}

json branches_report(const Solution& s) {
  json br = json::array();
  for (const auto& b : s.branches)
    br.push_back({{"name", b.name}, {"status", to_string(b.status)}, {"objective", num(b.objective)},
                  {"violation", num(b.violation)}});
  return br;
}

// For an infeasible run: solve each branch alone and name its worst constraint.
json infeasibility_report(const std::vector<Branch>& branches, const SolveConfig& sc) {
  json out = json::array();
  for (const auto& b : branches) {
    const Solution s = solve(b.problem, sc);
    std::string worst;
    double viol = s.values.empty() ? kInf : max_violation(b.problem, as_assignment(s), &worst);
    out.push_back({{"configuration", b.name}, {"violation", num(viol)}, {"worst_constraint", worst}});
  }
  return out;
}

struct DesignRun {
  Solution solution;
  std::vector<Branch> branches;
};

DesignRun run_design(const ModelSet& models, const RunConfig& cfg, const std::string& objective,
                     const std::optional<EpsilonBound>& eps = std::nullopt) {
  DesignRun r;
  for (const auto& cm : models.configs)
    r.branches.push_back({cm.name, build_config_problem(models, cm, cfg, objective, eps)});
  SolveConfig sc = cfg.solver;
  sc.seed = cfg.seed;
  r.solution = solve_superstructure(r.branches, sc);
  return r;
}

json design_report(const ModelSet& models, const RunConfig& cfg, const std::string& objective, const DesignRun& r) {
  json rep = report_header("", cfg);
  rep["objective"] = objective;
  rep["sense"] = to_string(objective_sense(cfg, objective));
  json lim = json::object();
  for (const auto& [k, v] : cfg.limits) lim[k] = num(v);
  rep["limits"] = lim;
  rep["status"] = to_string(r.solution.status);
  rep["branches"] = branches_report(r.solution);
  if (!r.solution.feasible()) {
    rep["chosen"] = nullptr;
    SolveConfig sc = cfg.solver;
    sc.seed = cfg.seed;
    rep["per_configuration"] = infeasibility_report(r.branches, sc);
    return rep;
  }
  const auto k = static_cast<std::size_t>(r.solution.branch);
  const auto& cm = models.configs[k];
  const VectorXd x = point_of(models, r.solution);
  rep["chosen"] = cm.name;
  json in = json::object();
  for (std::size_t j = 0; j < models.inputs.size(); ++j) in[models.inputs[j]] = x[static_cast<Eigen::Index>(j)];
  rep["inputs"] = in;
  rep["objective_value"] = r.solution.objective;
  rep["violation"] = r.solution.violation;
  rep["outputs"] = outputs_report(models, cm, x);
  // block values against direct predictions
  double gap = 0.0;
  for (std::size_t v = 0; v < models.outputs.size(); ++v) {
    const auto it = r.solution.values.find(models.outputs[v]);
    if (it != r.solution.values.end()) gap = std::max(gap, std::abs(it->second - predict_output(cm, v, x).mean));
  }
  rep["block_prediction_gap"] = gap;
  const double lat = classifier_latent(cm, x);
  rep["latent"] = num(lat);
  rep["binding"] = binding_constraints(r.branches[k].problem, r.solution);
  return rep;
}

std::string resolve_objective(const RunConfig& cfg, const ModelSet& models) {
  const std::string o = cfg.objective.value_or("nutrient_quality");
  models.output_index(o);
  return o;
}

}  // namespace

json cmd_superstructure(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto models = load_models(models_path(cfg, out));
  const auto objective = resolve_objective(cfg, models);
  const auto r = run_design(models, cfg, objective);
  json rep = design_report(models, cfg, objective, r);
  rep["command"] = "superstructure";
  write_json(out / "superstructure_report.json", rep);
  json sol = r.solution;
  sol["schema_version"] = kReportSchemaVersion;
  write_json(out / "solution.json", sol);
  return rep;
}

json cmd_pareto(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto models = load_models(models_path(cfg, out));
  const auto a = resolve_objective(cfg, models);
  const auto b = cfg.epsilon.variable;
  const auto bi = models.output_index(b);
  require(a != b, ErrorKind::parameter, "pareto needs two different objectives");
  const ObjSense sa = objective_sense(cfg, a), sb = objective_sense(cfg, b);

  RunConfig cfg_b = cfg;
  cfg_b.objective = b;
  const auto ra = run_design(models, cfg, a);
  const auto rb = run_design(models, cfg_b, b);
  require(ra.solution.feasible() && rb.solution.feasible(), ErrorKind::infeasible,
          "an end point of the frontier is infeasible");
  const auto& cma = models.configs[static_cast<std::size_t>(ra.solution.branch)];
  const double b_at_a = predict_output(cma, bi, point_of(models, ra.solution)).mean;
  const double b_best = rb.solution.objective;

  struct Row {
    double eps, fa, fb;
    std::string status, config;
    VectorXd x;
    bool feasible;
  };
  std::vector<Row> rows;
  const int n = cfg.epsilon.steps;
  for (int i = 0; i < n; ++i) {
    const double eps = b_at_a + (b_best - b_at_a) * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto r = run_design(models, cfg, a, EpsilonBound{b, eps, sb});
    Row row{eps, kInf, kInf, to_string(r.solution.status), "", VectorXd(), r.solution.feasible()};
    if (row.feasible) {
      const auto& cm = models.configs[static_cast<std::size_t>(r.solution.branch)];
      row.x = point_of(models, r.solution);
      row.fa = r.solution.objective;
      row.fb = predict_output(cm, bi, row.x).mean;
      row.config = cm.name;
    } else {
      diag::warn("epsilon step " + std::to_string(i) + " infeasible");
    }
    rows.push_back(row);
  }

  // strict dominance among feasible rows; both objectives turned into minimisation
  auto ma = [&](const Row& r) { return sa == ObjSense::min ? r.fa : -r.fa; };
  auto mb = [&](const Row& r) { return sb == ObjSense::min ? r.fb : -r.fb; };
  std::vector<bool> dominated(rows.size(), false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].feasible) continue;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (i == j || !rows[j].feasible) continue;
      if (ma(rows[j]) <= ma(rows[i]) && mb(rows[j]) <= mb(rows[i]) && (ma(rows[j]) < ma(rows[i]) || mb(rows[j]) < mb(rows[i])))
        dominated[i] = true;
    }
  }
  // tightening epsilon must not improve A (relative slack for local solves)
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!rows[i].feasible || !rows[i - 1].feasible) continue;
    if (ma(rows[i]) < ma(rows[i - 1]) - 1e-6 * std::max(1.0, std::abs(ma(rows[i - 1])))) monotone = false;
  }

  fs::create_directories(out);
  std::ofstream csv(out / "pareto.csv");
  require(csv.good(), ErrorKind::io, "cannot write pareto.csv");
  csv << std::setprecision(17) << "epsilon," << a << "," << b << ",configuration";
  for (const auto& in : models.inputs) csv << "," << in;
  csv << ",status\n";
  json table = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    json jr = {{"epsilon", r.eps}, {"status", r.feasible ? r.status : "infeasible"}, {"dominated", bool(dominated[i])}};
    if (r.feasible) {
      jr["objective"] = r.fa;
      jr[b] = r.fb;
      jr["configuration"] = r.config;
      jr["x"] = vec(r.x);
    }
    table.push_back(jr);
    if (dominated[i]) continue;
    csv << r.eps << ",";
    if (r.feasible) {
      csv << r.fa << "," << r.fb << "," << r.config;
      for (Eigen::Index j = 0; j < r.x.size(); ++j) csv << "," << r.x[j];
      csv << "," << r.status << "\n";
    } else {
      csv << ",,";
      for (std::size_t j = 0; j < models.inputs.size(); ++j) csv << ",";
      csv << ",infeasible\n";
    }
  }
  json rep = report_header("pareto", cfg);
  rep["objective"] = a;
  rep["epsilon_variable"] = b;
  rep["epsilon_direction"] = sb == ObjSense::min ? "upper" : "lower";
  rep["single_objective"] = {{"objective", ra.solution.objective}, {b, b_at_a},
                             {"configuration", cma.name}, {"x", vec(point_of(models, ra.solution))}};
  rep["epsilon_optimum"] = b_best;
  rep["rows"] = table;
  rep["monotone"] = monotone;
  rep["file"] = "pareto.csv";
  write_json(out / "pareto_report.json", rep);
  return rep;
}

namespace {

std::vector<double> default_realisations(const RunConfig& cfg, const ModelSet& models, const fs::path& out,
                                         std::size_t r) {
  const auto path = data_path(cfg, out, models.configs.front().name);
  require(fs::exists(path), ErrorKind::parameter,
          "no scenario values given and no sampled data at " + path.string());
  const Dataset ds = load(path);
  std::set<double> distinct;
  for (Eigen::Index i = 0; i < ds.x.rows(); ++i) distinct.insert(ds.x(i, static_cast<Eigen::Index>(r)));
  std::vector<double> sorted(distinct.begin(), distinct.end());
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(cfg.scenarios.count), sorted.size());
  std::vector<double> pick;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = count == 1 ? sorted.size() / 2 : i * (sorted.size() - 1) / (count - 1);
    pick.push_back(sorted[at]);
  }
  return pick;
}

}  // namespace

json cmd_stochastic(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto models = load_models(models_path(cfg, out));
  const auto objective = resolve_objective(cfg, models);
  const std::size_t r = cfg.scenarios.input.empty() ? models.inputs.size() - 1 : models.input_index(cfg.scenarios.input);
  const auto values = cfg.scenarios.values.empty() ? default_realisations(cfg, models, out, r) : cfg.scenarios.values;
  const auto weights = scenario_weights(values, cfg.scenarios.mean, cfg.scenarios.std);

  std::vector<Branch> branches;
  for (const auto& cm : models.configs)
    branches.push_back({cm.name, build_scenario_problem(models, cm, cfg, objective, values, weights)});
  SolveConfig sc = cfg.solver;
  sc.seed = cfg.seed;
  const Solution sol = solve_superstructure(branches, sc);

  json rep = report_header("stochastic", cfg);
  rep["objective"] = objective;
  rep["sense"] = to_string(objective_sense(cfg, objective));
  rep["scenario_input"] = models.inputs[r];
  json sj = json::array();
  for (std::size_t s = 0; s < values.size(); ++s) sj.push_back({{"value", values[s]}, {"weight", weights[s]}});
  rep["scenarios"] = sj;
  rep["status"] = to_string(sol.status);
  rep["branches"] = branches_report(sol);

  if (!sol.feasible()) {
    rep["chosen"] = nullptr;
    json pairs = json::array();
    for (std::size_t k = 0; k < branches.size(); ++k) {
      const Solution s = solve(branches[k].problem, sc);
      if (s.values.empty()) continue;
      const auto& cm = models.configs[k];
      for (std::size_t q = 0; q < values.size(); ++q) {
        const double lat = classifier_latent(cm, point_of(models, s, {{models.inputs[r], values[q]}}));
        if (lat < 0.0) pairs.push_back({{"configuration", cm.name}, {"scenario", q}, {"latent", lat}});
      }
    }
    rep["violating_pairs"] = pairs;
    rep["per_configuration"] = infeasibility_report(branches, sc);
  } else {
    const auto k = static_cast<std::size_t>(sol.branch);
    const auto& cm = models.configs[k];
    rep["chosen"] = cm.name;
    json in = json::object();
    for (std::size_t j = 0; j < models.inputs.size(); ++j)
      if (j != r) in[models.inputs[j]] = sol.at(models.inputs[j]);
    rep["inputs"] = in;
    rep["objective_value"] = sol.objective;
    rep["violation"] = sol.violation;
    // re-evaluate every expectation from direct predictions
    json expect = json::object(), per = json::array();
    bool robust = true;
    std::vector<double> totals(models.outputs.size(), 0.0);
    for (std::size_t q = 0; q < values.size(); ++q) {
      const VectorXd x = point_of(models, sol, {{models.inputs[r], values[q]}});
      json row = {{"value", values[q]}, {"weight", weights[q]}};
      for (std::size_t v = 0; v < models.outputs.size(); ++v) {
        const double m = predict_output(cm, v, x).mean;
        row[models.outputs[v]] = m;
        totals[v] += weights[q] * m;
      }
      const double lat = classifier_latent(cm, x);
      row["latent"] = num(lat);
      robust = robust && lat >= -sc.tol_con;
      per.push_back(row);
    }
    for (std::size_t v = 0; v < models.outputs.size(); ++v) expect[models.outputs[v]] = totals[v];
    rep["per_scenario"] = per;
    rep["expected"] = expect;
    const double direct = totals[models.output_index(objective)];
    rep["verification"] = {{"objective_reevaluated", direct},
                           {"objective_difference", std::abs(direct - sol.objective)},
                           {"robust", robust}};
    rep["binding"] = binding_constraints(branches[k].problem, sol);
  }
  write_json(out / "stochastic_report.json", rep);
  json sj2 = sol;
  sj2["schema_version"] = kReportSchemaVersion;
  write_json(out / "stochastic_solution.json", sj2);
  return rep;
}

}  // namespace sdfo::app
