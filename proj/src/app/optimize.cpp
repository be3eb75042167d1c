#include <cmath>

#include "shared.hpp"
#include "sdfo/adaptive.hpp"
#include "sdfo/log.hpp"
#include "sdfo/rng.hpp"

namespace sdfo::app {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace detail;

namespace {

constexpr double kDuplicateTol = 1e-8;
constexpr double kMinScale = 1e-3;

// Samples so far, original units.
struct History {
  std::vector<VectorXd> x;
  std::vector<double> y;
  std::vector<int> t;

  MatrixXd rows() const {
    MatrixXd m(static_cast<Eigen::Index>(x.size()), x.front().size());
    for (std::size_t i = 0; i < x.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = x[i].transpose();
    return m;
  }
  std::optional<std::size_t> best(ObjSense sense) const {
    std::optional<std::size_t> b;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!t[i]) continue;
      if (!b || (sense == ObjSense::min ? y[i] < y[*b] : y[i] > y[*b])) b = i;
    }
    return b;
  }
  bool failures() const { return std::find(t.begin(), t.end(), 0) != t.end(); }
  std::size_t converged() const { return static_cast<std::size_t>(std::count(t.begin(), t.end(), 1)); }
};

// distance in box-width units
bool is_duplicate(const History& h, const VectorXd& x, const SearchSpace& space) {
  const VectorXd w = space.upper() - space.lower();
  for (const auto& p : h.x)
    if (((p - x).array() / w.array()).abs().maxCoeff() <= kDuplicateTol) return true;
  return false;
}

struct Surrogates {
  Scaler xs, ys;
  std::optional<GprModel> gpr;
  std::optional<GpcModel> gpc;
};

Scaler moments(const MatrixXd& rows) {
  Scaler s;
  s.mean = rows.colwise().mean().transpose();
  s.std = ((rows.rowwise() - s.mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j)
    if (!(s.std[j] > 0.0)) s.std[j] = 1.0;
  return s;
}

Surrogates fit_surrogates(const History& h, const RunConfig& cfg, std::uint64_t seed) {
  Surrogates s;
  const MatrixXd x = h.rows();
  s.xs = moments(x);
  std::vector<Eigen::Index> conv;
  for (std::size_t i = 0; i < h.t.size(); ++i)
    if (h.t[i]) conv.push_back(static_cast<Eigen::Index>(i));
  if (conv.size() >= 2) {
    MatrixXd xc(static_cast<Eigen::Index>(conv.size()), x.cols());
    MatrixXd yc(static_cast<Eigen::Index>(conv.size()), 1);
    for (std::size_t i = 0; i < conv.size(); ++i) {
      xc.row(static_cast<Eigen::Index>(i)) = x.row(conv[i]);
      yc(static_cast<Eigen::Index>(i), 0) = h.y[static_cast<std::size_t>(conv[i])];
    }
    s.ys = moments(yc);
    GpFitOptions opts;
    opts.starts = cfg.gp_starts;
    opts.seed = seed;
    s.gpr = gpr_fit(s.xs.transform_rows(xc), s.ys.transform_rows(yc).col(0), cfg.kernel, cfg.nugget, opts);
  } else {
    s.ys = {VectorXd::Zero(1), VectorXd::Ones(1)};
  }
  if (h.failures() && h.converged() > 0) {
    VectorXd t(static_cast<Eigen::Index>(h.t.size()));
    for (std::size_t i = 0; i < h.t.size(); ++i) t[static_cast<Eigen::Index>(i)] = h.t[i];
    GpFitOptions opts;
    opts.starts = 4;
    opts.seed = seed;
    s.gpc = gpc_fit(s.xs.transform_rows(x), t, opts);
  }
  return s;
}

SearchSpace scale_box(const Scaler& s, const SearchSpace& box) {
  const VectorXd lo = s.transform(box.lower()), hi = s.transform(box.upper());
  std::vector<Bound> b;
  for (int j = 0; j < box.dim(); ++j) b.push_back({lo[j], hi[j]});
  return SearchSpace(std::move(b));
}

VectorXd solution_point(const Solution& sol, int m) {
  VectorXd x(m);
  for (int j = 0; j < m; ++j) x[j] = sol.at("x" + std::to_string(j));
  return x;
}

VectorXd clamp_to(const SearchSpace& box, VectorXd x) {
  for (int j = 0; j < box.dim(); ++j) x[j] = std::clamp(x[j], box[j].lower, box[j].upper);
  return x;
}

struct Proposal {
  VectorXd x;  // scaled
  std::string acquisition;
  std::string status;
  std::string note;
};

// nullopt when no region lies inside `box` and allow_empty is set
std::optional<Proposal> explore(const MatrixXd& xs, const SearchSpace& full, const SearchSpace& box,
                                const Surrogates& s, AcquisitionKind kind, const History& h, ObjSense sense,
                                bool allow_empty) {
  Proposal p{{}, to_string(kind), "optimal_exact", ""};
  auto build = [&](const std::optional<SearchSpace>& cur) {
    if (kind == AcquisitionKind::exploit_triangle) {
      VectorXd y(static_cast<Eigen::Index>(h.y.size()));
      // failed rows can never be the best sample
      const double worst = sense == ObjSense::min ? kInf : -kInf;
      for (std::size_t i = 0; i < h.y.size(); ++i) y[static_cast<Eigen::Index>(i)] = h.t[i] ? h.y[i] : worst;
      return build_exploit_triangle_problem(xs, y, sense, full, true, cur);
    }
    return build_explore_triangle_problem(xs, full, true, cur);
  };
  RegionSelection rs;
  try {
    rs = build(box);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::empty_eligible) throw;
    if (allow_empty) return std::nullopt;
    rs = build(std::nullopt);
    p.note = "no region inside the current bounds; used the full space";
  }
  if (s.gpc) {
    try {
      rs = with_feasibility(rs, gpc_block(*s.gpc, full));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::empty_eligible) throw;
      p.note = "no region passes the feasibility model; constraint dropped";
    }
  }
  rs.solve();
  p.x = rs.x;
  return p;
}

Proposal solve_nlp_acquisition(const Formulation& base, const Surrogates& s, const SearchSpace& box,
                               AcquisitionKind kind, const SolveConfig& sc) {
  Proposal p{{}, to_string(kind), "", ""};
  Solution sol;
  if (s.gpc) {
    sol = solve_nlp(with_feasibility(base, gpc_block(*s.gpc, box)), sc);
    if (!sol.feasible()) p.note = "feasibility-constrained acquisition infeasible; constraint dropped";
  }
  if (!sol.feasible()) sol = solve_nlp(base, sc);
  p.status = to_string(sol.status);
  p.x = solution_point(sol, box.dim());
  return p;
}

}  // namespace

json cmd_optimize(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto bb = make_black_box(cfg.black_box);
  const auto space = resolve_space(cfg, *bb);
  const int m = space.dim();
  const auto configs = bb->configurations();
  std::size_t config = 0;
  if (!cfg.configuration.empty()) {
    const auto it = std::find(configs.begin(), configs.end(), cfg.configuration);
    require(it != configs.end(), ErrorKind::parameter, "no configuration named '" + cfg.configuration + "'");
    config = static_cast<std::size_t>(it - configs.begin());
  }
  const auto outputs = bb->outputs();
  const std::string objective = cfg.objective.value_or(outputs.front());
  const auto oit = std::find(outputs.begin(), outputs.end(), objective);
  require(oit != outputs.end(), ErrorKind::parameter, "black box has no output named '" + objective + "'");
  const auto v = static_cast<Eigen::Index>(oit - outputs.begin());
  const ObjSense sense = objective_sense(cfg, objective);

  RunLog runlog({{"command", "optimize"},
                 {"black_box", cfg.black_box},
                 {"configuration", configs[config]},
                 {"objective", objective},
                 {"sense", to_string(sense)},
                 {"space", space},
                 {"seed", cfg.seed},
                 {"n_static", cfg.n_static},
                 {"n_adaptive", cfg.n_adaptive},
                 {"schedule", cfg.schedule}});
  std::vector<std::string> warnings;
  diag::ScopedCapture capture(warnings);

  History h;
  std::size_t iteration = 0;
  auto record = [&](const VectorXd& x, const std::string& phase, const std::string& acq, const std::string& status,
                    const SearchSpace& bounds, const std::string& note) {
    require(bounds.contains(x, 1e-9 * (bounds.upper() - bounds.lower()).maxCoeff()), ErrorKind::internal,
            "proposed point lies outside the iteration bounds");
    const auto e = bb->evaluate(config, x);
    h.x.push_back(x);
    h.y.push_back(e.y[v]);
    h.t.push_back(e.converged ? 1 : 0);
    json r = {{"record", "evaluation"},
              {"iteration", iteration++},
              {"phase", phase},
              {"acquisition", acq},
              {"solver_status", status},
              {"x", vec(x)},
              {"outputs", vec(e.y)},
              {"converged", e.converged},
              {"bounds", bounds}};
    if (!note.empty()) r["note"] = note;
    runlog.append(std::move(r));
  };

  const MatrixXd initial = sample_static(cfg.strategy, cfg.n_static, space, cfg.seed);
  for (Eigen::Index i = 0; i < initial.rows(); ++i)
    record(initial.row(i).transpose(), "static", to_string(cfg.strategy), "", space, "");

  SearchSpace bounds = space;
  int repeats = 0;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  double scale = 1.0;
  std::optional<double> cycle_best;
  for (std::size_t a = 0; a < cfg.n_adaptive; ++a) {
    // trust region: after each pass through the schedule, re-centre on the
    // incumbent and shrink when the pass brought no improvement
    if (cfg.trust_region && a % cfg.schedule.size() == 0) {
      const auto b = h.best(sense);
      if (b) {
        const double yb = h.y[*b];
        if (cycle_best && !(sense == ObjSense::min ? yb < *cycle_best : yb > *cycle_best))
          scale = std::max(kMinScale, scale * cfg.shrink);
        cycle_best = yb;
        if (scale < 1.0) bounds = adjust_bounds(space, h.x[*b], scale);
      }
    }
    const std::uint64_t it_seed = cfg.seed + iteration;
    const Surrogates s = fit_surrogates(h, cfg, it_seed);
    const SearchSpace full = scale_box(s.xs, space), box = scale_box(s.xs, bounds);
    AcquisitionKind kind = parse_acquisition(cfg.schedule[a % cfg.schedule.size()]);
    // model-based steps need a regression model
    if (!s.gpr && (kind == AcquisitionKind::modified_ei || kind == AcquisitionKind::max_std))
      kind = AcquisitionKind::explore_triangle;
    if (!h.best(sense) && kind == AcquisitionKind::exploit_triangle) kind = AcquisitionKind::explore_triangle;

    SolveConfig sc = cfg.solver;
    sc.seed = it_seed;
    Proposal p;
    if (kind == AcquisitionKind::modified_ei) {
      const double y_best = (h.y[*h.best(sense)] - s.ys.mean[0]) / s.ys.std[0];
      p = solve_nlp_acquisition(build_modified_ei_problem(*s.gpr, y_best, cfg.xi, sense, box), s, box, kind, sc);
    } else if (kind == AcquisitionKind::max_std) {
      p = solve_nlp_acquisition(build_max_std_problem(*s.gpr, box), s, box, kind, sc);
    } else {
      const MatrixXd xs = s.xs.transform_rows(h.rows());
      auto e = explore(xs, full, box, s, kind, h, sense, s.gpr.has_value());
      if (e) {
        p = *e;
      } else {
        // the bounds are tighter than the triangulation: search the box by uncertainty
        p = solve_nlp_acquisition(build_max_std_problem(*s.gpr, box), s, box, AcquisitionKind::max_std, sc);
        p.note = "no region inside the current bounds" + (p.note.empty() ? "" : "; " + p.note);
      }
    }

    VectorXd x = clamp_to(space, s.xs.inverse(p.x));
    SearchSpace used = space.contains(x) && bounds.contains(x, 1e-12) ? bounds : space;
    x = clamp_to(used, x);
    std::string note = p.note;
    if (is_duplicate(h, x, space)) {
      ++repeats;
      auto add_note = [&](const std::string& n) { note += (note.empty() ? "" : "; ") + n; };
      if (repeats >= 2) {
        bounds = adjust_bounds(space, h.x[h.best(sense).value_or(0)], cfg.shrink);
        used = bounds;
        add_note("repeated duplicate; bounds adjusted around the incumbent");
      }
      const VectorXd w = used.upper() - used.lower();
      for (int tries = 0; tries < 100 && is_duplicate(h, x, space); ++tries) {
        VectorXd step(m);
        for (int j = 0; j < m; ++j) step[j] = rng.uniform(-1.0, 1.0) * 1e-3 * w[j] * (1 << std::min(tries, 10));
        x = clamp_to(used, x + step);
      }
      add_note("duplicate of an existing sample; perturbed");
    } else {
      repeats = 0;
    }
    record(x, "adaptive", p.acquisition, p.status, used, note);
  }

  // final report
  json report = report_header("optimize", cfg);
  report["objective"] = objective;
  report["sense"] = to_string(sense);
  report["evaluations"] = h.x.size();
  report["failed"] = h.x.size() - h.converged();
  Solution final_solution;
  if (const auto b = h.best(sense)) {
    report["incumbent"] = {{"iteration", *b}, {"x", vec(h.x[*b])}, {"value", h.y[*b]}};
    const Surrogates s = fit_surrogates(h, cfg, cfg.seed + iteration);
    if (s.gpr) {
      const SearchSpace full = scale_box(s.xs, space);
      Formulation f = gpr_mean_block(*s.gpr, full);
      f.set_objective(f.output("y"), sense);
      SolveConfig sc = cfg.solver;
      sc.seed = cfg.seed + iteration;
      if (s.gpc) {
        final_solution = solve_nlp(with_feasibility(f, gpc_block(*s.gpc, full)), sc);
        if (!final_solution.feasible()) final_solution = solve_nlp(f, sc);
      } else {
        final_solution = solve_nlp(f, sc);
      }
      const VectorXd xs = solution_point(final_solution, m);
      const auto pr = gpr_predict(*s.gpr, xs);
      const double mean = pr.mean * s.ys.std[0] + s.ys.mean[0];
      const double sd = std::sqrt(std::max(0.0, pr.variance)) * s.ys.std[0];
      report["surrogate_optimum"] = {{"x", vec(clamp_to(space, s.xs.inverse(xs)))},
                                     {"mean", mean},
                                     {"std", sd},
                                     {"interval", {mean - 1.96 * sd, mean + 1.96 * sd}},
                                     {"status", to_string(final_solution.status)}};
    }
  } else {
    report["incumbent"] = nullptr;
    diag::warn("no converged sample; no incumbent");
  }
  report["warnings"] = warnings;
  runlog.append({{"record", "report"}, {"report", report}});

  fs::create_directories(out);
  runlog.write(out / "runlog.jsonl");
  write_json(out / "optimize_report.json", report);
  json sol = final_solution;
  sol["schema_version"] = kReportSchemaVersion;
  write_json(out / "solution.json", sol);
  // the samples as a dataset for later fitting
  MatrixXd y(static_cast<Eigen::Index>(h.y.size()), 1);
  for (std::size_t i = 0; i < h.y.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = h.y[i];
  save(make_dataset(h.rows(), y, h.t, space), out / "data_optimize.csv");
  return report;
}

}  // namespace sdfo::app
