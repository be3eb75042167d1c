#include "sdfo/solve.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "sdfo/error.hpp"
#include "sdfo/lp.hpp"
#include "sdfo/optim.hpp"
#include "sdfo/rng.hpp"
#include "sdfo/sobol.hpp"
#include "sdfo/tape.hpp"

namespace sdfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

void SolveConfig::validate() const {
  require(multistarts >= 1, ErrorKind::parameter, "multistarts must be >= 1");
  require(max_iters >= 1, ErrorKind::parameter, "max_iters must be >= 1");
  require(tol_obj > 0 && tol_con > 0, ErrorKind::parameter, "tolerances must be positive");
  require(time_budget > 0, ErrorKind::parameter, "time budget must be positive");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal_local: return "optimal_local";
    case SolveStatus::optimal_exact: return "optimal_exact";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::budget_exhausted: return "budget_exhausted";
  }
  return "?";
}

double Solution::at(const std::string& name) const {
  auto it = values.find(name);
  require(it != values.end(), ErrorKind::parameter, "solution has no variable '" + name + "'");
  return it->second;
}

std::unordered_map<std::string, double> complete_assignment(const Formulation& f,
                                                            std::unordered_map<std::string, double> values) {
  for (const auto& v : f.variables)
    if (v.lo == v.hi && !values.count(v.name)) values[v.name] = v.lo;
  std::vector<const Constraint*> pending;
  for (const auto& c : f.constraints)
    if (c.defines && !values.count(c.lhs.name())) pending.push_back(&c);
  bool progress = true;
  while (progress && !pending.empty()) {
    progress = false;
    for (auto& c : pending) {
      if (!c) continue;
      bool ready = true;
      for (const auto& n : variables_of(c->rhs)) ready &= values.count(n) > 0;
      if (!ready) continue;
      values[c->lhs.name()] = evaluate(c->rhs, values);
      c = nullptr;
      progress = true;
    }
  }
  return values;
}

namespace {

// Objective and constraints with definitions inlined and fixed variables
// turned into constants; what remains is over the decision variables only.
struct Compiled {
  std::vector<std::string> names;
  VectorXd lo, hi;
  std::vector<bool> binary;
  Expr objective;  // minimisation form
  double sign = 1.0;
  std::vector<Expr> ineq;  // g <= 0
  std::vector<Expr> eq;    // h == 0
};

class Inliner {
 public:
  explicit Inliner(const Formulation& f) : f_(f) {
    for (const auto& c : f.constraints)
      if (c.defines) defs_.emplace(c.lhs.name(), &c);
    sub_ = [this](const std::string& n) -> std::optional<Expr> { return lookup(n); };
  }

  Expr operator()(const Expr& e) { return substitute(e, sub_); }
  bool defined(const std::string& n) const { return defs_.count(n) > 0; }

 private:
  std::optional<Expr> lookup(const std::string& n) {
    if (auto it = done_.find(n); it != done_.end()) return it->second;
    const auto* v = f_.find(n);
    require(v != nullptr, ErrorKind::validation, "unknown variable '" + n + "'");
    auto d = defs_.find(n);
    if (d == defs_.end()) {
      if (v->lo == v->hi) return done_.emplace(n, Expr(v->lo)).first->second;
      return std::nullopt;
    }
    require(active_.insert(n).second, ErrorKind::validation, "definition of '" + n + "' is circular");
    Expr e = substitute(d->second->rhs, sub_);
    active_.erase(n);
    return done_.emplace(n, e).first->second;
  }

  const Formulation& f_;
  std::unordered_map<std::string, const Constraint*> defs_;
  std::unordered_map<std::string, Expr> done_;
  std::set<std::string> active_;
  Substitution sub_;
};

Compiled compile(const Formulation& f) {
  require(f.objective.has_value(), ErrorKind::parameter, "formulation has no objective");
  Inliner inl(f);
  Compiled c;
  std::vector<double> lo, hi;
  for (const auto& v : f.variables) {
    if (inl.defined(v.name) || v.lo == v.hi) continue;
    require(std::isfinite(v.lo) && std::isfinite(v.hi), ErrorKind::parameter,
            "decision variable '" + v.name + "' needs finite bounds");
    c.names.push_back(v.name);
    lo.push_back(v.lo);
    hi.push_back(v.hi);
    c.binary.push_back(v.kind == VarKind::binary);
  }
  c.lo = Eigen::Map<VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  c.hi = Eigen::Map<VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  for (const auto& k : f.constraints) {
    if (k.defines) continue;
    const Expr d = inl(k.lhs) - inl(k.rhs);
    switch (k.rel) {
      case Relation::le: c.ineq.push_back(d); break;
      case Relation::ge: c.ineq.push_back(-d); break;
      case Relation::eq: c.eq.push_back(d); break;
    }
  }
  // bounds on defined variables act as constraints
  for (const auto& v : f.variables) {
    if (!inl.defined(v.name)) continue;
    const Expr e = inl(Expr::var(v.name));
    if (std::isfinite(v.hi)) c.ineq.push_back(e - Expr(v.hi));
    if (std::isfinite(v.lo)) c.ineq.push_back(Expr(v.lo) - e);
  }
  c.sign = f.objective->sense == ObjSense::min ? 1.0 : -1.0;
  c.objective = Expr(c.sign) * inl(f.objective->expr);
  return c;
}

bool past(Clock::time_point deadline) { return Clock::now() >= deadline; }

Clock::time_point deadline_for(const SolveConfig& cfg) {
  return Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.time_budget));
}

// Full assignment plus the independent feasibility re-check.
void finish(Solution& sol, const Formulation& f, const Compiled& c, const VectorXd& x) {
  std::unordered_map<std::string, double> vals;
  for (std::size_t i = 0; i < c.names.size(); ++i) vals[c.names[i]] = x[static_cast<Eigen::Index>(i)];
  vals = complete_assignment(f, std::move(vals));
  sol.violation = max_violation(f, vals);
  sol.objective = evaluate(f.objective->expr, vals);
  sol.values.clear();
  for (const auto& [k, v] : vals) sol.values.emplace(k, v);
  sol.decision_vars = c.names;
}

double violation_of(const VectorXd& vals, std::size_t n_ineq) {
  double v = 0.0;
  for (Eigen::Index i = 1; i < vals.size(); ++i) {
    const double r = static_cast<std::size_t>(i) <= n_ineq ? std::max(0.0, vals[i]) : std::abs(vals[i]);
    v = std::max(v, std::isnan(r) ? std::numeric_limits<double>::infinity() : r);
  }
  return v;
}

MatrixXd start_points(int n, int d, std::uint64_t seed) {
  if (d <= SobolSequence::kMaxDims) return shifted_sobol_points(static_cast<std::size_t>(n), d, seed);
  Rng rng(seed);
  MatrixXd p(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) p(i, j) = rng.uniform();
  return p;
}

constexpr int kMaxRounds = 30;
constexpr int kMaxEscalations = 8;
constexpr double kRho0 = 10.0;

}  // namespace

// --------------------------------------------------------------------- NLP

Solution solve_nlp(const Formulation& f, const SolveConfig& cfg) {
  cfg.validate();
  const Compiled c = compile(f);
  for (std::size_t i = 0; i < c.names.size(); ++i)
    require(!c.binary[i], ErrorKind::parameter, "NLP solver got free binary '" + c.names[i] + "'");
  const auto deadline = deadline_for(cfg);
  const int d = static_cast<int>(c.names.size());
  const std::size_t n_ineq = c.ineq.size(), n_eq = c.eq.size();
  std::vector<Expr> roots{c.objective};
  roots.insert(roots.end(), c.ineq.begin(), c.ineq.end());
  roots.insert(roots.end(), c.eq.begin(), c.eq.end());
  const Tape tape(roots, c.names);
  const VectorXd width = c.hi - c.lo;
  const auto to_x = [&](const VectorXd& u) -> VectorXd { return c.lo + width.cwiseProduct(u); };

  double fscale = 1.0;
  {
    const double f0 = tape.values(to_x(VectorXd::Constant(d, 0.5)))[0];
    if (std::isfinite(f0)) fscale = std::max(1.0, std::abs(f0));
  }

  const int n_starts = d == 0 ? 1 : cfg.multistarts;
  const MatrixXd starts = d == 0 ? MatrixXd(1, 0) : start_points(n_starts, d, cfg.seed);
  std::vector<StartRecord> log(static_cast<std::size_t>(n_starts));
  std::vector<VectorXd> finals(static_cast<std::size_t>(n_starts));
  bool out_of_time = false;

#pragma omp parallel for schedule(dynamic, 1)
  for (int s = 0; s < n_starts; ++s) {
    StartRecord& rec = log[static_cast<std::size_t>(s)];
    rec.index = s;
    VectorXd u = starts.row(s).transpose();
    const VectorXd x0 = to_x(u);
    rec.start.assign(x0.data(), x0.data() + d);
    if (past(deadline)) {
      rec.skipped = true;
#pragma omp atomic write
      out_of_time = true;
      continue;
    }
    VectorXd lam = VectorXd::Zero(static_cast<Eigen::Index>(n_ineq));
    VectorXd mu = VectorXd::Zero(static_cast<Eigen::Index>(n_eq));
    double rho = kRho0, prev_viol = std::numeric_limits<double>::infinity();
    double prev_f = std::numeric_limits<double>::quiet_NaN();
    int escalations = 0;
    const ObjGrad merit = [&](const VectorXd& uu, VectorXd* grad) -> double {
      MatrixXd jac;
      const VectorXd v = grad ? tape.values(to_x(uu), jac) : tape.values(to_x(uu));
      double val = v[0] / fscale;
      VectorXd g;
      if (grad) g = jac.row(0).transpose() / fscale;
      for (std::size_t i = 0; i < n_ineq; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double t = std::max(0.0, lam[k] + rho * v[k + 1]);
        val += (t * t - lam[k] * lam[k]) / (2.0 * rho);
        if (grad && t > 0) g += t * jac.row(k + 1).transpose();
      }
      for (std::size_t j = 0; j < n_eq; ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        const auto r = static_cast<Eigen::Index>(1 + n_ineq + j);
        val += mu[k] * v[r] + 0.5 * rho * v[r] * v[r];
        if (grad) g += (mu[k] + rho * v[r]) * jac.row(r).transpose();
      }
      if (grad) *grad = g.cwiseProduct(width);
      return val;
    };
    BoxMinOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.gtol = 1e-10;
    for (int round = 0; round < kMaxRounds; ++round) {
      const auto r = minimize_box(merit, u, VectorXd::Zero(d), VectorXd::Ones(d), opts);
      u = r.x;
      rec.iterations += r.iterations;
      ++rec.rounds;
      const VectorXd v = tape.values(to_x(u));
      const double fv = v[0], viol = violation_of(v, n_ineq);
      if (n_ineq + n_eq == 0) break;
      if (viol <= cfg.tol_con && round > 0 && std::abs(fv - prev_f) <= cfg.tol_obj * std::max(1.0, std::abs(fv))) break;
      for (std::size_t i = 0; i < n_ineq; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        lam[k] = std::max(0.0, lam[k] + rho * v[k + 1]);
      }
      for (std::size_t j = 0; j < n_eq; ++j) {
        const auto k = static_cast<Eigen::Index>(j);
        mu[k] += rho * v[static_cast<Eigen::Index>(1 + n_ineq + j)];
      }
      if (viol > 0.25 * prev_viol && viol > cfg.tol_con && escalations < kMaxEscalations) {
        rho *= 10.0;
        ++escalations;
      }
      prev_viol = viol;
      prev_f = fv;
      if (past(deadline)) {
#pragma omp atomic write
        out_of_time = true;
        break;
      }
    }
    finals[static_cast<std::size_t>(s)] = to_x(u);
  }

  // ordered reduction: lowest objective among feasible starts, ties to the lowest index
  Solution sol;
  int best = -1, least_bad = -1;
  double best_obj = std::numeric_limits<double>::infinity(), least_viol = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_starts; ++s) {
    StartRecord& rec = log[static_cast<std::size_t>(s)];
    if (rec.skipped) continue;
    Solution tmp;
    finish(tmp, f, c, finals[static_cast<std::size_t>(s)]);
    rec.x.assign(finals[static_cast<std::size_t>(s)].data(), finals[static_cast<std::size_t>(s)].data() + d);
    rec.objective = tmp.objective;
    rec.violation = tmp.violation;
    rec.feasible = tmp.violation <= cfg.tol_con && std::isfinite(tmp.objective);
    const double mo = c.sign * tmp.objective;
    if (rec.feasible && mo < best_obj) {
      best_obj = mo;
      best = s;
    }
    if (!(tmp.violation >= least_viol)) {
      least_viol = tmp.violation;
      least_bad = s;
    }
  }
  const int pick = best >= 0 ? best : least_bad;
  if (pick >= 0) finish(sol, f, c, finals[static_cast<std::size_t>(pick)]);
  sol.starts_log = std::move(log);
  if (out_of_time) sol.status = SolveStatus::budget_exhausted;
  else sol.status = best >= 0 ? SolveStatus::optimal_local : SolveStatus::infeasible;
  return sol;
}

// -------------------------------------------------------------------- MILP

namespace {

struct LinearForm {
  VectorXd coef;
  double constant = 0.0;
};

class Linearizer {
 public:
  Linearizer(const std::vector<std::string>& names) : n_(static_cast<Eigen::Index>(names.size())) {
    for (std::size_t i = 0; i < names.size(); ++i) index_.emplace(names[i], static_cast<Eigen::Index>(i));
  }

  LinearForm operator()(const Expr& e) { return walk(e.id()); }

 private:
  LinearForm constant(double v) const { return {VectorXd::Zero(n_), v}; }

  LinearForm walk(const ExprNode* node) {
    if (node->op == Op::constant) return constant(node->value);
    if (node->op == Op::variable) {
      LinearForm l = constant(0.0);
      l.coef[index_.at(node->name)] = 1.0;
      return l;
    }
    if (auto it = memo_.find(node); it != memo_.end()) return it->second;
    auto arg = [&](std::size_t i) { return walk(node->args[i].get()); };
    auto is_const = [](const LinearForm& l) { return l.coef.isZero(0.0); };
    LinearForm r;
    switch (node->op) {
      case Op::add:
      case Op::sub: {
        const auto a = arg(0), b = arg(1);
        const double s = node->op == Op::add ? 1.0 : -1.0;
        r = {a.coef + s * b.coef, a.constant + s * b.constant};
        break;
      }
      case Op::sum: {
        r = constant(0.0);
        for (std::size_t i = 0; i < node->args.size(); ++i) {
          const auto a = arg(i);
          r.coef += a.coef;
          r.constant += a.constant;
        }
        break;
      }
      case Op::neg: {
        const auto a = arg(0);
        r = {-a.coef, -a.constant};
        break;
      }
      case Op::mul: {
        const auto a = arg(0), b = arg(1);
        if (is_const(a)) r = {a.constant * b.coef, a.constant * b.constant};
        else if (is_const(b)) r = {b.constant * a.coef, b.constant * a.constant};
        else fail(ErrorKind::parameter, "product of variables in a linear model");
        break;
      }
      case Op::div: {
        const auto a = arg(0), b = arg(1);
        require(is_const(b), ErrorKind::parameter, "division by a variable in a linear model");
        r = {a.coef / b.constant, a.constant / b.constant};
        break;
      }
      default: {
        // nonlinear op over a constant argument still folds
        bool all_const = true;
        std::vector<LinearForm> as;
        for (std::size_t i = 0; i < node->args.size(); ++i) {
          as.push_back(arg(i));
          all_const &= is_const(as.back());
        }
        require(all_const, ErrorKind::parameter, "nonlinear term in a linear model");
        const double a = as[0].constant;
        double v = 0.0;
        switch (node->op) {
          case Op::pow: v = std::pow(a, node->value); break;
          case Op::exp: v = std::exp(a); break;
          case Op::log: v = std::log(a); break;
          default: fail(ErrorKind::internal, "unexpected node");
        }
        r = constant(v);
      }
    }
    memo_.emplace(node, r);
    return r;
  }

  Eigen::Index n_;
  std::unordered_map<std::string, Eigen::Index> index_;
  std::unordered_map<const ExprNode*, LinearForm> memo_;
};

struct LinearModel {
  LinearForm objective;
  std::vector<LinearForm> rows;
  std::vector<Relation> rel;  // row <= 0 or == 0
};

struct NodeResult {
  bool feasible = false;
  VectorXd x;
  double objective = 0.0;  // minimisation form
};

NodeResult solve_relaxation(const LinearModel& m, const VectorXd& lo, const VectorXd& hi) {
  const Eigen::Index n = lo.size();
  LpProblem lp;
  lp.c = m.objective.coef;
  lp.a.resize(static_cast<Eigen::Index>(m.rows.size()), n);
  lp.b.resize(static_cast<Eigen::Index>(m.rows.size()));
  lp.rel = m.rel;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    lp.a.row(k) = m.rows[i].coef.transpose();
    lp.b[k] = -m.rows[i].constant - m.rows[i].coef.dot(lo);
  }
  lp.upper = hi - lo;
  const auto r = solve_lp(lp);
  NodeResult out;
  if (r.status != LpStatus::optimal) return out;
  out.feasible = true;
  out.x = lo + r.x;
  out.objective = m.objective.coef.dot(out.x) + m.objective.constant;
  return out;
}

}  // namespace

Solution solve_milp(const Formulation& f, const SolveConfig& cfg) {
  cfg.validate();
  const Compiled c = compile(f);
  const auto deadline = deadline_for(cfg);
  Linearizer lin(c.names);
  LinearModel m;
  m.objective = lin(c.objective);
  for (const auto& g : c.ineq) {
    m.rows.push_back(lin(g));
    m.rel.push_back(Relation::le);
  }
  for (const auto& h : c.eq) {
    m.rows.push_back(lin(h));
    m.rel.push_back(Relation::eq);
  }
  std::vector<Eigen::Index> bins;
  for (std::size_t i = 0; i < c.binary.size(); ++i)
    if (c.binary[i]) bins.push_back(static_cast<Eigen::Index>(i));

  Solution sol;
  std::optional<NodeResult> incumbent;
  bool out_of_time = false;
  auto improves = [&](double obj) {
    return !incumbent || obj < incumbent->objective - 1e-9 * std::max(1.0, std::abs(incumbent->objective));
  };
  auto round_binaries = [&](VectorXd& lo, VectorXd& hi, const VectorXd& x) {
    for (auto j : bins) lo[j] = hi[j] = std::round(x[j]);
  };

  if (cfg.milp_enumerate) {
    require(bins.size() <= 20, ErrorKind::parameter, "enumeration is limited to 20 binaries");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << bins.size()); ++mask) {
      if (past(deadline)) {
        out_of_time = true;
        break;
      }
      VectorXd lo = c.lo, hi = c.hi;
      for (std::size_t b = 0; b < bins.size(); ++b) lo[bins[b]] = hi[bins[b]] = (mask >> b) & 1 ? 1.0 : 0.0;
      const auto r = solve_relaxation(m, lo, hi);
      ++sol.nodes;
      if (r.feasible && improves(r.objective)) incumbent = r;
    }
  } else {
    struct Node {
      VectorXd lo, hi;
    };
    std::vector<Node> stack{{c.lo, c.hi}};
    while (!stack.empty()) {
      if (past(deadline)) {
        out_of_time = true;
        break;
      }
      Node node = std::move(stack.back());
      stack.pop_back();
      const auto r = solve_relaxation(m, node.lo, node.hi);
      ++sol.nodes;
      if (!r.feasible || !improves(r.objective)) continue;
      Eigen::Index frac = -1;
      for (auto j : bins) {
        if (std::abs(r.x[j] - std::round(r.x[j])) > 1e-6) {
          frac = j;
          break;
        }
      }
      if (frac < 0) {
        // integral: re-solve with the binaries pinned so they are exact
        VectorXd lo = node.lo, hi = node.hi;
        round_binaries(lo, hi, r.x);
        const auto exact = solve_relaxation(m, lo, hi);
        ++sol.nodes;
        if (exact.feasible && improves(exact.objective)) incumbent = exact;
        continue;
      }
      Node zero = node, one = node;
      zero.hi[frac] = 0.0;
      one.lo[frac] = 1.0;
      // explore the nearer side first (pushed last)
      if (r.x[frac] >= 0.5) {
        stack.push_back(std::move(zero));
        stack.push_back(std::move(one));
      } else {
        stack.push_back(std::move(one));
        stack.push_back(std::move(zero));
      }
    }
  }

  if (incumbent) finish(sol, f, c, incumbent->x);
  if (out_of_time) sol.status = SolveStatus::budget_exhausted;
  else sol.status = incumbent ? SolveStatus::optimal_exact : SolveStatus::infeasible;
  return sol;
}

Solution solve(const Formulation& f, const SolveConfig& cfg) {
  switch (f.scan_class()) {
    case ProblemClass::LP:
    case ProblemClass::MILP: return solve_milp(f, cfg);
    case ProblemClass::NLP: return solve_nlp(f, cfg);
    case ProblemClass::MINLP: break;
  }
  fail(ErrorKind::parameter, "mixed-integer nonlinear problems are solved through solve_superstructure");
}

Solution solve_superstructure(const std::vector<Branch>& branches, const SolveConfig& cfg) {
  cfg.validate();
  require(!branches.empty(), ErrorKind::empty_request, "superstructure has no branches");
  const auto start = Clock::now();
  Solution best;
  bool any = false, out_of_time = false;
  double best_obj = 0.0;
  std::vector<BranchRecord> records;
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    SolveConfig sub = cfg;
    sub.time_budget = cfg.time_budget - std::chrono::duration<double>(Clock::now() - start).count();
    BranchRecord rec{static_cast<int>(k), br.name, SolveStatus::budget_exhausted, 0.0, 0.0};
    if (sub.time_budget <= 0) {
      out_of_time = true;
      records.push_back(rec);
      continue;
    }
    Solution s = solve(br.problem, sub);
    rec.status = s.status;
    rec.objective = s.objective;
    rec.violation = s.violation;
    records.push_back(rec);
    out_of_time |= s.status == SolveStatus::budget_exhausted;
    const bool ok = !s.values.empty() && s.violation <= cfg.tol_con && s.status != SolveStatus::infeasible;
    if (!ok) continue;
    const double mo = (br.problem.objective->sense == ObjSense::min ? 1.0 : -1.0) * s.objective;
    if (!any || mo < best_obj - cfg.tol_obj * std::max(1.0, std::abs(best_obj))) {
      any = true;
      best_obj = mo;
      best = std::move(s);
      best.branch = static_cast<int>(k);
    }
  }
  if (!any) {
    best = Solution{};
    best.status = out_of_time ? SolveStatus::budget_exhausted : SolveStatus::infeasible;
  } else if (out_of_time) {
    best.status = SolveStatus::budget_exhausted;
  }
  best.branches = std::move(records);
  return best;
}

}  // namespace sdfo
