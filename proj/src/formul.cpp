#include "sdfo/formul.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "sdfo/error.hpp"

namespace sdfo {

std::string to_string(ProblemClass c) {
  switch (c) {
    case ProblemClass::LP: return "LP";
    case ProblemClass::MILP: return "MILP";
    case ProblemClass::NLP: return "NLP";
    case ProblemClass::MINLP: return "MINLP";
  }
  return "?";
}

std::string to_string(ObjSense s) { return s == ObjSense::min ? "min" : "max"; }

ObjSense parse_sense(const std::string& s) {
  if (s == "min") return ObjSense::min;
  if (s == "max") return ObjSense::max;
  fail(ErrorKind::parameter, "sense must be 'min' or 'max', got '" + s + "'");
}

namespace {

ProblemClass combine(bool integer, bool nonlinear) {
  if (integer) return nonlinear ? ProblemClass::MINLP : ProblemClass::MILP;
  return nonlinear ? ProblemClass::NLP : ProblemClass::LP;
}

bool has_integer(ProblemClass c) { return c == ProblemClass::MILP || c == ProblemClass::MINLP; }
bool has_nonlinear(ProblemClass c) { return c == ProblemClass::NLP || c == ProblemClass::MINLP; }

std::string rel_text(Relation r) {
  switch (r) {
    case Relation::eq: return "==";
    case Relation::le: return "<=";
    case Relation::ge: return ">=";
  }
  return "?";
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Expr Formulation::add_variable(const std::string& name, double lo, double hi, VarKind kind) {
  require(!name.empty(), ErrorKind::parameter, "variable names must be non-empty");
  require(!index_.count(name), ErrorKind::parameter, "duplicate variable '" + name + "'");
  require(!(lo > hi), ErrorKind::parameter, "variable '" + name + "' has lo > hi");
  if (kind == VarKind::binary) {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, 1.0);
  }
  index_.emplace(name, variables.size());
  variables.push_back({name, lo, hi, kind});
  return Expr::var(name);
}

Expr Formulation::define(const std::string& name, const Expr& rhs, double lo, double hi) {
  Expr v = add_variable(name, lo, hi);
  constraints.push_back({"def_" + name, v, Relation::eq, rhs, true});
  return v;
}

void Formulation::add_constraint(const std::string& name, const Expr& lhs, Relation rel, const Expr& rhs) {
  constraints.push_back({name, lhs, rel, rhs, false});
}

const Variable* Formulation::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &variables[it->second];
}

Variable* Formulation::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &variables[it->second];
}

bool Formulation::has_output(const std::string& name) const {
  for (const auto& [o, v] : outputs)
    if (o == name) return true;
  return false;
}

Expr Formulation::output(const std::string& name) const {
  for (const auto& [o, v] : outputs)
    if (o == name) return Expr::var(v);
  fail(ErrorKind::parameter, "formulation has no output '" + name + "'");
}

const Constraint* Formulation::definition_of(const std::string& var) const {
  for (const auto& c : constraints)
    if (c.defines && c.lhs.name() == var) return &c;
  return nullptr;
}

ProblemClass Formulation::scan_class() const {
  bool integer = false, nonlinear = false;
  for (const auto& v : variables) integer |= v.kind == VarKind::binary;
  for (const auto& c : constraints) nonlinear |= !is_linear(c.lhs) || !is_linear(c.rhs);
  if (objective) nonlinear |= !is_linear(objective->expr);
  return combine(integer, nonlinear);
}

void Formulation::validate() const {
  auto known = [&](const std::string& n) { return find(n) != nullptr; };
  for (const auto& i : inputs) require(known(i), ErrorKind::validation, "input '" + i + "' is not a variable");
  for (const auto& [o, v] : outputs) require(known(v), ErrorKind::validation, "output '" + o + "' maps to unknown '" + v + "'");
  auto check_expr = [&](const Expr& e, const std::string& where) {
    for (const auto& n : variables_of(e)) require(known(n), ErrorKind::validation, where + " references unknown variable '" + n + "'");
  };
  for (const auto& c : constraints) {
    check_expr(c.lhs, c.name);
    check_expr(c.rhs, c.name);
  }
  if (objective) check_expr(objective->expr, "objective");
  require(scan_class() == declared, ErrorKind::validation,
          "declared class " + to_string(declared) + " but contents are " + to_string(scan_class()));
}

Interval variable_interval(const Formulation& f, const std::string& name) {
  const auto* v = f.find(name);
  if (!v) return {};
  return {v->lo, v->hi};
}

std::map<std::string, Expr> Formulation::embed(const Formulation& block, const std::vector<Expr>& in,
                                               const std::string& prefix) {
  require(in.size() == block.inputs.size(), ErrorKind::shape,
          "block expects " + std::to_string(block.inputs.size()) + " inputs, got " + std::to_string(in.size()));
  require(!prefix.empty(), ErrorKind::parameter, "embedding needs a prefix");
  std::unordered_map<std::string, Expr> input_map;
  for (std::size_t i = 0; i < in.size(); ++i) input_map.emplace(block.inputs[i], in[i]);
  auto rename = [&](const std::string& n) { return prefix + "." + n; };
  const Substitution sub = [&](const std::string& n) -> std::optional<Expr> {
    if (auto it = input_map.find(n); it != input_map.end()) return it->second;
    return Expr::var(rename(n));
  };

  // input bounds the host does not already guarantee become constraints
  const auto host_bounds = [&](const std::string& n) { return variable_interval(*this, n); };
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto* bv = block.find(block.inputs[i]);
    const Interval hv = interval_of(in[i], host_bounds);
    if (std::isfinite(bv->lo) && !(hv.lo >= bv->lo))
      add_constraint(rename(block.inputs[i]) + "_lo", in[i], Relation::ge, Expr(bv->lo));
    if (std::isfinite(bv->hi) && !(hv.hi <= bv->hi))
      add_constraint(rename(block.inputs[i]) + "_hi", in[i], Relation::le, Expr(bv->hi));
  }

  for (const auto& v : block.variables) {
    if (input_map.count(v.name)) continue;
    add_variable(rename(v.name), v.lo, v.hi, v.kind);
  }
  for (const auto& c : block.constraints) {
    Constraint nc{rename(c.name), substitute(c.lhs, sub), c.rel, substitute(c.rhs, sub), c.defines};
    // a definition whose variable is an input turns into an ordinary equality
    if (nc.defines && !nc.lhs.is_variable()) nc.defines = false;
    constraints.push_back(std::move(nc));
  }
  for (const auto& g : block.groups) {
    groups.push_back({g.kind, rename(g.z), rename(g.a), rename(g.p), g.q.empty() ? "" : rename(g.q)});
  }
  declared = combine(has_integer(declared) || has_integer(block.declared),
                     has_nonlinear(declared) || has_nonlinear(block.declared));

  std::map<std::string, Expr> outs;
  for (const auto& [o, v] : block.outputs) outs.emplace(o, *sub(v));
  return outs;
}

std::string Formulation::dump() const {
  std::ostringstream os;
  os << "class " << to_string(declared) << "\n";
  os << "variables\n";
  for (const auto& v : variables) {
    os << "  " << v.name << (v.kind == VarKind::binary ? " binary" : "") << " in [" << num(v.lo) << ", " << num(v.hi)
       << "]\n";
  }
  os << "constraints\n";
  for (const auto& c : constraints) {
    os << "  " << (c.defines ? "def " : "") << c.name << ": " << to_string(c.lhs) << " " << rel_text(c.rel) << " "
       << to_string(c.rhs) << "\n";
  }
  if (objective) os << "objective\n  " << to_string(objective->sense) << " " << to_string(objective->expr) << "\n";
  os << "inputs";
  for (const auto& i : inputs) os << " " << i;
  os << "\noutputs";
  for (const auto& [o, v] : outputs) os << " " << o << "=" << v;
  os << "\n";
  return os.str();
}

// ------------------------------------------------------------------ evaluate

double max_violation(const Formulation& f, const std::unordered_map<std::string, double>& values, std::string* worst) {
  double maxv = 0.0;
  auto note = [&](double v, const std::string& what) {
    if (!(v <= maxv)) {
      maxv = std::isnan(v) ? kInf : v;
      if (worst) *worst = what;
    }
  };
  for (const auto& v : f.variables) {
    auto it = values.find(v.name);
    if (it == values.end()) {
      note(kInf, "unassigned " + v.name);
      continue;
    }
    const double x = it->second;
    note(std::max({v.lo - x, x - v.hi, 0.0}), "bounds of " + v.name);
    if (v.kind == VarKind::binary) note(std::min(std::abs(x), std::abs(1 - x)), "integrality of " + v.name);
  }
  Evaluator ev([&](const std::string& n) {
    auto it = values.find(n);
    return it == values.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
  });
  for (const auto& c : f.constraints) {
    const double l = ev(c.lhs), r = ev(c.rhs);
    double v = 0.0;
    switch (c.rel) {
      case Relation::eq: v = std::abs(l - r); break;
      case Relation::le: v = std::max(0.0, l - r); break;
      case Relation::ge: v = std::max(0.0, r - l); break;
    }
    note(v, c.name);
  }
  return maxv;
}

EvalResult eval_formulation(const Formulation& f, const Eigen::Ref<const Eigen::VectorXd>& x, double tol) {
  require(x.size() == static_cast<Eigen::Index>(f.inputs.size()), ErrorKind::shape,
          "formulation has " + std::to_string(f.inputs.size()) + " inputs, got " + std::to_string(x.size()));
  std::unordered_map<std::string, double> val;
  for (std::size_t i = 0; i < f.inputs.size(); ++i) {
    const auto* v = f.find(f.inputs[i]);
    const double xi = x[static_cast<Eigen::Index>(i)];
    require(xi >= v->lo - tol * std::max(1.0, std::abs(v->lo)) && xi <= v->hi + tol * std::max(1.0, std::abs(v->hi)),
            ErrorKind::evaluation, "input " + f.inputs[i] + " = " + num(xi) + " is outside its bounds");
    val[f.inputs[i]] = xi;
  }
  for (const auto& v : f.variables)
    if (v.lo == v.hi && !val.count(v.name)) val[v.name] = v.lo;

  struct Pending {
    const Constraint* c;
    std::set<std::string> deps;
  };
  std::vector<Pending> defs;
  for (const auto& c : f.constraints)
    if (c.defines && !val.count(c.lhs.name())) defs.push_back({&c, variables_of(c.rhs)});
  std::vector<const PiecewiseGroup*> groups;
  for (const auto& g : f.groups) groups.push_back(&g);

  auto ready = [&](const std::set<std::string>& deps) {
    for (const auto& d : deps)
      if (!val.count(d)) return false;
    return true;
  };
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& p : defs) {
      if (!p.c || !ready(p.deps)) continue;
      val[p.c->lhs.name()] = evaluate(p.c->rhs, val);
      p.c = nullptr;
      progress = true;
    }
    for (auto& g : groups) {
      if (!g || !val.count(g->z)) continue;
      const double z = val[g->z];
      if (g->kind == PieceKind::relu) {
        // tie at z = 0 resolved to p = 1 (a = z = 0 either way)
        val[g->p] = z >= 0 ? 1.0 : 0.0;
        val[g->a] = z >= 0 ? z : 0.0;
      } else {
        // middle piece preferred on the breakpoints
        if (z < -3) {
          val[g->p] = 0.0, val[g->q] = 0.0, val[g->a] = 0.0;
        } else if (z > 3) {
          val[g->p] = 1.0, val[g->q] = 1.0, val[g->a] = 1.0;
        } else {
          val[g->p] = 1.0, val[g->q] = 0.0, val[g->a] = z / 6.0 + 0.5;
        }
      }
      g = nullptr;
      progress = true;
    }
  }
  for (const auto& v : f.variables)
    require(val.count(v.name), ErrorKind::evaluation, "variable '" + v.name + "' is not determined by the inputs");

  // constraint check with a relative tolerance
  Evaluator ev([&](const std::string& n) { return val.at(n); });
  for (const auto& c : f.constraints) {
    const double l = ev(c.lhs), r = ev(c.rhs);
    const double scale = tol * std::max({1.0, std::abs(l), std::abs(r)});
    bool ok = true;
    switch (c.rel) {
      case Relation::eq: ok = std::abs(l - r) <= scale; break;
      case Relation::le: ok = l <= r + scale; break;
      case Relation::ge: ok = l >= r - scale; break;
    }
    require(ok, ErrorKind::evaluation,
            "constraint " + c.name + " violated: " + num(l) + " " + rel_text(c.rel) + " " + num(r));
  }
  for (const auto& v : f.variables) {
    const double xv = val[v.name];
    require(xv >= v.lo - tol * std::max(1.0, std::abs(v.lo)) && xv <= v.hi + tol * std::max(1.0, std::abs(v.hi)),
            ErrorKind::evaluation, "variable " + v.name + " = " + num(xv) + " is outside its bounds");
  }

  EvalResult res;
  for (const auto& [k, v] : val) res.values.emplace(k, v);
  for (const auto& [o, v] : f.outputs) res.outputs[o] = val[v];
  return res;
}

}  // namespace sdfo
