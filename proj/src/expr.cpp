#include "sdfo/expr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sdfo/error.hpp"

namespace sdfo {

namespace {

NodePtr make(Op op, std::vector<NodePtr> args, double value = 0.0) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->value = value;
  n->args = std::move(args);
  return n;
}

double apply(Op op, double a, double b, double v) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return std::pow(a, v);
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::neg: return -a;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

Expr::Expr(double c) : node_(make(Op::constant, {}, c)) {}

Expr Expr::var(const std::string& name) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::variable;
  n->name = name;
  return Expr(NodePtr(std::move(n)));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() + b.value());
  if (a.is_constant() && a.value() == 0.0) return b;
  if (b.is_constant() && b.value() == 0.0) return a;
  return Expr(make(Op::add, {a.node(), b.node()}));
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() - b.value());
  if (b.is_constant() && b.value() == 0.0) return a;
  return Expr(make(Op::sub, {a.node(), b.node()}));
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() * b.value());
  if (a.is_constant() && a.value() == 1.0) return b;
  if (b.is_constant() && b.value() == 1.0) return a;
  return Expr(make(Op::mul, {a.node(), b.node()}));
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() / b.value());
  if (b.is_constant() && b.value() == 1.0) return a;
  return Expr(make(Op::div, {a.node(), b.node()}));
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.value());
  return Expr(make(Op::neg, {a.node()}));
}

Expr pow(const Expr& base, double exponent) {
  if (base.is_constant()) return Expr(std::pow(base.value(), exponent));
  if (exponent == 1.0) return base;
  return Expr(make(Op::pow, {base.node()}, exponent));
}

Expr exp(const Expr& a) {
  if (a.is_constant()) return Expr(std::exp(a.value()));
  return Expr(make(Op::exp, {a.node()}));
}

Expr log(const Expr& a) {
  if (a.is_constant()) return Expr(std::log(a.value()));
  return Expr(make(Op::log, {a.node()}));
}

Expr sum(const std::vector<Expr>& terms) {
  std::vector<NodePtr> args;
  for (const auto& t : terms)
    if (!(t.is_constant() && t.value() == 0.0)) args.push_back(t.node());
  if (args.empty()) return Expr(0.0);
  if (args.size() == 1) return Expr(args[0]);
  bool all_const = true;
  for (const auto& a : args) all_const &= a->op == Op::constant;
  if (all_const) {
    double s = 0.0;
    for (const auto& a : args) s += a->value;
    return Expr(s);
  }
  return Expr(make(Op::sum, std::move(args)));
}

// ------------------------------------------------------------------ evaluate

double Evaluator::operator()(const Expr& e) { return eval(e.id()); }

double Evaluator::eval(const ExprNode* n) {
  switch (n->op) {
    case Op::constant: return n->value;
    case Op::variable: return lookup_(n->name);
    default: break;
  }
  if (auto it = cache_.find(n); it != cache_.end()) return it->second;
  double v = 0.0;
  if (n->op == Op::sum) {
    for (const auto& a : n->args) v += eval(a.get());
  } else {
    const double a = eval(n->args[0].get());
    const double b = n->args.size() > 1 ? eval(n->args[1].get()) : 0.0;
    v = apply(n->op, a, b, n->value);
  }
  cache_.emplace(n, v);
  return v;
}

double evaluate(const Expr& e, const std::unordered_map<std::string, double>& values) {
  Evaluator ev([&](const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) fail(ErrorKind::evaluation, "no value for variable '" + name + "'");
    return it->second;
  });
  return ev(e);
}

// ------------------------------------------------------------------ interval

namespace {

Interval mul_iv(Interval a, Interval b) {
  const double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  Interval r{c[0], c[0]};
  for (double v : c) {
    if (std::isnan(v)) return {};
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  return r;
}

struct IntervalWalker {
  const std::function<Interval(const std::string&)>& bounds;
  std::unordered_map<const ExprNode*, Interval> cache;

  Interval walk(const ExprNode* n) {
    if (n->op == Op::constant) return {n->value, n->value};
    if (n->op == Op::variable) return bounds(n->name);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    Interval r;
    auto arg = [&](std::size_t i) { return walk(n->args[i].get()); };
    switch (n->op) {
      case Op::add: {
        const auto a = arg(0), b = arg(1);
        r = {a.lo + b.lo, a.hi + b.hi};
        break;
      }
      case Op::sum: {
        r = {0.0, 0.0};
        for (std::size_t i = 0; i < n->args.size(); ++i) {
          const auto a = arg(i);
          r.lo += a.lo;
          r.hi += a.hi;
        }
        break;
      }
      case Op::sub: {
        const auto a = arg(0), b = arg(1);
        r = {a.lo - b.hi, a.hi - b.lo};
        break;
      }
      case Op::neg: {
        const auto a = arg(0);
        r = {-a.hi, -a.lo};
        break;
      }
      case Op::mul: r = mul_iv(arg(0), arg(1)); break;
      case Op::div: {
        const auto b = arg(1);
        if (b.lo > 0 || b.hi < 0) r = mul_iv(arg(0), {1.0 / b.hi, 1.0 / b.lo});
        break;
      }
      case Op::exp: {
        const auto a = arg(0);
        r = {std::exp(a.lo), std::exp(a.hi)};
        break;
      }
      case Op::log: {
        const auto a = arg(0);
        if (a.lo > 0) r = {std::log(a.lo), std::log(a.hi)};
        break;
      }
      case Op::pow: {
        const auto a = arg(0);
        const double e = n->value;
        if (e == std::floor(e) && e >= 0) {
          const auto k = static_cast<long>(e);
          const double plo = std::pow(a.lo, e), phi = std::pow(a.hi, e);
          if (k % 2 == 1)
            r = {plo, phi};
          else if (a.lo >= 0)
            r = {plo, phi};
          else if (a.hi <= 0)
            r = {phi, plo};
          else
            r = {0.0, std::max(plo, phi)};
        } else if (a.lo > 0) {
          const double plo = std::pow(a.lo, e), phi = std::pow(a.hi, e);
          r = {std::min(plo, phi), std::max(plo, phi)};
        }
        break;
      }
      default: break;
    }
    if (std::isnan(r.lo) || std::isnan(r.hi)) r = {};
    cache.emplace(n, r);
    return r;
  }
};

}  // namespace

Interval interval_of(const Expr& e, const std::function<Interval(const std::string&)>& bounds) {
  IntervalWalker w{bounds, {}};
  return w.walk(e.id());
}

// --------------------------------------------------------------- structure

void collect_variables(const Expr& e, std::set<std::string>& out) {
  std::unordered_map<const ExprNode*, bool> seen;
  std::vector<const ExprNode*> stack{e.id()};
  while (!stack.empty()) {
    const ExprNode* n = stack.back();
    stack.pop_back();
    if (!seen.emplace(n, true).second) continue;
    if (n->op == Op::variable) out.insert(n->name);
    for (const auto& a : n->args) stack.push_back(a.get());
  }
}

std::set<std::string> variables_of(const Expr& e) {
  std::set<std::string> s;
  collect_variables(e, s);
  return s;
}

namespace {

// 0 = constant, 1 = affine, 2 = nonlinear
int degree(const ExprNode* n, std::unordered_map<const ExprNode*, int>& memo) {
  if (n->op == Op::constant) return 0;
  if (n->op == Op::variable) return 1;
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  int d = 0;
  switch (n->op) {
    case Op::add:
    case Op::sub:
    case Op::sum:
      for (const auto& a : n->args) d = std::max(d, degree(a.get(), memo));
      break;
    case Op::neg: d = degree(n->args[0].get(), memo); break;
    case Op::mul: {
      const int a = degree(n->args[0].get(), memo), b = degree(n->args[1].get(), memo);
      d = (a == 0 || b == 0) ? std::max(a, b) : 2;
      break;
    }
    case Op::div: {
      const int a = degree(n->args[0].get(), memo), b = degree(n->args[1].get(), memo);
      d = b == 0 ? a : 2;
      break;
    }
    default: {
      int a = 0;
      for (const auto& x : n->args) a = std::max(a, degree(x.get(), memo));
      d = a == 0 ? 0 : 2;
    }
  }
  memo.emplace(n, d);
  return d;
}

}  // namespace

bool is_linear(const Expr& e) {
  std::unordered_map<const ExprNode*, int> memo;
  return degree(e.id(), memo) <= 1;
}

namespace {

struct Substituter {
  const Substitution& map;
  std::unordered_map<const ExprNode*, Expr> cache;

  Expr walk(const NodePtr& n) {
    if (n->op == Op::constant) return Expr(n);
    if (auto it = cache.find(n.get()); it != cache.end()) return it->second;
    Expr r;
    if (n->op == Op::variable) {
      auto m = map(n->name);
      r = m ? *m : Expr(n);
    } else {
      std::vector<Expr> a;
      bool changed = false;
      for (const auto& x : n->args) {
        a.push_back(walk(x));
        changed |= a.back().id() != x.get();
      }
      if (!changed) {
        r = Expr(n);
      } else {
        switch (n->op) {
          case Op::add: r = a[0] + a[1]; break;
          case Op::sub: r = a[0] - a[1]; break;
          case Op::mul: r = a[0] * a[1]; break;
          case Op::div: r = a[0] / a[1]; break;
          case Op::pow: r = pow(a[0], n->value); break;
          case Op::exp: r = exp(a[0]); break;
          case Op::log: r = log(a[0]); break;
          case Op::neg: r = -a[0]; break;
          case Op::sum: r = sum(a); break;
          default: r = Expr(n);
        }
      }
    }
    cache.emplace(n.get(), r);
    return r;
  }
};

void render(const ExprNode* n, std::ostringstream& os) {
  auto arg = [&](std::size_t i) { render(n->args[i].get(), os); };
  switch (n->op) {
    case Op::constant: {
      std::ostringstream c;
      c.precision(17);
      c << n->value;
      os << (n->value < 0 ? "(" + c.str() + ")" : c.str());
      return;
    }
    case Op::variable: os << n->name; return;
    case Op::add: os << "("; arg(0); os << " + "; arg(1); os << ")"; return;
    case Op::sub: os << "("; arg(0); os << " - "; arg(1); os << ")"; return;
    case Op::mul: os << "("; arg(0); os << " * "; arg(1); os << ")"; return;
    case Op::div: os << "("; arg(0); os << " / "; arg(1); os << ")"; return;
    case Op::pow: {
      std::ostringstream c;
      c.precision(17);
      c << n->value;
      os << "("; arg(0); os << " ^ " << c.str() << ")";
      return;
    }
    case Op::exp: os << "exp("; arg(0); os << ")"; return;
    case Op::log: os << "log("; arg(0); os << ")"; return;
    case Op::neg: os << "-("; arg(0); os << ")"; return;
    case Op::sum:
      os << "sum(";
      for (std::size_t i = 0; i < n->args.size(); ++i) {
        if (i) os << ", ";
        arg(i);
      }
      os << ")";
      return;
  }
}

}  // namespace

Expr substitute(const Expr& e, const Substitution& map) {
  Substituter s{map, {}};
  return s.walk(e.node());
}

std::string to_string(const Expr& e) {
  std::ostringstream os;
  render(e.id(), os);
  return os.str();
}

}  // namespace sdfo
