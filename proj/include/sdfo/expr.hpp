#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace sdfo {

enum class Op { constant, variable, add, sub, mul, div, pow, exp, log, neg, sum };

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  Op op = Op::constant;
  double value = 0.0;  // constant value, or the exponent for pow
  std::string name;    // variable name
  std::vector<NodePtr> args;
};

/// Immutable algebraic expression; nodes are shared, so an Expr is a DAG.
/// Operations on constants fold immediately.
class Expr {
 public:
  Expr() : Expr(0.0) {}
  Expr(double c);  // NOLINT: implicit on purpose
  explicit Expr(NodePtr n) : node_(std::move(n)) {}

  static Expr var(const std::string& name);

  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  const std::vector<NodePtr>& args() const { return node_->args; }
  const ExprNode* id() const { return node_.get(); }
  const NodePtr& node() const { return node_; }
  bool is_constant() const { return node_->op == Op::constant; }
  bool is_variable() const { return node_->op == Op::variable; }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);

 private:
  NodePtr node_;
};

Expr pow(const Expr& base, double exponent);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sum(const std::vector<Expr>& terms);

/// Point evaluation with a per-node cache (shared subexpressions once).
class Evaluator {
 public:
  using Lookup = std::function<double(const std::string&)>;
  explicit Evaluator(Lookup lookup) : lookup_(std::move(lookup)) {}
  double operator()(const Expr& e);

 private:
  double eval(const ExprNode* n);
  Lookup lookup_;
  std::unordered_map<const ExprNode*, double> cache_;
};

double evaluate(const Expr& e, const std::unordered_map<std::string, double>& values);

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

/// Natural interval extension (sound, possibly loose).
Interval interval_of(const Expr& e, const std::function<Interval(const std::string&)>& bounds);

void collect_variables(const Expr& e, std::set<std::string>& out);
std::set<std::string> variables_of(const Expr& e);

/// Affine in its variables (constants and linear combinations only).
bool is_linear(const Expr& e);

/// Replace variables by expressions; `map` returns nullopt to keep a variable.
using Substitution = std::function<std::optional<Expr>(const std::string&)>;
Expr substitute(const Expr& e, const Substitution& map);

/// Stable infix rendering.
std::string to_string(const Expr& e);

}  // namespace sdfo
