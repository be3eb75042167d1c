#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdfo/data.hpp"
#include "sdfo/expr.hpp"
#include "sdfo/gp.hpp"
#include "sdfo/nn.hpp"

namespace sdfo {

enum class VarKind { continuous, binary };
enum class Relation { eq, le, ge };
enum class ObjSense { min, max };
enum class ProblemClass { LP, MILP, NLP, MINLP };
enum class PieceKind { relu, hardsigmoid };

std::string to_string(ProblemClass c);
std::string to_string(ObjSense s);
ObjSense parse_sense(const std::string& s);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Variable {
  std::string name;
  double lo = -kInf;
  double hi = kInf;
  VarKind kind = VarKind::continuous;
};

/// lhs rel rhs. A definition has lhs = the defined variable and rel = eq; the
/// solver inlines definitions instead of treating them as constraints.
struct Constraint {
  std::string name;
  Expr lhs;
  Relation rel = Relation::le;
  Expr rhs;
  bool defines = false;
};

struct Objective {
  Expr expr;
  ObjSense sense = ObjSense::min;
};

/// Activation encoded with big-M inequalities; the evaluator resolves the
/// binaries from z. q is empty for relu.
struct PiecewiseGroup {
  PieceKind kind = PieceKind::relu;
  std::string z, a, p, q;
};

class Formulation {
 public:
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  std::optional<Objective> objective;
  ProblemClass declared = ProblemClass::LP;
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;  // output name -> variable
  std::vector<PiecewiseGroup> groups;

  Expr add_variable(const std::string& name, double lo = -kInf, double hi = kInf, VarKind kind = VarKind::continuous);
  /// New variable with its defining equality name = rhs.
  Expr define(const std::string& name, const Expr& rhs, double lo = -kInf, double hi = kInf);
  void add_constraint(const std::string& name, const Expr& lhs, Relation rel, const Expr& rhs);
  void set_objective(const Expr& e, ObjSense sense) { objective = Objective{e, sense}; }
  void add_output(const std::string& name, const std::string& variable) { outputs.emplace_back(name, variable); }

  const Variable* find(const std::string& name) const;
  Variable* find(const std::string& name);
  Expr output(const std::string& name) const;
  bool has_output(const std::string& name) const;
  const Constraint* definition_of(const std::string& var) const;

  /// Class implied by the contents (binaries, nonlinear nodes).
  ProblemClass scan_class() const;
  void validate() const;

  /// Copy `block` into this formulation with every block variable prefixed
  /// by `prefix.`; block inputs are replaced by `inputs`. Where the block's
  /// input bounds are not implied by the host, they are added as constraints.
  /// Returns the block outputs as expressions over host variables.
  std::map<std::string, Expr> embed(const Formulation& block, const std::vector<Expr>& inputs, const std::string& prefix);

  /// Human-readable listing with stable ordering.
  std::string dump() const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

Interval variable_interval(const Formulation& f, const std::string& name);

/// Input variables are named x0..x{m-1}; bounds come from `input_space`.
Formulation nn_block(const NetworkParams& params, const std::optional<SearchSpace>& input_space = std::nullopt);
Formulation gpr_mean_block(const GprModel& model, const std::optional<SearchSpace>& input_space = std::nullopt);
Formulation gpr_uncertainty_block(const GprModel& model, const std::optional<SearchSpace>& input_space = std::nullopt);
Formulation gpc_block(const GpcModel& model, const std::optional<SearchSpace>& input_space = std::nullopt);

/// Per-node pre-activation bounds from propagating the input box.
std::vector<std::vector<Interval>> nn_preactivation_bounds(const NetworkParams& params, const SearchSpace& space);

struct EvalResult {
  std::map<std::string, double> values;
  std::map<std::string, double> outputs;
};

/// Fix the inputs at x, propagate definitions and activation groups, then
/// check every constraint and bound (relative tolerance tol).
EvalResult eval_formulation(const Formulation& f, const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 1e-6);

/// Check all constraints and bounds at a full assignment; returns the largest
/// absolute violation.
double max_violation(const Formulation& f, const std::unordered_map<std::string, double>& values,
                     std::string* worst = nullptr);

}  // namespace sdfo
