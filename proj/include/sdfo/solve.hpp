#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdfo/formul.hpp"

namespace sdfo {

struct SolveConfig {
  int multistarts = 16;
  std::uint64_t seed = 0;
  int max_iters = 200;  // inner quasi-Newton iterations per round
  double tol_obj = 1e-8;
  double tol_con = 1e-6;
  double time_budget = 60.0;  // seconds
  bool milp_enumerate = false;  // exhaustive binaries instead of branch-and-bound (<= 20 binaries)

  void validate() const;
};

enum class SolveStatus { optimal_local, optimal_exact, infeasible, budget_exhausted };
std::string to_string(SolveStatus s);

struct StartRecord {
  int index = 0;
  std::vector<double> start;  // decision variables, original units
  std::vector<double> x;
  double objective = 0.0;
  double violation = 0.0;
  int iterations = 0;
  int rounds = 0;
  bool feasible = false;
  bool skipped = false;  // not run: time budget
};

struct BranchRecord {
  int index = 0;
  std::string name;
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;
  double violation = 0.0;
};

struct Solution {
  std::map<std::string, double> values;  // every variable, definitions included
  double objective = 0.0;                // in the formulation's own sense
  SolveStatus status = SolveStatus::infeasible;
  double violation = 0.0;  // independent re-check of all constraints and bounds
  std::vector<std::string> decision_vars;
  std::vector<StartRecord> starts_log;
  std::size_t nodes = 0;  // LPs solved (MILP)
  int branch = -1;        // superstructure pick
  std::vector<BranchRecord> branches;

  bool feasible() const { return status != SolveStatus::infeasible && !values.empty(); }
  double at(const std::string& name) const;
};

/// Multi-start local NLP: every start runs augmented-Lagrangian rounds of
/// projected BFGS in unit-box coordinates with exact gradients.
Solution solve_nlp(const Formulation& f, const SolveConfig& cfg = {});

/// Branch-and-bound over binaries with simplex relaxations; all expressions
/// must be affine once definitions are inlined.
Solution solve_milp(const Formulation& f, const SolveConfig& cfg = {});

/// Dispatch on the scanned class (LP/MILP -> solve_milp, NLP -> solve_nlp).
Solution solve(const Formulation& f, const SolveConfig& cfg = {});

struct Branch {
  std::string name;
  Formulation problem;
};

/// Choose-exactly-one over configurations by enumeration: each branch is a
/// complete problem; the best feasible one wins, ties to the lowest index.
Solution solve_superstructure(const std::vector<Branch>& branches, const SolveConfig& cfg = {});

/// Fill in defined variables from an assignment of the others.
std::unordered_map<std::string, double> complete_assignment(const Formulation& f,
                                                            std::unordered_map<std::string, double> values);

}  // namespace sdfo
