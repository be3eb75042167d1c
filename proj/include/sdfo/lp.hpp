#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sdfo/formul.hpp"

namespace sdfo {

/// min c.x  s.t.  a x (rel) b,  0 <= x <= upper  (upper may be +inf).
struct LpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd a;
  std::vector<Relation> rel;
  Eigen::VectorXd b;
  Eigen::VectorXd upper;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

/// Dense two-phase tableau simplex with Bland's rule (no cycling). Meant for
/// the small problems the surrogate blocks produce.
LpResult solve_lp(const LpProblem& lp);

}  // namespace sdfo
