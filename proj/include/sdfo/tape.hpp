#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdfo/expr.hpp"

namespace sdfo {

/// Several expressions flattened into one topologically ordered node list
/// over a fixed variable ordering. Values and forward-mode gradients; const
/// methods keep their scratch space local, so one Tape serves many threads.
class Tape {
 public:
  Tape() = default;
  Tape(const std::vector<Expr>& roots, const std::vector<std::string>& variables);

  int num_vars() const { return num_vars_; }
  int num_roots() const { return static_cast<int>(roots_.size()); }
  std::size_t size() const { return nodes_.size(); }

  Eigen::VectorXd values(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Root values plus the Jacobian (roots x variables).
  Eigen::VectorXd values(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::MatrixXd& jac) const;

 private:
  struct Node {
    Op op;
    double value;  // constant, or pow exponent
    int var = -1;
    std::vector<int> args;
  };
  std::vector<Node> nodes_;
  std::vector<int> roots_;
  int num_vars_ = 0;
};

}  // namespace sdfo
