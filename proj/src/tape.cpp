#include "sdfo/tape.hpp"

#include <cmath>
#include <unordered_map>

#include "sdfo/error.hpp"

namespace sdfo {

Tape::Tape(const std::vector<Expr>& roots, const std::vector<std::string>& variables)
    : num_vars_(static_cast<int>(variables.size())) {
  std::unordered_map<std::string, int> var_index;
  for (std::size_t i = 0; i < variables.size(); ++i) var_index.emplace(variables[i], static_cast<int>(i));
  std::unordered_map<const ExprNode*, int> slot;

  // iterative post-order so deep chains do not hit the call stack
  for (const auto& r : roots) {
    std::vector<std::pair<const ExprNode*, std::size_t>> stack{{r.id(), 0}};
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (slot.count(n)) {
        stack.pop_back();
        continue;
      }
      if (next < n->args.size()) {
        const ExprNode* child = n->args[next++].get();
        if (!slot.count(child)) stack.emplace_back(child, 0);
        continue;
      }
      Node node{n->op, n->value, -1, {}};
      if (n->op == Op::variable) {
        auto it = var_index.find(n->name);
        require(it != var_index.end(), ErrorKind::validation, "expression uses unknown variable '" + n->name + "'");
        node.var = it->second;
      }
      for (const auto& a : n->args) node.args.push_back(slot.at(a.get()));
      slot.emplace(n, static_cast<int>(nodes_.size()));
      nodes_.push_back(std::move(node));
      stack.pop_back();
    }
    roots_.push_back(slot.at(r.id()));
  }
}

Eigen::VectorXd Tape::values(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::vector<double> v(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    auto a = [&](std::size_t k) { return v[static_cast<std::size_t>(n.args[k])]; };
    switch (n.op) {
      case Op::constant: v[i] = n.value; break;
      case Op::variable: v[i] = x[n.var]; break;
      case Op::add: v[i] = a(0) + a(1); break;
      case Op::sub: v[i] = a(0) - a(1); break;
      case Op::mul: v[i] = a(0) * a(1); break;
      case Op::div: v[i] = a(0) / a(1); break;
      case Op::pow: v[i] = std::pow(a(0), n.value); break;
      case Op::exp: v[i] = std::exp(a(0)); break;
      case Op::log: v[i] = std::log(a(0)); break;
      case Op::neg: v[i] = -a(0); break;
      case Op::sum: {
        double s = 0.0;
        for (std::size_t k = 0; k < n.args.size(); ++k) s += a(k);
        v[i] = s;
        break;
      }
    }
  }
  Eigen::VectorXd out(num_roots());
  for (int r = 0; r < num_roots(); ++r) out[r] = v[static_cast<std::size_t>(roots_[static_cast<std::size_t>(r)])];
  return out;
}

Eigen::VectorXd Tape::values(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::MatrixXd& jac) const {
  const int d = num_vars_;
  std::vector<double> v(nodes_.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(nodes_.size()));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const auto col = static_cast<Eigen::Index>(i);
    auto a = [&](std::size_t k) { return v[static_cast<std::size_t>(n.args[k])]; };
    auto ga = [&](std::size_t k) { return g.col(n.args[k]); };
    switch (n.op) {
      case Op::constant: v[i] = n.value; break;
      case Op::variable:
        v[i] = x[n.var];
        g(n.var, col) = 1.0;
        break;
      case Op::add:
        v[i] = a(0) + a(1);
        g.col(col) = ga(0) + ga(1);
        break;
      case Op::sub:
        v[i] = a(0) - a(1);
        g.col(col) = ga(0) - ga(1);
        break;
      case Op::mul:
        v[i] = a(0) * a(1);
        g.col(col) = a(1) * ga(0) + a(0) * ga(1);
        break;
      case Op::div:
        v[i] = a(0) / a(1);
        g.col(col) = (ga(0) - v[i] * ga(1)) / a(1);
        break;
      case Op::pow:
        v[i] = std::pow(a(0), n.value);
        g.col(col) = n.value * std::pow(a(0), n.value - 1.0) * ga(0);
        break;
      case Op::exp:
        v[i] = std::exp(a(0));
        g.col(col) = v[i] * ga(0);
        break;
      case Op::log:
        v[i] = std::log(a(0));
        g.col(col) = ga(0) / a(0);
        break;
      case Op::neg:
        v[i] = -a(0);
        g.col(col) = -ga(0);
        break;
      case Op::sum: {
        double s = 0.0;
        for (std::size_t k = 0; k < n.args.size(); ++k) {
          s += a(k);
          g.col(col) += ga(k);
        }
        v[i] = s;
        break;
      }
    }
  }
  Eigen::VectorXd out(num_roots());
  jac.resize(num_roots(), d);
  for (int r = 0; r < num_roots(); ++r) {
    const int s = roots_[static_cast<std::size_t>(r)];
    out[r] = v[static_cast<std::size_t>(s)];
    jac.row(r) = g.col(s).transpose();
  }
  return out;
}

}  // namespace sdfo
