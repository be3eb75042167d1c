#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "sdfo/data.hpp"

namespace sdfo::app {

struct Evaluation {
  Eigen::VectorXd y;
  bool converged = true;
};

/// Something that maps an input point to outputs, per discrete configuration.
/// Failed evaluations report converged = false and zero outputs.
class BlackBox {
 public:
  virtual ~BlackBox() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> configurations() const { return {"default"}; }
  virtual std::vector<std::string> inputs(int m) const;
  virtual std::vector<std::string> outputs() const = 0;
  virtual std::optional<SearchSpace> default_space() const { return std::nullopt; }
  virtual Evaluation evaluate(std::size_t config, const Eigen::VectorXd& x) const = 0;
};

/// The four-configuration brewery wastewater stand-in: inputs (V, C), outputs
/// cod, tn, tp, biogas, nutrient_quality, aeration.
namespace brewery {
inline const std::vector<std::string> kConfigurations{"A2O", "Bardenpho", "Johannesburg", "UCT"};
inline const std::vector<std::string> kOutputs{"cod", "tn", "tp", "biogas", "nutrient_quality", "aeration"};
Eigen::VectorXd response(std::size_t config, double v, double c);
bool converges(std::size_t config, double v, double c);
SearchSpace space();
}  // namespace brewery

/// Builtins: "brewery", "six_hump_camel", "disk", "linear", "constant".
std::unique_ptr<BlackBox> make_builtin(const std::string& name);

/// A builtin name (string or {"builtin": name}) or an external command:
/// {"command": [...argv], "outputs": [...], "configurations": [...]}.
/// The command gets [configuration] x1 .. xm as extra arguments and must
/// print one CSV line of outputs; a nonzero exit status is a failed run.
std::unique_ptr<BlackBox> make_black_box(const nlohmann::json& spec);

}  // namespace sdfo::app
