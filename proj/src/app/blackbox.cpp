#include "sdfo/app/blackbox.hpp"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sdfo/error.hpp"

namespace sdfo::app {

using Eigen::VectorXd;

std::vector<std::string> BlackBox::inputs(int m) const {
  std::vector<std::string> names;
  for (int j = 0; j < m; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

namespace brewery {

namespace {
constexpr double kRho[] = {110, 95, 100, 90};
constexpr double kEta[] = {0.88, 0.93, 0.91, 0.90};
constexpr double kZeta[] = {1.05, 0.92, 0.98, 1.00};
constexpr double kPhi[] = {4.0, 3.2, 3.6, 1.5};
constexpr double kKappa[] = {0.97, 1.05, 1.00, 0.95};
constexpr double kA[] = {1.00, 1.10, 1.05, 0.85};
}  // namespace

VectorXd response(std::size_t k, double v, double c) {
  require(k < 4, ErrorKind::parameter, "brewery configuration index out of range");
  VectorXd y(6);
  const double removal = 1.0 - std::exp(-v / kRho[k]);
  // the 0.1 factor puts the COD limit of 50 inside the reachable range
  y[0] = 0.1 * c * (1.0 - kEta[k] * removal);
  y[1] = 80.0 * (0.04 + 0.30 * std::exp(-v / 140.0) + 3e-5 * v) * std::sqrt(c / 4000.0) * kZeta[k];
  y[2] = 30.0 * (0.05 + 0.35 * std::exp(-v / 120.0)) * (c / 4000.0) + kPhi[k] * (v / 500.0) * (2000.0 / c);
  y[3] = 0.25 * c * removal;
  y[4] = 65.0 * std::exp(-c / 6000.0) * (1.0 - 0.4 * std::exp(-v / 200.0)) * kKappa[k];
  y[5] = 50000.0 * (0.35 + 0.65 * std::exp(-v / 250.0)) * std::pow(c / 4000.0, 0.7) * kA[k];
  return y;
}

bool converges(std::size_t k, double v, double c) { return k == 3 || c / v <= 40.0; }

SearchSpace space() { return SearchSpace({{50.0, 500.0}, {2000.0, 6000.0}}); }

}  // namespace brewery

namespace {

class Brewery final : public BlackBox {
 public:
  std::string name() const override { return "brewery"; }
  std::vector<std::string> configurations() const override { return brewery::kConfigurations; }
  std::vector<std::string> inputs(int) const override { return {"V", "C"}; }
  std::vector<std::string> outputs() const override { return brewery::kOutputs; }
  std::optional<SearchSpace> default_space() const override { return brewery::space(); }
  Evaluation evaluate(std::size_t k, const VectorXd& x) const override {
    require(x.size() == 2, ErrorKind::shape, "brewery takes (V, C)");
    if (!brewery::converges(k, x[0], x[1])) return {VectorXd::Zero(6), false};
    return {brewery::response(k, x[0], x[1]), true};
  }
};

class SixHumpCamel final : public BlackBox {
 public:
  std::string name() const override { return "six_hump_camel"; }
  std::vector<std::string> outputs() const override { return {"f"}; }
  std::optional<SearchSpace> default_space() const override { return SearchSpace({{-3.0, 3.0}, {-2.0, 2.0}}); }
  Evaluation evaluate(std::size_t, const VectorXd& x) const override {
    require(x.size() == 2, ErrorKind::shape, "six_hump_camel takes 2 inputs");
    const double a = x[0], b = x[1];
    VectorXd y(1);
    y[0] = (4.0 - 2.1 * a * a + a * a * a * a / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b;
    return {y, true};
  }
};

// distance to (0.7, 0.7) squared; runs fail inside the disk of radius 0.25 at (0.6, 0.6)
class Disk final : public BlackBox {
 public:
  std::string name() const override { return "disk"; }
  std::vector<std::string> outputs() const override { return {"f"}; }
  std::optional<SearchSpace> default_space() const override { return SearchSpace({{0.0, 1.0}, {0.0, 1.0}}); }
  Evaluation evaluate(std::size_t, const VectorXd& x) const override {
    require(x.size() == 2, ErrorKind::shape, "disk takes 2 inputs");
    if (inside(x)) return {VectorXd::Zero(1), false};
    VectorXd y(1);
    y[0] = (x[0] - 0.7) * (x[0] - 0.7) + (x[1] - 0.7) * (x[1] - 0.7);
    return {y, true};
  }
  static bool inside(const VectorXd& x) {
    return (x[0] - 0.6) * (x[0] - 0.6) + (x[1] - 0.6) * (x[1] - 0.6) < 0.25 * 0.25;
  }
};

class Linear final : public BlackBox {
 public:
  std::string name() const override { return "linear"; }
  std::vector<std::string> outputs() const override { return {"f"}; }
  std::optional<SearchSpace> default_space() const override { return SearchSpace({{0.0, 1.0}, {0.0, 1.0}}); }
  Evaluation evaluate(std::size_t, const VectorXd& x) const override {
    VectorXd y(1);
    y[0] = 1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) y[0] += (j % 2 ? -3.0 : 2.0) * x[j];
    return {y, true};
  }
};

class Constant final : public BlackBox {
 public:
  std::string name() const override { return "constant"; }
  std::vector<std::string> outputs() const override { return {"f"}; }
  std::optional<SearchSpace> default_space() const override { return SearchSpace({{0.0, 1.0}, {0.0, 1.0}}); }
  Evaluation evaluate(std::size_t, const VectorXd&) const override { return {VectorXd::Ones(1), true}; }
};

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

class External final : public BlackBox {
 public:
  External(std::vector<std::string> argv, std::vector<std::string> outputs, std::vector<std::string> configs)
      : argv_(std::move(argv)), outputs_(std::move(outputs)), configs_(std::move(configs)) {}

  std::string name() const override { return "external"; }
  std::vector<std::string> configurations() const override { return configs_; }
  std::vector<std::string> outputs() const override { return outputs_; }

  Evaluation evaluate(std::size_t k, const VectorXd& x) const override {
    std::string cmd;
    for (const auto& a : argv_) cmd += shell_quote(a) + " ";
    if (configs_.size() > 1) cmd += shell_quote(configs_.at(k)) + " ";
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      std::ostringstream os;
      os.precision(17);
      os << x[j];
      cmd += os.str() + " ";
    }
    FILE* pipe = popen(cmd.c_str(), "r");
    require(pipe != nullptr, ErrorKind::io, "cannot start black box: " + cmd);
    std::string out;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
    const int status = pclose(pipe);
    const auto p = static_cast<Eigen::Index>(outputs_.size());
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) return {VectorXd::Zero(p), false};
    std::istringstream line(out.substr(0, out.find('\n')));
    std::string cell;
    std::vector<double> vals;
    while (std::getline(line, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail(ErrorKind::parse, "black box printed a non-numeric value '" + cell + "'");
      }
    }
    require(static_cast<Eigen::Index>(vals.size()) == p, ErrorKind::parse,
            "black box printed " + std::to_string(vals.size()) + " values, expected " + std::to_string(p));
    VectorXd y = Eigen::Map<VectorXd>(vals.data(), p);
    require(y.allFinite(), ErrorKind::parse, "black box printed a non-finite value");
    return {y, true};
  }

 private:
  std::vector<std::string> argv_, outputs_, configs_;
};

}  // namespace

std::unique_ptr<BlackBox> make_builtin(const std::string& name) {
  if (name == "brewery") return std::make_unique<Brewery>();
  if (name == "six_hump_camel") return std::make_unique<SixHumpCamel>();
  if (name == "disk") return std::make_unique<Disk>();
  if (name == "linear") return std::make_unique<Linear>();
  if (name == "constant") return std::make_unique<Constant>();
  fail(ErrorKind::parameter, "unknown builtin black box '" + name + "'");
}

std::unique_ptr<BlackBox> make_black_box(const nlohmann::json& spec) {
  if (spec.is_string()) return make_builtin(spec.get<std::string>());
  require(spec.is_object(), ErrorKind::parse, "black_box must be a name or an object");
  if (spec.contains("builtin")) return make_builtin(spec.at("builtin").get<std::string>());
  require(spec.contains("command"), ErrorKind::parse, "black_box needs 'builtin' or 'command'");
  std::vector<std::string> argv;
  if (spec["command"].is_string()) argv = {spec["command"].get<std::string>()};
  else argv = spec["command"].get<std::vector<std::string>>();
  require(!argv.empty(), ErrorKind::parse, "black_box command is empty");
  auto outputs = spec.value("outputs", std::vector<std::string>{"f"});
  auto configs = spec.value("configurations", std::vector<std::string>{"default"});
  require(!outputs.empty() && !configs.empty(), ErrorKind::parse, "black_box needs outputs and configurations");
  return std::make_unique<External>(std::move(argv), std::move(outputs), std::move(configs));
}

}  // namespace sdfo::app
