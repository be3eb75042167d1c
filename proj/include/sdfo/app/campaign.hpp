#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdfo/app/blackbox.hpp"
#include "sdfo/data.hpp"
#include "sdfo/formul.hpp"
#include "sdfo/gp.hpp"
#include "sdfo/nn.hpp"
#include "sdfo/solve.hpp"

namespace sdfo::app {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kReportSchemaVersion = 1;

struct ClassifierSettings {
  std::vector<int> hidden{10, 10};
  Activation activation = Activation::sigmoid;
  std::size_t epochs = 3000;
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
  double weight_decay = 0.0;
};

struct EpsilonSettings {
  std::string variable = "aeration";
  int steps = 8;
};

struct ScenarioSettings {
  std::string input;  // empty: the last input
  double mean = 4000.0;
  double std = 1000.0;
  std::vector<double> values;  // empty: taken from the sampled data
  int count = 5;               // how many sampled values to take when `values` is empty
};

struct SurfaceSettings {
  std::string config;  // empty: the first configuration
  std::string output;  // empty: the objective
  int steps = 50;
};

/// Everything a command needs. Missing keys keep the defaults below.
struct RunConfig {
  json black_box = "brewery";
  std::optional<SearchSpace> space;
  SamplingStrategy strategy = SamplingStrategy::sobol;
  std::size_t n_static = 32;
  std::size_t n_adaptive = 0;
  std::optional<std::string> objective;
  std::optional<ObjSense> sense;
  std::map<std::string, double> limits{{"cod", 50.0}, {"tn", 10.0}, {"tp", 5.0}};
  EpsilonSettings epsilon;
  ScenarioSettings scenarios;
  SurfaceSettings surface;
  ClassifierSettings classifier;
  SolveConfig solver;
  std::uint64_t seed = 0;
  double test_fraction = 0.25;
  KernelSpec kernel;
  int gp_starts = 8;
  double nugget = 1e-10;
  // optimize
  std::string configuration;  // which black-box configuration; empty: the first
  std::vector<std::string> schedule{"modified_ei", "explore_triangle"};
  double xi = 0.01;
  double shrink = 0.5;
  bool trust_region = true;  // shrink the bounds around the incumbent when a schedule pass stalls
  // superstructure: inputs pinned to a value
  std::map<std::string, double> fixed;
  // where fit reads datasets and the model commands read models; empty: --out
  std::optional<fs::path> data_dir;
  std::optional<fs::path> models;

  static RunConfig from_json(const json& j);
  json to_json() const;
  void validate() const;
};

RunConfig load_config(const fs::path& path);

/// Append-only evaluation record written as JSON lines. The first line is a
/// header carrying schema_version; no wall-clock data is recorded.
class RunLog {
 public:
  explicit RunLog(json header = json::object());
  void append(json record);
  const std::vector<json>& records() const { return records_; }
  std::string str() const;
  void write(const fs::path& path) const;

 private:
  json header_;
  std::vector<json> records_;
};

/// Surrogates of one configuration, all in standardised coordinates.
struct ConfigModels {
  std::string name;
  Scaler x_scaler;
  Scaler y_scaler;
  std::vector<GprModel> gpr;  // one per output
  std::optional<NetworkParams> classifier;
};

struct ModelSet {
  json black_box;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  SearchSpace space;
  std::vector<ConfigModels> configs;

  std::size_t output_index(const std::string& name) const;
  std::size_t input_index(const std::string& name) const;
  SearchSpace scaled_space(const ConfigModels& cm) const;
};

void to_json(json& j, const ModelSet& m);
void from_json(const json& j, ModelSet& m);
ModelSet load_models(const fs::path& path);

/// Original-unit prediction of one output: mean and standard deviation.
struct OutputPrediction {
  double mean = 0.0;
  double std = 0.0;
};
OutputPrediction predict_output(const ConfigModels& cm, std::size_t output, const Eigen::VectorXd& x);
/// Classifier logit at an original-unit point; +inf when there is no classifier.
double classifier_latent(const ConfigModels& cm, const Eigen::VectorXd& x);

/// Sense used for a named objective: the config override, else the known
/// direction of the brewery outputs, else min.
ObjSense objective_sense(const RunConfig& cfg, const std::string& name);

// ---------------------------------------------------------------- commands
// Each writes its files under `out` and returns the report it wrote.

json cmd_sample(const RunConfig& cfg, const fs::path& out);
json cmd_fit(const RunConfig& cfg, const fs::path& out);
json cmd_optimize(const RunConfig& cfg, const fs::path& out);
json cmd_superstructure(const RunConfig& cfg, const fs::path& out);
json cmd_pareto(const RunConfig& cfg, const fs::path& out);
json cmd_stochastic(const RunConfig& cfg, const fs::path& out);
json cmd_surface(const RunConfig& cfg, const fs::path& out);

// ------------------------------------------------- problem construction
// Exposed for the tests; the commands are thin wrappers around these.

struct EpsilonBound {
  std::string output;
  double value = 0.0;
  ObjSense direction = ObjSense::min;  // min: output <= value, max: output >= value
};

/// One configuration's surrogate problem in original units: inputs are
/// decision variables named after the inputs (pinned ones fixed), outputs are
/// inverse-scaled GPR means, limits and the classifier logit are constraints.
Formulation build_config_problem(const ModelSet& models, const ConfigModels& cm, const RunConfig& cfg,
                                 const std::string& objective, const std::optional<EpsilonBound>& eps = std::nullopt);

/// Expected-value version: the scenario input is a parameter fixed at each
/// realisation, weights are normalised, the logit constraint holds per scenario.
Formulation build_scenario_problem(const ModelSet& models, const ConfigModels& cm, const RunConfig& cfg,
                                   const std::string& objective, const std::vector<double>& realisations,
                                   const std::vector<double>& weights);

/// Normal-density weights at the realisations, normalised to sum to one.
std::vector<double> scenario_weights(const std::vector<double>& values, double mean, double std);

}  // namespace sdfo::app
