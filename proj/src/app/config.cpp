#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sdfo/adaptive.hpp"
#include "sdfo/app/campaign.hpp"
#include "sdfo/error.hpp"
#include "sdfo/io.hpp"
#include "sdfo/log.hpp"

namespace sdfo::app {

using Eigen::VectorXd;

namespace {

double limit_value(const json& v) {
  if (v.is_null()) return kInf;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
    fail(ErrorKind::parse, "limit must be a number, null or \"inf\", got '" + s + "'");
  }
  return v.get<double>();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  require(j.is_object(), ErrorKind::parse, "config must be a JSON object");
  static const std::vector<std::string> known{
      "black_box", "space",      "strategy", "n_static",  "n_adaptive", "objective",  "sense",     "limits",
      "epsilon",   "scenarios",  "surface",  "classifier", "solver",    "seed",       "test_fraction",
      "kernel",    "kernel_order", "gp_starts", "nugget",  "configuration", "schedule", "xi",      "shrink",  "trust_region",
      "fixed",     "data",       "models",   "schema_version"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) diag::warn("config key '" + k + "' is not used");
  }
  RunConfig c;
  try {
    if (j.contains("black_box")) c.black_box = j["black_box"];
    if (j.contains("space")) c.space = j["space"].get<SearchSpace>();
    if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
    c.n_static = j.value("n_static", c.n_static);
    c.n_adaptive = j.value("n_adaptive", c.n_adaptive);
    if (j.contains("objective")) c.objective = j["objective"].get<std::string>();
    if (j.contains("sense")) c.sense = parse_sense(j["sense"].get<std::string>());
    if (j.contains("limits")) {
      c.limits.clear();
      for (const auto& [k, v] : j["limits"].items()) c.limits[k] = limit_value(v);
    }
    if (j.contains("epsilon")) {
      c.epsilon.variable = j["epsilon"].value("variable", c.epsilon.variable);
      c.epsilon.steps = j["epsilon"].value("steps", c.epsilon.steps);
    }
    if (j.contains("scenarios")) {
      const auto& s = j["scenarios"];
      c.scenarios.input = s.value("input", c.scenarios.input);
      c.scenarios.mean = s.value("mean", c.scenarios.mean);
      c.scenarios.std = s.value("std", c.scenarios.std);
      c.scenarios.values = s.value("values", c.scenarios.values);
      c.scenarios.count = s.value("count", c.scenarios.count);
    }
    if (j.contains("surface")) {
      const auto& s = j["surface"];
      c.surface.config = s.value("config", c.surface.config);
      c.surface.output = s.value("output", c.surface.output);
      c.surface.steps = s.value("steps", c.surface.steps);
    }
    if (j.contains("classifier")) {
      const auto& s = j["classifier"];
      c.classifier.hidden = s.value("hidden", c.classifier.hidden);
      if (s.contains("activation")) c.classifier.activation = parse_activation(s["activation"].get<std::string>());
      c.classifier.epochs = s.value("epochs", c.classifier.epochs);
      c.classifier.learning_rate = s.value("learning_rate", c.classifier.learning_rate);
      c.classifier.batch_size = s.value("batch_size", c.classifier.batch_size);
      c.classifier.weight_decay = s.value("weight_decay", c.classifier.weight_decay);
    }
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      c.solver.multistarts = s.value("multistarts", c.solver.multistarts);
      c.solver.max_iters = s.value("max_iters", c.solver.max_iters);
      c.solver.tol_obj = s.value("tol_obj", c.solver.tol_obj);
      c.solver.tol_con = s.value("tol_con", c.solver.tol_con);
      c.solver.time_budget = s.value("time_budget", c.solver.time_budget);
      c.solver.milp_enumerate = s.value("milp_enumerate", c.solver.milp_enumerate);
    }
    c.seed = j.value("seed", c.seed);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("kernel")) c.kernel.kind = parse_kernel(j["kernel"].get<std::string>());
    c.kernel.order = j.value("kernel_order", c.kernel.order);
    c.gp_starts = j.value("gp_starts", c.gp_starts);
    c.nugget = j.value("nugget", c.nugget);
    c.configuration = j.value("configuration", c.configuration);
    c.schedule = j.value("schedule", c.schedule);
    c.xi = j.value("xi", c.xi);
    c.shrink = j.value("shrink", c.shrink);
    c.trust_region = j.value("trust_region", c.trust_region);
    if (j.contains("fixed")) c.fixed = j["fixed"].get<std::map<std::string, double>>();
    if (j.contains("data")) c.data_dir = fs::path(j["data"].get<std::string>());
    if (j.contains("models")) c.models = fs::path(j["models"].get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["black_box"] = black_box;
  if (space) j["space"] = *space;
  j["strategy"] = to_string(strategy);
  j["n_static"] = n_static;
  j["n_adaptive"] = n_adaptive;
  if (objective) j["objective"] = *objective;
  if (sense) j["sense"] = to_string(*sense);
  json lim = json::object();
  for (const auto& [k, v] : limits) lim[k] = std::isfinite(v) ? json(v) : json(nullptr);
  j["limits"] = lim;
  j["epsilon"] = {{"variable", epsilon.variable}, {"steps", epsilon.steps}};
  j["scenarios"] = {{"input", scenarios.input},
                    {"mean", scenarios.mean},
                    {"std", scenarios.std},
                    {"values", scenarios.values},
                    {"count", scenarios.count}};
  j["seed"] = seed;
  j["kernel"] = to_string(kernel.kind);
  j["kernel_order"] = kernel.order;
  j["schedule"] = schedule;
  j["xi"] = xi;
  j["shrink"] = shrink;
  j["trust_region"] = trust_region;
  j["solver"] = {{"multistarts", solver.multistarts}, {"max_iters", solver.max_iters}, {"tol_obj", solver.tol_obj},
                 {"tol_con", solver.tol_con},         {"time_budget", solver.time_budget}};
  return j;
}

void RunConfig::validate() const {
  require(n_static >= 1, ErrorKind::parameter, "n_static must be >= 1");
  require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorKind::parameter, "test_fraction must be in [0, 1)");
  require(epsilon.steps >= 2, ErrorKind::parameter, "epsilon.steps must be >= 2");
  require(scenarios.std > 0.0, ErrorKind::parameter, "scenarios.std must be > 0");
  require(scenarios.count >= 1, ErrorKind::parameter, "scenarios.count must be >= 1");
  require(surface.steps >= 2, ErrorKind::parameter, "surface.steps must be >= 2");
  require(gp_starts >= 1, ErrorKind::parameter, "gp_starts must be >= 1");
  require(nugget > 0.0, ErrorKind::parameter, "nugget must be > 0");
  require(shrink > 0.0 && shrink <= 1.0, ErrorKind::parameter, "shrink must be in (0, 1]");
  require(xi >= 0.0, ErrorKind::parameter, "xi must be >= 0");
  require(!schedule.empty(), ErrorKind::parameter, "schedule is empty");
  for (const auto& s : schedule) {
    const auto k = parse_acquisition(s);
    require(k == AcquisitionKind::modified_ei || k == AcquisitionKind::max_std ||
                k == AcquisitionKind::explore_triangle || k == AcquisitionKind::exploit_triangle,
            ErrorKind::parameter, "schedule entry '" + s + "' is not a solvable acquisition");
  }
  for (const auto& [k, v] : limits) require(!std::isnan(v), ErrorKind::parameter, "limit " + k + " is NaN");
  kernel.validate();
  solver.validate();
}

RunConfig load_config(const fs::path& path) { return RunConfig::from_json(read_json(path)); }

// ------------------------------------------------------------------ RunLog

RunLog::RunLog(json header) : header_(std::move(header)) {
  header_["schema_version"] = kReportSchemaVersion;
  header_["record"] = "header";
}

void RunLog::append(json record) {
  if (!records_.empty() && record.contains("iteration") && records_.back().contains("iteration"))
    require(record["iteration"].get<long>() > records_.back()["iteration"].get<long>(), ErrorKind::internal,
            "run log iterations must increase");
  records_.push_back(std::move(record));
}

std::string RunLog::str() const {
  std::ostringstream os;
  os << header_.dump() << "\n";
  for (const auto& r : records_) os << r.dump() << "\n";
  return os.str();
}

void RunLog::write(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot write " + path.string());
  out << str();
}

// ---------------------------------------------------------------- ModelSet

std::size_t ModelSet::output_index(const std::string& name) const {
  for (std::size_t i = 0; i < outputs.size(); ++i)
    if (outputs[i] == name) return i;
  fail(ErrorKind::parameter, "no output named '" + name + "'");
}

std::size_t ModelSet::input_index(const std::string& name) const {
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i] == name) return i;
  fail(ErrorKind::parameter, "no input named '" + name + "'");
}

SearchSpace ModelSet::scaled_space(const ConfigModels& cm) const {
  const VectorXd lo = cm.x_scaler.transform(space.lower()), hi = cm.x_scaler.transform(space.upper());
  std::vector<Bound> b;
  for (int j = 0; j < space.dim(); ++j) b.push_back({lo[j], hi[j]});
  return SearchSpace(std::move(b));
}

void to_json(json& j, const ModelSet& m) {
  j = {{"schema_version", kModelSchemaVersion},
       {"black_box", m.black_box},
       {"inputs", m.inputs},
       {"outputs", m.outputs},
       {"space", m.space},
       {"configurations", json::array()}};
  for (const auto& c : m.configs) {
    json cj = {{"name", c.name}, {"x_scaler", c.x_scaler}, {"y_scaler", c.y_scaler}, {"gpr", c.gpr}};
    cj["classifier"] = c.classifier ? json(*c.classifier) : json(nullptr);
    j["configurations"].push_back(cj);
  }
}

void from_json(const json& j, ModelSet& m) {
  require(j.value("schema_version", 0) == kModelSchemaVersion, ErrorKind::parse, "unsupported model schema_version");
  m.black_box = j.at("black_box");
  m.inputs = j.at("inputs").get<std::vector<std::string>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.space = j.at("space").get<SearchSpace>();
  m.configs.clear();
  for (const auto& cj : j.at("configurations")) {
    ConfigModels c;
    c.name = cj.at("name").get<std::string>();
    c.x_scaler = cj.at("x_scaler").get<Scaler>();
    c.y_scaler = cj.at("y_scaler").get<Scaler>();
    c.gpr = cj.at("gpr").get<std::vector<GprModel>>();
    if (!cj.at("classifier").is_null()) c.classifier = cj["classifier"].get<NetworkParams>();
    require(c.gpr.size() == m.outputs.size(), ErrorKind::parse, "configuration " + c.name + " lacks some GPR models");
    m.configs.push_back(std::move(c));
  }
}

ModelSet load_models(const fs::path& path) {
  try {
    return read_json(path).get<ModelSet>();
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

OutputPrediction predict_output(const ConfigModels& cm, std::size_t v, const VectorXd& x) {
  const auto p = gpr_predict(cm.gpr.at(v), cm.x_scaler.transform(x));
  const auto k = static_cast<Eigen::Index>(v);
  return {p.mean * cm.y_scaler.std[k] + cm.y_scaler.mean[k], std::sqrt(std::max(0.0, p.variance)) * cm.y_scaler.std[k]};
}

double classifier_latent(const ConfigModels& cm, const VectorXd& x) {
  if (!cm.classifier) return kInf;
  return forward(*cm.classifier, cm.x_scaler.transform(x))[0];
}

ObjSense objective_sense(const RunConfig& cfg, const std::string& name) {
  if (cfg.sense) return *cfg.sense;
  if (name == "nutrient_quality" || name == "biogas") return ObjSense::max;
  return ObjSense::min;
}

// ------------------------------------------------------ problem builders

namespace {

struct EmbeddedOutputs {
  std::map<std::string, Expr> values;  // original units
  std::optional<Expr> latent;
};

// GPR means of `names` (and the classifier) at inputs given in original units.
EmbeddedOutputs embed_surrogates(Formulation& f, const ModelSet& models, const ConfigModels& cm,
                                 const std::vector<Expr>& inputs, const std::vector<std::string>& names,
                                 const std::string& prefix) {
  const SearchSpace box = models.scaled_space(cm);
  std::vector<Expr> scaled;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    scaled.push_back((inputs[j] - Expr(cm.x_scaler.mean[k])) / Expr(cm.x_scaler.std[k]));
  }
  EmbeddedOutputs out;
  for (const auto& n : names) {
    if (out.values.count(n)) continue;
    const auto v = models.output_index(n);
    const auto k = static_cast<Eigen::Index>(v);
    const auto block = gpr_mean_block(cm.gpr[v], box);
    const Expr y = f.embed(block, scaled, prefix + "gpr_" + n).at("y");
    out.values.emplace(n, y * Expr(cm.y_scaler.std[k]) + Expr(cm.y_scaler.mean[k]));
  }
  if (cm.classifier) out.latent = f.embed(nn_block(*cm.classifier, box), scaled, prefix + "clf").at("latent");
  return out;
}

std::vector<std::string> needed_outputs(const ModelSet& models, const RunConfig& cfg, const std::string& objective,
                                        const std::optional<EpsilonBound>& eps) {
  std::vector<std::string> names;
  for (const auto& [name, lim] : cfg.limits)
    if (std::isfinite(lim)) names.push_back(name);
  names.push_back(objective);
  if (eps) names.push_back(eps->output);
  for (const auto& n : names) models.output_index(n);  // throws on unknown names
  return names;
}

void add_limits(Formulation& f, const RunConfig& cfg) {
  for (const auto& [name, lim] : cfg.limits)
    if (std::isfinite(lim)) f.add_constraint("limit_" + name, Expr::var(name), Relation::le, Expr(lim));
}

}  // namespace

Formulation build_config_problem(const ModelSet& models, const ConfigModels& cm, const RunConfig& cfg,
                                 const std::string& objective, const std::optional<EpsilonBound>& eps) {
  Formulation f;
  std::vector<Expr> inputs;
  for (std::size_t j = 0; j < models.inputs.size(); ++j) {
    const auto& b = models.space[static_cast<int>(j)];
    double lo = b.lower, hi = b.upper;
    if (auto it = cfg.fixed.find(models.inputs[j]); it != cfg.fixed.end()) {
      require(it->second >= lo && it->second <= hi, ErrorKind::parameter,
              "fixed value of " + models.inputs[j] + " lies outside the space");
      lo = hi = it->second;
    }
    inputs.push_back(f.add_variable(models.inputs[j], lo, hi));
    f.inputs.push_back(models.inputs[j]);
  }
  const auto names = needed_outputs(models, cfg, objective, eps);
  auto emb = embed_surrogates(f, models, cm, inputs, names, "");
  for (const auto& n : names)
    if (!f.find(n)) f.define(n, emb.values.at(n));
  add_limits(f, cfg);
  if (eps) f.add_constraint("epsilon_" + eps->output, Expr::var(eps->output),
                            eps->direction == ObjSense::min ? Relation::le : Relation::ge, Expr(eps->value));
  if (emb.latent) f.add_constraint("feasible", *emb.latent, Relation::ge, Expr(0.0));
  f.set_objective(Expr::var(objective), objective_sense(cfg, objective));
  for (const auto& n : models.outputs)
    if (f.find(n)) f.add_output(n, n);
  f.declared = f.scan_class();
  return f;
}

Formulation build_scenario_problem(const ModelSet& models, const ConfigModels& cm, const RunConfig& cfg,
                                   const std::string& objective, const std::vector<double>& realisations,
                                   const std::vector<double>& weights) {
  require(!realisations.empty() && realisations.size() == weights.size(), ErrorKind::shape,
          "need one weight per scenario");
  const std::size_t r = cfg.scenarios.input.empty() ? models.inputs.size() - 1
                                                    : models.input_index(cfg.scenarios.input);
  Formulation f;
  std::vector<Expr> inputs(models.inputs.size());
  for (std::size_t j = 0; j < models.inputs.size(); ++j) {
    if (j == r) continue;
    const auto& b = models.space[static_cast<int>(j)];
    double lo = b.lower, hi = b.upper;
    if (auto it = cfg.fixed.find(models.inputs[j]); it != cfg.fixed.end()) lo = hi = it->second;
    inputs[j] = f.add_variable(models.inputs[j], lo, hi);
    f.inputs.push_back(models.inputs[j]);
  }
  const auto names = needed_outputs(models, cfg, objective, std::nullopt);
  std::vector<EmbeddedOutputs> per;
  for (std::size_t s = 0; s < realisations.size(); ++s) {
    inputs[r] = Expr(realisations[s]);
    const std::string prefix = "s" + std::to_string(s) + ".";
    per.push_back(embed_surrogates(f, models, cm, inputs, names, prefix));
    for (const auto& n : names)
      if (!f.find(prefix + n)) f.define(prefix + n, per.back().values.at(n));
  }
  // expectations, in the same order as the deterministic problem
  for (const auto& n : names) {
    if (f.find(n)) continue;
    std::vector<Expr> terms;
    for (std::size_t s = 0; s < realisations.size(); ++s)
      terms.push_back(Expr(weights[s]) * Expr::var("s" + std::to_string(s) + "." + n));
    f.define(n, sum(terms));
  }
  add_limits(f, cfg);
  for (std::size_t s = 0; s < realisations.size(); ++s) {
    if (!per[s].latent) continue;
    f.add_constraint(realisations.size() == 1 ? "feasible" : "feasible_s" + std::to_string(s), *per[s].latent,
                     Relation::ge, Expr(0.0));
  }
  f.set_objective(Expr::var(objective), objective_sense(cfg, objective));
  for (const auto& n : models.outputs)
    if (f.find(n)) f.add_output(n, n);
  f.declared = f.scan_class();
  return f;
}

std::vector<double> scenario_weights(const std::vector<double>& values, double mean, double std) {
  require(!values.empty(), ErrorKind::empty_request, "no scenarios");
  require(std > 0.0, ErrorKind::parameter, "scenario std must be > 0");
  std::vector<double> w;
  double total = 0.0;
  for (double v : values) {
    const double z = (v - mean) / std;
    w.push_back(std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * std::numbers::pi)));
    total += w.back();
  }
  require(total > 0.0 && std::isfinite(total), ErrorKind::parameter, "scenario weights do not normalise");
  for (double& x : w) x /= total;
  return w;
}

}  // namespace sdfo::app
