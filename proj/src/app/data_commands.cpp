#include <cmath>
#include <fstream>
#include <iomanip>

#include "shared.hpp"
#include "sdfo/kernels.hpp"
#include "sdfo/log.hpp"

namespace sdfo::app {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace detail;

json cmd_sample(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto bb = make_black_box(cfg.black_box);
  const auto space = resolve_space(cfg, *bb);
  const MatrixXd x = sample_static(cfg.strategy, cfg.n_static, space, cfg.seed);
  const auto p = static_cast<Eigen::Index>(bb->outputs().size());
  const auto configs = bb->configurations();

  json report = report_header("sample", cfg);
  report["strategy"] = to_string(cfg.strategy);
  report["space"] = space;
  report["outputs"] = bb->outputs();
  report["inputs"] = bb->inputs(space.dim());
  report["configurations"] = json::array();
  std::size_t evaluations = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    MatrixXd y(x.rows(), p);
    std::vector<int> t(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto e = bb->evaluate(k, x.row(i).transpose());
      require(e.y.size() == p, ErrorKind::evaluation, "black box returned the wrong number of outputs");
      y.row(i) = e.y.transpose();
      t[static_cast<std::size_t>(i)] = e.converged ? 1 : 0;
      ++evaluations;
    }
    const auto path = data_path(cfg, out, configs[k]);
    fs::create_directories(path.parent_path());
    save(make_dataset(x, y, t, space), path);
    long failed = std::count(t.begin(), t.end(), 0);
    report["configurations"].push_back({{"name", configs[k]}, {"file", path.filename().string()}, {"failed", failed}});
  }
  report["evaluations"] = evaluations;
  write_json(out / "sample_report.json", report);
  return report;
}

namespace {

struct Metrics {
  double mae = 0.0;
  std::optional<double> mape;
  std::size_t rows = 0;
};

Metrics regression_metrics(const std::vector<double>& truth, const std::vector<double>& pred) {
  Metrics m;
  m.rows = truth.size();
  if (truth.empty()) return m;
  double ape = 0.0;
  std::size_t ape_rows = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    m.mae += std::abs(truth[i] - pred[i]);
    if (truth[i] != 0.0) {
      ape += std::abs((truth[i] - pred[i]) / truth[i]);
      ++ape_rows;
    }
  }
  m.mae /= static_cast<double>(truth.size());
  if (ape_rows) m.mape = 100.0 * ape / static_cast<double>(ape_rows);
  return m;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json cmd_fit(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto bb = make_black_box(cfg.black_box);
  ModelSet models;
  models.black_box = cfg.black_box;
  models.outputs = bb->outputs();

  json report = report_header("fit", cfg);
  report["configurations"] = json::array();
  std::vector<std::string> warnings;
  diag::ScopedCapture capture(warnings);
  std::size_t n_gpr = 0, n_clf = 0;

  for (const auto& name : bb->configurations()) {
    Dataset ds = load(data_path(cfg, out, name));
    require(ds.p() == static_cast<int>(models.outputs.size()), ErrorKind::shape,
            "dataset " + name + " has " + std::to_string(ds.p()) + " outputs, black box has " +
                std::to_string(models.outputs.size()));
    if (models.inputs.empty()) {
      models.inputs = bb->inputs(ds.m());
      models.space = ds.space;
    }
    if (cfg.test_fraction > 0.0) ds = split(ds, cfg.test_fraction, cfg.seed);
    ds = standardize(ds);

    ConfigModels cm;
    cm.name = name;
    cm.x_scaler = *ds.x_scaler;
    cm.y_scaler = *ds.y_scaler;
    const auto train_rows = ds.converged_fit_rows();
    require(train_rows.size() >= 2, ErrorKind::fit, "configuration " + name + " has fewer than 2 converged training rows");
    const MatrixXd xs = ds.scale_x_rows(ds.rows_x(train_rows));
    const MatrixXd ys = ds.scale_y_rows(ds.rows_y(train_rows));

    std::vector<std::size_t> test_rows;
    for (auto i : ds.test_idx)
      if (!ds.t || (*ds.t)[i] == 1) test_rows.push_back(i);

    json cj = {{"name", name}, {"train_rows", train_rows.size()}, {"test_rows", ds.test_idx.size()}};
    cj["gpr"] = json::array();
    for (int v = 0; v < ds.p(); ++v) {
      GpFitOptions opts;
      opts.starts = cfg.gp_starts;
      opts.seed = cfg.seed + static_cast<std::uint64_t>(v);
      cm.gpr.push_back(gpr_fit(xs, ys.col(v), cfg.kernel, cfg.nugget, opts));
      ++n_gpr;
    }
    // validation in original units on converged test rows
    for (int v = 0; v < ds.p(); ++v) {
      std::vector<double> truth, pred;
      for (auto i : test_rows) {
        truth.push_back(ds.y(static_cast<Eigen::Index>(i), v));
        pred.push_back(predict_output(cm, static_cast<std::size_t>(v), ds.x.row(static_cast<Eigen::Index>(i)).transpose()).mean);
      }
      const auto m = regression_metrics(truth, pred);
      cj["gpr"].push_back({{"output", models.outputs[static_cast<std::size_t>(v)]},
                           {"nll", cm.gpr[static_cast<std::size_t>(v)].nll},
                           {"mae", truth.empty() ? json(nullptr) : json(m.mae)},
                           {"mape", optional_json(m.mape)},
                           {"test_rows", m.rows}});
    }

    const auto all_rows = ds.fit_rows();
    const auto t_train = ds.t ? ds.rows_t(all_rows) : std::vector<int>(all_rows.size(), 1);
    const bool has_failures = std::find(t_train.begin(), t_train.end(), 0) != t_train.end();
    if (!has_failures) {
      diag::warn("configuration " + name + ": every training row converged; classifier skipped");
      cj["classifier"] = nullptr;
    } else {
      NetworkShape shape;
      shape.layer_sizes.push_back(ds.m());
      for (int h : cfg.classifier.hidden) shape.layer_sizes.push_back(h);
      shape.layer_sizes.push_back(1);
      shape.activation = cfg.classifier.activation;
      shape.is_classifier = true;
      TrainConfig tc;
      tc.loss = Loss::bce_logits;
      tc.epochs = cfg.classifier.epochs;
      tc.learning_rate = cfg.classifier.learning_rate;
      tc.batch_size = cfg.classifier.batch_size;
      tc.weight_decay = cfg.classifier.weight_decay;
      tc.seed = cfg.seed;
      cm.classifier = train(shape, ds, tc).params;
      ++n_clf;

      std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
      for (auto i : ds.test_idx) {
        const int truth = ds.t ? (*ds.t)[i] : 1;
        const int pred = predict_class(*cm.classifier, ds.scale_x(ds.x.row(static_cast<Eigen::Index>(i)).transpose()));
        tp += pred == 1 && truth == 1;
        fp += pred == 1 && truth == 0;
        fn += pred == 0 && truth == 1;
        correct += pred == truth;
      }
      json cl = {{"test_rows", ds.test_idx.size()}};
      // positive class: converged
      cl["precision"] = tp + fp ? json(static_cast<double>(tp) / static_cast<double>(tp + fp)) : json(nullptr);
      cl["recall"] = tp + fn ? json(static_cast<double>(tp) / static_cast<double>(tp + fn)) : json(nullptr);
      cl["accuracy"] = ds.test_idx.empty() ? json(nullptr)
                                           : json(static_cast<double>(correct) / static_cast<double>(ds.test_idx.size()));
      cj["classifier"] = cl;
    }
    models.configs.push_back(std::move(cm));
    report["configurations"].push_back(cj);
  }
  report["gpr_models"] = n_gpr;
  report["classifiers"] = n_clf;
  report["warnings"] = warnings;
  write_json(models_path(cfg, out), models);
  write_json(out / "fit_report.json", report);
  return report;
}

json cmd_surface(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto models = load_models(models_path(cfg, out));
  const ConfigModels* cm = &models.configs.front();
  if (!cfg.surface.config.empty()) {
    cm = nullptr;
    for (const auto& c : models.configs)
      if (c.name == cfg.surface.config) cm = &c;
    require(cm != nullptr, ErrorKind::parameter, "no configuration named '" + cfg.surface.config + "'");
  }
  std::string output = cfg.surface.output;
  if (output.empty()) output = cfg.objective.value_or(models.outputs.front());
  const auto v = models.output_index(output);
  const auto k = static_cast<Eigen::Index>(v);

  const int m = models.space.dim();
  const MatrixXd grid = kernels::grid_points(models.space.lower(), models.space.upper(),
                                             std::vector<int>(static_cast<std::size_t>(m), cfg.surface.steps));
  const MatrixXd pred = kernels::predict_rows_parallel(cm->gpr[v], cm->x_scaler.transform_rows(grid));
  VectorXd latent;
  if (cm->classifier) latent = forward_rows(*cm->classifier, cm->x_scaler.transform_rows(grid)).col(0);

  const auto csv = out / "surface.csv";
  fs::create_directories(out);
  std::ofstream os(csv);
  require(os.good(), ErrorKind::io, "cannot write " + csv.string());
  os << std::setprecision(17);
  for (const auto& name : models.inputs) os << name << ",";
  os << "mean,std,latent\n";
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < m; ++j) os << grid(i, j) << ",";
    os << pred(i, 0) * cm->y_scaler.std[k] + cm->y_scaler.mean[k] << ","
       << std::sqrt(std::max(0.0, pred(i, 1))) * cm->y_scaler.std[k] << ",";
    if (cm->classifier) os << latent[i];
    os << "\n";
  }
  json report = report_header("surface", cfg);
  report["file"] = csv.filename().string();
  report["configuration"] = cm->name;
  report["output"] = output;
  report["steps"] = cfg.surface.steps;
  report["rows"] = grid.rows();
  report["columns"] = models.inputs;
  for (const char* c : {"mean", "std", "latent"}) report["columns"].push_back(c);
  report["classifier"] = cm->classifier.has_value();
  write_json(out / "surface.json", report);
  return report;
}

}  // namespace sdfo::app
