#include "sdfo/io.hpp"

#include <fstream>

#include "sdfo/error.hpp"

namespace sdfo {

json to_json_value(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json_value(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json_value(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  require(j.is_array(), ErrorKind::parse, "matrix must be an array of rows");
  if (j.empty()) return {};
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto r = vector_from_json(j[i]);
    require(r.size() == cols, ErrorKind::parse, "ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

void to_json(json& j, const SearchSpace& s) {
  j = json::array();
  for (const auto& b : s.bounds()) j.push_back({b.lower, b.upper});
}

void from_json(const json& j, SearchSpace& s) {
  std::vector<Bound> b;
  for (const auto& row : j) {
    require(row.is_array() && row.size() == 2, ErrorKind::parse, "each bound must be [lower, upper]");
    b.push_back({row[0].get<double>(), row[1].get<double>()});
  }
  s = SearchSpace(std::move(b));
}

void to_json(json& j, const Scaler& s) { j = {{"mean", to_json_value(s.mean)}, {"std", to_json_value(s.std)}}; }

void from_json(const json& j, Scaler& s) {
  s.mean = vector_from_json(j.at("mean"));
  s.std = vector_from_json(j.at("std"));
}

void to_json(json& j, const NetworkParams& p) {
  j = {{"layer_sizes", p.shape.layer_sizes},
       {"activation", to_string(p.shape.activation)},
       {"classifier", p.shape.is_classifier},
       {"weights", json::array()},
       {"biases", json::array()}};
  for (const auto& w : p.weights) j["weights"].push_back(to_json_value(w));
  for (const auto& b : p.biases) j["biases"].push_back(to_json_value(b));
}

void from_json(const json& j, NetworkParams& p) {
  p.shape.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  p.shape.activation = parse_activation(j.at("activation").get<std::string>());
  p.shape.is_classifier = j.at("classifier").get<bool>();
  p.weights.clear();
  p.biases.clear();
  for (const auto& w : j.at("weights")) p.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) p.biases.push_back(vector_from_json(b));
  p.validate();
}

void to_json(json& j, const GprModel& m) {
  j = {{"kernel", to_string(m.spec.kind)},
       {"order", m.spec.order},
       {"length_scale", m.hp.length_scale},
       {"sigma_f2", m.hp.sigma_f2},
       {"sigma_02", m.hp.sigma_02},
       {"noise", m.noise},
       {"nll", m.nll},
       {"x_train", to_json_value(m.x_train)},
       {"y_train", to_json_value(m.y_train)},
       {"alpha", to_json_value(m.alpha)},
       {"inv_K", to_json_value(m.inv_K)}};
}

void from_json(const json& j, GprModel& m) {
  m.spec = {parse_kernel(j.at("kernel").get<std::string>()), j.at("order").get<int>()};
  m.hp = {j.at("length_scale").get<double>(), j.at("sigma_f2").get<double>(), j.at("sigma_02").get<double>()};
  m.noise = j.at("noise").get<double>();
  m.nll = j.at("nll").get<double>();
  m.x_train = matrix_from_json(j.at("x_train"));
  m.y_train = vector_from_json(j.at("y_train"));
  m.alpha = vector_from_json(j.at("alpha"));
  m.inv_K = matrix_from_json(j.at("inv_K"));
  require(m.alpha.size() == m.n() && m.inv_K.rows() == m.n() && m.y_train.size() == m.n(), ErrorKind::parse,
          "GPR arrays disagree in size");
  gpr_refactor(m);
}

void to_json(json& j, const GpcModel& m) {
  j = {{"length_scale", m.hp.length_scale}, {"sigma_f2", m.hp.sigma_f2}, {"nll", m.nll},
       {"x_train", to_json_value(m.x_train)}, {"t_train", to_json_value(m.t_train)}, {"u_hat", to_json_value(m.u_hat)},
       {"a_hat", to_json_value(m.a_hat)},     {"delta", to_json_value(m.delta)},     {"w", to_json_value(m.w)},
       {"inv_P", to_json_value(m.inv_P)}};
}

void from_json(const json& j, GpcModel& m) {
  m.hp = {j.at("length_scale").get<double>(), j.at("sigma_f2").get<double>(), 0.0};
  m.nll = j.at("nll").get<double>();
  m.x_train = matrix_from_json(j.at("x_train"));
  m.t_train = vector_from_json(j.at("t_train"));
  m.u_hat = vector_from_json(j.at("u_hat"));
  m.a_hat = vector_from_json(j.at("a_hat"));
  m.delta = vector_from_json(j.at("delta"));
  m.w = vector_from_json(j.at("w"));
  m.inv_P = matrix_from_json(j.at("inv_P"));
}

void to_json(json& j, const Solution& s) {
  j = {{"status", to_string(s.status)}, {"objective", s.objective}, {"violation", s.violation}};
  json vals = json::object();
  for (const auto& n : s.decision_vars)
    if (s.values.count(n)) vals[n] = s.values.at(n);
  j["decision"] = vals;
  json all = json::object();
  for (const auto& [k, v] : s.values) all[k] = v;
  j["assignment"] = all;
  json starts = json::array();
  for (const auto& r : s.starts_log) {
    starts.push_back({{"index", r.index},
                      {"start", r.start},
                      {"x", r.x},
                      {"objective", r.objective},
                      {"violation", r.violation},
                      {"iterations", r.iterations},
                      {"rounds", r.rounds},
                      {"feasible", r.feasible},
                      {"skipped", r.skipped}});
  }
  j["starts"] = starts;
  if (s.nodes) j["nodes"] = s.nodes;
  if (!s.branches.empty()) {
    j["branch"] = s.branch;
    json br = json::array();
    for (const auto& b : s.branches)
      br.push_back({{"index", b.index},
                    {"name", b.name},
                    {"status", to_string(b.status)},
                    {"objective", b.objective},
                    {"violation", b.violation}});
    j["branches"] = br;
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace sdfo
