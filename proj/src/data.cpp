#include "sdfo/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sdfo/error.hpp"
#include "sdfo/log.hpp"
#include "sdfo/rng.hpp"
#include "sdfo/sobol.hpp"

namespace sdfo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------- SearchSpace

SearchSpace::SearchSpace(std::vector<Bound> bounds) : bounds_(std::move(bounds)) {
  require(!bounds_.empty(), ErrorKind::parameter, "search space needs at least one dimension");
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    const auto& b = bounds_[i];
    require(std::isfinite(b.lower) && std::isfinite(b.upper), ErrorKind::parameter,
            "bounds of dimension " + std::to_string(i + 1) + " must be finite");
    require(b.lower < b.upper, ErrorKind::parameter,
            "dimension " + std::to_string(i + 1) + " needs lower < upper");
  }
}

VectorXd SearchSpace::lower() const {
  VectorXd v(dim());
  for (int i = 0; i < dim(); ++i) v[i] = bounds_[i].lower;
  return v;
}

VectorXd SearchSpace::upper() const {
  VectorXd v(dim());
  for (int i = 0; i < dim(); ++i) v[i] = bounds_[i].upper;
  return v;
}

VectorXd SearchSpace::center() const { return 0.5 * (lower() + upper()); }

bool SearchSpace::contains(const Eigen::Ref<const VectorXd>& x, double tol) const {
  if (x.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (!(x[i] >= bounds_[i].lower - tol && x[i] <= bounds_[i].upper + tol)) return false;
  }
  return true;
}

MatrixXd SearchSpace::corners() const {
  const int m = dim();
  const Index count = Index{1} << m;
  MatrixXd out(count, m);
  for (Index c = 0; c < count; ++c) {
    for (int j = 0; j < m; ++j) out(c, j) = ((c >> j) & 1) ? bounds_[j].upper : bounds_[j].lower;
  }
  return out;
}

// --------------------------------------------------------------------- Scaler

VectorXd Scaler::transform(const Eigen::Ref<const VectorXd>& v) const {
  require(v.size() == mean.size(), ErrorKind::shape,
          "expected length " + std::to_string(mean.size()) + ", got " + std::to_string(v.size()));
  return ((v - mean).array() / std.array()).matrix();
}

VectorXd Scaler::inverse(const Eigen::Ref<const VectorXd>& v) const {
  require(v.size() == mean.size(), ErrorKind::shape,
          "expected length " + std::to_string(mean.size()) + ", got " + std::to_string(v.size()));
  return (v.array() * std.array() + mean.array()).matrix();
}

MatrixXd Scaler::transform_rows(const Eigen::Ref<const MatrixXd>& rows) const {
  MatrixXd out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) out.row(i) = transform(rows.row(i).transpose()).transpose();
  return out;
}

MatrixXd Scaler::inverse_rows(const Eigen::Ref<const MatrixXd>& rows) const {
  MatrixXd out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) out.row(i) = inverse(rows.row(i).transpose()).transpose();
  return out;
}

// ------------------------------------------------------------------- Sampling

SamplingStrategy parse_strategy(const std::string& name) {
  if (name == "random") return SamplingStrategy::random;
  if (name == "lhs") return SamplingStrategy::lhs;
  if (name == "sobol") return SamplingStrategy::sobol;
  if (name == "grid") return SamplingStrategy::grid;
  fail(ErrorKind::parameter, "unknown sampling strategy '" + name + "'");
}

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::lhs: return "lhs";
    case SamplingStrategy::sobol: return "sobol";
    case SamplingStrategy::grid: return "grid";
  }
  return "unknown";
}

namespace {

MatrixXd scale_unit(const MatrixXd& unit, const SearchSpace& space) {
  MatrixXd out(unit.rows(), unit.cols());
  for (Index i = 0; i < unit.rows(); ++i) {
    for (int j = 0; j < space.dim(); ++j) {
      const auto& b = space[j];
      out(i, j) = std::clamp(b.lower + unit(i, j) * (b.upper - b.lower), b.lower, b.upper);
    }
  }
  return out;
}

double min_pairwise_distance(const MatrixXd& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < pts.rows(); ++i)
    for (Index j = i + 1; j < pts.rows(); ++j) best = std::min(best, (pts.row(i) - pts.row(j)).squaredNorm());
  return best;
}

MatrixXd lhs_unit(std::size_t n, int m, Rng& rng) {
  MatrixXd u(static_cast<Index>(n), m);
  std::vector<std::size_t> perm(n);
  for (int j = 0; j < m; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span(perm));
    for (std::size_t i = 0; i < n; ++i) {
      u(static_cast<Index>(i), j) = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    }
  }
  return u;
}

constexpr int kLhsCandidates = 64;

std::size_t grid_levels(std::size_t n, int m) {
  std::size_t g = 1;
  auto power = [m](std::size_t base) {
    long double acc = 1;
    for (int i = 0; i < m; ++i) acc *= static_cast<long double>(base);
    return acc;
  };
  while (power(g) < static_cast<long double>(n)) ++g;
  return g;
}

}  // namespace

MatrixXd sample_static(SamplingStrategy strategy, std::size_t n, const SearchSpace& space, std::uint64_t seed) {
  require(n >= 1, ErrorKind::empty_request, "requested zero samples");
  require(space.dim() >= 1, ErrorKind::parameter, "search space has no dimensions");
  const int m = space.dim();
  Rng rng(seed);

  switch (strategy) {
    case SamplingStrategy::random: {
      MatrixXd u(static_cast<Index>(n), m);
      for (Index i = 0; i < u.rows(); ++i)
        for (int j = 0; j < m; ++j) u(i, j) = rng.uniform();
      return scale_unit(u, space);
    }
    case SamplingStrategy::lhs: {
      MatrixXd best;
      double best_dist = -1.0;
      for (int c = 0; c < kLhsCandidates; ++c) {
        MatrixXd cand = lhs_unit(n, m, rng);
        const double d = n > 1 ? min_pairwise_distance(cand) : 0.0;
        if (d > best_dist) {
          best_dist = d;
          best = std::move(cand);
        }
      }
      // Scale stratum by stratum so rounding can never move a value into a
      // neighbouring stratum.
      MatrixXd out(best.rows(), m);
      for (Index i = 0; i < best.rows(); ++i) {
        for (int j = 0; j < m; ++j) {
          const auto& b = space[j];
          const double w = (b.upper - b.lower) / static_cast<double>(n);
          const double pos = best(i, j) * static_cast<double>(n);
          const double stratum = std::min(std::floor(pos), static_cast<double>(n - 1));
          const double lo = b.lower + stratum * w;
          const double hi = stratum + 1 == static_cast<double>(n) ? b.upper : b.lower + (stratum + 1) * w;
          double v = lo + (pos - stratum) * w;
          if (v >= hi) v = std::nextafter(hi, lo);
          out(i, j) = std::max(v, lo);
        }
      }
      return out;
    }
    case SamplingStrategy::sobol: {
      if ((n & (n - 1)) != 0)
        diag::warn("Sobol sample size " + std::to_string(n) + " is not a power of 2; balance properties are lost");
      return scale_unit(sobol_points(n, m), space);
    }
    case SamplingStrategy::grid: {
      const std::size_t g = grid_levels(n, m);
      std::size_t total = 1;
      for (int j = 0; j < m; ++j) total *= g;
      std::vector<std::size_t> order(total);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span(order));
      MatrixXd out(static_cast<Index>(n), m);
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t code = order[r];
        for (int j = 0; j < m; ++j) {
          const std::size_t level = code % g;
          code /= g;
          const auto& b = space[j];
          out(static_cast<Index>(r), j) =
              g == 1 ? 0.5 * (b.lower + b.upper)
                     : (level + 1 == g ? b.upper
                                       : b.lower + (b.upper - b.lower) * static_cast<double>(level) /
                                                       static_cast<double>(g - 1));
        }
      }
      return out;
    }
  }
  fail(ErrorKind::parameter, "unknown sampling strategy");
}

// -------------------------------------------------------------------- Dataset

void Dataset::validate() const {
  const auto rows = x.rows();
  require(y.rows() == rows, ErrorKind::shape,
          "x has " + std::to_string(rows) + " rows but y has " + std::to_string(y.rows()));
  require(x.cols() == space.dim(), ErrorKind::shape,
          "x has " + std::to_string(x.cols()) + " columns but the space has " + std::to_string(space.dim()) +
              " dimensions");
  if (t) {
    require(static_cast<Index>(t->size()) == rows, ErrorKind::shape,
            "t has " + std::to_string(t->size()) + " entries, expected " + std::to_string(rows));
    for (std::size_t i = 0; i < t->size(); ++i)
      require((*t)[i] == 0 || (*t)[i] == 1, ErrorKind::validation,
              "row " + std::to_string(i + 1) + ": t must be 0 or 1");
  }
  std::vector<std::size_t> bad;
  for (Index i = 0; i < rows; ++i)
    if (!space.contains(x.row(i).transpose())) bad.push_back(static_cast<std::size_t>(i + 1));
  if (!bad.empty()) {
    std::string list;
    for (auto r : bad) list += (list.empty() ? "" : ", ") + std::to_string(r);
    fail(ErrorKind::validation, "x rows outside the search space bounds: " + list);
  }
  if (has_split()) {
    std::vector<int> seen(static_cast<std::size_t>(rows), 0);
    for (auto i : train_idx) {
      require(i < static_cast<std::size_t>(rows), ErrorKind::validation, "train index out of range");
      ++seen[i];
    }
    for (auto i : test_idx) {
      require(i < static_cast<std::size_t>(rows), ErrorKind::validation, "test index out of range");
      ++seen[i];
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      require(seen[i] == 1, ErrorKind::validation,
              "row " + std::to_string(i + 1) + " must belong to exactly one of train/test");
  }
  for (const auto* s : {&x_scaler, &y_scaler}) {
    if (!s->has_value()) continue;
    for (Index j = 0; j < (*s)->std.size(); ++j)
      require((*s)->std[j] > 0, ErrorKind::validation, "scaler std entries must be positive");
  }
}

std::vector<std::size_t> Dataset::fit_rows() const {
  if (has_split()) return train_idx;
  std::vector<std::size_t> all(n());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

std::vector<std::size_t> Dataset::converged_fit_rows() const {
  auto rows = fit_rows();
  if (!t) return rows;
  std::erase_if(rows, [this](std::size_t i) { return (*t)[i] != 1; });
  return rows;
}

MatrixXd Dataset::rows_x(const std::vector<std::size_t>& idx) const {
  MatrixXd out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = x.row(static_cast<Index>(idx[r]));
  return out;
}

MatrixXd Dataset::rows_y(const std::vector<std::size_t>& idx) const {
  MatrixXd out(static_cast<Index>(idx.size()), y.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = y.row(static_cast<Index>(idx[r]));
  return out;
}

std::vector<int> Dataset::rows_t(const std::vector<std::size_t>& idx) const {
  require(t.has_value(), ErrorKind::validation, "dataset has no convergence targets");
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back((*t)[i]);
  return out;
}

namespace {
const Scaler& need(const std::optional<Scaler>& s, const char* which) {
  require(s.has_value(), ErrorKind::validation, std::string(which) + " scaler not populated; call standardize()");
  return *s;
}
}  // namespace

VectorXd Dataset::scale_x(const Eigen::Ref<const VectorXd>& v) const { return need(x_scaler, "x").transform(v); }
VectorXd Dataset::inv_scale_x(const Eigen::Ref<const VectorXd>& v) const { return need(x_scaler, "x").inverse(v); }
VectorXd Dataset::scale_y(const Eigen::Ref<const VectorXd>& v) const { return need(y_scaler, "y").transform(v); }
VectorXd Dataset::inv_scale_y(const Eigen::Ref<const VectorXd>& v) const { return need(y_scaler, "y").inverse(v); }
MatrixXd Dataset::scale_x_rows(const Eigen::Ref<const MatrixXd>& rows) const {
  return need(x_scaler, "x").transform_rows(rows);
}
MatrixXd Dataset::scale_y_rows(const Eigen::Ref<const MatrixXd>& rows) const {
  return need(y_scaler, "y").transform_rows(rows);
}

SearchSpace Dataset::scale_space() const { return scale_space(space); }

SearchSpace Dataset::scale_space(const SearchSpace& box) const {
  const auto lo = scale_x(box.lower());
  const auto hi = scale_x(box.upper());
  std::vector<Bound> b;
  for (int j = 0; j < box.dim(); ++j) b.push_back({lo[j], hi[j]});
  return SearchSpace(std::move(b));
}

SearchSpace Dataset::inv_scale_space(const SearchSpace& box) const {
  const auto lo = inv_scale_x(box.lower());
  const auto hi = inv_scale_x(box.upper());
  std::vector<Bound> b;
  for (int j = 0; j < box.dim(); ++j) b.push_back({lo[j], hi[j]});
  return SearchSpace(std::move(b));
}

Dataset make_dataset(MatrixXd x, MatrixXd y, std::optional<std::vector<int>> t, SearchSpace space) {
  Dataset ds;
  ds.x = std::move(x);
  ds.y = std::move(y);
  ds.t = std::move(t);
  ds.space = std::move(space);
  ds.validate();
  return ds;
}

Dataset split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::parameter,
          "test_fraction must lie in (0, 1), got " + std::to_string(test_fraction));
  const std::size_t n = ds.n();
  require(n >= 2, ErrorKind::degenerate_split, "need at least 2 rows to split");
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  require(n_test < n, ErrorKind::degenerate_split,
          "test_fraction " + std::to_string(test_fraction) + " leaves no training rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));
  Dataset out = ds;
  out.test_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.test_idx.begin(), out.test_idx.end());
  std::sort(out.train_idx.begin(), out.train_idx.end());
  out.x_scaler.reset();
  out.y_scaler.reset();
  return out;
}

namespace {

Scaler column_moments(const MatrixXd& rows, const char* what, std::vector<std::string>& warnings) {
  Scaler s;
  const auto cols = rows.cols();
  s.mean = VectorXd::Zero(cols);
  s.std = VectorXd::Ones(cols);
  if (rows.rows() == 0) return s;
  const double count = static_cast<double>(rows.rows());
  for (Index j = 0; j < cols; ++j) {
    const double mean = rows.col(j).sum() / count;
    const double var = (rows.col(j).array() - mean).square().sum() / count;
    const double sd = std::sqrt(var);
    s.mean[j] = mean;
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      std::string msg = std::string(what) + " column " + std::to_string(j + 1) + " has zero variance; std set to 1";
      diag::warn(msg);
      warnings.push_back(std::move(msg));
      s.std[j] = 1.0;
    } else {
      s.std[j] = sd;
    }
  }
  return s;
}

}  // namespace

Dataset standardize(const Dataset& ds) {
  require(ds.n() >= 1, ErrorKind::validation, "cannot standardise an empty dataset");
  Dataset out = ds;
  const auto rows = ds.fit_rows();
  require(!rows.empty(), ErrorKind::validation, "training set is empty");
  out.x_scaler = column_moments(ds.rows_x(rows), "x", out.warnings);

  auto y_rows = rows;
  if (ds.t) {
    auto feasible = ds.converged_fit_rows();
    if (feasible.empty()) {
      std::string msg = "no training row has t = 1; y moments computed from all training rows";
      diag::warn(msg);
      out.warnings.push_back(std::move(msg));
    } else {
      y_rows = std::move(feasible);
    }
  }
  out.y_scaler = column_moments(ds.rows_y(y_rows), "y", out.warnings);
  return out;
}

// ---------------------------------------------------------------- Persistence

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    fail(ErrorKind::parse, "row " + std::to_string(row) + ", field " + field + ": '" + s + "' is not a finite number");
  return v;
}

nlohmann::json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& csv_path) {
  ds.validate();
  std::ofstream csv(csv_path);
  require(csv.good(), ErrorKind::io, "cannot write " + csv_path.string());
  for (int j = 0; j < ds.m(); ++j) csv << (j ? "," : "") << 'x' << j + 1;
  for (int j = 0; j < ds.p(); ++j) csv << ",y" << j + 1;
  if (ds.t) csv << ",t";
  csv << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Index>(i);
    for (int j = 0; j < ds.m(); ++j) csv << (j ? "," : "") << fmt_double(ds.x(r, j));
    for (int j = 0; j < ds.p(); ++j) csv << ',' << fmt_double(ds.y(r, j));
    if (ds.t) csv << ',' << (*ds.t)[i];
    csv << '\n';
  }
  require(csv.good(), ErrorKind::io, "failed writing " + csv_path.string());

  nlohmann::json side;
  side["schema_version"] = kDatasetSchemaVersion;
  auto& space = side["space"] = nlohmann::json::array();
  for (const auto& b : ds.space.bounds()) space.push_back({b.lower, b.upper});
  side["train_idx"] = ds.train_idx;
  side["test_idx"] = ds.test_idx;
  side["x_mean"] = ds.x_scaler ? vec_json(ds.x_scaler->mean) : nlohmann::json(nullptr);
  side["x_std"] = ds.x_scaler ? vec_json(ds.x_scaler->std) : nlohmann::json(nullptr);
  side["y_mean"] = ds.y_scaler ? vec_json(ds.y_scaler->mean) : nlohmann::json(nullptr);
  side["y_std"] = ds.y_scaler ? vec_json(ds.y_scaler->std) : nlohmann::json(nullptr);
  std::ofstream js(sidecar_path(csv_path));
  require(js.good(), ErrorKind::io, "cannot write " + sidecar_path(csv_path).string());
  js << side.dump(2) << '\n';
}

Dataset load(const std::filesystem::path& csv_path) {
  std::ifstream csv(csv_path);
  require(csv.good(), ErrorKind::io, "cannot read " + csv_path.string());
  std::string line;
  require(static_cast<bool>(std::getline(csv, line)), ErrorKind::parse, "missing header row");
  const auto header = split_csv_line(line);
  int m = 0, p = 0;
  bool has_t = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    const bool x_col = h == "x" + std::to_string(m + 1);
    const bool y_col = h == "y" + std::to_string(p + 1);
    if (x_col && p == 0 && !has_t) {
      ++m;
    } else if (y_col && !has_t) {
      ++p;
    } else if (h == "t" && c + 1 == header.size()) {
      has_t = true;
    } else {
      fail(ErrorKind::parse, "header field " + std::to_string(c + 1) + " ('" + h + "') breaks the x1..xm,y1..yp[,t] layout");
    }
  }
  require(m >= 1, ErrorKind::parse, "header declares no x columns");

  std::vector<std::vector<double>> xs, ys;
  std::vector<int> ts;
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorKind::parse,
            "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " fields, expected " +
                std::to_string(header.size()));
    std::vector<double> xr, yr;
    for (int j = 0; j < m; ++j) xr.push_back(parse_double(cells[j], row, header[j]));
    for (int j = 0; j < p; ++j) yr.push_back(parse_double(cells[m + j], row, header[m + j]));
    if (has_t) {
      const auto& c = cells.back();
      require(c == "0" || c == "1", ErrorKind::parse,
              "row " + std::to_string(row) + ", field t: '" + c + "' is not a binary target");
      ts.push_back(c == "1" ? 1 : 0);
    }
    xs.push_back(std::move(xr));
    ys.push_back(std::move(yr));
  }

  std::ifstream js(sidecar_path(csv_path));
  require(js.good(), ErrorKind::io, "cannot read sidecar " + sidecar_path(csv_path).string());
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "sidecar: " + std::string(e.what()));
  }

  Dataset ds;
  try {
    require(side.at("schema_version").get<int>() == kDatasetSchemaVersion, ErrorKind::parse,
            "unsupported dataset schema_version");
    std::vector<Bound> bounds;
    for (const auto& b : side.at("space")) bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    ds.space = SearchSpace(std::move(bounds));
    ds.train_idx = side.at("train_idx").get<std::vector<std::size_t>>();
    ds.test_idx = side.at("test_idx").get<std::vector<std::size_t>>();
    if (!side.at("x_mean").is_null()) ds.x_scaler = Scaler{json_vec(side["x_mean"]), json_vec(side.at("x_std"))};
    if (!side.at("y_mean").is_null()) ds.y_scaler = Scaler{json_vec(side["y_mean"]), json_vec(side.at("y_std"))};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "sidecar: " + std::string(e.what()));
  }

  ds.x.resize(static_cast<Index>(xs.size()), m);
  ds.y.resize(static_cast<Index>(ys.size()), p);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int j = 0; j < m; ++j) ds.x(static_cast<Index>(i), j) = xs[i][j];
    for (int j = 0; j < p; ++j) ds.y(static_cast<Index>(i), j) = ys[i][j];
  }
  if (has_t) ds.t = std::move(ts);
  ds.validate();
  return ds;
}

}  // namespace sdfo
