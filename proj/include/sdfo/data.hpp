#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sdfo {

struct Bound {
  double lower;
  double upper;
};

/// Box of finite bounds, one per input dimension, lower < upper.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<Bound> bounds);

  int dim() const { return static_cast<int>(bounds_.size()); }
  const std::vector<Bound>& bounds() const { return bounds_; }
  const Bound& operator[](int i) const { return bounds_[static_cast<std::size_t>(i)]; }

  Eigen::VectorXd lower() const;
  Eigen::VectorXd upper() const;
  Eigen::VectorXd center() const;

  /// Componentwise lower - tol <= x <= upper + tol.
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 0.0) const;

  /// The 2^m corner points, one per row, in binary counting order.
  Eigen::MatrixXd corners() const;

  bool operator==(const SearchSpace&) const = default;

 private:
  std::vector<Bound> bounds_;
};

inline bool operator==(const Bound& a, const Bound& b) {
  return a.lower == b.lower && a.upper == b.upper;
}

/// Column moments used for standardisation. Every std entry is > 0.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::VectorXd inverse(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::MatrixXd transform_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;
  Eigen::MatrixXd inverse_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;
};

enum class SamplingStrategy { random, lhs, sobol, grid };

SamplingStrategy parse_strategy(const std::string& name);
std::string to_string(SamplingStrategy s);

/// n static samples inside the box, deterministic in (strategy, n, space, seed).
/// Grid: ceil(n^(1/m)) evenly spaced values per dimension (bounds inclusive),
/// full Cartesian grid shuffled with the seed, first n rows returned.
/// LHS: one sample per stratum per dimension, best of a seeded batch of
/// candidates under the maximin pairwise-distance criterion.
Eigen::MatrixXd sample_static(SamplingStrategy strategy, std::size_t n, const SearchSpace& space,
                              std::uint64_t seed);

/// Inputs, outputs and convergence flags in original units, plus an optional
/// train/test split and scaler moments. `validate()` enforces the invariants.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  std::optional<std::vector<int>> t;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  SearchSpace space;
  std::optional<Scaler> x_scaler;
  std::optional<Scaler> y_scaler;
  std::vector<std::string> warnings;

  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  int m() const { return static_cast<int>(x.cols()); }
  int p() const { return static_cast<int>(y.cols()); }
  bool has_split() const { return !train_idx.empty() || !test_idx.empty(); }
  bool is_scaled() const { return x_scaler.has_value() && y_scaler.has_value(); }

  void validate() const;

  /// Row indices used for fitting: train rows when split, else all rows.
  std::vector<std::size_t> fit_rows() const;
  /// fit_rows() restricted to t = 1 when t exists.
  std::vector<std::size_t> converged_fit_rows() const;

  Eigen::MatrixXd rows_x(const std::vector<std::size_t>& idx) const;
  Eigen::MatrixXd rows_y(const std::vector<std::size_t>& idx) const;
  std::vector<int> rows_t(const std::vector<std::size_t>& idx) const;

  Eigen::VectorXd scale_x(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::VectorXd inv_scale_x(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::VectorXd scale_y(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::VectorXd inv_scale_y(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::MatrixXd scale_x_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;
  Eigen::MatrixXd scale_y_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;
  /// Box mapped through the x scaler (original -> standardised coordinates).
  SearchSpace scale_space() const;
  SearchSpace scale_space(const SearchSpace& box) const;
  SearchSpace inv_scale_space(const SearchSpace& box) const;
};

Dataset make_dataset(Eigen::MatrixXd x, Eigen::MatrixXd y, std::optional<std::vector<int>> t,
                     SearchSpace space);

/// Seeded random partition; test set has round(test_fraction * n) rows.
Dataset split(const Dataset& ds, double test_fraction, std::uint64_t seed);

/// Populates both scalers. x moments come from train rows (all rows when
/// unsplit); y moments from train rows with t = 1 when t exists. Population
/// standard deviation; zero-variance columns get std = 1 with a warning.
Dataset standardize(const Dataset& ds);

/// Writes `csv_path` (header x1..xm,y1..yp[,t]) and a JSON sidecar next to it
/// (same stem, .json extension).
void save(const Dataset& ds, const std::filesystem::path& csv_path);
Dataset load(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

inline constexpr int kDatasetSchemaVersion = 1;

}  // namespace sdfo
