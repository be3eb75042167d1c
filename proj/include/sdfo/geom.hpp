#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sdfo/data.hpp"

namespace sdfo {

/// Sign of det[v1-v0; ...; vm-v0] for m+1 points in R^m (rows of `simplex`),
/// exact: a floating-point filter with an exact rational fallback.
int orientation(const Eigen::MatrixXd& simplex);

/// +1 when p lies strictly inside the circumsphere of the simplex, -1 when
/// strictly outside, 0 when on it. Exact; the simplex must be non-degenerate.
int in_circumsphere(const Eigen::MatrixXd& simplex, const Eigen::Ref<const Eigen::VectorXd>& p);

/// |det of the edge matrix| / m!  (0 for a degenerate simplex).
double simplex_measure(const Eigen::MatrixXd& vertices);
Eigen::VectorXd centroid(const Eigen::MatrixXd& vertices);

struct Triangulation {
  Eigen::MatrixXd points;                // deduplicated input (plus corners)
  std::vector<int> index_of_input;       // input row (then corner) -> points row
  std::vector<std::vector<int>> simplices;
  std::vector<double> volumes;
  Eigen::MatrixXd centroids;             // one row per simplex
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(points.cols()); }
  std::size_t size() const { return simplices.size(); }
  Eigen::MatrixXd vertices(std::size_t s) const;
};

inline constexpr int kMaxTriangulationDim = 6;

/// Bowyer-Watson Delaunay triangulation. With include_vertices the 2^m box
/// corners are appended to the point set first.
Triangulation triangulate(const Eigen::MatrixXd& points, const std::optional<SearchSpace>& space = std::nullopt,
                          bool include_vertices = false);

}  // namespace sdfo
