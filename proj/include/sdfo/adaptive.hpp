#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdfo/data.hpp"
#include "sdfo/formul.hpp"
#include "sdfo/geom.hpp"
#include "sdfo/gp.hpp"

namespace sdfo {

enum class AcquisitionKind { ei, modified_ei, pi, ucb, max_std, explore_triangle, exploit_triangle };

AcquisitionKind parse_acquisition(const std::string& name);
std::string to_string(AcquisitionKind k);

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::ei;
  double xi = 0.01;
  ObjSense sense = ObjSense::max;  // direction of the objective being improved

  void validate() const;
};

double normal_pdf(double u);
double normal_cdf(double u);

/// EI / modified EI / PI / UCB from a predictive mean and standard deviation.
/// For sense = min the mean and y_best are negated first. s = 0 uses the limits.
double acquisition_value(const AcquisitionSpec& spec, double mean, double s, double y_best);
double acquisition_value(const AcquisitionSpec& spec, const GprModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                         double y_best);

/// ((y - y_pred) / y)^2; y = 0 raises division_by_zero.
double relative_sq_error(double y_true, double y_pred);

/// Change in the mean prediction when sample j is left out: full(x) - minus_j(x).
double departure(const GprModel& full, const GprModel& minus_j, const Eigen::Ref<const Eigen::VectorXd>& x);

/// min proxy (sqexp) or max variance (poly) over the box.
Formulation build_max_std_problem(const GprModel& model, const SearchSpace& space);

/// max sqrt(v / 2pi) exp(-(d - xi)^2 / (2 v)) with d = mean - y_best (negated for min).
Formulation build_modified_ei_problem(const GprModel& model, double y_best, double xi, ObjSense sense,
                                      const SearchSpace& space);

/// Choose-one over Delaunay simplices, scored by their measure.
struct RegionSelection {
  Triangulation triangulation;
  std::vector<std::size_t> eligible;
  std::vector<double> scores;  // aligned with eligible
  std::optional<std::size_t> chosen;
  Eigen::VectorXd x;  // centroid of the chosen simplex

  /// Exact argmax over eligible, ties to the lowest simplex index.
  void solve();
  /// The same selection written as a MILP (one binary per eligible simplex).
  Formulation as_formulation() const;
};

/// `current` restricts eligible simplices to centroids inside it.
RegionSelection build_explore_triangle_problem(const Eigen::MatrixXd& points, const SearchSpace& space,
                                               bool include_vertices,
                                               const std::optional<SearchSpace>& current = std::nullopt);

/// Only simplices incident to the best sample (argmax/argmin of y, ties to
/// the lowest row) are eligible.
RegionSelection build_exploit_triangle_problem(const Eigen::MatrixXd& points, const Eigen::VectorXd& y, ObjSense sense,
                                               const SearchSpace& space, bool include_vertices,
                                               const std::optional<SearchSpace>& current = std::nullopt);

/// Half-widths scaled by `shrink`, re-centred, clipped to `space`.
SearchSpace adjust_bounds(const SearchSpace& space, const Eigen::Ref<const Eigen::VectorXd>& center, double shrink);

/// Adds latent(x) >= threshold from a classifier block sharing the inputs.
Formulation with_feasibility(const Formulation& problem, const Formulation& classifier, double threshold = 0.0);
/// Keeps only simplices whose centroid passes the classifier.
RegionSelection with_feasibility(const RegionSelection& selection, const Formulation& classifier,
                                 double threshold = 0.0);

}  // namespace sdfo
