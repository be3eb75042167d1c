#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sdfo {

/// Base-2 Sobol sequence with Joe-Kuo direction numbers (new-joe-kuo-6.21201),
/// Gray-code ordering, 32-bit resolution. The first point is the origin.
class SobolSequence {
 public:
  static constexpr int kMaxDims = 21;

  explicit SobolSequence(int dims);

  int dims() const { return dims_; }

  /// Next point in [0,1)^dims.
  Eigen::VectorXd next();

  /// Skip ahead by generating and discarding `count` points.
  void skip(std::uint64_t count);

 private:
  int dims_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> state_;
  std::vector<std::vector<std::uint32_t>> directions_;
};

/// First n points of the unscrambled sequence, one row per point.
Eigen::MatrixXd sobol_points(std::size_t n, int dims);

/// Sobol points with a seeded random digital shift (XOR of a per-dimension
/// random word). Preserves the (t,m,s)-net structure; deterministic per seed.
Eigen::MatrixXd shifted_sobol_points(std::size_t n, int dims, std::uint64_t seed);

}  // namespace sdfo
