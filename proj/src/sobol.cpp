#include "sdfo/sobol.hpp"

#include <array>
#include <bit>

#include "sdfo/error.hpp"
#include "sdfo/rng.hpp"

namespace sdfo {
namespace {

struct DirectionEntry {
  int s;
  std::uint32_t a;
  std::array<std::uint32_t, 8> m;
};

// new-joe-kuo-6.21201, dimensions 2..21 (dimension 1 is the van der Corput
// sequence and needs no entry).
constexpr std::array<DirectionEntry, 20> kJoeKuo = {{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
}};

constexpr int kBits = 32;

}  // namespace

SobolSequence::SobolSequence(int dims) : dims_(dims), state_(dims, 0), directions_(dims) {
  require(dims >= 1 && dims <= kMaxDims, ErrorKind::parameter,
          "Sobol dimension must be in [1, " + std::to_string(kMaxDims) + "], got " +
              std::to_string(dims));
  for (int d = 0; d < dims; ++d) {
    auto& v = directions_[d];
    v.assign(kBits + 1, 0);  // 1-based
    if (d == 0) {
      for (int k = 1; k <= kBits; ++k) v[k] = 1u << (kBits - k);
      continue;
    }
    const auto& e = kJoeKuo[d - 1];
    for (int k = 1; k <= kBits; ++k) {
      if (k <= e.s) {
        v[k] = e.m[k - 1] << (kBits - k);
      } else {
        std::uint32_t x = v[k - e.s] ^ (v[k - e.s] >> e.s);
        for (int j = 1; j < e.s; ++j) {
          if ((e.a >> (e.s - 1 - j)) & 1u) x ^= v[k - j];
        }
        v[k] = x;
      }
    }
  }
}

Eigen::VectorXd SobolSequence::next() {
  Eigen::VectorXd out(dims_);
  for (int d = 0; d < dims_; ++d) out[d] = static_cast<double>(state_[d]) * 0x1.0p-32;
  // Gray code: flip the direction indexed by the lowest zero bit of index_.
  const int c = std::countr_one(index_) + 1;
  require(c <= kBits, ErrorKind::parameter, "Sobol sequence exhausted");
  for (int d = 0; d < dims_; ++d) state_[d] ^= directions_[d][c];
  ++index_;
  return out;
}

void SobolSequence::skip(std::uint64_t count) {
  for (std::uint64_t i = 0; i < count; ++i) next();
}

Eigen::MatrixXd sobol_points(std::size_t n, int dims) {
  SobolSequence seq(dims);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), dims);
  for (std::size_t i = 0; i < n; ++i) pts.row(static_cast<Eigen::Index>(i)) = seq.next().transpose();
  return pts;
}

Eigen::MatrixXd shifted_sobol_points(std::size_t n, int dims, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint32_t> shift(dims);
  for (auto& s : shift) s = static_cast<std::uint32_t>(rng.next_u64() >> 32);
  Eigen::MatrixXd pts = sobol_points(n, dims);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int d = 0; d < dims; ++d) {
      const auto word = static_cast<std::uint32_t>(pts(i, d) * 0x1.0p32);
      pts(i, d) = static_cast<double>(word ^ shift[d]) * 0x1.0p-32;
    }
  }
  return pts;
}

}  // namespace sdfo
