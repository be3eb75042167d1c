#include "sdfo/geom.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <gmpxx.h>

#include "sdfo/error.hpp"
#include "sdfo/log.hpp"

namespace sdfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// ------------------------------------------------------------- determinants

int sign_of(double v) { return (v > 0) - (v < 0); }

// Gaussian elimination with partial pivoting. `bound` receives the Hadamard
// style magnitude used by the filter.
double det_double(std::vector<double> a, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      det = -det;
    }
    det *= a[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (int k = c + 1; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
    }
  }
  return det;
}

// Doubles are dyadic rationals, so after a common power-of-two scaling every
// coordinate is an integer and the sign follows from fraction-free (Bareiss)
// elimination over the integers.
int det_sign_exact(std::vector<mpz_class> a, int n) {
  int sign = 1;
  mpz_class prev = 1;
  for (int c = 0; c < n; ++c) {
    int piv = -1;
    for (int r = c; r < n; ++r)
      if (sgn(a[r * n + c]) != 0) {
        piv = r;
        break;
      }
    if (piv < 0) return 0;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      sign = -sign;
    }
    for (int r = c + 1; r < n; ++r) {
      for (int k = c + 1; k < n; ++k) {
        a[r * n + k] = a[c * n + c] * a[r * n + k] - a[r * n + c] * a[c * n + k];
        mpz_divexact(a[r * n + k].get_mpz_t(), a[r * n + k].get_mpz_t(), prev.get_mpz_t());
      }
    }
    prev = a[c * n + c];
  }
  return sign * sgn(a[(n - 1) * n + (n - 1)]);
}

// Integer images of a set of doubles under one common scaling 2^-emin.
class DyadicScale {
 public:
  void see(double v) {
    if (v == 0.0) return;
    int e = 0;
    std::frexp(v, &e);
    emin_ = std::min(emin_, e - 53);
  }
  mpz_class operator()(double v) const {
    if (v == 0.0) return 0;
    int e = 0;
    const double mant = std::frexp(v, &e);
    mpz_class z(std::ldexp(mant, 53));  // exact 53-bit integer
    const int shift = e - 53 - emin_;
    mpz_mul_2exp(z.get_mpz_t(), z.get_mpz_t(), static_cast<mp_bitcnt_t>(shift));
    return z;
  }

 private:
  int emin_ = 0;
};

// The filter: entries are formed from coordinates whose magnitude is bounded
// by `mag` per row; trust the double sign when it clears a generous multiple
// of the accumulated round-off.
constexpr double kFilter = 1e-10;

int orientation_rows(const std::vector<const double*>& v, int m) {
  std::vector<double> a(static_cast<std::size_t>(m * m));
  double bound = 1.0;
  for (int i = 0; i < m; ++i) {
    double mag = 0.0;
    for (int j = 0; j < m; ++j) {
      a[i * m + j] = v[i + 1][j] - v[0][j];
      mag += (std::abs(v[i + 1][j]) + std::abs(v[0][j])) * (std::abs(v[i + 1][j]) + std::abs(v[0][j]));
    }
    bound *= std::sqrt(mag);
  }
  const double d = det_double(a, m);
  if (std::abs(d) > kFilter * bound) return sign_of(d);
  DyadicScale sc;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j < m; ++j) sc.see(v[i][j]);
  std::vector<mpz_class> e(static_cast<std::size_t>(m * m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) e[i * m + j] = sc(v[i + 1][j]) - sc(v[0][j]);
  return det_sign_exact(std::move(e), m);
}

// det of rows [v_i - p, |v_i - p|^2], i = 0..m
int insphere_det_sign(const std::vector<const double*>& v, const double* p, int m) {
  const int n = m + 1;
  std::vector<double> a(static_cast<std::size_t>(n * n));
  double bound = 1.0;
  for (int i = 0; i < n; ++i) {
    double sq = 0.0, mag = 0.0;
    for (int j = 0; j < m; ++j) {
      const double d = v[i][j] - p[j];
      a[i * n + j] = d;
      sq += d * d;
      const double s = std::abs(v[i][j]) + std::abs(p[j]);
      mag += s * s;
    }
    a[i * n + m] = sq;
    bound *= std::sqrt(mag + mag * mag);
  }
  const double d = det_double(a, n);
  if (std::abs(d) > kFilter * bound) return sign_of(d);
  DyadicScale sc;
  for (int j = 0; j < m; ++j) {
    sc.see(p[j]);
    for (int i = 0; i < n; ++i) sc.see(v[i][j]);
  }
  std::vector<mpz_class> e(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    mpz_class sq = 0;
    for (int j = 0; j < m; ++j) {
      mpz_class d2 = sc(v[i][j]) - sc(p[j]);
      sq += d2 * d2;
      e[i * n + j] = std::move(d2);
    }
    e[i * n + m] = std::move(sq);
  }
  return det_sign_exact(std::move(e), n);
}

// insphere sign for "inside" given a positively oriented simplex, per dimension
int inside_sign(int m) {
  static int cache[kMaxTriangulationDim + 2] = {0};
  if (cache[m] != 0) return cache[m];
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(m + 1), std::vector<double>(static_cast<std::size_t>(m), 0.0));
  for (int i = 1; i <= m; ++i) pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i - 1)] = 1.0;
  std::vector<const double*> v;
  for (auto& p : pts) v.push_back(p.data());
  if (orientation_rows(v, m) < 0) std::swap(v[0], v[1]);
  std::vector<double> c(static_cast<std::size_t>(m), 1.0 / (m + 1));
  cache[m] = insphere_det_sign(v, c.data(), m);
  return cache[m];
}

// Strictly inside the circumsphere of an (m-1)-simplex lying in R^m,
// measured within its own affine hull. Exact.
bool inside_facet_sphere(const std::vector<const double*>& f, const double* p, int m) {
  const int k = static_cast<int>(f.size()) - 1;  // facet dimension
  if (k <= 0) return false;
  std::vector<std::vector<mpq_class>> e(static_cast<std::size_t>(k), std::vector<mpq_class>(static_cast<std::size_t>(m)));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) e[i][j] = mpq_class(f[i + 1][j]) - mpq_class(f[0][j]);
  // G lambda = rhs with G_ij = e_i . e_j, rhs_i = |e_i|^2 / 2
  std::vector<mpq_class> g(static_cast<std::size_t>(k * (k + 1)));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      mpq_class s = 0;
      for (int c = 0; c < m; ++c) s += e[i][c] * e[j][c];
      g[i * (k + 1) + j] = s;
    }
    mpq_class s = 0;
    for (int c = 0; c < m; ++c) s += e[i][c] * e[i][c];
    g[i * (k + 1) + k] = s / 2;
  }
  for (int c = 0; c < k; ++c) {
    int piv = c;
    while (piv < k && sgn(g[piv * (k + 1) + c]) == 0) ++piv;
    if (piv == k) return false;  // degenerate facet
    if (piv != c)
      for (int q = 0; q <= k; ++q) std::swap(g[c * (k + 1) + q], g[piv * (k + 1) + q]);
    for (int r = 0; r < k; ++r) {
      if (r == c || sgn(g[r * (k + 1) + c]) == 0) continue;
      const mpq_class fct = g[r * (k + 1) + c] / g[c * (k + 1) + c];
      for (int q = c; q <= k; ++q) g[r * (k + 1) + q] -= fct * g[c * (k + 1) + q];
    }
  }
  std::vector<mpq_class> center(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) center[c] = f[0][c];
  for (int i = 0; i < k; ++i) {
    const mpq_class lam = g[i * (k + 1) + k] / g[i * (k + 1) + i];
    for (int c = 0; c < m; ++c) center[c] += lam * e[i][c];
  }
  mpq_class r2 = 0, d2 = 0;
  for (int c = 0; c < m; ++c) {
    const mpq_class a = mpq_class(f[0][c]) - center[c];
    const mpq_class b = mpq_class(p[c]) - center[c];
    r2 += a * a;
    d2 += b * b;
  }
  return d2 < r2;
}

std::vector<const double*> row_ptrs(const MatrixXd& rowmajor_t, const std::vector<int>& idx) {
  std::vector<const double*> v;
  v.reserve(idx.size());
  for (int i : idx) v.push_back(rowmajor_t.col(i).data());
  return v;
}

double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

}  // namespace

int orientation(const MatrixXd& simplex) {
  const int m = static_cast<int>(simplex.cols());
  require(simplex.rows() == m + 1, ErrorKind::shape, "orientation needs m+1 points in R^m");
  const MatrixXd t = simplex.transpose();
  std::vector<int> idx(static_cast<std::size_t>(m + 1));
  std::iota(idx.begin(), idx.end(), 0);
  return orientation_rows(row_ptrs(t, idx), m);
}

int in_circumsphere(const MatrixXd& simplex, const Eigen::Ref<const VectorXd>& p) {
  const int m = static_cast<int>(simplex.cols());
  require(simplex.rows() == m + 1 && p.size() == m, ErrorKind::shape, "in_circumsphere needs m+1 points in R^m");
  const MatrixXd t = simplex.transpose();
  std::vector<int> idx(static_cast<std::size_t>(m + 1));
  std::iota(idx.begin(), idx.end(), 0);
  auto v = row_ptrs(t, idx);
  const int o = orientation_rows(v, m);
  require(o != 0, ErrorKind::degeneracy, "circumsphere of a degenerate simplex");
  if (o < 0) std::swap(v[0], v[1]);
  const VectorXd q = p;
  const int s = insphere_det_sign(v, q.data(), m);
  return s == 0 ? 0 : (s == inside_sign(m) ? 1 : -1);
}

double simplex_measure(const MatrixXd& vertices) {
  const auto m = vertices.cols();
  require(vertices.rows() == m + 1, ErrorKind::shape, "a simplex in R^m has m+1 vertices");
  MatrixXd e(m, m);
  for (Eigen::Index i = 0; i < m; ++i) e.row(i) = vertices.row(i + 1) - vertices.row(0);
  return std::abs(e.determinant()) / factorial(static_cast<int>(m));
}

VectorXd centroid(const MatrixXd& vertices) { return vertices.colwise().mean().transpose(); }

MatrixXd Triangulation::vertices(std::size_t s) const {
  const auto& cell = simplices.at(s);
  MatrixXd v(static_cast<Eigen::Index>(cell.size()), points.cols());
  for (std::size_t i = 0; i < cell.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = points.row(cell[i]);
  return v;
}

namespace {

constexpr int kInfinite = -1;

struct Cell {
  std::vector<int> v;  // finite cells: m+1 vertices, positively oriented
  bool alive = true;
  bool infinite() const { return v[0] == kInfinite; }
};

class BowyerWatson {
 public:
  BowyerWatson(const MatrixXd& pts) : m_(static_cast<int>(pts.cols())), t_(pts.transpose()) {}

  void run(const std::vector<int>& order) {
    // initial simplex: greedily take affinely independent points
    std::vector<int> base{order[0]};
    for (std::size_t k = 1; k < order.size() && static_cast<int>(base.size()) < m_ + 1; ++k) {
      auto trial = base;
      trial.push_back(order[k]);
      if (affinely_independent(trial)) base = std::move(trial);
    }
    require(static_cast<int>(base.size()) == m_ + 1, ErrorKind::degeneracy,
            "points are affinely degenerate: fewer than m+1 independent points");
    interior_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int i : base)
      for (int j = 0; j < m_; ++j) interior_[j] += t_(j, i) / (m_ + 1);

    auto first = base;
    orient(first);
    cells_.push_back({first});
    for (int drop = 0; drop <= m_; ++drop) {
      std::vector<int> f{kInfinite};
      for (int i = 0; i <= m_; ++i)
        if (i != drop) f.push_back(first[i]);
      cells_.push_back({f});
    }
    std::set<int> used(base.begin(), base.end());
    for (int p : order)
      if (!used.count(p)) insert(p);
  }

  std::vector<std::vector<int>> finite_cells() const {
    std::vector<std::vector<int>> out;
    for (const auto& c : cells_)
      if (c.alive && !c.infinite()) out.push_back(c.v);
    return out;
  }

 private:
  bool affinely_independent(const std::vector<int>& idx) const {
    const auto k = static_cast<Eigen::Index>(idx.size()) - 1;
    if (k == 0) return true;
    MatrixXd e(m_, k);
    for (Eigen::Index i = 0; i < k; ++i) e.col(i) = t_.col(idx[i + 1]) - t_.col(idx[0]);
    Eigen::FullPivLU<MatrixXd> lu(e);
    lu.setThreshold(1e-12);
    if (lu.rank() == k) return true;
    if (k < m_) return false;
    // full-dimensional candidate: settle it exactly
    return orientation_rows(row_ptrs(t_, idx), m_) != 0;
  }

  void orient(std::vector<int>& c) const {
    if (orientation_rows(row_ptrs(t_, c), m_) < 0) std::swap(c[0], c[1]);
  }

  bool in_conflict(const Cell& c, int p) const {
    const double* pp = t_.col(p).data();
    if (!c.infinite()) {
      const int s = insphere_det_sign(row_ptrs(t_, c.v), pp, m_);
      return s != 0 && s == inside_sign(m_);
    }
    // hull facet: conflict when p is strictly beyond it, or on its hyperplane
    // and inside the facet's own circumsphere
    std::vector<int> f(c.v.begin() + 1, c.v.end());
    auto rows = row_ptrs(t_, f);
    rows.push_back(pp);
    const int sp = orientation_rows(rows, m_);
    rows.back() = interior_.data();
    const int si = orientation_rows(rows, m_);
    if (sp != 0) return sp == -si;
    return inside_facet_sphere(row_ptrs(t_, f), pp, m_);
  }

  void insert(int p) {
    std::vector<std::size_t> conflict;
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i].alive && in_conflict(cells_[i], p)) conflict.push_back(i);
    if (conflict.empty()) fail(ErrorKind::internal, "point " + std::to_string(p) + " conflicts with no cell");

    // boundary facets appear in exactly one conflict cell
    std::map<std::vector<int>, int> count;
    std::vector<std::vector<int>> facets;
    for (std::size_t ci : conflict) {
      const auto& v = cells_[ci].v;
      for (int drop = 0; drop <= m_; ++drop) {
        std::vector<int> f;
        for (int i = 0; i <= m_; ++i)
          if (i != drop) f.push_back(v[i]);
        std::sort(f.begin(), f.end());
        if (count[f]++ == 0) facets.push_back(f);
      }
    }
    for (std::size_t ci : conflict) cells_[ci].alive = false;
    for (const auto& f : facets) {
      if (count[f] != 1) continue;
      std::vector<int> nc;
      if (f[0] == kInfinite) {
        nc = f;  // -1 sorts first
        nc.push_back(p);
      } else {
        nc = f;
        nc.push_back(p);
        orient(nc);
      }
      cells_.push_back({nc});
    }
    // drop dead cells now and then to keep the scan short
    if (cells_.size() > 4 * alive_count() + 64) compact();
  }

  std::size_t alive_count() const {
    return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](const Cell& c) { return c.alive; }));
  }

  void compact() {
    std::vector<Cell> keep;
    for (auto& c : cells_)
      if (c.alive) keep.push_back(std::move(c));
    cells_ = std::move(keep);
  }

  int m_;
  MatrixXd t_;  // column per point
  std::vector<double> interior_;
  std::vector<Cell> cells_;
};

}  // namespace

Triangulation triangulate(const MatrixXd& points, const std::optional<SearchSpace>& space, bool include_vertices) {
  const int m = static_cast<int>(points.cols());
  require(m >= 1 && m <= kMaxTriangulationDim, ErrorKind::parameter,
          "triangulation dimension must be in [1, " + std::to_string(kMaxTriangulationDim) + "]");
  require(points.allFinite(), ErrorKind::parameter, "points must be finite");
  MatrixXd all = points;
  if (include_vertices) {
    require(space.has_value(), ErrorKind::parameter, "box corners need a search space");
    require(space->dim() == m, ErrorKind::shape, "search space dimension differs from the points");
    const MatrixXd c = space->corners();
    all.conservativeResize(points.rows() + c.rows(), m);
    all.bottomRows(c.rows()) = c;
  }

  Triangulation tri;
  std::map<std::vector<double>, int> seen;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < all.rows(); ++i) {
    std::vector<double> key(all.row(i).data(), all.row(i).data() + 0);
    key.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) key[j] = all(i, j);
    auto [it, fresh] = seen.emplace(key, static_cast<int>(keep.size()));
    if (fresh) keep.push_back(i);
    tri.index_of_input.push_back(it->second);
  }
  if (keep.size() < static_cast<std::size_t>(all.rows())) {
    const std::string w = std::to_string(all.rows() - static_cast<Eigen::Index>(keep.size())) + " duplicate point(s) removed";
    tri.warnings.push_back(w);
    diag::warn(w);
  }
  tri.points.resize(static_cast<Eigen::Index>(keep.size()), m);
  for (std::size_t i = 0; i < keep.size(); ++i) tri.points.row(static_cast<Eigen::Index>(i)) = all.row(keep[i]);
  require(tri.points.rows() >= m + 1, ErrorKind::degeneracy,
          "need at least m+1 distinct points, got " + std::to_string(tri.points.rows()));

  std::vector<int> order(static_cast<std::size_t>(tri.points.rows()));
  std::iota(order.begin(), order.end(), 0);
  BowyerWatson bw(tri.points);
  bw.run(order);
  tri.simplices = bw.finite_cells();
  // stable output order: sorted vertex lists
  for (auto& s : tri.simplices) std::sort(s.begin(), s.end());
  std::sort(tri.simplices.begin(), tri.simplices.end());

  tri.centroids.resize(static_cast<Eigen::Index>(tri.simplices.size()), m);
  for (std::size_t s = 0; s < tri.simplices.size(); ++s) {
    const MatrixXd v = tri.vertices(s);
    tri.volumes.push_back(simplex_measure(v));
    tri.centroids.row(static_cast<Eigen::Index>(s)) = centroid(v).transpose();
  }
  return tri;
}

}  // namespace sdfo
