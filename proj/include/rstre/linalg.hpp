#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"

namespace rstre {

using Real = long double;

/// Dense row-major square matrix.
template <class T>
class Dense {
 public:
  Dense() = default;
  explicit Dense(std::size_t n, T fill = T{}) : n_(n), a_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  T& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }
  T* row(std::size_t i) noexcept { return a_.data() + i * n_; }
  const T* row(std::size_t i) const noexcept { return a_.data() + i * n_; }

 private:
  std::size_t n_ = 0;
  std::vector<T> a_;
};

/// Gaussian elimination of a grounded weighted Laplacian that never subtracts.
///
/// The input is the symmetric matrix of nonnegative conductances between
/// vertices (diagonal ignored). Vertices are eliminated in `order`; the one
/// vertex left out of `order` is the ground. Each pivot is the total
/// conductance from the eliminated vertex to the vertices still present, and
/// every later quantity (potentials, diagonal of the inverse) is a sum of
/// nonnegative products. This stays accurate when conductances span hundreds
/// of orders of magnitude, where the textbook factorization cancels.
class GroundedElimination {
 public:
  GroundedElimination(const Dense<Real>& conductance, std::span<const std::uint32_t> order)
      : n_(conductance.size()), pos_(n_, kGround), vertex_(order.begin(), order.end()) {
    require(n_ >= 1 && order.size() + 1 == n_, ErrorKind::InvalidArgument,
            "elimination order must list every vertex but the ground");
    for (std::size_t p = 0; p < order.size(); ++p) {
      require(order[p] < n_ && pos_[order[p]] == kGround, ErrorKind::InvalidArgument,
              "elimination order is not a permutation");
      pos_[order[p]] = static_cast<std::uint32_t>(p);
    }
    for (std::uint32_t v = 0; v < n_; ++v)
      if (pos_[v] == kGround) ground_ = v;
    const std::size_t k = n_ - 1;
    // Position space: 0..k-1 eliminated in order, k is the ground.
    Dense<Real> a(n_);
    for (std::size_t p = 0; p < n_; ++p) {
      std::uint32_t vp = p < k ? vertex_[p] : ground_;
      for (std::size_t q = 0; q < n_; ++q) {
        std::uint32_t vq = q < k ? vertex_[q] : ground_;
        a(p, q) = p == q ? 0 : conductance(vp, vq);
      }
    }
    pivot_.assign(k, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const Real* ap = a.row(p);
      Real d = 0;
      for (std::size_t q = p + 1; q < n_; ++q) d += ap[q];
      pivot_[p] = d;
      if (!(d > 0)) {
        singular_ = true;
        continue;
      }
      for (std::size_t i = p + 1; i < n_; ++i) {
        Real f = a(i, p) / d;
        if (f == 0) continue;
        Real* ai = a.row(i);
        for (std::size_t j = p + 1; j < n_; ++j)
          if (j != i) ai[j] += f * ap[j];
      }
    }
    n_mat_ = Dense<Real>(k);
    for (std::size_t p = 0; p < k; ++p) {
      if (!(pivot_[p] > 0)) continue;
      for (std::size_t q = p + 1; q < k; ++q) n_mat_(p, q) = a(p, q) / pivot_[p];
    }
  }

  static constexpr std::uint32_t kGround = 0xffffffffU;

  std::uint32_t ground() const noexcept { return ground_; }
  bool singular() const noexcept { return singular_; }
  const std::vector<Real>& pivots() const noexcept { return pivot_; }

  /// Conductance between the last eliminated vertex and the ground, given
  /// every other vertex is free: 1 / R_eff(last, ground).
  Real last_pivot() const { return pivot_.empty() ? Real(0) : pivot_.back(); }

  /// log det of the grounded Laplacian (= log of the weighted tree sum).
  Real log_det() const {
    Real s = 0;
    for (Real d : pivot_) s += std::log(d);
    return s;
  }

  /// Solves L x = b with x(ground) = 0; b indexed by vertex, b(ground) ignored.
  std::vector<Real> solve(std::span<const Real> b) const {
    require(!singular_, ErrorKind::Disconnected, "grounded Laplacian is singular");
    const std::size_t k = n_ - 1;
    std::vector<Real> y(k);
    for (std::size_t p = 0; p < k; ++p) y[p] = b[vertex_[p]];
    for (std::size_t p = 0; p < k; ++p) {
      if (y[p] == 0) continue;
      const Real* np = n_mat_.row(p);
      for (std::size_t q = p + 1; q < k; ++q) y[q] += np[q] * y[p];
    }
    for (std::size_t p = 0; p < k; ++p) y[p] /= pivot_[p];
    for (std::size_t p = k; p-- > 0;) {
      const Real* np = n_mat_.row(p);
      Real s = y[p];
      for (std::size_t q = p + 1; q < k; ++q) s += np[q] * y[q];
      y[p] = s;
    }
    std::vector<Real> x(n_, 0);
    for (std::size_t p = 0; p < k; ++p) x[vertex_[p]] = y[p];
    return x;
  }

  /// Potentials for a unit current entering at `source` and leaving at ground.
  std::vector<Real> unit_potentials(std::uint32_t source) const {
    std::vector<Real> b(n_, 0);
    if (source != ground_) b[source] = 1;
    return solve(b);
  }

  /// Rows of M = (I - N)^{-1} in position space; G = M D^{-1} M^T.
  Dense<Real> transfer_rows() const {
    const std::size_t k = n_ - 1;
    Dense<Real> mm(k);
    for (std::size_t p = k; p-- > 0;) {
      Real* mp = mm.row(p);
      mp[p] = 1;
      const Real* np = n_mat_.row(p);
      for (std::size_t q = p + 1; q < k; ++q) {
        Real f = np[q];
        if (f == 0) continue;
        const Real* mq = mm.row(q);
        for (std::size_t r = q; r < k; ++r) mp[r] += f * mq[r];
      }
    }
    return mm;
  }

  /// Diagonal of the grounded inverse, indexed by vertex (ground entry 0).
  /// Entry v is R_eff(v, ground).
  std::vector<Real> inverse_diagonal() const {
    require(!singular_, ErrorKind::Disconnected, "grounded Laplacian is singular");
    const std::size_t k = n_ - 1;
    auto mm = transfer_rows();
    std::vector<Real> diag(n_, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const Real* mp = mm.row(p);
      Real s = 0;
      for (std::size_t r = p; r < k; ++r) s += mp[r] * mp[r] / pivot_[r];
      diag[vertex_[p]] = s;
    }
    return diag;
  }

  /// Full grounded inverse indexed by vertex (ground row and column zero).
  Dense<Real> inverse() const {
    require(!singular_, ErrorKind::Disconnected, "grounded Laplacian is singular");
    const std::size_t k = n_ - 1;
    auto mm = transfer_rows();
    for (std::size_t p = 0; p < k; ++p) {
      Real scale = 1 / std::sqrt(pivot_[p]);
      for (std::size_t r = 0; r <= p; ++r) mm(r, p) *= scale;
    }
    Dense<Real> g(n_);
    for (std::size_t p = 0; p < k; ++p) {
      const Real* mp = mm.row(p);
      for (std::size_t q = p; q < k; ++q) {
        const Real* mq = mm.row(q);
        Real s = 0;
        for (std::size_t r = q; r < k; ++r) s += mp[r] * mq[r];
        g(vertex_[p], vertex_[q]) = s;
        g(vertex_[q], vertex_[p]) = s;
      }
    }
    return g;
  }

 private:
  std::size_t n_;
  std::vector<std::uint32_t> pos_;
  std::vector<std::uint32_t> vertex_;
  std::uint32_t ground_ = 0;
  std::vector<Real> pivot_;
  Dense<Real> n_mat_;
  bool singular_ = false;
};

/// Elimination order putting `last` right before the ground.
inline std::vector<std::uint32_t> order_with_last(std::size_t n, std::uint32_t ground,
                                                  std::uint32_t last = 0xffffffffU) {
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::uint32_t v = 0; v < n; ++v)
    if (v != ground && v != last) order.push_back(v);
  if (last != 0xffffffffU && last != ground) order.push_back(last);
  return order;
}

/// Determinant by LU with partial pivoting.
template <class T>
T determinant(Dense<T> a) {
  const std::size_t n = a.size();
  T det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0) return 0;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
      det = -det;
    }
    det *= a(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      T f = a(r, c) / a(c, c);
      if (f == 0) continue;
      for (std::size_t j = c + 1; j < n; ++j) a(r, j) -= f * a(c, j);
    }
  }
  return det;
}

/// Sparse symmetric matrix in coordinate-free adjacency form for Laplacians.
struct SparseLaplacian {
  std::size_t n = 0;
  std::vector<std::size_t> offset;
  std::vector<std::uint32_t> col;
  std::vector<double> val;  // off-diagonal conductances
  std::vector<double> diag;

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * x[i];
      for (std::size_t k = offset[i]; k < offset[i + 1]; ++k) s -= val[k] * x[col[k]];
      y[i] = s;
    }
    return y;
  }
};

struct CgResult {
  std::vector<double> x;
  double relative_residual = 0;
  std::size_t iterations = 0;
};

/// Jacobi-preconditioned conjugate gradients on L restricted to free vertices
/// (`fixed[v]` pins x[v] = 0).
inline CgResult conjugate_gradient(const SparseLaplacian& lap, const std::vector<double>& b,
                                   const std::vector<char>& fixed, double tol = 1e-10,
                                   std::size_t max_iter = 0) {
  const std::size_t n = lap.n;
  if (max_iter == 0) max_iter = 20 * n + 100;
  auto mask = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i)
      if (fixed[i]) v[i] = 0;
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * c[i];
    return s;
  };
  CgResult res;
  res.x.assign(n, 0);
  std::vector<double> r = b;
  mask(r);
  double bnorm = std::sqrt(dot(r, r));
  if (bnorm == 0) return res;
  std::vector<double> z(n), p(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = fixed[i] ? 0 : r[i] / lap.diag[i];
  p = z;
  double rz = dot(r, z);
  for (std::size_t it = 0; it < max_iter; ++it) {
    auto ap = lap.apply(p);
    mask(ap);
    double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    res.iterations = it + 1;
    res.relative_residual = std::sqrt(dot(r, r)) / bnorm;
    if (res.relative_residual <= tol) return res;
    for (std::size_t i = 0; i < n; ++i) z[i] = fixed[i] ? 0 : r[i] / lap.diag[i];
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

}  // namespace rstre
