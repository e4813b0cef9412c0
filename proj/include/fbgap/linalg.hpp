#pragma once
/// Dense Hermitian linear algebra: a cyclic Jacobi eigensolver and the
/// Schur-complement reduction of an eigenproblem onto a coordinate block.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fbgap/types.hpp"

namespace fbgap {

/// Square complex matrix stored row-major. The Hermitian property is an
/// invariant checked by `check_hermitian`, not enforced on every write.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, complex{}) {}

  std::size_t dim() const { return dim_; }

  complex& operator()(std::size_t r, std::size_t c) { return a_[r * dim_ + c]; }
  const complex& operator()(std::size_t r, std::size_t c) const { return a_[r * dim_ + c]; }

  /// Sets (r,c) to v and (c,r) to conj(v).
  void set_hermitian(std::size_t r, std::size_t c, complex v) {
    (*this)(r, c) = v;
    (*this)(c, r) = std::conj(v);
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : a_) s += std::norm(z);
    return std::sqrt(s);
  }

  /// Largest deviation |a_rc - conj(a_cr)|.
  double hermitian_defect() const {
    double d = 0.0;
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = r; c < dim_; ++c) d = std::max(d, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
    return d;
  }

  void check_hermitian(double rel_tol = 1e-13) const {
    const double scale = std::max(frobenius_norm(), 1e-300);
    if (hermitian_defect() > rel_tol * scale) throw Error("matrix is not Hermitian within tolerance");
  }

  std::vector<complex> apply(std::span<const complex> v) const {
    std::vector<complex> out(dim_, complex{});
    for (std::size_t r = 0; r < dim_; ++r) {
      complex s{};
      const complex* row = &a_[r * dim_];
      for (std::size_t c = 0; c < dim_; ++c) s += row[c] * v[c];
      out[r] = s;
    }
    return out;
  }

  std::span<const complex> data() const { return a_; }

 private:
  std::size_t dim_ = 0;
  std::vector<complex> a_;
};

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns of a dim x dim row-major array.
struct EigenDecomposition {
  std::vector<double> values;
  std::vector<complex> vectors;
  std::size_t dim = 0;
  int sweeps = 0;

  complex vec(std::size_t row, std::size_t col) const { return vectors[row * dim + col]; }

  std::vector<complex> column(std::size_t col) const {
    std::vector<complex> v(dim);
    for (std::size_t r = 0; r < dim; ++r) v[r] = vec(r, col);
    return v;
  }
};

struct JacobiOptions {
  double off_tol = 1e-14;  // relative to the Frobenius norm
  int max_sweeps = 30;
};

namespace detail {

// Plain complex product; std::complex operator* goes through the
// Annex G NaN handling path, which dominates the rotation cost.
inline complex cmul(const complex& x, const complex& y) {
  return {x.real() * y.real() - x.imag() * y.imag(), x.real() * y.imag() + x.imag() * y.real()};
}

}  // namespace detail

/// Cyclic Jacobi diagonalisation. Pairs are visited in fixed row-major order
/// so the result is bit-reproducible for a given input.
inline EigenDecomposition hermitian_eig(const HermitianMatrix& h, const JacobiOptions& opt = {}) {
  using detail::cmul;
  const std::size_t n = h.dim();
  h.check_hermitian();

  std::vector<complex> a(h.data().begin(), h.data().end());
  // w holds the eigenvectors as rows (the transpose of V) so rotations touch
  // contiguous memory
  std::vector<complex> w(n * n, complex{});
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  // the diagonal of a Hermitian matrix is real; drop rounding noise
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = a[i * n + i].real();

  auto at = [&](std::size_t r, std::size_t c) -> complex& { return a[r * n + c]; };

  const double scale = h.frobenius_norm();
  const double threshold = opt.off_tol * std::max(scale, 1e-300);

  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(at(p, q));
    off = std::sqrt(2.0 * off);
    if (off <= threshold) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const complex apq = at(p, q);
        const double b = std::abs(apq);
        if (b == 0.0) continue;
        const double app = at(p, p).real();
        const double aqq = at(q, q).real();
        // below the representable resolution of the diagonal: annihilate
        if (sweep > 3 && std::abs(app) + b * 100.0 == std::abs(app) &&
            std::abs(aqq) + b * 100.0 == std::abs(aqq)) {
          at(p, q) = at(q, p) = 0.0;
          continue;
        }
        const complex e = apq / b;  // unit phase
        const double tau = (aqq - app) / (2.0 * b);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const complex se = s * e;
        const complex sec = s * std::conj(e);

        // A <- U^H A U with U_pp=c, U_pq=s e, U_qp=-s conj(e), U_qq=c.
        // Rows p and q follow from U^H A; the columns are their mirror.
        complex* rp = &a[p * n];
        complex* rq = &a[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          const complex apk = rp[k];
          const complex aqk = rq[k];
          rp[k] = c * apk - cmul(se, aqk);
          rq[k] = cmul(sec, apk) + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          at(k, p) = std::conj(rp[k]);
          at(k, q) = std::conj(rq[k]);
        }
        at(p, q) = at(q, p) = 0.0;
        at(p, p) = app - t * b;
        at(q, q) = aqq + t * b;

        // V <- V U, applied to the rows of w = V^T
        complex* wp = &w[p * n];
        complex* wq = &w[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          const complex vkp = wp[k];
          const complex vkq = wq[k];
          wp[k] = c * vkp - cmul(sec, vkq);
          wq[k] = cmul(se, vkp) + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return at(i, i).real() < at(j, j).real(); });

  EigenDecomposition out;
  out.dim = n;
  out.sweeps = sweep;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.values[c] = at(src, src).real();
    for (std::size_t r = 0; r < n; ++r) out.vectors[r * n + c] = w[src * n + r];
  }
  return out;
}

inline double spectral_radius(const EigenDecomposition& e) {
  double r = 0.0;
  for (double x : e.values) r = std::max(r, std::abs(x));
  return r;
}

/// Max over columns of |H v_j - lambda_j v_j|.
inline double max_residual(const HermitianMatrix& h, const EigenDecomposition& e) {
  double worst = 0.0;
  for (std::size_t j = 0; j < e.dim; ++j) {
    const auto v = e.column(j);
    const auto hv = h.apply(v);
    double s = 0.0;
    for (std::size_t r = 0; r < e.dim; ++r) s += std::norm(hv[r] - e.values[j] * v[r]);
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

/// Max over (i,j) of |<v_i, v_j> - delta_ij|.
inline double orthonormality_defect(const EigenDecomposition& e) {
  double worst = 0.0;
  for (std::size_t i = 0; i < e.dim; ++i)
    for (std::size_t j = i; j < e.dim; ++j) {
      complex s{};
      for (std::size_t r = 0; r < e.dim; ++r) s += std::conj(e.vec(r, i)) * e.vec(r, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

/// Result of reducing (H - lambda) onto the coordinate block P1:
///   (U11 - lambda) - U12 (U22 - lambda)^{-1} U21.
/// Keeps the spectral data of U22 so an eigenvector can be lifted back.
class SchurReduction {
 public:
  SchurReduction(const HermitianMatrix& h, std::vector<std::size_t> p1, double lambda, double margin_rel = 1e-8)
      : lambda_(lambda), p1_(std::move(p1)) {
    const std::size_t n = h.dim();
    std::vector<bool> in1(n, false);
    for (auto i : p1_) {
      if (i >= n) throw Error("P1 index out of range");
      if (in1[i]) throw Error("duplicate P1 index");
      in1[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!in1[i]) p2_.push_back(i);

    const std::size_t m1 = p1_.size();
    const std::size_t m2 = p2_.size();
    HermitianMatrix u22(m2);
    for (std::size_t r = 0; r < m2; ++r)
      for (std::size_t c = 0; c < m2; ++c) u22(r, c) = h(p2_[r], p2_[c]);
    u21_.assign(m2 * m1, complex{});
    for (std::size_t r = 0; r < m2; ++r)
      for (std::size_t c = 0; c < m1; ++c) u21_[r * m1 + c] = h(p2_[r], p1_[c]);

    if (m2 > 0) {
      u22_eig_ = hermitian_eig(u22);
      const double margin = margin_rel * std::max(h.frobenius_norm(), 1e-300);
      for (double mu : u22_eig_.values)
        if (std::abs(mu - lambda) < margin) throw NumericalError("resolvent singular");
    }

    // effective = (U11 - lambda) - U21^H R U21 with R = (U22 - lambda)^{-1}
    effective_ = HermitianMatrix(m1);
    const auto y = resolvent_times_u21();
    for (std::size_t r = 0; r < m1; ++r)
      for (std::size_t c = 0; c < m1; ++c) {
        complex s = h(p1_[r], p1_[c]);
        if (r == c) s -= lambda;
        for (std::size_t k = 0; k < m2; ++k) s -= std::conj(u21_[k * m1 + r]) * y[k * m1 + c];
        effective_(r, c) = s;
      }
  }

  const HermitianMatrix& effective() const { return effective_; }
  const std::vector<std::size_t>& p1() const { return p1_; }
  const std::vector<std::size_t>& p2() const { return p2_; }
  double lambda() const { return lambda_; }

  /// Assembles the full vector (psi on P1, -(U22-lambda)^{-1} U21 psi on P2).
  std::vector<complex> lift(std::span<const complex> psi) const {
    const std::size_t m1 = p1_.size();
    const std::size_t m2 = p2_.size();
    if (psi.size() != m1) throw Error("lift: vector size does not match P1");
    std::vector<complex> u21psi(m2, complex{});
    for (std::size_t r = 0; r < m2; ++r)
      for (std::size_t c = 0; c < m1; ++c) u21psi[r] += u21_[r * m1 + c] * psi[c];
    const auto phi = apply_resolvent(u21psi);
    std::vector<complex> out(m1 + m2);
    for (std::size_t i = 0; i < m1; ++i) out[p1_[i]] = psi[i];
    for (std::size_t i = 0; i < m2; ++i) out[p2_[i]] = -phi[i];
    return out;
  }

 private:
  std::vector<complex> apply_resolvent(std::span<const complex> x) const {
    const std::size_t m2 = p2_.size();
    std::vector<complex> coef(m2, complex{});
    for (std::size_t j = 0; j < m2; ++j) {
      complex s{};
      for (std::size_t r = 0; r < m2; ++r) s += std::conj(u22_eig_.vec(r, j)) * x[r];
      coef[j] = s / (u22_eig_.values[j] - lambda_);
    }
    std::vector<complex> out(m2, complex{});
    for (std::size_t r = 0; r < m2; ++r)
      for (std::size_t j = 0; j < m2; ++j) out[r] += u22_eig_.vec(r, j) * coef[j];
    return out;
  }

  std::vector<complex> resolvent_times_u21() const {
    const std::size_t m1 = p1_.size();
    const std::size_t m2 = p2_.size();
    std::vector<complex> y(m2 * m1, complex{});
    std::vector<complex> col(m2);
    for (std::size_t c = 0; c < m1; ++c) {
      for (std::size_t r = 0; r < m2; ++r) col[r] = u21_[r * m1 + c];
      const auto rc = apply_resolvent(col);
      for (std::size_t r = 0; r < m2; ++r) y[r * m1 + c] = rc[r];
    }
    return y;
  }

  double lambda_;
  std::vector<std::size_t> p1_;
  std::vector<std::size_t> p2_;
  std::vector<complex> u21_;
  EigenDecomposition u22_eig_;
  HermitianMatrix effective_;
};

inline SchurReduction schur_effective(const HermitianMatrix& h, std::vector<std::size_t> p1, double lambda) {
  return SchurReduction(h, std::move(p1), lambda);
}

}  // namespace fbgap
