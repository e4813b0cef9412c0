#pragma once
// Shared generators for the property tests. Every generator is seeded so
// failures reproduce.

#include <random>

#include "fbgap/fbgap.hpp"

namespace fbgap::testing {

inline HermitianMatrix random_hermitian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  HermitianMatrix h(n);
  for (std::size_t r = 0; r < n; ++r) {
    h(r, r) = g(rng);
    for (std::size_t c = r + 1; c < n; ++c) h.set_hermitian(r, c, complex(g(rng), g(rng)));
  }
  return h;
}

/// Real trigonometric polynomial with frequencies |m_i| <= order.
inline FourierPotential random_real_potential(const DualLattice& dual, int order, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  FourierPotential::Coeffs c;
  for (int i = -order; i <= order; ++i)
    for (int j = -order; j <= order; ++j) {
      const IVec2 m{i, j};
      if (m == IVec2{0, 0} || c.count(m)) continue;
      const complex w(g(rng), g(rng));
      c[m] = w;
      c[-m] = std::conj(w);
    }
  c[IVec2{0, 0}] = g(rng);
  return FourierPotential(dual, c);
}

inline const Lattice2D& unit_square() {
  static const Lattice2D lat(Mat2::identity());
  return lat;
}

/// W = 2 cos(2 pi x1) on the unit square lattice.
inline FourierPotential cos_x() { return FourierPotential::cosines(dual_lattice(unit_square()), {{{1, 0}, 1.0}}); }

/// W = 2 cos(2 pi x1) + 2 cos(2 pi x2).
inline FourierPotential cos_xy() {
  return FourierPotential::cosines(dual_lattice(unit_square()), {{{1, 0}, 1.0}, {{0, 1}, 1.0}});
}

/// Determinant of the 2x2 Schur-effective matrix at lambda.
inline double schur_det2(const HermitianMatrix& h, const std::vector<std::size_t>& p1, double lambda) {
  const auto s = schur_effective(h, p1, lambda);
  const auto& m = s.effective();
  return (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
}

/// Root of det(effective(lambda)) closest to `guess`, located by a sign scan
/// between the neighbouring poles (eigenvalues of U22) and bisection. NaN if
/// no sign change is found.
inline double schur_root_near(const HermitianMatrix& h, const std::vector<std::size_t>& p1,
                              const std::vector<double>& poles, double guess, double window) {
  const double pad = 1e-6 * h.frobenius_norm();
  double lo = guess - window, hi = guess + window;
  for (double m : poles) {
    if (m < guess) lo = std::max(lo, m + pad);
    if (m > guess) hi = std::min(hi, m - pad);
  }
  const int n_scan = 400;
  double best = std::nan("");
  double a = lo, fa = schur_det2(h, p1, a);
  for (int s = 1; s <= n_scan; ++s) {
    const double b = lo + (hi - lo) * s / n_scan;
    const double fb = schur_det2(h, p1, b);
    if (fa * fb <= 0) {
      double x0 = a, x1 = b, f0 = fa;
      for (int it = 0; it < 200 && x1 - x0 > 0; ++it) {
        const double xm = 0.5 * (x0 + x1);
        if (xm <= x0 || xm >= x1) break;
        const double fm = schur_det2(h, p1, xm);
        if (f0 * fm <= 0) {
          x1 = xm;
        } else {
          x0 = xm;
          f0 = fm;
        }
      }
      const double r = 0.5 * (x0 + x1);
      if (std::isnan(best) || std::abs(r - guess) < std::abs(best - guess)) best = r;
    }
    a = b;
    fa = fb;
  }
  return best;
}

inline FourierPotential free_potential() { return FourierPotential::zero(dual_lattice(unit_square())); }

}  // namespace fbgap::testing
