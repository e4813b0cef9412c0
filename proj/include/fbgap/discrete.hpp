#pragma once
/// Closed-form tight-binding models: the 2x2 checkerboard, its n-site
/// generalisation, and the doubled-period 4x4 model with a diagonal
/// perturbation that removes the edge degeneracy.

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "fbgap/bands.hpp"

namespace fbgap {

inline KDomain torus_2pi() { return {two_pi * Mat2::identity(), true}; }

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// [[V0, a+b], [a+b, V1]] with a = 2 cos k1, b = 2 cos k2.
/// H(k) is even in each k_i, so by default the closed square [0, pi]^2 is
/// sampled; `full_torus` switches to the periodic domain [0, 2 pi)^2.
struct CheckerboardModel {
  double v0 = 1.0;
  double v1 = -1.0;
  bool full_torus = false;

  HermitianMatrix fibre(const Vec2& k) const {
    const double c = 2 * std::cos(k.x) + 2 * std::cos(k.y);
    HermitianMatrix h(2);
    h(0, 0) = v0;
    h(1, 1) = v1;
    h(0, 1) = h(1, 0) = c;
    return h;
  }
  KDomain domain() const { return full_torus ? torus_2pi() : KDomain{std::numbers::pi * Mat2::identity(), false}; }
  CheckerboardModel localized(const Vec2&) const { return *this; }

  /// Eigenvalues (V0+V1)/2 -+ sqrt((V0-V1)^2/4 + (a+b)^2).
  std::array<double, 2> closed_form(const Vec2& k) const {
    const double c = 2 * std::cos(k.x) + 2 * std::cos(k.y);
    const double r = std::sqrt(0.25 * (v0 - v1) * (v0 - v1) + c * c);
    return {0.5 * (v0 + v1) - r, 0.5 * (v0 + v1) + r};
  }
};

inline HermitianMatrix checkerboard_fibre(const CheckerboardModel& m, const Vec2& k) { return m.fibre(k); }

/// The two spectral bands of the checkerboard model.
inline std::array<Interval, 2> checkerboard_bands(const CheckerboardModel& m) {
  const double r = std::sqrt(0.25 * (m.v0 - m.v1) * (m.v0 - m.v1) + 16.0);
  const double mid = 0.5 * (m.v0 + m.v1);
  return {Interval{mid - r, std::min(m.v0, m.v1)}, Interval{std::max(m.v0, m.v1), mid + r}};
}

/// n sites on a ring with hopping s + t, s = e^{i k1}, t = e^{i k2}.
struct NSiteModel {
  std::vector<double> v;

  explicit NSiteModel(std::vector<double> potentials) : v(std::move(potentials)) {
    if (v.size() < 3) throw Error("n-site model needs at least 3 sites");
  }

  HermitianMatrix fibre(const Vec2& k) const {
    const std::size_t n = v.size();
    const complex st = std::polar(1.0, k.x) + std::polar(1.0, k.y);
    HermitianMatrix h(n);
    for (std::size_t i = 0; i < n; ++i) h(i, i) = v[i];
    for (std::size_t i = 0; i < n; ++i) h.set_hermitian(i, (i + 1) % n, st);
    return h;
  }
  KDomain domain() const { return torus_2pi(); }
  NSiteModel localized(const Vec2&) const { return *this; }

  /// V0 < Vj - 2 for every j >= 1; without it V0 need not be a band edge.
  bool edge_guaranteed() const {
    for (std::size_t j = 1; j < v.size(); ++j)
      if (!(v[0] < v[j] - 2)) return false;
    return true;
  }
};

inline HermitianMatrix nsite_fibre(const std::vector<double>& v, const Vec2& k) { return NSiteModel(v).fibre(k); }

/// Doubled-period model with V0 = V, V1 = -V on [0, pi]^2 plus
/// B = diag(2 eps, -2 eps_low, 0, 0). eps moves the lower edge of the second
/// band, eps_low the upper edge of the first band.
struct DoubledModel {
  double v = 1.0;
  double eps = 0.0;
  double eps_low = 0.0;

  HermitianMatrix fibre(const Vec2& k) const {
    const double a = 2 * std::cos(k.x), b = 2 * std::cos(k.y);
    HermitianMatrix h(4);
    const double d[4] = {v + 2 * eps, -v - 2 * eps_low, v, -v};
    for (std::size_t i = 0; i < 4; ++i) h(i, i) = d[i];
    h(0, 1) = h(1, 0) = a;
    h(2, 3) = h(3, 2) = a;
    h(0, 3) = h(3, 0) = b;
    h(1, 2) = h(2, 1) = b;
    return h;
  }
  KDomain domain() const { return {std::numbers::pi * Mat2::identity(), false}; }
  DoubledModel localized(const Vec2&) const { return *this; }
};

inline HermitianMatrix doubled_fibre(const DoubledModel& m, const Vec2& k) { return m.fibre(k); }

/// Roots t of t^2 - 2 eps (lambda + V) t - 4 a^2 b^2 = 0, where
/// t = (lambda^2 - V^2) - (a^2 + b^2). Valid for eps_low = 0.
inline std::array<double, 2> t_roots(const DoubledModel& m, const Vec2& k, double lambda) {
  const double a = 2 * std::cos(k.x), b = 2 * std::cos(k.y);
  const double p = m.eps * (lambda + m.v);
  const double r = std::sqrt(p * p + 4 * a * a * b * b);
  return {p - r, p + r};
}

/// det(H + B - lambda) in the reduced form t^2 - 2 eps (lambda + V) t - 4 a^2 b^2.
inline double doubled_reduced_det(const DoubledModel& m, const Vec2& k, double lambda) {
  const double a = 2 * std::cos(k.x), b = 2 * std::cos(k.y);
  const double t = (lambda * lambda - m.v * m.v) - (a * a + b * b);
  return t * t - 2 * m.eps * (lambda + m.v) * t - 4 * a * a * b * b;
}

struct NondegenerateMinReport {
  EdgeClass classification = EdgeClass::nondegenerate;
  std::size_t n_points = 0;
  Vec2 k_star;
  double value = 0.0;
  Mat2 hessian;
  std::array<double, 2> hessian_eigs{};
  double center_offset = 0.0;  // max |k*_i - pi/2|
  bool localized = false;      // center_offset < 10 eps / V
  bool value_in_range = false; // value in [V - 2 eps, V]
  bool positive_definite = false;
  bool curvature_ok = false;   // both eigenvalues within 20% of 4/V
  EdgeSet edges;

  bool ok() const {
    return classification == EdgeClass::nondegenerate && n_points == 1 && localized && value_in_range &&
           positive_definite && curvature_ok;
  }
};

/// Locates the minimum of the second band (sorted index 2) on a grid,
/// refines it and checks localisation near (pi/2, pi/2) and curvature 4/V.
inline NondegenerateMinReport verify_nondegenerate_min(const DoubledModel& m, int grid = 201) {
  if (!(m.v > 0.0)) throw Error("doubled model needs V > 0");
  if (m.eps < 0.0 || m.eps > 0.1 * m.v) throw Error("eps must lie in [0, V/10]");
  const auto bg = sample_bands(m, grid, grid, 4);
  const auto [lo, hi] = bg.band_range(2);
  (void)hi;
  NondegenerateMinReport rep;
  rep.edges = edge_set(m, bg, lo, EdgeSide::upper);
  rep.classification = rep.edges.classification;
  rep.n_points = rep.edges.points.size();
  if (rep.edges.points.empty()) return rep;
  const auto& p = rep.edges.points.front();
  rep.k_star = p.k;
  rep.value = p.value;
  rep.hessian = rep.edges.hessians.front();
  rep.hessian_eigs = symmetric_eigenvalues(rep.hessian);
  const double c = std::numbers::pi / 2;
  rep.center_offset = std::max(std::abs(p.k.x - c), std::abs(p.k.y - c));
  rep.localized = rep.center_offset < 10 * std::max(m.eps, 1e-300) / m.v;
  rep.value_in_range = p.value >= m.v - 2 * m.eps - rep.edges.edge_tol && p.value <= m.v + rep.edges.edge_tol;
  rep.positive_definite = rep.hessian_eigs[0] > 0.0;
  const double target = 4.0 / m.v;
  rep.curvature_ok = std::abs(rep.hessian_eigs[0] - target) <= 0.2 * target &&
                     std::abs(rep.hessian_eigs[1] - target) <= 0.2 * target;
  return rep;
}

}  // namespace fbgap
