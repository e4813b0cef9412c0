#pragma once
/// Period lattices, their duals, supercell folding of quasimomenta and the
/// selection of rational shift vectors that keep edge points apart.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "fbgap/types.hpp"

namespace fbgap {

/// Fractional coordinates within this distance of 1 are wrapped to 0.
inline constexpr double kSnapTol = 1e-10;

/// Lattice of periods; the columns of `basis` are the generators.
class Lattice2D {
 public:
  explicit Lattice2D(const Mat2& basis) : basis_(basis) {
    const double s = std::max({std::abs(basis.m[0]), std::abs(basis.m[1]), std::abs(basis.m[2]), std::abs(basis.m[3])});
    if (!(std::abs(basis.det()) > 1e-12 * s * s) || !std::isfinite(basis.det())) throw Error("singular lattice");
  }
  static Lattice2D from_generators(const Vec2& a1, const Vec2& a2) { return Lattice2D(Mat2::from_columns(a1, a2)); }

  const Mat2& basis() const { return basis_; }
  Vec2 point(const IVec2& m) const { return basis_ * to_vec(m); }

 private:
  Mat2 basis_;
};

/// Dual lattice; its generators b_i satisfy b_i . a_j = 2 pi delta_ij.
class DualLattice {
 public:
  explicit DualLattice(const Mat2& basis) : basis_(basis), inv_(basis.inverse()) {}

  const Mat2& basis() const { return basis_; }
  const Mat2& inverse() const { return inv_; }

  Vec2 point(const IVec2& m) const { return basis_ * to_vec(m); }
  Vec2 point(const Vec2& frac) const { return basis_ * frac; }
  Vec2 fractional(const Vec2& k) const { return inv_ * k; }

  /// Dual lattice scaled by 1/n (the dual of n times the direct lattice).
  DualLattice refined(int n) const {
    if (n < 1) throw Error("refinement factor must be positive");
    return DualLattice((1.0 / n) * basis_);
  }

  /// Length of a diagonal of the fundamental cell (the longer one).
  double cell_diameter() const {
    return std::max(norm(basis_.col(0) + basis_.col(1)), norm(basis_.col(0) - basis_.col(1)));
  }

 private:
  Mat2 basis_;
  Mat2 inv_;
};

inline DualLattice dual_lattice(const Lattice2D& lat) {
  return DualLattice(two_pi * lat.basis().inverse().transpose());
}

inline Lattice2D direct_lattice(const DualLattice& dual) {
  return Lattice2D(two_pi * dual.basis().inverse().transpose());
}

/// Wraps a fractional coordinate into [0,1), snapping values within kSnapTol
/// of the upper boundary to 0.
inline double wrap_unit(double f) {
  double w = f - std::floor(f);
  if (w >= 1.0 - kSnapTol || w < 0.0) w = 0.0;
  return w;
}

/// A quasimomentum stored as the canonical representative of its class in
/// the fundamental parallelogram of the given dual lattice.
struct QuasiMomentum {
  Vec2 coords;
};

inline QuasiMomentum canonical(const Vec2& k, const DualLattice& dual) {
  const Vec2 f = dual.fractional(k);
  return {dual.point(Vec2{wrap_unit(f.x), wrap_unit(f.y)})};
}

/// Distance between k1 and k2 modulo the dual lattice (minimum image over
/// the neighbouring cells of the reduced difference).
inline double torus_distance(const Vec2& k1, const Vec2& k2, const DualLattice& dual) {
  const Vec2 f = dual.fractional(k1 - k2);
  const Vec2 r{f.x - std::round(f.x), f.y - std::round(f.y)};
  double best = std::numeric_limits<double>::infinity();
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) best = std::min(best, norm(dual.point(Vec2{r.x + i, r.y + j})));
  return best;
}

/// True when k1 - k2 lies in the dual lattice within `tol` in fractional units.
inline bool congruent(const Vec2& k1, const Vec2& k2, const DualLattice& dual, double tol = 1e-9) {
  const Vec2 f = dual.fractional(k1 - k2);
  return std::abs(f.x - std::round(f.x)) < tol && std::abs(f.y - std::round(f.y)) < tol;
}

/// Supercell n*Gamma: the fine dual lattice Gamma^dagger/n and the n^2
/// representatives of (fine dual)/(dual). Representative l has fine
/// coordinates (l mod n, l / n); reps[0] is the origin.
struct SupercellMap {
  int n = 1;
  int m = 1;
  DualLattice coarse_dual;
  DualLattice fine_dual;
  std::vector<IVec2> reps;  // fine-dual integer coordinates

  Vec2 rep_vector(int l) const { return fine_dual.point(reps.at(static_cast<std::size_t>(l))); }

  /// Index of the representative congruent to the fine-dual point `g`.
  int class_of(const IVec2& g) const {
    const auto mod = [this](std::int64_t v) { return static_cast<int>(((v % n) + n) % n); };
    return mod(g.i) + n * mod(g.j);
  }
};

inline SupercellMap supercell_map(const Lattice2D& lat, int n) {
  if (n < 1) throw Error("supercell factor must be positive");
  const DualLattice coarse = dual_lattice(lat);
  SupercellMap map{n, n * n, coarse, coarse.refined(n), {}};
  map.reps.reserve(static_cast<std::size_t>(map.m));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) map.reps.push_back({i, j});
  return map;
}

struct Folded {
  QuasiMomentum kappa;  // canonical in the fine torus
  int l = 0;            // representative index, 0-based
};

/// Decomposes k = kappa + p_l with kappa in the fine fundamental cell.
inline Folded fold(const QuasiMomentum& k, const SupercellMap& map) {
  const Vec2 f = map.coarse_dual.fractional(k.coords);
  const Vec2 fc{wrap_unit(f.x), wrap_unit(f.y)};
  const Vec2 fine{fc.x * map.n, fc.y * map.n};
  const auto cell = [&](double v) {
    auto c = static_cast<std::int64_t>(std::floor(v));
    double r = v - static_cast<double>(c);
    if (r >= 1.0 - kSnapTol) {
      ++c;
      r = 0.0;
    }
    return std::pair{std::clamp<std::int64_t>(c, 0, map.n - 1), r};
  };
  const auto [i, ri] = cell(fine.x);
  const auto [j, rj] = cell(fine.y);
  const int l = map.class_of({i, j});
  const Vec2 kappa = map.fine_dual.point(Vec2{fine.x - static_cast<double>(i), fine.y - static_cast<double>(j)});
  return {canonical(kappa, map.fine_dual), l};
}

inline QuasiMomentum unfold(const QuasiMomentum& kappa, int l, const SupercellMap& map) {
  if (l < 0 || l >= map.m) throw Error("representative index out of range");
  return canonical(kappa.coords + map.rep_vector(l), map.coarse_dual);
}

// ---------------------------------------------------------------------------
// Integer helpers for the shift construction.

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) { return std::gcd(a < 0 ? -a : a, b < 0 ? -b : b); }

/// Deterministic trial-division primality test.
inline bool is_prime(std::int64_t n) {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  if (n % 3 == 0) return n == 3;
  for (std::int64_t d = 5; d * d <= n; d += 6)
    if (n % d == 0 || n % (d + 2) == 0) return false;
  return true;
}

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

/// Continued-fraction approximation of x; returns the first convergent
/// within `tol` of x, or nullopt when the denominator would exceed `max_den`.
inline std::optional<Rational> rational_approx(double x, double tol, std::int64_t max_den) {
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    const double a_f = std::floor(r);
    if (std::abs(a_f) > 9e15) break;
    const auto a = static_cast<std::int64_t>(a_f);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= tol) return Rational{h1, k1};
    const double frac = r - a_f;
    if (frac < 1e-300) break;
    r = 1.0 / frac;
  }
  if (k1 > 0 && k1 <= max_den && std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= tol)
    return Rational{h1, k1};
  return std::nullopt;
}

/// Shortest nonzero vector length of the dual lattice (Lagrange reduction).
inline double shortest_vector_length(const DualLattice& dual) {
  Vec2 u = dual.basis().col(0);
  Vec2 v = dual.basis().col(1);
  if (norm2(u) > norm2(v)) std::swap(u, v);
  for (int it = 0; it < 200; ++it) {
    const double mu = std::round(dot(u, v) / norm2(u));
    v = v - mu * u;
    if (norm2(v) >= norm2(u)) break;
    std::swap(u, v);
  }
  return std::min(norm(u), norm(v));
}

/// A rational multiple nu = (p_num / p_den) mu of a primitive dual vector mu.
struct ShiftVector {
  IVec2 mu;                 // integer dual coordinates
  std::int64_t p_num = 1;   // numerator
  std::int64_t p_den = 1;   // denominator
  Vec2 value;               // nu in inverse-length units

  static ShiftVector make(const IVec2& mu, std::int64_t p_num, std::int64_t p_den, const DualLattice& dual) {
    if (p_num <= 0 || p_den <= 0) throw Error("shift numerator and denominator must be positive");
    if (mu.i == 0 && mu.j == 0) throw Error("shift direction must be nonzero");
    const std::int64_t g = gcd64(p_num, p_den);
    ShiftVector s{mu, p_num / g, p_den / g, {}};
    s.value = (static_cast<double>(s.p_num) / static_cast<double>(s.p_den)) * dual.point(mu);
    return s;
  }

  /// Fractional coordinates of nu in the dual basis.
  Vec2 fractional() const {
    const double r = static_cast<double>(p_num) / static_cast<double>(p_den);
    return {r * static_cast<double>(mu.i), r * static_cast<double>(mu.j)};
  }

  /// Smallest q > 0 with q * nu in the dual lattice.
  std::int64_t order() const { return p_den / gcd64(p_den, p_num * gcd64(mu.i, mu.j)); }

  /// order() * nu as integer dual coordinates.
  IVec2 order_multiple() const {
    const std::int64_t q = order();
    return {q * p_num * mu.i / p_den, q * p_num * mu.j / p_den};
  }
};

struct ShiftOptions {
  double direction_tol = 1e-3;     // max angle (radians) between requested and rational direction
  std::int64_t max_den = 1000000;  // continued-fraction denominator cap
  bool allow_half_lattice = false;
};

/// Pair constraint k_j - k_s = (m/n) mu + theta found while choosing a shift.
struct PairDenominator {
  std::size_t j = 0;
  std::size_t s = 0;
  std::int64_t n = 1;
};

namespace detail {

/// Primitive integer vector (i,j) whose direction in real space approximates
/// `direction` to within `tol` radians.
inline IVec2 rational_direction(const Vec2& direction, const DualLattice& dual, const ShiftOptions& opt) {
  if (!(norm(direction) > 0.0) || !std::isfinite(norm(direction))) throw Error("shift direction must be nonzero");
  const Vec2 f = dual.fractional(direction);
  const double target = std::atan2(direction.y, direction.x);
  auto angle_err = [&](const IVec2& m) {
    const Vec2 p = dual.point(m);
    double d = std::atan2(p.y, p.x) - target;
    while (d > std::numbers::pi) d -= two_pi;
    while (d < -std::numbers::pi) d += two_pi;
    return std::abs(d);
  };
  const bool x_major = std::abs(f.x) >= std::abs(f.y);
  const double ratio = x_major ? f.y / f.x : f.x / f.y;
  const double big = x_major ? f.x : f.y;
  const std::int64_t sgn = big >= 0 ? 1 : -1;
  // walk through convergents, keeping the first that meets the angular tolerance
  for (double tol = 0.5; tol > 1e-15; tol *= 0.5) {
    const auto r = rational_approx(ratio, tol, opt.max_den);
    if (!r) break;
    IVec2 m = x_major ? IVec2{sgn * r->den, sgn * r->num} : IVec2{sgn * r->num, sgn * r->den};
    const std::int64_t g = gcd64(m.i, m.j);
    m = {m.i / g, m.j / g};
    if (angle_err(m) <= opt.direction_tol) return m;
  }
  throw Error("direction not rationally approximable within tolerance");
}

/// If d = t mu + theta with theta in the dual lattice and t rational, returns
/// the reduced denominator of t mod 1; nullopt when d is off the line.
inline std::optional<std::int64_t> pair_denominator(const Vec2& d, const IVec2& mu, const DualLattice& dual) {
  // unimodular completion w with det[mu w] = 1
  std::int64_t x0 = 1, y0 = 0, x1 = 0, y1 = 1, a = mu.i, b = mu.j;
  while (b != 0) {
    const std::int64_t q = a / b;
    std::tie(a, b) = std::pair{b, a - q * b};
    std::tie(x0, x1) = std::pair{x1, x0 - q * x1};
    std::tie(y0, y1) = std::pair{y1, y0 - q * y1};
  }
  // x0*mu.i + y0*mu.j = a = +-1, so w = (-y0, x0) * a satisfies mu.i*w.j - mu.j*w.i = 1
  const IVec2 w{-y0 * a, x0 * a};
  const Vec2 f = dual.fractional(d);
  const double det = static_cast<double>(mu.i * w.j - mu.j * w.i);
  const double t = (f.x * static_cast<double>(w.j) - f.y * static_cast<double>(w.i)) / det;
  const double s = (static_cast<double>(mu.i) * f.y - static_cast<double>(mu.j) * f.x) / det;
  if (std::abs(s - std::round(s)) > 1e-9) return std::nullopt;
  const double frac = t - std::floor(t);
  const auto r = rational_approx(frac, 1e-9, 1000000);
  // no small-denominator offset: n nu is never congruent to it
  if (!r) return std::nullopt;
  const std::int64_t den = r->den / gcd64(r->num, r->den);
  if (den == 1 && (r->num % r->den) == 0) return std::int64_t{1};
  return den;
}

}  // namespace detail

/// Finds k_i + n nu == k_j (mod dual) with i != j and 0 < |n| <= n_max.
/// Returns the first offending (i, j, n) or nullopt when glue-free.
struct GluingHit {
  std::size_t i = 0;
  std::size_t j = 0;
  std::int64_t n = 0;
};

inline std::optional<GluingHit> gluing_scan(const std::vector<Vec2>& points, const ShiftVector& nu,
                                            const DualLattice& dual, std::int64_t n_max) {
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      const Vec2 d = dual.fractional(points[j] - points[i]);
      for (std::int64_t n = -n_max; n <= n_max; ++n) {
        if (n == 0) continue;
        const std::int64_t red = ((n % nu.p_den) + nu.p_den) % nu.p_den;
        // n * nu modulo the dual lattice only depends on n mod p_den
        const double rr = static_cast<double>(red) * static_cast<double>(nu.p_num) / static_cast<double>(nu.p_den);
        const Vec2 shift{rr * static_cast<double>(nu.mu.i), rr * static_cast<double>(nu.mu.j)};
        const Vec2 diff = d - shift;
        if (std::abs(diff.x - std::round(diff.x)) < 1e-9 && std::abs(diff.y - std::round(diff.y)) < 1e-9)
          return GluingHit{i, j, n};
      }
    }
  return std::nullopt;
}

/// Chooses nu = (p_num/p_den) mu close to `direction` with |nu| in
/// (delta/2, delta) such that no two of `s_points` become congruent modulo
/// the lattice generated by the dual lattice and nu. p_den is a prime larger
/// than 100|mu|/delta that does not divide any pair denominator.
inline ShiftVector choose_shift(const std::vector<Vec2>& s_points, const Vec2& direction, double delta,
                                const DualLattice& dual, const ShiftOptions& opt = {},
                                std::vector<PairDenominator>* pairs_out = nullptr) {
  if (!(delta > 0.0)) throw Error("delta must be positive");
  if (delta >= shortest_vector_length(dual) / 100.0) throw Error("delta exceeds lattice bound");
  for (std::size_t i = 0; i < s_points.size(); ++i)
    for (std::size_t j = i + 1; j < s_points.size(); ++j)
      if (congruent(s_points[i], s_points[j], dual)) throw Error("edge points are not distinct modulo the dual lattice");

  const IVec2 mu = detail::rational_direction(direction, dual, opt);
  const double mu_len = norm(dual.point(mu));

  std::vector<PairDenominator> pairs;
  for (std::size_t j = 0; j < s_points.size(); ++j)
    for (std::size_t s = j + 1; s < s_points.size(); ++s)
      if (auto n = detail::pair_denominator(s_points[j] - s_points[s], mu, dual); n && *n > 1)
        pairs.push_back({j, s, *n});

  const double bound = 100.0 * mu_len / delta;
  if (bound > 4e15) throw Error("shift denominator out of range");
  auto p = static_cast<std::int64_t>(std::floor(bound)) + 1;
  for (;; ++p) {
    if (!is_prime(p)) continue;
    const bool coprime = std::all_of(pairs.begin(), pairs.end(), [p](const PairDenominator& q) { return q.n % p != 0; });
    if (coprime) break;
  }
  // |nu| = p_num |mu| / p_den lands in the middle of (delta/2, delta)
  auto p_num = static_cast<std::int64_t>(std::llround(0.75 * delta * static_cast<double>(p) / mu_len));
  p_num = std::max<std::int64_t>(p_num, 1);
  ShiftVector nu = ShiftVector::make(mu, p_num, p, dual);
  const double len = norm(nu.value);
  if (!(len > delta / 2 && len < delta)) throw Error("shift length outside (delta/2, delta)");
  if (!opt.allow_half_lattice && nu.order() <= 2) throw Error("shift lies in half the dual lattice");
  if (pairs_out) *pairs_out = std::move(pairs);
  return nu;
}

}  // namespace fbgap
