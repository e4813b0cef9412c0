#pragma once
/// Periodic potentials as finite Fourier series sum_theta w_theta e^{i theta.x}
/// with frequencies on a dual lattice.

#include <cmath>
#include <map>
#include <optional>

#include "fbgap/lattice.hpp"
#include "fbgap/types.hpp"

namespace fbgap {

class FourierPotential {
 public:
  using Coeffs = std::map<IVec2, complex>;

  FourierPotential(DualLattice dual, Coeffs coeffs, bool real = true)
      : dual_(std::move(dual)), coeffs_(std::move(coeffs)), real_(real) {
    std::erase_if(coeffs_, [](const auto& kv) { return kv.second == complex{}; });
    if (real_) check_real();
  }

  static FourierPotential zero(const DualLattice& dual) { return FourierPotential(dual, {}); }

  /// sum_i amp_i (e^{i g_i.x} + e^{-i g_i.x}) for real amplitudes, i.e.
  /// 2 amp cos(g.x) per entry.
  static FourierPotential cosines(const DualLattice& dual, const std::vector<std::pair<IVec2, double>>& terms) {
    Coeffs c;
    for (const auto& [g, amp] : terms) {
      if (g == IVec2{0, 0}) throw Error("cosine frequency must be nonzero");
      c[g] += amp;
      c[-g] += amp;
    }
    return FourierPotential(dual, std::move(c));
  }

  const DualLattice& dual() const { return dual_; }
  const Coeffs& coeffs() const { return coeffs_; }
  bool is_real() const { return real_; }
  bool empty() const { return coeffs_.empty(); }

  complex coeff(const IVec2& m) const {
    const auto it = coeffs_.find(m);
    return it == coeffs_.end() ? complex{} : it->second;
  }

  /// Upper bound for the sup norm: sum |w_theta|.
  double sup_bound() const {
    double s = 0.0;
    for (const auto& [m, w] : coeffs_) s += std::abs(w);
    return s;
  }

  /// Largest |w_{-theta} - conj(w_theta)| over the support.
  double reality_defect() const {
    double d = 0.0;
    for (const auto& [m, w] : coeffs_) d = std::max(d, std::abs(coeff(-m) - std::conj(w)));
    return d;
  }

  void check_real(double tol = 1e-14) const {
    if (reality_defect() > tol * std::max(1.0, sup_bound())) throw Error("potential is not real-valued");
  }

  /// Sum of two potentials on the same dual lattice.
  friend FourierPotential operator+(const FourierPotential& a, const FourierPotential& b) {
    if (!(a.dual_.basis() == b.dual_.basis())) throw Error("potentials live on different dual lattices");
    Coeffs c = a.coeffs_;
    for (const auto& [m, w] : b.coeffs_) c[m] += w;
    return FourierPotential(a.dual_, std::move(c), a.real_ && b.real_);
  }

  friend FourierPotential operator*(double s, const FourierPotential& p) {
    Coeffs c = p.coeffs_;
    for (auto& [m, w] : c) w *= s;
    return FourierPotential(p.dual_, std::move(c), p.real_);
  }

 private:
  DualLattice dual_;
  Coeffs coeffs_;
  bool real_;
};

inline complex evaluate(const FourierPotential& pot, const Vec2& x) {
  complex s{};
  for (const auto& [m, w] : pot.coeffs()) {
    const double phase = dot(pot.dual().point(m), x);
    s += w * complex(std::cos(phase), std::sin(phase));
  }
  return s;
}

namespace detail {

/// Integer coordinates of the point v in `dual`, or nullopt if off-lattice.
inline std::optional<IVec2> integer_coords(const Vec2& v, const DualLattice& dual, double tol = 1e-9) {
  const Vec2 f = dual.fractional(v);
  const double ri = std::round(f.x), rj = std::round(f.y);
  if (std::abs(f.x - ri) > tol || std::abs(f.y - rj) > tol) return std::nullopt;
  return IVec2{static_cast<std::int64_t>(ri), static_cast<std::int64_t>(rj)};
}

}  // namespace detail

/// v = a e_nu + conj(a) e_{-nu}, stored on `fine_dual`.
inline FourierPotential make_shift_perturbation(const Vec2& nu, complex amplitude, const DualLattice& fine_dual) {
  const auto m = detail::integer_coords(nu, fine_dual);
  if (!m) throw Error("shift not on dual lattice");
  if (*m == IVec2{0, 0}) throw Error("shift must be nonzero");
  FourierPotential::Coeffs c;
  c[*m] = amplitude;
  c[-*m] = std::conj(amplitude);
  return FourierPotential(fine_dual, std::move(c));
}

inline FourierPotential make_shift_perturbation(const ShiftVector& nu, complex amplitude, const DualLattice& fine_dual) {
  return make_shift_perturbation(nu.value, amplitude, fine_dual);
}

/// Re-indexes the frequencies of `pot` on a finer dual lattice. The
/// coarse generators must be integer combinations of the fine ones.
inline FourierPotential refine_to(const FourierPotential& pot, const DualLattice& fine_dual) {
  const Vec2 c0 = fine_dual.fractional(pot.dual().basis().col(0));
  const Vec2 c1 = fine_dual.fractional(pot.dual().basis().col(1));
  const auto is_int = [](double v) { return std::abs(v - std::round(v)) < 1e-9; };
  if (!is_int(c0.x) || !is_int(c0.y) || !is_int(c1.x) || !is_int(c1.y))
    throw Error("refinement ratio is not an integer matrix");
  const auto r = [](double v) { return static_cast<std::int64_t>(std::llround(v)); };
  FourierPotential::Coeffs c;
  for (const auto& [m, w] : pot.coeffs())
    c[IVec2{r(c0.x) * m.i + r(c1.x) * m.j, r(c0.y) * m.i + r(c1.y) * m.j}] = w;
  return FourierPotential(fine_dual, std::move(c), pot.is_real());
}

}  // namespace fbgap
