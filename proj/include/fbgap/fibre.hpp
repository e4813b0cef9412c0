#pragma once
/// Truncated fibre operators H(k) = |theta + k|^2 + W in a plane-wave basis,
/// their eigen-solutions, overlaps between solutions at different k, and the
/// supercell folding check.
///
/// Normalisation: the cell volume is taken as 1, so eigenvector coefficients
/// are orthonormal in the plain Euclidean sense.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "fbgap/lattice.hpp"
#include "fbgap/linalg.hpp"
#include "fbgap/potential.hpp"

namespace fbgap {

/// Frequencies theta (integer coordinates on `dual`) kept at quasimomentum k.
struct PlaneWaveBasis {
  DualLattice dual;
  Vec2 k;
  double e_cut = 0.0;
  std::vector<IVec2> thetas;  // sorted lexicographically
  std::map<IVec2, std::size_t> index;

  std::size_t size() const { return thetas.size(); }
  Vec2 frequency(std::size_t r) const { return k + dual.point(thetas[r]); }
  std::optional<std::size_t> find(const IVec2& m) const {
    const auto it = index.find(m);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

/// All theta with |B theta + k|^2 <= e_cut.
inline PlaneWaveBasis make_basis(const DualLattice& dual, const Vec2& k, double e_cut) {
  if (!(e_cut > 0.0)) throw Error("e_cut must be positive");
  PlaneWaveBasis b{dual, k, e_cut, {}, {}};
  const double r = std::sqrt(e_cut);
  const Mat2& inv = dual.inverse();
  const Vec2 c = -(inv * k);
  // |m_i - c_i| <= r * |row_i(inv)| for every m inside the ball
  const double ri = r * std::hypot(inv(0, 0), inv(0, 1));
  const double rj = r * std::hypot(inv(1, 0), inv(1, 1));
  const auto lo_i = static_cast<std::int64_t>(std::floor(c.x - ri)), hi_i = static_cast<std::int64_t>(std::ceil(c.x + ri));
  const auto lo_j = static_cast<std::int64_t>(std::floor(c.y - rj)), hi_j = static_cast<std::int64_t>(std::ceil(c.y + rj));
  for (std::int64_t i = lo_i; i <= hi_i; ++i)
    for (std::int64_t j = lo_j; j <= hi_j; ++j)
      if (norm2(k + dual.point(IVec2{i, j})) <= e_cut) b.thetas.push_back({i, j});
  if (b.thetas.empty()) throw Error("empty plane-wave basis: e_cut below the lowest kinetic energy");
  for (std::size_t n = 0; n < b.thetas.size(); ++n) b.index.emplace(b.thetas[n], n);
  return b;
}

/// Basis with a prescribed frequency set, used to keep the truncation fixed
/// while k moves (finite differences must not see plane waves entering).
inline PlaneWaveBasis frozen_basis(const PlaneWaveBasis& base, const Vec2& k) {
  PlaneWaveBasis b = base;
  b.k = k;
  return b;
}

inline HermitianMatrix assemble(const FourierPotential& w, const PlaneWaveBasis& basis) {
  if (!(w.dual().basis() == basis.dual.basis())) throw Error("potential and basis use different dual lattices");
  if (!w.is_real()) throw Error("fibre assembly needs a real-valued potential");
  const std::size_t n = basis.size();
  HermitianMatrix h(n);
  for (std::size_t r = 0; r < n; ++r) {
    h(r, r) = norm2(basis.frequency(r));
    for (const auto& [m, wm] : w.coeffs()) {
      // entry (theta, theta') carries w_{theta - theta'}
      if (auto c = basis.find(basis.thetas[r] - m)) h(r, *c) += wm;
    }
  }
  return h;
}

struct FibreMatrix {
  HermitianMatrix h;
  PlaneWaveBasis basis;
};

inline FibreMatrix assemble_fibre(const FourierPotential& w, const Vec2& k, double e_cut) {
  auto basis = make_basis(w.dual(), k, e_cut);
  auto h = assemble(w, basis);
  return {std::move(h), std::move(basis)};
}

/// Spectral data at one quasimomentum: ascending values and coefficient
/// columns over `basis`.
struct EigenSolution {
  PlaneWaveBasis basis;
  EigenDecomposition eig;

  const Vec2& k() const { return basis.k; }
  const std::vector<double>& values() const { return eig.values; }
  std::size_t size() const { return eig.dim; }
  complex coeff(std::size_t theta_row, std::size_t j) const { return eig.vec(theta_row, j); }
};

inline EigenSolution solve(const FourierPotential& w, PlaneWaveBasis basis) {
  auto h = assemble(w, basis);
  return {std::move(basis), hermitian_eig(h)};
}

inline EigenSolution bloch_eigs(const FourierPotential& w, const Vec2& k, double e_cut) {
  return solve(w, make_basis(w.dual(), k, e_cut));
}

/// sum_theta psi_j^a(theta) conj(psi_m^b(theta')) over plane waves with
/// k_a + theta + shift = k_b + theta'. Frequencies present on only one side
/// contribute nothing. `shift` must make the two frequency sets commensurate.
inline complex overlap(const EigenSolution& a, std::size_t j, const EigenSolution& b, std::size_t m,
                       const Vec2& shift = {}) {
  if (j >= a.size() || m >= b.size()) throw Error("overlap: band index out of range");
  if (!(a.basis.dual.basis() == b.basis.dual.basis())) throw Error("overlap: solutions on different dual lattices");
  const auto g = detail::integer_coords(a.k() + shift - b.k(), a.basis.dual);
  if (!g) throw Error("overlap: shift not representable on the dual lattice");
  complex s{};
  for (std::size_t r = 0; r < a.basis.size(); ++r)
    if (auto c = b.basis.find(a.basis.thetas[r] + *g)) s += a.coeff(r, j) * std::conj(b.coeff(*c, m));
  return s;
}

struct SupercellReport {
  double distance = 0.0;       // max |difference| between sorted multisets
  std::size_t count_supercell = 0;
  std::size_t count_merged = 0;
  bool count_mismatch = false;
  double window = 0.0;
};

/// Compares the spectrum of the supercell fibre at kappa with the union of the
/// original fibres at kappa + p_l, restricted to values <= e_cut / 2.
inline SupercellReport supercell_consistency(const FourierPotential& w, const Vec2& kappa, const SupercellMap& map,
                                             double e_cut) {
  SupercellReport rep;
  rep.window = e_cut / 2;
  const auto w_fine = refine_to(w, map.fine_dual);
  const auto big = bloch_eigs(w_fine, kappa, e_cut);
  std::vector<double> merged;
  for (int l = 0; l < map.m; ++l) {
    // kappa + p_l is deliberately not wrapped: its ball is the l-th slice of the supercell ball
    const auto sol = bloch_eigs(w, kappa + map.rep_vector(l), e_cut);
    merged.insert(merged.end(), sol.values().begin(), sol.values().end());
  }
  std::vector<double> sup;
  for (double v : big.values())
    if (v <= rep.window) sup.push_back(v);
  std::erase_if(merged, [&](double v) { return v > rep.window; });
  std::sort(sup.begin(), sup.end());
  std::sort(merged.begin(), merged.end());
  rep.count_supercell = sup.size();
  rep.count_merged = merged.size();
  rep.count_mismatch = sup.size() != merged.size();
  const std::size_t n = std::min(sup.size(), merged.size());
  for (std::size_t i = 0; i < n; ++i) rep.distance = std::max(rep.distance, std::abs(sup[i] - merged[i]));
  return rep;
}

}  // namespace fbgap
