#pragma once
/// Band models: anything that maps a quasimomentum to a finite Hermitian
/// fibre matrix over a parallelogram of k values.

#include <concepts>
#include <functional>
#include <optional>
#include <utility>

#include "fbgap/fibre.hpp"

namespace fbgap {

/// The k region a model is sampled on: k = basis * f with f in [0,1]^2.
/// Periodic domains are tori (f and f + e_i are identified); otherwise the
/// closed square is used and grids include both ends.
struct KDomain {
  Mat2 basis;
  bool periodic = true;

  double cell_diameter() const {
    return std::max(norm(basis.col(0) + basis.col(1)), norm(basis.col(0) - basis.col(1)));
  }
};

/// `localized(k0)` returns a model equal to the original near k0 whose matrix
/// depends smoothly on k (for plane waves: the truncation is frozen at k0).
template <class M>
concept BandModel = requires(const M& m, const Vec2& k) {
  { m.fibre(k) } -> std::convertible_to<HermitianMatrix>;
  { m.domain() } -> std::convertible_to<KDomain>;
  { m.localized(k) } -> std::convertible_to<M>;
};

/// Continuous operator -Laplace + W truncated at |theta + k|^2 <= e_cut.
class PlaneWaveModel {
 public:
  PlaneWaveModel(FourierPotential w, double e_cut) : w_(std::move(w)), e_cut_(e_cut) {
    if (!(e_cut > 0.0)) throw Error("e_cut must be positive");
  }

  HermitianMatrix fibre(const Vec2& k) const {
    if (frozen_) return assemble(w_, frozen_basis(*frozen_, k));
    return assemble(w_, make_basis(w_.dual(), k, e_cut_));
  }
  KDomain domain() const { return {w_.dual().basis(), true}; }
  PlaneWaveModel localized(const Vec2& k0) const {
    PlaneWaveModel m = *this;
    m.frozen_ = make_basis(w_.dual(), k0, e_cut_);
    return m;
  }

  const FourierPotential& potential() const { return w_; }
  double e_cut() const { return e_cut_; }

  /// Largest change of the lowest n eigenvalues at k when e_cut is doubled.
  double truncation_delta(std::size_t n, const Vec2& k = {}) const {
    const auto a = bloch_eigs(w_, k, e_cut_);
    const auto b = bloch_eigs(w_, k, 2 * e_cut_);
    double d = 0.0;
    for (std::size_t j = 0; j < std::min({n, a.size(), b.size()}); ++j) d = std::max(d, std::abs(a.values()[j] - b.values()[j]));
    return d;
  }

 private:
  FourierPotential w_;
  double e_cut_;
  std::optional<PlaneWaveBasis> frozen_;
};

/// Scalar band given by a function; used for synthetic profiles in tests.
class FunctionModel {
 public:
  FunctionModel(std::function<double(const Vec2&)> f, KDomain domain) : f_(std::move(f)), domain_(domain) {}

  HermitianMatrix fibre(const Vec2& k) const {
    HermitianMatrix h(1);
    h(0, 0) = f_(k);
    return h;
  }
  KDomain domain() const { return domain_; }
  FunctionModel localized(const Vec2&) const { return *this; }

 private:
  std::function<double(const Vec2&)> f_;
  KDomain domain_;
};

/// Truncation error estimate used to widen edge tolerances; zero for models
/// that are exact finite matrices.
template <class M>
double truncation_delta(const M& model, std::size_t n_bands) {
  if constexpr (requires { model.truncation_delta(n_bands); })
    return model.truncation_delta(n_bands);
  else
    return 0.0;
}

}  // namespace fbgap
