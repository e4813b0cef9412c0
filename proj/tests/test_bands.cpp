#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace fbgap;
using Catch::Approx;
using std::numbers::pi;

TEST_CASE("free band bottom on an 11x11 grid") {
  const auto bg = sample_bands(testing::free_potential(), 11, 11, 100, 3);
  const auto [lo, hi] = bg.band_range(0);
  CHECK(lo == 0.0);
  CHECK(bg.at(0, 0) == 0.0);
  CHECK(bg.k_points[0] == Vec2{0, 0});
  (void)hi;
}

TEST_CASE("checkerboard adapter matches the closed form") {
  const CheckerboardModel m{1, -1};
  const auto bg = sample_bands(m, 31, 31, 2);
  for (std::size_t p = 0; p < bg.size(); ++p) {
    const auto cf = m.closed_form(bg.k_points[p]);
    CHECK(bg.at(p, 0) == Approx(cf[0]).epsilon(1e-14));
    CHECK(bg.at(p, 1) == Approx(cf[1]).epsilon(1e-14));
  }
}

TEST_CASE("grid refinement changes band extrema by less than the grid variation") {
  const auto w = testing::cos_xy();
  const auto a = sample_bands(w, 21, 21, 150, 3);
  const auto b = sample_bands(w, 41, 41, 150, 3);
  for (int j = 0; j < 3; ++j) {
    double slack = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p)
      for (auto q : detail::grid_neighbours(a, p)) slack = std::max(slack, std::abs(a.at(p, j) - a.at(q, j)));
    CHECK(std::abs(a.band_range(j).first - b.band_range(j).first) <= slack);
    CHECK(std::abs(a.band_range(j).second - b.band_range(j).second) <= slack);
  }
}

TEST_CASE("sampling is independent of the worker count") {
  const auto w = testing::cos_xy();
  const auto a = sample_bands(w, 9, 7, 120, 4, 1);
  const auto b = sample_bands(w, 9, 7, 120, 4, 3);
  CHECK(a.values == b.values);
  CHECK_THROWS_AS(sample_bands(w, 4, 4, 10, 10000), Error);
}

TEST_CASE("free operator has no gaps") {
  const auto bg = sample_bands(testing::free_potential(), 21, 21, 200, 6);
  const auto g = find_gaps(bg, 1e-6);
  CHECK(g.gaps.empty());
  CHECK(g.band_floor == 0.0);
}

TEST_CASE("checkerboard gap") {
  const auto bg = sample_bands(CheckerboardModel{1, -1}, 201, 201, 2);
  const auto g = find_gaps(bg, 1e-3);
  REQUIRE(g.gaps.size() == 1);
  CHECK(g.gaps[0].lower == Approx(-1).epsilon(1e-12));
  CHECK(g.gaps[0].upper == Approx(1).epsilon(1e-12));
  CHECK(g.gaps[0].lower_band == 0);
  CHECK(g.gaps[0].upper_band == 1);
  CHECK(find_gaps(bg, 2.5).gaps.empty());
}

TEST_CASE("checkerboard lower edge is a curve") {
  const CheckerboardModel m{1, -1};
  const auto bg = sample_bands(m, 101, 101, 2);
  const auto es = edge_set(m, bg, -1.0, EdgeSide::lower);
  CHECK(es.classification == EdgeClass::fails_B);
  REQUIRE(es.points.size() > 10);
  for (const auto& p : es.points) {
    CHECK(std::abs(2 * std::cos(p.k.x) + 2 * std::cos(p.k.y)) < 1e-6);
    CHECK(std::abs(p.value - es.edge_value) <= es.edge_tol);
  }
}

TEST_CASE("free band bottom is a nondegenerate minimum") {
  const PlaneWaveModel m(testing::free_potential(), 200);
  const auto bg = sample_bands(m, 21, 21, 3);
  const auto es = edge_set(m, bg, 0.0, EdgeSide::upper);
  CHECK(es.classification == EdgeClass::nondegenerate);
  REQUIRE(es.points.size() == 1);
  CHECK(norm(es.points[0].k) < 1e-9);
  CHECK(es.hessians[0](0, 0) == Approx(2).epsilon(1e-6));
  CHECK(es.hessians[0](1, 1) == Approx(2).epsilon(1e-6));
  CHECK(std::abs(es.hessians[0](0, 1)) < 1e-6);
}

TEST_CASE("refinement of the free band") {
  const PlaneWaveModel m(testing::free_potential(), 200);
  const auto r = refine_extremum(m, {0.05, -0.03}, 0, Sense::minimize);
  CHECK(r.converged);
  CHECK(norm(r.k) < 1e-9);
}

TEST_CASE("refinement on the checkerboard second band lands on the curve") {
  const CheckerboardModel m{1, -1};
  const auto r = refine_extremum(m, {pi / 2 + 0.1, pi / 2}, 1, Sense::minimize);
  CHECK(r.converged);
  CHECK(std::abs(std::cos(r.k.x) + std::cos(r.k.y)) < 1e-7);
  CHECK(r.value == Approx(1).epsilon(1e-12));
}

TEST_CASE("refinement of the perturbed doubled model") {
  const DoubledModel m{1, 0.05};
  const auto r = refine_extremum(m, {pi / 2 + 0.05, pi / 2 - 0.04}, 2, Sense::minimize);
  CHECK(r.converged);
  CHECK(r.iterations <= 30);
  CHECK(std::abs(r.k.x - pi / 2) < 0.025);
  CHECK(std::abs(r.k.y - pi / 2) < 0.025);
}

TEST_CASE("refinement refuses a band without spectral margin") {
  const DoubledModel m{1, 0.0};
  RefineOptions o;
  o.margin = 1e-3;
  CHECK_THROWS_AS(refine_extremum(m, {pi / 2, pi / 2}, 2, Sense::minimize, o), NumericalError);
}

TEST_CASE("hessian of the free band") {
  const PlaneWaveModel m(testing::free_potential(), 200);
  const auto a = hessian(m, {0, 0}, 0);
  CHECK(a(0, 0) == Approx(2).margin(1e-6));
  CHECK(a(1, 1) == Approx(2).margin(1e-6));
  CHECK(a(0, 1) == Approx(0).margin(1e-6));
}

TEST_CASE("quartic direction gives a degenerate hessian") {
  const FunctionModel m([](const Vec2& k) { return std::pow(k.x, 4) + k.y * k.y; }, {Mat2::from_columns({2, 0}, {0, 2}) , false});
  const auto a = hessian(m, {0, 0}, 0);
  CHECK(std::abs(a(0, 0)) < 1e-6);
  CHECK(a(1, 1) == Approx(2).margin(1e-6));
  CHECK(std::abs(a(0, 1)) < 1e-6);
  // centred domain: k in [-1, 1]^2
  const FunctionModel c([](const Vec2& k) { return std::pow(k.x - 1, 4) + (k.y - 1) * (k.y - 1); },
                        {Mat2::from_columns({2, 0}, {0, 2}), false});
  const auto bg = sample_bands(c, 21, 21, 1);
  const auto es = edge_set(c, bg, 0.0, EdgeSide::upper);
  CHECK(es.classification == EdgeClass::fails_C);
}

TEST_CASE("hessian of the perturbed doubled model") {
  const DoubledModel m{1, 0.05};
  const auto r = refine_extremum(m, {pi / 2, pi / 2}, 2, Sense::minimize);
  const auto ev = symmetric_eigenvalues(hessian(m, r.k, 2));
  CHECK(ev[0] == Approx(4).epsilon(0.2));
  CHECK(ev[1] == Approx(4).epsilon(0.2));
}

TEST_CASE("two bands meeting at the edge fail condition A") {
  // two scalar bands that touch at the minimum
  struct Touching {
    HermitianMatrix fibre(const Vec2& k) const {
      HermitianMatrix h(2);
      h(0, 0) = norm2(k - Vec2{0.5, 0.5});
      h(1, 1) = 2 * norm2(k - Vec2{0.5, 0.5});
      return h;
    }
    KDomain domain() const { return {Mat2::identity(), false}; }
    Touching localized(const Vec2&) const { return *this; }
  };
  const Touching m;
  const auto bg = sample_bands(m, 21, 21, 2);
  const auto es = edge_set(m, bg, 0.0, EdgeSide::upper);
  CHECK(es.classification == EdgeClass::fails_A);
  CHECK(es.margin_binding);
}

TEST_CASE("classification survives a small perturbation") {
  struct Perturbed {
    DoubledModel base;
    HermitianMatrix q;
    HermitianMatrix fibre(const Vec2& k) const {
      auto h = base.fibre(k);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) h(r, c) += q(r, c);
      return h;
    }
    KDomain domain() const { return base.domain(); }
    Perturbed localized(const Vec2&) const { return *this; }
  };
  std::mt19937_64 rng(77);
  for (int t = 0; t < 3; ++t) {
    auto q = testing::random_hermitian(4, rng);
    // keep the perturbation real so the k -> -k symmetry of the domain is kept
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) q(r, c) = q(r, c).real();
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = r + 1; c < 4; ++c) q(c, r) = q(r, c);
    const double s = 1e-3 * 4.0 * 0.05 / q.frobenius_norm();
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) q(r, c) *= s;
    const Perturbed m{DoubledModel{1, 0.05}, q};
    const auto bg = sample_bands(m, 101, 101, 4);
    const auto es = edge_set(m, bg, bg.band_range(2).first, EdgeSide::upper);
    CHECK(es.classification == EdgeClass::nondegenerate);
    CHECK(es.points.size() == 1);
  }
}

TEST_CASE("flatness of pure powers") {
  std::vector<std::pair<double, double>> s;
  for (double d = 1e-3; d < 1.1e-2; d *= 1.5) s.emplace_back(d, d * d);
  auto r = flatness_order(s);
  CHECK(r.alpha == 2);
  CHECK(r.c0 == Approx(1).epsilon(1e-10));
  s.clear();
  for (double d = 1e-3; d < 1.1e-2; d *= 1.5) s.emplace_back(d, 3 * std::pow(d, 4) * (1 + d));
  r = flatness_order(s);
  CHECK(r.alpha == 4);
  CHECK(r.c0 == Approx(3).epsilon(0.02));
  CHECK(r.residual < 0.05);
}

TEST_CASE("flatness of the free band along a direction") {
  const auto w = testing::free_potential();
  std::vector<std::pair<double, double>> s;
  const Vec2 n{0.6, 0.8};
  for (double d = 1e-3; d < 1.1e-2; d *= 1.5) s.emplace_back(d, bloch_eigs(w, d * n, 100).values()[0]);
  const auto r = flatness_order(s);
  CHECK(r.alpha == 2);
  CHECK(r.c0 == Approx(1).epsilon(1e-10));
}

TEST_CASE("odd slope is ambiguous") {
  std::vector<std::pair<double, double>> s;
  for (double d = 1e-3; d < 1.1e-2; d *= 1.5) s.emplace_back(d, d * d * d);
  CHECK_THROWS_WITH(flatness_order(s), "order ambiguous");
  CHECK_THROWS_AS(flatness_order({{0.1, 1.0}}), Error);
}
