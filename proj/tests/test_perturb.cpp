#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace fbgap;
using Catch::Approx;
using std::numbers::pi;

namespace {

double free_z_closed(double k1, double nu1) {
  return 1 / (k1 * k1 - (k1 + nu1) * (k1 + nu1)) + 1 / (k1 * k1 - (k1 - nu1) * (k1 - nu1));
}

const DualLattice& square_dual() {
  static const DualLattice d = dual_lattice(testing::unit_square());
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// coupling_element

TEST_CASE("coupling vanishes outside the shifted columns") {
  std::mt19937_64 rng(41);
  const auto w = testing::random_real_potential(square_dual(), 1, rng);
  const auto map = supercell_map(testing::unit_square(), 3);
  const Vec2 nu{2 * pi / 3, 0};
  const Vec2 kappa{0.13, -0.07};
  int nonzero = 0;
  for (int l1 = 0; l1 < map.m; ++l1)
    for (int l2 = 0; l2 < map.m; ++l2) {
      const bool allowed = l2 == map.class_of(map.reps[l1] + IVec2{1, 0}) || l2 == map.class_of(map.reps[l1] - IVec2{1, 0});
      for (std::size_t j1 = 0; j1 < 2; ++j1)
        for (std::size_t j2 = 0; j2 < 2; ++j2) {
          const complex c = coupling_element(w, kappa, map, j1, l1, j2, l2, nu, 120);
          if (!allowed) CHECK(c == complex{});
          if (allowed && std::abs(c) > 1e-6) ++nonzero;
        }
    }
  CHECK(nonzero > 0);
}

TEST_CASE("self coupling is zero") {
  std::mt19937_64 rng(42);
  const auto w = testing::random_real_potential(square_dual(), 1, rng);
  const auto map = supercell_map(testing::unit_square(), 2);
  const Vec2 nu{0, pi};
  for (int l = 0; l < map.m; ++l)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(coupling_element(w, {0.2, 0.4}, map, j, l, j, l, nu, 120)) <= 1e-12);
}

TEST_CASE("free plane waves couple with unit weight") {
  const auto map = supercell_map(testing::unit_square(), 3);
  const Vec2 nu{2 * pi / 3, 0};
  const int plus = map.class_of(IVec2{1, 0});
  const complex c = coupling_element(testing::free_potential(), {-0.1, 0.2}, map, 0, 0, 0, plus, nu, 100);
  CHECK(std::abs(c) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coupling input errors") {
  const auto map = supercell_map(testing::unit_square(), 2);
  const auto w = testing::cos_x();
  CHECK_THROWS_AS(coupling_element(w, {}, map, 0, 0, 0, 4, {pi, 0}, 50), Error);
  CHECK_THROWS_AS(coupling_element(w, {}, map, 0, -1, 0, 0, {pi, 0}, 50), Error);
  CHECK_THROWS_WITH(coupling_element(w, {}, map, 0, 0, 0, 1, {1.0, 0}, 50), "shift not on the supercell dual lattice");
  CHECK_THROWS_AS(coupling_element(w, {}, map, 0, 0, 0, 1, {2 * pi, 0}, 50), Error);
}

// ---------------------------------------------------------------------------
// second_order_z

TEST_CASE("free operator Z has the closed form") {
  const auto z = second_order_z(testing::free_potential(), {0.1, 0}, {pi / 3, 0}, 100);
  CHECK(z.total == Approx(free_z_closed(0.1, pi / 3)).epsilon(1e-12));
  CHECK(std::abs(z.r_term) <= 1e-14);
  CHECK(std::abs(z.r0_term) <= 1e-14);
  CHECK(z.principal == Approx(z.total).epsilon(1e-14));
}

TEST_CASE("principal, R and R0 add up to the direct sum") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-pi, pi);
  const auto wr = testing::random_real_potential(square_dual(), 1, rng);
  for (const auto* w : {&wr}) {
    for (int t = 0; t < 6; ++t) {
      const Vec2 k{u(rng), u(rng)};
      const Vec2 nu{0.3 * u(rng), 0.3 * u(rng)};
      for (int band : {0, 1}) {
        ZCorrection z;
        try {
          z = second_order_z(*w, k, nu, 150, 0, band);
        } catch (const NumericalError&) {
          continue;
        }
        CHECK(std::abs(z.total - z.direct) <= 1e-10 * std::max(1.0, std::abs(z.direct)));
      }
    }
  }
  const auto z = second_order_z(testing::cos_xy(), {0, 0}, {pi / 3, 0}, 200);
  CHECK(std::abs(z.total - z.direct) <= 1e-10 * std::abs(z.direct));
  CHECK(z.r_term != 0.0);
  CHECK(z.r0_term != 0.0);
}

TEST_CASE("band truncation of R0 is recorded with a tail estimate") {
  const auto w = testing::cos_xy();
  const auto full = second_order_z(w, {0, 0}, {pi / 3, 0}, 200);
  const auto cut = second_order_z(w, {0, 0}, {pi / 3, 0}, 200, 4);
  CHECK(cut.n_bands_used == 4);
  CHECK(full.n_bands_used > 4);
  CHECK(cut.principal == Approx(full.principal).epsilon(1e-12));
  CHECK(std::abs(cut.total - full.total) <= 2 * cut.tail_estimate + 1e-12);
  CHECK(full.tail_estimate <= cut.tail_estimate);
}

TEST_CASE("symmetric resonance collapses the denominator") {
  CHECK_THROWS_WITH(second_order_z(testing::free_potential(), {-pi / 6, 0}, {pi / 3, 0}, 100), "denominator collapse");
  CHECK_THROWS_AS(second_order_z(testing::free_potential(), {-pi / 6, 0}, {pi / 3, 0}, 100), NumericalError);
}

// ---------------------------------------------------------------------------
// verify_expansion

TEST_CASE("supercell fit reproduces the free-operator Z") {
  const auto nu = ShiftVector::make({1, 0}, 1, 6, square_dual());
  // eps^4 terms bias the fit by ~1e-5 at eps ~ 1e-3, so smaller eps are used here
  const auto f = verify_expansion(testing::free_potential(), {0.1, 0}, nu, {1e-4, 2e-4, 4e-4}, 60);
  CHECK(f.cyclic);
  CHECK(f.blocks == 6);
  CHECK(std::abs(f.z_fit - free_z_closed(0.1, pi / 3)) <= 1e-6);
}

TEST_CASE("supercell fit reproduces Z for a trigonometric potential") {
  const auto w = testing::cos_xy();
  const auto nu = ShiftVector::make({1, 0}, 1, 6, square_dual());
  for (double e_cut : {200.0, 400.0}) {
    const auto z = second_order_z(w, {0, 0}, nu.value, e_cut);
    const auto f = verify_expansion(w, {0, 0}, nu, {1e-3, 2e-3, 4e-3}, e_cut);
    CHECK(std::abs(f.z_fit - z.total) <= 1e-3 * std::abs(z.total));
    CHECK(std::abs(f.z_fit - z.total) <= std::max(1e-3 * std::abs(z.total), f.z_uncertainty));
  }
}

TEST_CASE("cubic remainder scales like eps^3") {
  const auto w = testing::cos_xy();
  // a 3-cycle, so the eps^3 term is present
  const auto nu = ShiftVector::make({1, 0}, 1, 3, square_dual());
  const auto z = second_order_z(w, {0, 0}, nu.value, 200);
  const auto a = verify_expansion(w, {0, 0}, nu, {2e-3, 4e-3, 8e-3}, 200);
  const auto b = verify_expansion(w, {0, 0}, nu, {1e-3, 2e-3, 4e-3}, 200);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto rem = [&](const ExpansionSample& s) { return s.shift - z.total * s.eps * s.eps; };
    const double ratio = rem(a.samples[i]) / rem(b.samples[i]);
    CHECK(ratio >= 4.0);
    CHECK(ratio <= 16.0);
  }
}

TEST_CASE("perturbed eigenvalue moves at most 2 eps |a|") {
  std::mt19937_64 rng(3);
  const auto w = testing::random_real_potential(square_dual(), 1, rng);
  const auto nu = ShiftVector::make({0, 1}, 1, 5, square_dual());
  for (const complex a : {complex(1, 0), complex(0, 2), complex(0.6, -0.8)}) {
    const auto f = verify_expansion(w, {0.3, 0.1}, nu, {1e-3, 1e-2, 5e-2}, 100, 0, a);
    for (const auto& s : f.samples) CHECK(std::abs(s.shift) <= 2 * s.eps * std::abs(a) * (1 + 1e-12));
  }
}

TEST_CASE("long orbits fall back to an open chain") {
  const auto nu = ShiftVector::make({1, 0}, 1, 11, square_dual());
  const auto f = verify_expansion(testing::cos_x(), {0.05, 0.1}, nu, {1e-3, 2e-3, 4e-3}, 80);
  CHECK_FALSE(f.cyclic);
  CHECK(f.blocks == 7);
  const auto z = second_order_z(testing::cos_x(), {0.05, 0.1}, nu.value, 80);
  CHECK(std::abs(f.z_fit - z.total) <= 1e-3 * std::abs(z.total));
}

TEST_CASE("verify_expansion input errors") {
  const auto nu = ShiftVector::make({1, 0}, 1, 6, square_dual());
  CHECK_THROWS_WITH(verify_expansion(testing::cos_x(), {}, nu, {1e-3}, 50), "underdetermined fit");
  CHECK_THROWS_WITH(verify_expansion(testing::cos_x(), {}, nu, {1e-3, 2e-3}, 50), "underdetermined fit");
  CHECK_THROWS_AS(verify_expansion(testing::cos_x(), {}, nu, {1e-3, -2e-3, 3e-3}, 50), Error);
  CHECK_THROWS_AS(verify_expansion(testing::cos_x(), {}, ShiftVector::make({1, 0}, 2, 1, square_dual()),
                                   {1e-3, 2e-3, 4e-3}, 50),
                  Error);
  // k = -nu/2 makes k and k + nu degenerate in the free operator
  CHECK_THROWS_AS(verify_expansion(testing::free_potential(), {-pi / 6, 0}, nu, {1e-3, 2e-3, 4e-3}, 50), NumericalError);
}

// ---------------------------------------------------------------------------
// z_second_derivative_probe

TEST_CASE("probe matches -40 delta^-6 for x^4") {
  for (double delta : {0.1, 0.05, 0.025}) {
    const auto p = z_second_derivative_probe([](double x) { return std::pow(x, 4); }, delta);
    CHECK(p.alpha == 4);
    CHECK(p.c0 == Approx(1.0).epsilon(1e-9));
    CHECK(p.predicted == Approx(-40 * std::pow(delta, -6)).epsilon(1e-12));
    CHECK(std::abs(p.ratio - 1) <= 0.2);
  }
}

TEST_CASE("probe prediction scales with 1/C0") {
  const auto a = z_second_derivative_probe([](double x) { return std::pow(x, 4); }, 0.05);
  const auto b = z_second_derivative_probe([](double x) { return 2 * std::pow(x, 4); }, 0.05);
  CHECK(b.predicted == Approx(a.predicted / 2).epsilon(1e-9));
  CHECK(b.numeric == Approx(a.numeric / 2).epsilon(1e-6));
}

TEST_CASE("probe ratio improves as delta shrinks") {
  const auto f = [](double x) { return std::pow(x, 4) * (1 + x); };
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {0.1, 0.05, 0.025}) {
    const double err = std::abs(z_second_derivative_probe(f, delta).ratio - 1);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("probe refuses a quadratic minimum") {
  CHECK_THROWS_AS(z_second_derivative_probe([](double x) { return x * x; }, 0.05), Error);
  CHECK_THROWS_AS(z_second_derivative_probe([](double x) { return x * x; }, 0.0), Error);
}

// ---------------------------------------------------------------------------
// splitting_coupling

TEST_CASE("free degenerate pair couples through the connecting frequency") {
  const auto w = testing::free_potential();
  const Vec2 k0{-pi, 0};
  CHECK(std::abs(splitting_coupling(w, k0, 0, 1, {1, 0}, 1.0, 100) - complex(1, 0)) <= 1e-12);
  CHECK(std::abs(splitting_coupling(w, k0, 0, 1, {1, 0}, complex(0, 1), 100) - complex(0, 1)) <= 1e-12);
  CHECK(std::abs(splitting_coupling(w, k0, 0, 1, {0, 1}, 1.0, 100)) <= 1e-12);
  CHECK(std::abs(splitting_coupling(w, k0, 0, 1, {0, 0}, 1.0, 100)) <= 1e-12);
  CHECK_THROWS_WITH(splitting_coupling(w, k0, 0, 2, {1, 0}, 1.0, 100), "cluster not found at k0");
}

TEST_CASE("scan finds a splitting coupling for a symmetric degeneracy") {
  const auto w = testing::cos_xy();
  const Vec2 k0{pi, pi};
  const auto vals = bloch_eigs(w, k0, 200).values();
  int j = -1;
  for (std::size_t i = 0; i + 1 < 6; ++i)
    if (vals[i + 1] - vals[i] < 1e-9) {
      j = static_cast<int>(i);
      break;
    }
  REQUIRE(j >= 0);
  const auto c = find_splitting(w, k0, j, j + 1, 200);
  REQUIRE(c.has_value());
  CHECK(std::abs(c->value) > 1e-6);
  CHECK(std::max(std::abs(c->nu.i), std::abs(c->nu.j)) <= 3);
}

// ---------------------------------------------------------------------------
// remove_degeneracy

TEST_CASE("perturbation budget is enforced") {
  const auto nu = ShiftVector::make({1, 0}, 1, 7, square_dual());
  CHECK_NOTHROW(check_budget({{nu, 0.1, 1.0}, {nu, 0.2, 1.0}}, 1.0));
  CHECK_THROWS_AS(check_budget({{nu, 0.3, 1.0}, {nu, 0.2, 1.0}}, 1.0), Error);
  CHECK_THROWS_AS(check_budget({{nu, 0.1, complex(0, 3)}}, 0.5), Error);
}

TEST_CASE("empty budget is rejected") {
  CHECK_THROWS_WITH(remove_degeneracy(DoubledModel{1, 0}, EdgeSide::upper, 0.0, 3), "empty budget");
  CHECK_THROWS_AS(remove_degeneracy(DoubledModel{1, 0}, EdgeSide::upper, 5.0, 3), Error);
}

TEST_CASE("doubled model is repaired in one round") {
  const auto r = remove_degeneracy(DoubledModel{1, 0}, EdgeSide::upper, 0.1, 4);
  CHECK(r.trace.initial == "fails_B");
  REQUIRE(r.trace.rounds.size() == 1);
  CHECK(r.trace.rounds[0].action == "diagonal");
  CHECK(r.trace.rounds[0].spec.epsilon == Approx(0.05));
  CHECK(r.trace.terminal == "nondegenerate");
  CHECK(r.trace.resolved);
  CHECK(r.model.eps == Approx(0.05));
  CHECK(r.trace.used < 2 * r.model.v);
}

TEST_CASE("lower edge of the doubled model is repaired by symmetry") {
  const auto r = remove_degeneracy(DoubledModel{1, 0}, EdgeSide::lower, 0.1, 4, 101);
  CHECK(r.trace.resolved);
  CHECK(r.model.eps_low == Approx(0.05));
  CHECK(r.model.eps == 0.0);
}

TEST_CASE("non-degenerate edges need no rounds") {
  const auto d = remove_degeneracy(DoubledModel{1, 0.05}, EdgeSide::upper, 0.1, 4);
  CHECK(d.trace.rounds.empty());
  CHECK(d.trace.resolved);
  CHECK(d.model.eps == 0.05);

  RemovalOptions opt;
  opt.e_cut = 60;
  opt.n_bands = 2;
  opt.grid = 20;
  const auto w = testing::free_potential();
  const Gap bottom{-std::numeric_limits<double>::infinity(), 0.0, -1, 0};
  const auto c = remove_degeneracy(w, bottom, EdgeSide::upper, 0.1, 3, opt);
  CHECK(c.trace.rounds.empty());
  CHECK(c.trace.terminal == "nondegenerate");
  CHECK(c.potential.coeffs() == w.coeffs());
}
