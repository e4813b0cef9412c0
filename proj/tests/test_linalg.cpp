#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace fbgap;
using Catch::Approx;

TEST_CASE("diagonal matrix eigenvalues come out sorted") {
  HermitianMatrix h(3);
  h(0, 0) = 3;
  h(1, 1) = 1;
  h(2, 2) = 2;
  const auto e = hermitian_eig(h);
  REQUIRE(e.values == std::vector<double>{1, 2, 3});
}

TEST_CASE("pauli x has eigenvalues -1 and 1") {
  HermitianMatrix h(2);
  h(0, 1) = h(1, 0) = 1;
  const auto e = hermitian_eig(h);
  CHECK(e.values[0] == Approx(-1).margin(1e-15));
  CHECK(e.values[1] == Approx(1).margin(1e-15));
  CHECK(max_residual(h, e) < 1e-14);
}

TEST_CASE("complex 2x2 against closed form") {
  HermitianMatrix h(2);
  h(0, 0) = 1;
  h(1, 1) = -2;
  h.set_hermitian(0, 1, complex(0.3, -1.1));
  const auto e = hermitian_eig(h);
  const double r = std::sqrt(2.25 + std::norm(complex(0.3, -1.1)));
  CHECK(e.values[0] == Approx(-0.5 - r).epsilon(1e-14));
  CHECK(e.values[1] == Approx(-0.5 + r).epsilon(1e-14));
}

TEST_CASE("random hermitian residual and orthonormality") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto h = testing::random_hermitian(20, rng);
    const auto e = hermitian_eig(h);
    CHECK(max_residual(h, e) <= 1e-10 * h.frobenius_norm());
    CHECK(orthonormality_defect(e) <= 1e-10);
    CHECK(std::is_sorted(e.values.begin(), e.values.end()));
  }
}

TEST_CASE("eigensolver is deterministic") {
  std::mt19937_64 rng(5);
  const auto h = testing::random_hermitian(15, rng);
  const auto a = hermitian_eig(h);
  const auto b = hermitian_eig(h);
  CHECK(a.values == b.values);
  CHECK(a.vectors == b.vectors);
}

TEST_CASE("trace and degenerate spectrum") {
  HermitianMatrix h(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) h(i, j) = 1.0;  // rank one, eigenvalues 0,0,0,4
  const auto e = hermitian_eig(h);
  CHECK(e.values[3] == Approx(4).epsilon(1e-14));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(e.values[static_cast<std::size_t>(i)]) < 1e-14);
  CHECK(orthonormality_defect(e) < 1e-13);
}

TEST_CASE("non-hermitian input is rejected") {
  HermitianMatrix h(2);
  h(0, 1) = 1;
  h(1, 0) = 2;
  CHECK_THROWS_AS(hermitian_eig(h), Error);
}

TEST_CASE("empty and 1x1 matrices") {
  HermitianMatrix h(1);
  h(0, 0) = 7.5;
  CHECK(hermitian_eig(h).values == std::vector<double>{7.5});
  CHECK(hermitian_eig(HermitianMatrix(0)).values.empty());
}

TEST_CASE("schur effective scalar of a 2x2 matrix") {
  HermitianMatrix h(2);
  h(0, 0) = 2;
  h(1, 1) = 3;
  h(0, 1) = h(1, 0) = 1;
  const double lam = 1.234;
  const auto s = schur_effective(h, {0}, lam);
  CHECK(s.effective()(0, 0).real() == Approx((2 - lam) - 1 / (3 - lam)).epsilon(1e-14));
  // the roots of the effective scalar are the eigenvalues of H
  for (double root : {(5 - std::sqrt(5.0)) / 2, (5 + std::sqrt(5.0)) / 2}) {
    const auto r = schur_effective(h, {0}, root);
    CHECK(std::abs(r.effective()(0, 0)) < 1e-14);
  }
  const auto e = hermitian_eig(h);
  CHECK(e.values[0] == Approx((5 - std::sqrt(5.0)) / 2).epsilon(1e-14));
}

TEST_CASE("schur effective of decoupled blocks is U11 - lambda") {
  HermitianMatrix h(4);
  h(0, 0) = 1;
  h(1, 1) = 2;
  h.set_hermitian(0, 1, complex(0.5, 0.5));
  h(2, 2) = 5;
  h(3, 3) = 7;
  h.set_hermitian(2, 3, 0.25);
  const auto s = schur_effective(h, {0, 1}, 0.3);
  CHECK(s.effective()(0, 0) == complex(0.7, 0));
  CHECK(s.effective()(1, 1) == complex(1.7, 0));
  CHECK(s.effective()(0, 1) == complex(0.5, 0.5));
}

TEST_CASE("schur resolvent singular near the U22 spectrum") {
  HermitianMatrix h(2);
  h(0, 0) = 2;
  h(1, 1) = 3;
  h(0, 1) = h(1, 0) = 1;
  CHECK_THROWS_WITH(schur_effective(h, {0}, 3.0), "resolvent singular");
  CHECK_THROWS_AS(schur_effective(h, {0}, 3.0), NumericalError);
}

TEST_CASE("schur roots match full diagonalisation and lift to eigenvectors") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int t = 0; t < 30; ++t) {
    const auto h = testing::random_hermitian(12, rng);
    std::vector<std::size_t> idx(12);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::vector<std::size_t> p1{idx[0], idx[1]};
    HermitianMatrix u22(10);
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 10; ++c) u22(r, c) = h(idx[r + 2], idx[c + 2]);
    const auto mu = hermitian_eig(u22).values;
    const auto e = hermitian_eig(h);
    const double scale = h.frobenius_norm();
    for (std::size_t j = 0; j < e.dim; ++j) {
      const double lam = e.values[j];
      double gap = 1e300;
      for (double m : mu) gap = std::min(gap, std::abs(m - lam));
      if (gap < 1e-4 * scale) continue;
      const double root = testing::schur_root_near(h, p1, mu, lam, 0.5);
      REQUIRE_FALSE(std::isnan(root));
      CHECK(std::abs(root - lam) < 1e-9);
      // lift the null vector of the effective matrix back to an eigenvector
      const auto s = schur_effective(h, p1, lam);
      HermitianMatrix m(2);
      m(0, 0) = s.effective()(0, 0).real();
      m(1, 1) = s.effective()(1, 1).real();
      m(0, 1) = s.effective()(0, 1);
      m(1, 0) = std::conj(m(0, 1));
      const auto eff = hermitian_eig(m);
      const std::size_t kcol = std::abs(eff.values[0]) < std::abs(eff.values[1]) ? 0 : 1;
      const auto w = s.lift(eff.column(kcol));
      const auto hw = h.apply(w);
      double res = 0, nw = 0;
      for (std::size_t r = 0; r < 12; ++r) {
        res += std::norm(hw[r] - lam * w[r]);
        nw += std::norm(w[r]);
      }
      CHECK(std::sqrt(res) <= 1e-9 * scale * std::sqrt(nw));
      ++checked;
    }
  }
  CHECK(checked > 200);
}
