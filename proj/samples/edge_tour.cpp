// Library tour: bands of the checkerboard model, its degenerate lower edge,
// and the doubled model after the diagonal perturbation.
#include <cstdio>

#include "fbgap/fbgap.hpp"

int main() {
  using namespace fbgap;

  const CheckerboardModel cb{1.0, -1.0};
  const auto bg = sample_bands(cb, 101, 101, 2);
  const auto gaps = find_gaps(bg, 1e-6);
  for (const auto& g : gaps.gaps) std::printf("gap (%.6f, %.6f)\n", g.lower, g.upper);

  const auto es = edge_set(cb, bg, gaps.gaps.front().lower, EdgeSide::lower);
  std::printf("checkerboard lower edge: %s, %zu points\n", to_string(es.classification).c_str(), es.points.size());

  const auto rep = verify_nondegenerate_min(DoubledModel{1.0, 0.05});
  std::printf("doubled model: %s at (%.6f, %.6f), Hessian eigenvalues %.4f %.4f\n",
              to_string(rep.classification).c_str(), rep.k_star.x, rep.k_star.y, rep.hessian_eigs[0],
              rep.hessian_eigs[1]);

  // second-order correction for 2 cos(2 pi x1) + 2 cos(2 pi x2) at the band bottom
  const auto d = dual_lattice(Lattice2D(Mat2::identity()));
  const auto w = FourierPotential::cosines(d, {{{1, 0}, 1.0}, {{0, 1}, 1.0}});
  const auto z = second_order_z(w, {0, 0}, d.point(Vec2{1.0 / 6, 0}), 200);
  std::printf("Z = %.10f (principal %.10f, R %.3e, R0 %.3e)\n", z.total, z.principal, z.r_term, z.r0_term);
  return 0;
}
