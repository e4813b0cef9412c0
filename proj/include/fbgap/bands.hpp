#pragma once
/// Band sampling over the k domain, gap detection, local extremum refinement
/// and classification of gap edges.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fbgap/model.hpp"

namespace fbgap {

struct BandGrid {
  int n1 = 0;
  int n2 = 0;
  int n_bands = 0;
  KDomain domain;
  std::vector<Vec2> k_points;  // index i + n1 * j
  std::vector<double> values;  // n_bands per point, ascending

  std::size_t size() const { return k_points.size(); }
  double at(std::size_t p, int j) const { return values[p * static_cast<std::size_t>(n_bands) + static_cast<std::size_t>(j)]; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(n1) * static_cast<std::size_t>(j); }

  /// Grid step in fractional coordinates along each axis.
  double step(int axis) const {
    const int n = axis == 0 ? n1 : n2;
    return domain.periodic ? 1.0 / n : 1.0 / std::max(n - 1, 1);
  }
  /// Length of the longer grid step vector.
  double cell_length() const {
    return std::max(norm(step(0) * domain.basis.col(0)), norm(step(1) * domain.basis.col(1)));
  }

  std::pair<double, double> band_range(int j) const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t p = 0; p < size(); ++p) {
      lo = std::min(lo, at(p, j));
      hi = std::max(hi, at(p, j));
    }
    return {lo, hi};
  }
};

namespace detail {

/// Runs body(row) for every row with `workers` threads; rows are assigned
/// round-robin and each writes only its own slots, so the result does not
/// depend on scheduling.
template <class F>
void parallel_rows(int rows, int workers, F&& body) {
  workers = std::clamp(workers, 1, std::max(rows, 1));
  if (workers == 1) {
    for (int r = 0; r < rows; ++r) body(r);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int r = w; r < rows; r += workers) body(r);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

template <BandModel M>
BandGrid sample_bands(const M& model, int n1, int n2, int n_bands, int workers = 1) {
  if (n1 < 2 || n2 < 2) throw Error("grid must have at least 2 points per axis");
  if (n_bands < 1) throw Error("n_bands must be positive");
  BandGrid bg{n1, n2, n_bands, model.domain(), {}, {}};
  const std::size_t np = static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2);
  bg.k_points.resize(np);
  bg.values.assign(np * static_cast<std::size_t>(n_bands), 0.0);
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i)
      bg.k_points[bg.index(i, j)] = bg.domain.basis * Vec2{i * bg.step(0), j * bg.step(1)};
  detail::parallel_rows(n2, workers, [&](int j) {
    for (int i = 0; i < n1; ++i) {
      const std::size_t p = bg.index(i, j);
      const auto eig = hermitian_eig(model.fibre(bg.k_points[p]));
      if (eig.values.size() < static_cast<std::size_t>(n_bands)) throw Error("n_bands exceeds basis size");
      std::copy_n(eig.values.begin(), n_bands, bg.values.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(n_bands)));
    }
  });
  return bg;
}

inline BandGrid sample_bands(const FourierPotential& w, int n1, int n2, double e_cut, int n_bands, int workers = 1) {
  return sample_bands(PlaneWaveModel(w, e_cut), n1, n2, n_bands, workers);
}

// ---------------------------------------------------------------------------
// Gaps

struct Gap {
  double lower = 0.0;  // mu_minus, a band maximum
  double upper = 0.0;  // mu_plus, a band minimum
  int lower_band = 0;  // band whose maximum is `lower`
  int upper_band = 0;  // band whose minimum is `upper`
  double width() const { return upper - lower; }
};

struct GapReport {
  std::vector<Gap> gaps;
  double band_floor = 0.0;
};

/// Holes of width > min_gap in the union of the sampled band ranges.
inline GapReport find_gaps(const BandGrid& bg, double min_gap) {
  if (bg.size() == 0 || bg.n_bands == 0) throw Error("empty band grid");
  struct Range {
    double lo, hi;
    int band;
  };
  std::vector<Range> r;
  for (int j = 0; j < bg.n_bands; ++j) {
    const auto [lo, hi] = bg.band_range(j);
    r.push_back({lo, hi, j});
  }
  std::sort(r.begin(), r.end(), [](const Range& a, const Range& b) { return a.lo < b.lo || (a.lo == b.lo && a.band < b.band); });
  GapReport rep;
  rep.band_floor = r.front().lo;
  double reach = r.front().hi;
  int reach_band = r.front().band;
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i].lo - reach > min_gap) rep.gaps.push_back({reach, r[i].lo, reach_band, r[i].band});
    if (r[i].hi > reach) {
      reach = r[i].hi;
      reach_band = r[i].band;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Local analysis of a single band

/// +1 to minimise the band, -1 to maximise it.
enum class Sense { minimize = 1, maximize = -1 };

inline double sign(Sense s) { return static_cast<double>(static_cast<int>(s)); }

namespace detail {

struct Tracked {
  double value = 0.0;
  std::vector<complex> vec;
  std::size_t index = 0;
  double overlap = 0.0;
};

inline double abs_inner(const std::vector<complex>& a, const EigenDecomposition& e, std::size_t col) {
  complex s{};
  for (std::size_t r = 0; r < e.dim; ++r) s += std::conj(a[r]) * e.vec(r, col);
  return std::abs(s);
}

/// Eigenpair at k with the largest overlap with `ref`.
template <class M>
Tracked track(const M& local, const Vec2& k, const std::vector<complex>& ref, double threshold = 0.9) {
  const auto e = hermitian_eig(local.fibre(k));
  if (e.dim != ref.size()) throw Error("tracking: basis size changed");
  std::size_t best = 0;
  double best_ov = -1.0;
  for (std::size_t c = 0; c < e.dim; ++c) {
    const double ov = abs_inner(ref, e, c);
    if (ov > best_ov) {
      best_ov = ov;
      best = c;
    }
  }
  if (best_ov < threshold) throw NumericalError("band crossing during refinement");
  return {e.values[best], e.column(best), best, best_ov};
}

/// Distance from eigenvalue j to its neighbours in the sorted list.
inline double spectral_margin(const std::vector<double>& v, std::size_t j) {
  double m = std::numeric_limits<double>::infinity();
  if (j > 0) m = std::min(m, v[j] - v[j - 1]);
  if (j + 1 < v.size()) m = std::min(m, v[j + 1] - v[j]);
  return m;
}

template <class M>
Mat2 stencil_hessian(const M& local, const Vec2& k, const std::vector<complex>& ref, double f0, double h) {
  auto f = [&](double dx, double dy) { return track(local, k + Vec2{dx, dy}, ref).value; };
  Mat2 a;
  a(0, 0) = (f(h, 0) - 2 * f0 + f(-h, 0)) / (h * h);
  a(1, 1) = (f(0, h) - 2 * f0 + f(0, -h)) / (h * h);
  a(0, 1) = a(1, 0) = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);
  return a;
}

/// Drops gradient components that would push a descent step out of a closed
/// (axis-aligned) domain.
inline Vec2 project_gradient(const Vec2& k, const Vec2& g, double s, const KDomain& d) {
  if (d.periodic) return g;
  const Vec2 f = d.basis.inverse() * k;
  Vec2 out = g;
  const double tol = 1e-12;
  // descent moves along -s g
  if ((f.x <= tol && s * g.x > 0) || (f.x >= 1 - tol && s * g.x < 0)) out.x = 0;
  if ((f.y <= tol && s * g.y > 0) || (f.y >= 1 - tol && s * g.y < 0)) out.y = 0;
  return out;
}

inline Vec2 clamp_to_domain(const Vec2& k, const KDomain& d) {
  if (d.periodic) return k;
  const Vec2 f = d.basis.inverse() * k;
  return d.basis * Vec2{std::clamp(f.x, 0.0, 1.0), std::clamp(f.y, 0.0, 1.0)};
}

}  // namespace detail

struct RefineOptions {
  double grad_rel = 1e-8;   // stop when |grad| < grad_rel * max(1, |lambda|)
  double step_rel = 1e-5;   // gradient step, relative to the cell diameter
  double hess_rel = 1e-4;   // Newton Hessian step, relative to the cell diameter
  double margin = 0.0;      // required spectral margin at the start (0: unchecked)
  int max_iter = 50;
};

struct RefineResult {
  Vec2 k;
  double value = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

/// Damped Newton iteration towards a local extremum of band j, following the
/// band by eigenvector overlap rather than by its sorted index.
template <BandModel M>
RefineResult refine_extremum(const M& model, const Vec2& k0, int j, Sense sense, const RefineOptions& opt = {}) {
  const KDomain dom = model.domain();
  const double diam = dom.cell_diameter();
  const double hg = opt.step_rel * diam;
  const double hh = opt.hess_rel * diam;
  const double s = sign(sense);
  const auto local = model.localized(k0);

  const auto e0 = hermitian_eig(local.fibre(k0));
  if (j < 0 || static_cast<std::size_t>(j) >= e0.dim) throw Error("band index out of range");
  if (opt.margin > 0 && detail::spectral_margin(e0.values, static_cast<std::size_t>(j)) < opt.margin)
    throw NumericalError("band is not simple at the refinement start");

  RefineResult res{k0, e0.values[static_cast<std::size_t>(j)], 0, 0.0, false};
  std::vector<complex> ref = e0.column(static_cast<std::size_t>(j));
  const double max_step = 0.05 * diam;

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    auto f = [&](const Vec2& k) { return detail::track(local, k, ref).value; };
    const Vec2 g = detail::project_gradient(res.k,
                                            {(f(res.k + Vec2{hg, 0}) - f(res.k - Vec2{hg, 0})) / (2 * hg),
                                             (f(res.k + Vec2{0, hg}) - f(res.k - Vec2{0, hg})) / (2 * hg)},
                                            s, dom);
    res.grad_norm = norm(g);
    const double scale = std::max(1.0, std::abs(res.value));
    if (res.grad_norm < opt.grad_rel * scale) {
      res.converged = true;
      return res;
    }
    const Mat2 hs = s * detail::stencil_hessian(local, res.k, ref, res.value, hh);
    const Vec2 gs = s * g;
    // modified Newton: |eigenvalues| with a floor, so negative curvature
    // along a valley floor does not turn into a long sideways step
    const auto ev = symmetric_eigenvalues(hs);
    const double hnorm = std::max({std::abs(ev[0]), std::abs(ev[1]), 1e-300});
    const Vec2 v0 = symmetric_low_eigenvector(hs);
    const Vec2 v1{-v0.y, v0.x};
    const double floor_ev = 1e-3 * hnorm;
    Vec2 d = -(dot(v0, gs) / std::max(std::abs(ev[0]), floor_ev)) * v0 -
             (dot(v1, gs) / std::max(std::abs(ev[1]), floor_ev)) * v1;
    if (norm(d) > max_step) d = (max_step / norm(d)) * d;
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries, d = 0.5 * d) {
      const Vec2 k_new = detail::clamp_to_domain(res.k + d, dom);
      const auto t = detail::track(local, k_new, ref);
      if (s * t.value <= s * res.value + 1e-15 * scale) {
        accepted = true;
        const bool stalled = norm(k_new - res.k) == 0.0;
        res.k = k_new;
        res.value = t.value;
        ref = t.vec;
        if (stalled) return res;
      }
    }
    if (!accepted) return res;
  }
  res.iterations = opt.max_iter;
  return res;
}

/// Hessian of band j at k by second central differences with one Richardson
/// step; h <= 0 selects 1e-4 times the domain cell diameter.
template <BandModel M>
Mat2 hessian(const M& model, const Vec2& k, int j, double h = 0.0) {
  if (h <= 0.0) h = 1e-4 * model.domain().cell_diameter();
  const auto local = model.localized(k);
  const auto e = hermitian_eig(local.fibre(k));
  if (j < 0 || static_cast<std::size_t>(j) >= e.dim) throw Error("band index out of range");
  const auto ref = e.column(static_cast<std::size_t>(j));
  const double f0 = e.values[static_cast<std::size_t>(j)];
  const Mat2 a1 = detail::stencil_hessian(local, k, ref, f0, h);
  const Mat2 a2 = detail::stencil_hessian(local, k, ref, f0, h / 2);
  Mat2 r = (4.0 / 3.0) * a2;
  for (std::size_t i = 0; i < 4; ++i) r.m[i] -= a1.m[i] / 3.0;
  r(0, 1) = r(1, 0) = 0.5 * (r(0, 1) + r(1, 0));
  return r;
}

// ---------------------------------------------------------------------------
// Edge classification

enum class EdgeSide { lower, upper };
enum class EdgeClass { nondegenerate, fails_A, fails_B, fails_C };

inline std::string to_string(EdgeClass c) {
  switch (c) {
    case EdgeClass::nondegenerate: return "nondegenerate";
    case EdgeClass::fails_A: return "fails_A";
    case EdgeClass::fails_B: return "fails_B";
    case EdgeClass::fails_C: return "fails_C";
  }
  return "unknown";
}
inline std::string to_string(EdgeSide s) { return s == EdgeSide::lower ? "lower" : "upper"; }

/// The lower gap edge is a band maximum, the upper one a band minimum.
inline Sense sense_of(EdgeSide s) { return s == EdgeSide::lower ? Sense::maximize : Sense::minimize; }

struct EdgePoint {
  Vec2 k;
  int band = 0;
  int multiplicity = 1;
  double value = 0.0;
  bool refined = false;
  int cluster = 0;
};

struct EdgeOptions {
  double edge_tol = 0.0;  // 0: max(1e-8 scale, 3 x truncation delta)
  double hess_tol = 0.0;  // 0: 1e-4 scale
  bool refine = true;
  int max_reps = 64;
  double diameter_cells = 3.0;
};

struct EdgeSet {
  double edge_value = 0.0;
  EdgeSide side = EdgeSide::upper;
  std::vector<EdgePoint> points;
  EdgeClass classification = EdgeClass::nondegenerate;
  std::vector<Mat2> hessians;  // one per point; zero matrix where not computed
  std::vector<double> cluster_diameters;  // in grid cells
  double edge_tol = 0.0;
  double hess_tol = 0.0;
  double scale = 1.0;
  bool margin_binding = false;  // some refinement was refused for lack of spectral margin
};

/// max(1, largest |lambda| on the grid)
inline double energy_scale(const BandGrid& bg) {
  double s = 1.0;
  for (double v : bg.values) s = std::max(s, std::abs(v));
  return s;
}

namespace detail {

/// Grid neighbours (8-neighbourhood) honouring periodic wrap.
inline std::vector<std::size_t> grid_neighbours(const BandGrid& bg, std::size_t p) {
  const int i = static_cast<int>(p % static_cast<std::size_t>(bg.n1));
  const int j = static_cast<int>(p / static_cast<std::size_t>(bg.n1));
  std::vector<std::size_t> out;
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      if (di == 0 && dj == 0) continue;
      int a = i + di, b = j + dj;
      if (bg.domain.periodic) {
        a = (a + bg.n1) % bg.n1;
        b = (b + bg.n2) % bg.n2;
      } else if (a < 0 || a >= bg.n1 || b < 0 || b >= bg.n2) {
        continue;
      }
      const std::size_t q = bg.index(a, b);
      if (q != p && std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    }
  return out;
}

inline double k_distance(const Vec2& a, const Vec2& b, const KDomain& d) {
  if (!d.periodic) return norm(a - b);
  return torus_distance(a, b, DualLattice(d.basis));
}

}  // namespace detail

/// Locates the quasimomenta where some band attains `edge_value` and
/// classifies the edge: two bands at one point (A), a non-finite looking set
/// (B), or a degenerate Hessian (C). Precedence is B, then A, then C.
template <BandModel M>
EdgeSet edge_set(const M& model, const BandGrid& bg, double edge_value, EdgeSide side, const EdgeOptions& opt = {}) {
  EdgeSet es;
  es.side = side;
  es.scale = energy_scale(bg);
  es.edge_tol = opt.edge_tol > 0 ? opt.edge_tol
                                  : std::max(1e-8 * es.scale, 3 * truncation_delta(model, static_cast<std::size_t>(bg.n_bands)));
  es.hess_tol = opt.hess_tol > 0 ? opt.hess_tol : 1e-4 * es.scale;
  const Sense sense = sense_of(side);
  const double sgn = sign(sense);
  const std::size_t np = bg.size();

  // candidates: bands within their local grid variation of the edge
  std::vector<double> slack(np * static_cast<std::size_t>(bg.n_bands), 0.0);
  std::vector<int> best_band(np, -1);
  std::vector<double> best_dist(np, std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < np; ++p) {
    const auto nb = detail::grid_neighbours(bg, p);
    for (int j = 0; j < bg.n_bands; ++j) {
      double w = 0.0;
      for (auto q : nb) w = std::max(w, std::abs(bg.at(p, j) - bg.at(q, j)));
      slack[p * static_cast<std::size_t>(bg.n_bands) + static_cast<std::size_t>(j)] = w;
      const double dist = std::abs(bg.at(p, j) - edge_value);
      if (dist <= w + es.edge_tol && dist < best_dist[p]) {
        best_dist[p] = dist;
        best_band[p] = j;
      }
    }
  }

  // connected components of candidate points
  std::vector<int> comp(np, -1);
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t p = 0; p < np; ++p) {
    if (best_band[p] < 0 || comp[p] >= 0) continue;
    const int c = static_cast<int>(clusters.size());
    clusters.emplace_back();
    std::vector<std::size_t> stack{p};
    comp[p] = c;
    while (!stack.empty()) {
      const auto q = stack.back();
      stack.pop_back();
      clusters.back().push_back(q);
      for (auto r : detail::grid_neighbours(bg, q))
        if (best_band[r] >= 0 && comp[r] < 0) {
          comp[r] = c;
          stack.push_back(r);
        }
    }
  }

  const double cell = bg.cell_length();
  struct Record {
    EdgePoint pt;
    double tol;
  };
  std::vector<Record> recs;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    auto& cl = clusters[c];
    std::sort(cl.begin(), cl.end(), [&](std::size_t a, std::size_t b) {
      return best_dist[a] < best_dist[b] || (best_dist[a] == best_dist[b] && a < b);
    });
    // farthest-point sampling of representatives, seeded at the best point
    std::vector<std::size_t> reps{cl.front()};
    std::vector<double> dmin(cl.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(reps.size()) < std::min<int>(opt.max_reps, static_cast<int>(cl.size()))) {
      std::size_t arg = 0;
      double far = -1.0;
      for (std::size_t i = 0; i < cl.size(); ++i) {
        dmin[i] = std::min(dmin[i], detail::k_distance(bg.k_points[cl[i]], bg.k_points[reps.back()], bg.domain));
        if (dmin[i] > far) {
          far = dmin[i];
          arg = i;
        }
      }
      if (far <= 0.0) break;
      reps.push_back(cl[arg]);
    }
    for (auto p : reps) {
      const int j = best_band[p];
      const double wp = slack[p * static_cast<std::size_t>(bg.n_bands) + static_cast<std::size_t>(j)];
      Record rec{{bg.k_points[p], j, 1, bg.at(p, j), false, static_cast<int>(c)}, wp + es.edge_tol};
      if (!opt.refine) {
        recs.push_back(rec);
        continue;
      }
      try {
        RefineOptions ro;
        ro.margin = 10 * es.hess_tol;
        const auto r = refine_extremum(model, bg.k_points[p], j, sense, ro);
        rec.pt.k = r.k;
        rec.pt.value = r.value;
        rec.pt.refined = true;
        rec.tol = es.edge_tol;
      } catch (const NumericalError&) {
        es.margin_binding = true;
      }
      recs.push_back(rec);
    }
  }

  if (recs.empty()) {
    es.edge_value = edge_value;
    return es;
  }
  // the attained edge is the most extreme value found
  double edge = recs.front().pt.value;
  for (const auto& r : recs) edge = sgn > 0 ? std::min(edge, r.pt.value) : std::max(edge, r.pt.value);
  if (!opt.refine) edge = edge_value;
  es.edge_value = edge;

  std::vector<Record> kept;
  for (const auto& r : recs) {
    if (std::abs(r.pt.value - edge) > r.tol) continue;
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Record& o) {
      return o.pt.band == r.pt.band && detail::k_distance(o.pt.k, r.pt.k, bg.domain) < 1e-4 * cell;
    });
    if (!dup) kept.push_back(r);
  }

  // multiplicity: bands within tolerance of the edge at each point
  for (auto& r : kept) {
    const auto vals = hermitian_eig(model.fibre(r.pt.k)).values;
    int mult = 0;
    for (double v : vals)
      if (std::abs(v - edge) <= r.tol) ++mult;
    r.pt.multiplicity = std::max(mult, 1);
  }

  bool fails_a = false, fails_b = false, fails_c = false;
  es.cluster_diameters.assign(clusters.size(), 0.0);
  for (std::size_t a = 0; a < kept.size(); ++a)
    for (std::size_t b = a + 1; b < kept.size(); ++b)
      if (kept[a].pt.cluster == kept[b].pt.cluster) {
        auto& d = es.cluster_diameters[static_cast<std::size_t>(kept[a].pt.cluster)];
        d = std::max(d, detail::k_distance(kept[a].pt.k, kept[b].pt.k, bg.domain) / cell);
      }
  for (double d : es.cluster_diameters)
    if (d > opt.diameter_cells) fails_b = true;

  for (const auto& r : kept) {
    es.points.push_back(r.pt);
    if (r.pt.multiplicity > 1) fails_a = true;
    Mat2 a{};
    if (r.pt.refined && r.pt.multiplicity == 1) {
      try {
        a = hessian(model, r.pt.k, r.pt.band);
        const auto ev = symmetric_eigenvalues(sgn * a);
        if (ev[0] < es.hess_tol) fails_c = true;
      } catch (const NumericalError&) {
        fails_c = true;
      }
    }
    es.hessians.push_back(a);
  }

  if (fails_b)
    es.classification = EdgeClass::fails_B;
  else if (fails_a)
    es.classification = EdgeClass::fails_A;
  else if (fails_c)
    es.classification = EdgeClass::fails_C;
  return es;
}

// ---------------------------------------------------------------------------
// Order of vanishing

struct FlatnessReport {
  int alpha = 2;
  double c0 = 0.0;
  double slope = 0.0;
  double residual = 0.0;
};

/// Fits f(delta) ~ c0 delta^alpha with alpha an even integer >= 2.
inline FlatnessReport flatness_order(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 2) throw Error("flatness fit needs at least two samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(samples.size());
  for (const auto& [d, f] : samples) {
    if (!(d > 0.0) || !(f > 0.0)) throw Error("flatness samples must be positive");
    const double x = std::log(d), y = std::log(f);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw Error("flatness samples need distinct deltas");
  FlatnessReport rep;
  rep.slope = (n * sxy - sx * sy) / den;
  rep.alpha = std::max(2, 2 * static_cast<int>(std::lround(rep.slope / 2)));
  if (std::abs(rep.slope - rep.alpha) > 0.2) throw NumericalError("order ambiguous");
  double lc = 0.0;
  for (const auto& [d, f] : samples) lc += std::log(f) - rep.alpha * std::log(d);
  lc /= n;
  rep.c0 = std::exp(lc);
  double ss = 0.0;
  for (const auto& [d, f] : samples) {
    const double r = std::log(f) - rep.alpha * std::log(d) - lc;
    ss += r * r;
  }
  rep.residual = std::sqrt(ss / n);
  if (rep.residual >= 0.05) throw NumericalError("order ambiguous");
  return rep;
}

}  // namespace fbgap
