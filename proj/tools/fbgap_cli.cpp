// fbgap: band structures, gap edges and degeneracy removal from a JSON config.
//
//   fbgap <command> <config.json> [--workers N] [--grid N] [--e-cut E] [--n-bands N] [-o FILE]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fbgap/io.hpp"

using namespace fbgap;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Overrides {
  std::string config;
  std::string output;
  std::string format = "csv";
  int workers = 0;
  int grid = 0;
  double e_cut = 0.0;
  int n_bands = 0;
};

RunConfig load(const Overrides& o) {
  RunConfig c = load_config(o.config);
  if (o.workers > 0) c.workers = o.workers;
  if (o.grid > 0) c.n1 = c.n2 = o.grid;
  if (o.e_cut > 0) c.e_cut = o.e_cut;
  if (o.n_bands > 0) c.n_bands = o.n_bands;
  validate(c);
  return c;
}

void emit(const Overrides& o, const std::string& text) {
  if (o.output.empty() || o.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + o.output + "'");
  out << text;
}

BandGrid sample(const RunConfig& c, const AnyModel& m) {
  return std::visit([&](const auto& model) { return sample_bands(model, c.n1, c.n2, c.n_bands, c.workers); }, m);
}

struct EdgeTarget {
  double value = 0.0;
  EdgeSide side = EdgeSide::upper;
  Gap gap;  // the gap the edge bounds; lower = -inf for the spectrum bottom
};

EdgeTarget select_edge(const RunConfig& c, const BandGrid& bg) {
  EdgeTarget t;
  if (c.edge.band) {
    const int b = *c.edge.band;
    if (b < 0 || b >= bg.n_bands) throw ConfigError("edge band outside the sampled bands");
    t.side = c.edge.side_given ? c.edge.side : EdgeSide::upper;
    const auto [lo, hi] = bg.band_range(b);
    t.value = t.side == EdgeSide::upper ? lo : hi;
    t.gap = t.side == EdgeSide::upper ? Gap{-std::numeric_limits<double>::infinity(), lo, b - 1, b}
                                      : Gap{hi, std::numeric_limits<double>::infinity(), b, b + 1};
    return t;
  }
  const auto gaps = find_gaps(bg, c.min_gap).gaps;
  if (!c.edge.gap && gaps.empty()) {
    t.side = EdgeSide::upper;
    t.value = bg.band_range(0).first;
    t.gap = {-std::numeric_limits<double>::infinity(), t.value, -1, 0};
    return t;
  }
  const int g = c.edge.gap.value_or(0);
  if (g < 0 || static_cast<std::size_t>(g) >= gaps.size()) throw ConfigError("gap index out of range");
  t.gap = gaps[static_cast<std::size_t>(g)];
  t.side = c.edge.side_given ? c.edge.side : EdgeSide::lower;
  t.value = t.side == EdgeSide::lower ? t.gap.lower : t.gap.upper;
  return t;
}

int cmd_bands(const Overrides& o) {
  const auto c = load(o);
  const auto bg = sample(c, make_model(c));
  if (o.format == "json") {
    emit(o, dump(bands_json(bg)));
  } else {
    std::ostringstream os;
    write_bands_csv(os, bg);
    emit(o, os.str());
  }
  return 0;
}

int cmd_gaps(const Overrides& o) {
  const auto c = load(o);
  const auto bg = sample(c, make_model(c));
  emit(o, dump(to_json(find_gaps(bg, c.min_gap), bg)));
  return 0;
}

int cmd_edges(const Overrides& o) {
  const auto c = load(o);
  const auto model = make_model(c);
  const auto bg = sample(c, model);
  const auto t = select_edge(c, bg);
  const auto es = std::visit([&](const auto& m) { return edge_set(m, bg, t.value, t.side, edge_options(c)); }, model);
  emit(o, dump(to_json(es)));
  return 0;
}

int cmd_zcheck(const Overrides& o) {
  const auto c = load(o);
  if (c.kind != ModelKind::plane_wave) throw ConfigError("zcheck needs a plane_wave model");
  const auto w = potential_of(c);
  const auto& z = c.zcheck;
  ShiftVector nu;
  try {
    nu = ShiftVector::make(z.mu, z.p_num, z.p_den, w.dual());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto zc = second_order_z(w, z.k, nu.value, c.e_cut, z.n_bands, z.band);
  const auto fit = verify_expansion(w, z.k, nu, z.eps, c.e_cut, z.band, z.amplitude);
  const double scale = std::norm(z.amplitude);
  const double predicted = scale * zc.total;
  const double allowed = std::max(1e-3 * std::abs(predicted), fit.z_uncertainty);
  json out = {{"schema", "fbgap.zcheck/1"},
              {"nu", to_json(nu)},
              {"amplitude", to_json(z.amplitude)},
              {"z", to_json(zc)},
              {"fit", to_json(fit)},
              {"predicted", predicted},
              {"difference", fit.z_fit - predicted},
              {"allowed", allowed},
              {"agree", std::abs(fit.z_fit - predicted) <= allowed}};
  emit(o, dump(out));
  return 0;
}

int cmd_remove(const Overrides& o) {
  const auto c = load(o);
  json out = {{"schema", "fbgap.remove/1"}};
  if (c.kind == ModelKind::doubled) {
    const EdgeSide side = c.edge.side_given ? c.edge.side : EdgeSide::upper;
    const auto r = remove_degeneracy(c.doubled, side, c.remove.budget, c.remove.max_rounds, c.n1, c.workers);
    out["model"] = {{"v", r.model.v}, {"eps", r.model.eps}, {"eps_low", r.model.eps_low}};
    out["trace"] = to_json(r.trace);
  } else if (c.kind == ModelKind::plane_wave) {
    const auto model = make_model(c);
    const auto bg = sample(c, model);
    const auto t = select_edge(c, bg);
    RemovalOptions ro;
    ro.e_cut = c.e_cut;
    ro.n_bands = c.n_bands;
    ro.grid = c.n1;
    ro.workers = c.workers;
    ro.edge = edge_options(c);
    ro.delta = c.remove.delta;
    const auto r = remove_degeneracy(potential_of(c), t.gap, t.side, c.remove.budget, c.remove.max_rounds, ro);
    json coeffs = json::array();
    for (const auto& [m, v] : r.potential.coeffs()) coeffs.push_back({{"m", to_json(m)}, {"re", v.real()}, {"im", v.imag()}});
    out["potential"] = {{"dual", to_json(r.potential.dual().basis())}, {"coeffs", coeffs}};
    out["trace"] = to_json(r.trace);
  } else {
    throw ConfigError("remove supports the doubled and plane_wave models");
  }
  emit(o, dump(out));
  return 0;
}

int cmd_discrete(const Overrides& o) {
  const auto c = load(o);
  json out = {{"schema", "fbgap.discrete/1"}};
  switch (c.kind) {
    case ModelKind::checkerboard: {
      const auto bg = sample_bands(c.checkerboard, c.n1, c.n2, 2, c.workers);
      const auto iv = checkerboard_bands(c.checkerboard);
      json bands = json::array();
      double err = 0.0;
      for (int j = 0; j < 2; ++j) {
        const auto [lo, hi] = bg.band_range(j);
        const auto& x = iv[static_cast<std::size_t>(j)];
        err = std::max({err, std::abs(lo - x.lo), std::abs(hi - x.hi)});
        bands.push_back({{"closed_form", json::array({x.lo, x.hi})}, {"sampled", json::array({lo, hi})}});
      }
      out["model"] = "checkerboard";
      out["bands"] = bands;
      out["max_endpoint_error"] = err;
      break;
    }
    case ModelKind::nsite: {
      const NSiteModel m(c.nsite);
      // on the curve s + t = 0 the first site decouples
      const double k1 = 0.7;
      const auto e = hermitian_eig(m.fibre({k1, k1 + std::numbers::pi}));
      double dist = std::numeric_limits<double>::infinity();
      for (double v : e.values) dist = std::min(dist, std::abs(v - c.nsite[0]));
      out["model"] = "nsite";
      out["edge_guaranteed"] = m.edge_guaranteed();
      out["v0_on_curve_distance"] = dist;
      if (!m.edge_guaranteed()) out["warning"] = "V0 < Vj - 2 fails; V0 need not be a band edge";
      break;
    }
    case ModelKind::doubled: {
      out["model"] = "doubled";
      out["report"] = to_json(verify_nondegenerate_min(c.doubled, c.n1));
      break;
    }
    default:
      throw ConfigError("discrete needs a checkerboard, nsite or doubled model");
  }
  emit(o, dump(out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet-Bloch bands, gap edges and degeneracy removal"};
  app.require_subcommand(1);
  Overrides o;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", o.config, "JSON configuration file")->required();
    sub->add_option("--workers", o.workers, "worker threads (output does not depend on it)");
    sub->add_option("--grid", o.grid, "grid points per axis");
    sub->add_option("--e-cut", o.e_cut, "plane-wave energy cutoff");
    sub->add_option("--n-bands", o.n_bands, "number of bands");
    sub->add_option("-o,--output", o.output, "output file (default stdout)");
  };
  auto* bands = app.add_subcommand("bands", "sample band functions on a grid");
  add_common(bands);
  bands->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* gaps = app.add_subcommand("gaps", "list spectral gaps");
  add_common(gaps);
  auto* edges = app.add_subcommand("edges", "locate and classify a gap edge");
  add_common(edges);
  auto* zcheck = app.add_subcommand("zcheck", "second-order correction against a supercell fit");
  add_common(zcheck);
  auto* remove = app.add_subcommand("remove", "run the degeneracy removal rounds");
  add_common(remove);
  auto* discrete = app.add_subcommand("discrete", "closed-form checks of the tight-binding models");
  add_common(discrete);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (bands->parsed()) return cmd_bands(o);
    if (gaps->parsed()) return cmd_gaps(o);
    if (edges->parsed()) return cmd_edges(o);
    if (zcheck->parsed()) return cmd_zcheck(o);
    if (remove->parsed()) return cmd_remove(o);
    if (discrete->parsed()) return cmd_discrete(o);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const Error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  }
  return kConfigError;
}
