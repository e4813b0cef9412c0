#pragma once
/// Run configuration (JSON), report serialisation and band CSV export.
/// Every float is written with 17 significant digits so that output is
/// byte-stable for a fixed configuration.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fbgap/fbgap.hpp"

namespace fbgap {

using json = nlohmann::json;

struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump_string(std::ostream& os, const std::string& s) { os << json(s).dump(); }

inline void dump_value(std::ostream& os, const json& j, int indent, int depth) {
  const auto pad = [&](int d) {
    if (indent >= 0) os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        pad(depth + 1);
        dump_string(os, it.key());
        os << (indent >= 0 ? ": " : ":");
        dump_value(os, it.value(), indent, depth + 1);
      }
      pad(depth);
      os << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // flat numeric arrays stay on one line
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_number(); });
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << (flat && indent >= 0 ? ", " : ",");
        if (!flat) pad(depth + 1);
        dump_value(os, j[i], indent, depth + 1);
      }
      if (!flat) pad(depth);
      os << ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v))
        os << format_double(v);
      else
        os << "null";
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// JSON text with floats at %.17g; indent < 0 gives a single line.
inline std::string dump(const json& j, int indent = 2) {
  std::ostringstream os;
  detail::dump_value(os, j, indent, 0);
  os << '\n';
  return os.str();
}

inline json to_json(const Vec2& v) { return json::array({v.x, v.y}); }
inline json to_json(const IVec2& v) { return json::array({v.i, v.j}); }
inline json to_json(const Mat2& m) { return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})}); }
inline json to_json(const complex& c) { return json::array({c.real(), c.imag()}); }

inline json to_json(const ShiftVector& s) {
  return {{"mu", to_json(s.mu)}, {"p_num", s.p_num}, {"p_den", s.p_den}, {"value", to_json(s.value)}};
}

/// Band CSV: one row per k point, columns i1,i2,k1,k2,lambda_0..lambda_{n-1}.
inline void write_bands_csv(std::ostream& os, const BandGrid& bg) {
  os << "i1,i2,k1,k2";
  for (int j = 0; j < bg.n_bands; ++j) os << ",lambda_" << j;
  os << '\n';
  for (int i2 = 0; i2 < bg.n2; ++i2)
    for (int i1 = 0; i1 < bg.n1; ++i1) {
      const std::size_t p = bg.index(i1, i2);
      os << i1 << ',' << i2 << ',' << format_double(bg.k_points[p].x) << ',' << format_double(bg.k_points[p].y);
      for (int j = 0; j < bg.n_bands; ++j) os << ',' << format_double(bg.at(p, j));
      os << '\n';
    }
}

inline json bands_json(const BandGrid& bg) {
  json ranges = json::array();
  for (int j = 0; j < bg.n_bands; ++j) {
    const auto [lo, hi] = bg.band_range(j);
    ranges.push_back(json::array({lo, hi}));
  }
  json k = json::array(), v = json::array();
  for (std::size_t p = 0; p < bg.size(); ++p) {
    k.push_back(to_json(bg.k_points[p]));
    json row = json::array();
    for (int j = 0; j < bg.n_bands; ++j) row.push_back(bg.at(p, j));
    v.push_back(row);
  }
  return {{"schema", "fbgap.bands/1"}, {"grid", json::array({bg.n1, bg.n2})}, {"n_bands", bg.n_bands},
          {"periodic", bg.domain.periodic}, {"domain", to_json(bg.domain.basis)}, {"band_ranges", ranges},
          {"k", k}, {"values", v}};
}

inline json to_json(const GapReport& g, const BandGrid& bg) {
  json ranges = json::array();
  for (int j = 0; j < bg.n_bands; ++j) {
    const auto [lo, hi] = bg.band_range(j);
    ranges.push_back(json::array({lo, hi}));
  }
  json gaps = json::array();
  for (const auto& x : g.gaps)
    gaps.push_back({{"lower", x.lower}, {"upper", x.upper}, {"lower_band", x.lower_band}, {"upper_band", x.upper_band},
                    {"width", x.width()}});
  return {{"schema", "fbgap.gaps/1"}, {"band_ranges", ranges}, {"band_floor", g.band_floor}, {"gaps", gaps}};
}

inline json to_json(const EdgeSet& es) {
  json pts = json::array();
  for (std::size_t i = 0; i < es.points.size(); ++i) {
    const auto& p = es.points[i];
    json e = {{"k", to_json(p.k)},          {"band", p.band},       {"multiplicity", p.multiplicity},
              {"value", p.value},           {"refined", p.refined}, {"cluster", p.cluster}};
    if (i < es.hessians.size()) e["hessian"] = to_json(es.hessians[i]);
    pts.push_back(e);
  }
  return {{"schema", "fbgap.edges/1"},
          {"edge_value", es.edge_value},
          {"side", to_string(es.side)},
          {"classification", to_string(es.classification)},
          {"edge_tol", es.edge_tol},
          {"hess_tol", es.hess_tol},
          {"scale", es.scale},
          {"margin_binding", es.margin_binding},
          {"cluster_diameters", es.cluster_diameters},
          {"points", pts}};
}

inline json to_json(const ZCorrection& z) {
  return {{"k", to_json(z.k)},
          {"nu", to_json(z.nu)},
          {"band", z.band},
          {"lambda", z.lambda},
          {"lambda_plus", z.lambda_plus},
          {"lambda_minus", z.lambda_minus},
          {"principal", z.principal},
          {"r_term", z.r_term},
          {"r0_term", z.r0_term},
          {"total", z.total},
          {"direct", z.direct},
          {"n_bands_used", z.n_bands_used},
          {"tail_estimate", z.tail_estimate}};
}

inline json to_json(const ExpansionFit& f) {
  json s = json::array();
  for (const auto& x : f.samples) s.push_back({{"eps", x.eps}, {"tau", x.tau}, {"shift", x.shift}, {"overlap", x.overlap}});
  return {{"lambda", f.lambda},       {"z_fit", f.z_fit},     {"cubic_fit", f.cubic_fit},
          {"residual", f.residual},   {"z_uncertainty", f.z_uncertainty},
          {"blocks", f.blocks},       {"cyclic", f.cyclic},   {"dim", f.dim},
          {"samples", s}};
}

inline json to_json(const PerturbationSpec& p) {
  json j = {{"epsilon", p.epsilon}, {"amplitude", to_json(p.amplitude)}, {"sup_norm", p.sup_norm()}};
  j["nu"] = p.nu ? to_json(*p.nu) : json(nullptr);
  return j;
}

inline json to_json(const DegeneracyTrace& t) {
  json rounds = json::array();
  for (const auto& r : t.rounds)
    rounds.push_back({{"round", r.round},
                      {"before", r.before},
                      {"action", r.action},
                      {"perturbation", to_json(r.spec)},
                      {"after", r.after},
                      {"note", r.note}});
  return {{"schema", "fbgap.trace/1"}, {"initial", t.initial}, {"terminal", t.terminal}, {"resolved", t.resolved},
          {"diagnostic", t.diagnostic}, {"budget", t.budget},   {"used", t.used},         {"rounds", rounds}};
}

inline json to_json(const NondegenerateMinReport& r) {
  return {{"classification", to_string(r.classification)},
          {"n_points", r.n_points},
          {"k_star", to_json(r.k_star)},
          {"value", r.value},
          {"hessian", to_json(r.hessian)},
          {"hessian_eigs", json::array({r.hessian_eigs[0], r.hessian_eigs[1]})},
          {"center_offset", r.center_offset},
          {"localized", r.localized},
          {"value_in_range", r.value_in_range},
          {"positive_definite", r.positive_definite},
          {"curvature_ok", r.curvature_ok},
          {"ok", r.ok()}};
}

// ---------------------------------------------------------------------------
// Configuration

enum class ModelKind { plane_wave, checkerboard, nsite, doubled };

struct EdgeChoice {
  std::optional<int> gap;   // index into the gap report
  std::optional<int> band;  // or a band directly
  EdgeSide side = EdgeSide::lower;
  bool side_given = false;
};

struct ZCheckConfig {
  Vec2 k;
  IVec2 mu{1, 0};
  std::int64_t p_num = 1;
  std::int64_t p_den = 6;
  std::vector<double> eps{1e-3, 2e-3, 4e-3};
  int band = 0;
  int n_bands = 0;
  complex amplitude = 1.0;
};

struct RemoveConfig {
  double budget = 0.1;
  int max_rounds = 4;
  double delta = 0.0;
};

struct RunConfig {
  ModelKind kind = ModelKind::plane_wave;
  Mat2 lattice = Mat2::identity();
  FourierPotential::Coeffs coeffs;  // integer dual coordinates
  CheckerboardModel checkerboard;
  std::vector<double> nsite{0, 3, 3};
  DoubledModel doubled;
  int n1 = 41, n2 = 41;
  double e_cut = 100.0;
  int n_bands = 4;
  double edge_tol = 0.0;  // 0: automatic
  double hess_tol = 0.0;
  double min_gap = 1e-6;
  int workers = 1;
  EdgeChoice edge;
  ZCheckConfig zcheck;
  RemoveConfig remove;
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

inline Vec2 vec2_of(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(std::string(what) + " must be a pair of numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline IVec2 ivec2_of(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ConfigError(std::string(what) + " must be a pair of integers");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig c;
  const auto model = get_or<std::string>(j, "model", "plane_wave");
  if (model == "plane_wave")
    c.kind = ModelKind::plane_wave;
  else if (model == "checkerboard")
    c.kind = ModelKind::checkerboard;
  else if (model == "nsite")
    c.kind = ModelKind::nsite;
  else if (model == "doubled")
    c.kind = ModelKind::doubled;
  else
    throw ConfigError("unknown model '" + model + "'");

  if (j.contains("lattice")) {
    const auto& l = j["lattice"];
    if (!l.is_array() || l.size() != 2) throw ConfigError("lattice must be a 2x2 matrix");
    c.lattice = Mat2::from_rows(vec2_of(l[0], "lattice row"), vec2_of(l[1], "lattice row"));
  }
  if (j.contains("potential")) {
    const auto& p = j["potential"];
    if (!p.is_object()) throw ConfigError("potential must be an object");
    for (const auto& t : p.value("cosines", json::array())) {
      const IVec2 m = ivec2_of(t.at("m"), "cosine frequency");
      if (m == IVec2{0, 0}) throw ConfigError("cosine frequency must be nonzero");
      const double amp = get_or<double>(t, "amp", 1.0);
      c.coeffs[m] += amp;
      c.coeffs[-m] += amp;
    }
    for (const auto& t : p.value("coeffs", json::array())) {
      const IVec2 m = ivec2_of(t.at("m"), "coefficient frequency");
      c.coeffs[m] += complex(get_or<double>(t, "re", 0.0), get_or<double>(t, "im", 0.0));
    }
  }
  if (j.contains("checkerboard")) {
    const auto& m = j["checkerboard"];
    c.checkerboard.v0 = get_or<double>(m, "v0", 1.0);
    c.checkerboard.v1 = get_or<double>(m, "v1", -1.0);
    c.checkerboard.full_torus = get_or<bool>(m, "full_torus", false);
  }
  if (j.contains("nsite")) c.nsite = get_or<std::vector<double>>(j["nsite"], "v", c.nsite);
  if (j.contains("doubled")) {
    const auto& m = j["doubled"];
    c.doubled.v = get_or<double>(m, "v", 1.0);
    c.doubled.eps = get_or<double>(m, "eps", 0.0);
    c.doubled.eps_low = get_or<double>(m, "eps_low", 0.0);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.is_number_integer()) {
      c.n1 = c.n2 = g.get<int>();
    } else {
      const IVec2 v = ivec2_of(g, "grid");
      c.n1 = static_cast<int>(v.i);
      c.n2 = static_cast<int>(v.j);
    }
  }
  c.e_cut = get_or<double>(j, "e_cut", c.e_cut);
  c.n_bands = get_or<int>(j, "n_bands", c.n_bands);
  c.workers = get_or<int>(j, "workers", c.workers);
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    c.edge_tol = get_or<double>(t, "edge_tol", c.edge_tol);
    c.hess_tol = get_or<double>(t, "hess_tol", c.hess_tol);
    c.min_gap = get_or<double>(t, "min_gap", c.min_gap);
  }
  if (j.contains("edge")) {
    const auto& e = j["edge"];
    if (e.contains("gap")) c.edge.gap = get_or<int>(e, "gap", 0);
    if (e.contains("band")) c.edge.band = get_or<int>(e, "band", 0);
    if (e.contains("side")) {
      const auto s = get_or<std::string>(e, "side", "lower");
      if (s != "lower" && s != "upper") throw ConfigError("edge side must be 'lower' or 'upper'");
      c.edge.side = s == "lower" ? EdgeSide::lower : EdgeSide::upper;
      c.edge.side_given = true;
    }
  }
  if (j.contains("zcheck")) {
    const auto& z = j["zcheck"];
    if (z.contains("k")) c.zcheck.k = vec2_of(z["k"], "zcheck.k");
    if (z.contains("nu")) {
      const auto& n = z["nu"];
      c.zcheck.mu = ivec2_of(n.at("mu"), "nu.mu");
      c.zcheck.p_num = get_or<std::int64_t>(n, "p_num", 1);
      c.zcheck.p_den = get_or<std::int64_t>(n, "p_den", 1);
    }
    c.zcheck.eps = get_or<std::vector<double>>(z, "eps", c.zcheck.eps);
    c.zcheck.band = get_or<int>(z, "band", 0);
    c.zcheck.n_bands = get_or<int>(z, "n_bands", 0);
    if (z.contains("amplitude")) {
      const Vec2 a = vec2_of(z["amplitude"], "amplitude");
      c.zcheck.amplitude = complex(a.x, a.y);
    }
  }
  if (j.contains("remove")) {
    const auto& r = j["remove"];
    c.remove.budget = get_or<double>(r, "budget", c.remove.budget);
    c.remove.max_rounds = get_or<int>(r, "max_rounds", c.remove.max_rounds);
    c.remove.delta = get_or<double>(r, "delta", c.remove.delta);
  }
  return c;
}

/// Checks ranges that do not depend on the command.
inline void validate(const RunConfig& c) {
  using detail::require_positive;
  if (c.n1 < 2 || c.n2 < 2) throw ConfigError("grid needs at least 2 points per axis");
  if (c.n_bands < 1) throw ConfigError("n_bands must be positive");
  if (c.workers < 1) throw ConfigError("workers must be positive");
  require_positive(c.e_cut, "e_cut");
  require_positive(c.min_gap, "min_gap");
  if (c.edge_tol < 0 || c.hess_tol < 0) throw ConfigError("tolerances must be positive");
  if (c.kind == ModelKind::nsite && c.nsite.size() < 3) throw ConfigError("n-site model needs at least 3 sites");
  if (c.kind == ModelKind::doubled && !(c.doubled.v > 0.0)) throw ConfigError("doubled model needs V > 0");
  if (c.remove.max_rounds < 0) throw ConfigError("max_rounds must be non-negative");
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Band model selected by a configuration.
using AnyModel = std::variant<PlaneWaveModel, CheckerboardModel, NSiteModel, DoubledModel>;

inline FourierPotential potential_of(const RunConfig& c) {
  try {
    return FourierPotential(dual_lattice(Lattice2D(c.lattice)), c.coeffs);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

inline AnyModel make_model(const RunConfig& c) {
  switch (c.kind) {
    case ModelKind::plane_wave: return PlaneWaveModel(potential_of(c), c.e_cut);
    case ModelKind::checkerboard: return c.checkerboard;
    case ModelKind::nsite: return NSiteModel(c.nsite);
    case ModelKind::doubled: return c.doubled;
  }
  throw ConfigError("unknown model");
}

inline EdgeOptions edge_options(const RunConfig& c) {
  EdgeOptions o;
  o.edge_tol = c.edge_tol;
  o.hess_tol = c.hess_tol;
  return o;
}

}  // namespace fbgap
