#include "warpsol_cli/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "warpsol/expr.hpp"
#include "warpsol/gallery.hpp"
#include "warpsol/geodesic.hpp"
#include "warpsol/metric.hpp"
#include "warpsol/sampling.hpp"
#include "warpsol/soliton.hpp"

namespace warpsol::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

// ------------------------------------------------------------------ options

// Raw command-line state. Optionals record whether a flag was given so the
// precedence chain (flag > config file > default) stays explicit.
struct Options {
  std::string mode;
  std::string config_path;

  std::optional<std::string> example;
  std::optional<int> n, m;
  std::optional<double> c;
  std::optional<std::string> direction_csv;
  bool explicit_lambda = false;

  std::optional<int> points;
  std::optional<std::uint64_t> seed;
  bool low_discrepancy = false;
  std::optional<double> tol_residual, tol_constancy;

  std::optional<int> rays, samples;
  std::optional<double> horizon, step, from, to;
  std::optional<std::string> radii_csv, origin_csv;
  std::optional<std::string> ray, weight;

  std::optional<std::string> format, output;
};

struct ProbeConfig {
  int rays = 10;
  double horizon = 50.0;
  double step = 1e-3;
  std::vector<double> radii{1.0, 2.0, 3.0, 4.0};
  int samples = 128;
  std::string ray = "last-axis";
  double from = 1.0;
  std::optional<double> to;  // absent = integrate to infinity
  std::optional<std::vector<double>> origin;
  std::string weight = "auto";
};

// Fully resolved run description; everything downstream reads from here.
struct Resolved {
  std::string mode;

  bool from_example = false;
  ExampleSpec spec{};

  int dimension = 0;
  std::string exponent_text;
  std::vector<double> lower, upper;
  double inset = 0.2;
  bool has_soliton = false;
  std::string warping_text, potential_text, lambda_text;
  std::optional<double> lambda_const, rho_const;
  int fiber_dim = 1;
  double fiber_mu = 0.0;

  int points = 200;
  std::uint64_t seed = 2024;
  bool low_discrepancy = false;
  Tolerances tol;
  ProbeConfig probe;
  std::string format = "text";
  std::string output;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_csv(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": cannot parse '" + tok + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

template <class T>
void take(const ordered_json& j, const char* key, T& slot) {
  if (j.contains(key) && !j.at(key).is_null()) slot = j.at(key).get<T>();
}

template <class T>
void take_opt(const ordered_json& j, const char* key, std::optional<T>& slot) {
  if (j.contains(key) && !j.at(key).is_null()) slot = j.at(key).get<T>();
}

// ------------------------------------------------------------------ resolve

Resolved resolve(const Options& o) {
  Resolved r;

  ordered_json cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config file: " + o.config_path);
    try {
      in >> cfg;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  }

  r.mode = o.mode;
  if (r.mode.empty()) take(cfg, "mode", r.mode);
  if (r.mode.empty())
    throw ConfigError("no mode selected: pass a subcommand or set \"mode\" in the config");

  // -- data source ----------------------------------------------------------
  std::string example_name_text;
  if (cfg.contains("example")) take(cfg.at("example"), "name", example_name_text);
  if (o.example) example_name_text = *o.example;

  if (!example_name_text.empty()) {
    auto id = example_from_name(example_name_text);
    if (!id) {
      std::string known;
      for (ExampleId e : all_examples()) {
        if (!known.empty()) known += ", ";
        known += std::string(example_name(e));
      }
      throw ConfigError("unknown example '" + example_name_text + "' (known: " + known + ")");
    }
    r.from_example = true;
    r.spec = default_spec(*id);
    if (cfg.contains("example")) {
      const auto& e = cfg.at("example");
      take(e, "n", r.spec.n);
      take(e, "m", r.spec.m);
      take(e, "c", r.spec.c);
      take(e, "direction", r.spec.direction);
      take(e, "explicit_lambda", r.spec.explicit_lambda);
    }
    if (o.n) r.spec.n = *o.n;
    if (o.m) r.spec.m = *o.m;
    if (o.c) r.spec.c = *o.c;
    if (o.direction_csv) r.spec.direction = parse_csv(*o.direction_csv, "--direction");
    if (o.explicit_lambda) r.spec.explicit_lambda = true;
    if (r.spec.n < 1 || r.spec.m < 1)
      throw ConfigError("example dimensions must satisfy n >= 1 and m >= 1");
  } else if (cfg.contains("metric")) {
    const auto& mj = cfg.at("metric");
    if (!mj.contains("dimension") || !mj.contains("exponent"))
      throw ConfigError("metric section needs \"dimension\" and \"exponent\"");
    r.dimension = mj.at("dimension").get<int>();
    r.exponent_text = mj.at("exponent").get<std::string>();
    if (!mj.contains("lower") || !mj.contains("upper"))
      throw ConfigError("metric section needs \"lower\" and \"upper\" bound arrays");
    r.lower = mj.at("lower").get<std::vector<double>>();
    r.upper = mj.at("upper").get<std::vector<double>>();
    take(mj, "inset", r.inset);

    if (cfg.contains("soliton")) {
      const auto& sj = cfg.at("soliton");
      r.has_soliton = true;
      if (!sj.contains("warping") || !sj.contains("potential"))
        throw ConfigError("soliton section needs \"warping\" and \"potential\"");
      r.warping_text = sj.at("warping").get<std::string>();
      r.potential_text = sj.at("potential").get<std::string>();
      take(sj, "lambda_expr", r.lambda_text);
      take_opt(sj, "lambda", r.lambda_const);
      take_opt(sj, "rho", r.rho_const);
      take(sj, "fiber_dimension", r.fiber_dim);
      take(sj, "fiber_mu", r.fiber_mu);
      if (r.lambda_text.empty() && !(r.lambda_const && r.rho_const))
        throw ConfigError(
            "soliton section needs either \"lambda_expr\" or both \"lambda\" and \"rho\"");
    }
  } else if (r.mode != "gallery") {
    throw ConfigError("no data source: pass --example or a config with a metric section");
  }

  // -- sampling / tolerances ------------------------------------------------
  if (cfg.contains("sampling")) {
    const auto& sj = cfg.at("sampling");
    take(sj, "points", r.points);
    take(sj, "seed", r.seed);
    take(sj, "low_discrepancy", r.low_discrepancy);
  }
  if (o.points) r.points = *o.points;
  if (o.seed) r.seed = *o.seed;
  if (o.low_discrepancy) r.low_discrepancy = true;

  if (cfg.contains("tolerances")) {
    const auto& tj = cfg.at("tolerances");
    take(tj, "residual", r.tol.residual);
    take(tj, "constancy", r.tol.constancy);
  }
  if (o.tol_residual) r.tol.residual = *o.tol_residual;
  if (o.tol_constancy) r.tol.constancy = *o.tol_constancy;

  // -- probe parameters -----------------------------------------------------
  if (cfg.contains("probe")) {
    const auto& pj = cfg.at("probe");
    take(pj, "rays", r.probe.rays);
    take(pj, "horizon", r.probe.horizon);
    take(pj, "step", r.probe.step);
    take(pj, "radii", r.probe.radii);
    take(pj, "samples", r.probe.samples);
    take(pj, "ray", r.probe.ray);
    take(pj, "from", r.probe.from);
    take_opt(pj, "to", r.probe.to);
    std::vector<double> origin;
    take(pj, "origin", origin);
    if (!origin.empty()) r.probe.origin = std::move(origin);
    take(pj, "weight", r.probe.weight);
  }
  if (o.rays) r.probe.rays = *o.rays;
  if (o.horizon) r.probe.horizon = *o.horizon;
  if (o.step) r.probe.step = *o.step;
  if (o.radii_csv) r.probe.radii = parse_csv(*o.radii_csv, "--radii");
  if (o.samples) r.probe.samples = *o.samples;
  if (o.ray) r.probe.ray = *o.ray;
  if (o.from) r.probe.from = *o.from;
  if (o.to) r.probe.to = *o.to;
  if (o.origin_csv) r.probe.origin = parse_csv(*o.origin_csv, "--origin");
  if (o.weight) r.probe.weight = *o.weight;

  if (o.format) r.format = *o.format;
  else take(cfg, "format", r.format);
  if (o.output) r.output = *o.output;

  if (r.format != "json" && r.format != "text")
    throw ConfigError("--format must be json or text");
  if (r.points < 2) throw ConfigError("--points must be at least 2");
  if (r.probe.rays < 1) throw ConfigError("--rays must be at least 1");
  if (!(r.probe.horizon > 0.0)) throw ConfigError("--horizon must be positive");
  if (!(r.probe.step > 0.0)) throw ConfigError("--step must be positive");
  if (r.probe.samples < 2) throw ConfigError("--samples must be at least 2");
  for (double rad : r.probe.radii)
    if (!(rad > 0.0)) throw ConfigError("--radii entries must be positive");
  if (r.probe.to && !(*r.probe.to > r.probe.from))
    throw ConfigError("--to must exceed --from");
  return r;
}

// -------------------------------------------------------------------- build

struct Built {
  std::optional<WarpedSolitonData> data;
  std::optional<ConformalMetric> bare;  // metric-only config

  const ConformalMetric& metric() const { return data ? data->base() : *bare; }
};

Expr parse_field(const std::string& text, int dim, const char* what) {
  try {
    return parse_expr(text, dim);
  } catch (const ParseError& e) {
    throw ConfigError(std::string(what) + ": " + e.what() + " (byte " +
                      std::to_string(e.offset()) + " of \"" + text + "\")");
  }
}

Built build_data(const Resolved& r, std::optional<Domain> dom) {
  Built b;
  if (r.from_example) {
    ExampleSpec s = r.spec;
    if (dom) s.domain = std::move(*dom);
    b.data.emplace(build_example(s));
    return b;
  }
  Domain d = dom ? std::move(*dom) : Domain(r.dimension, r.lower, r.upper, r.inset);
  Expr u = parse_field(r.exponent_text, r.dimension, "metric.exponent");
  if (!r.has_soliton) {
    b.bare.emplace(std::move(u), std::move(d));
    return b;
  }
  ConformalMetric base(std::move(u), std::move(d));
  Expr f = parse_field(r.warping_text, r.dimension, "soliton.warping");
  Expr phi = parse_field(r.potential_text, r.dimension, "soliton.potential");
  SolitonMode mode;
  if (!r.lambda_text.empty())
    mode = ExplicitLambdaMode{parse_field(r.lambda_text, r.dimension, "soliton.lambda_expr")};
  else
    mode = RhoEinsteinMode{*r.lambda_const, *r.rho_const};
  b.data.emplace(std::move(base), std::move(f), std::move(phi), std::move(mode),
                 r.fiber_dim, r.fiber_mu);
  return b;
}

Domain original_domain(const Resolved& r) {
  if (!r.from_example) return Domain(r.dimension, r.lower, r.upper, r.inset);
  return r.spec.domain ? *r.spec.domain : default_domain(r.spec);
}

// Half-space families keep the singular side of the box fixed; every other
// bound may be pushed out so probes are not cut short by the default box.
int pinned_lower_axis(const Resolved& r) {
  if (!r.from_example) return -1;
  if (r.spec.id == ExampleId::hyperbolic_traceless ||
      r.spec.id == ExampleId::halfspace_steady)
    return r.spec.n - 1;
  return -1;
}

Domain widen_box(const Domain& d, std::span<const double> center, double reach,
                 int pinned) {
  std::vector<double> lo = d.lower, up = d.upper;
  for (int j = 0; j < d.dimension; ++j) {
    up[j] = std::max(up[j], center[j] + reach);
    if (j != pinned) lo[j] = std::min(lo[j], center[j] - reach);
  }
  return Domain(d.dimension, std::move(lo), std::move(up), d.inset);
}

Domain widen_along_ray(const Domain& d, std::span<const double> origin,
                       std::span<const double> dir, double tmax, int pinned) {
  std::vector<double> lo = d.lower, up = d.upper;
  for (int j = 0; j < d.dimension; ++j) {
    if (dir[j] == 0.0) continue;
    const double target = origin[j] + dir[j] * tmax;
    const double pad = 1.0 + 0.05 * std::abs(target);
    up[j] = std::max(up[j], target + pad);
    if (j != pinned) lo[j] = std::min(lo[j], target - pad);
  }
  return Domain(d.dimension, std::move(lo), std::move(up), d.inset);
}

std::vector<double> probe_origin(const Resolved& r, const Domain& d) {
  if (r.probe.origin) {
    if (static_cast<int>(r.probe.origin->size()) != d.dimension)
      throw ConfigError("--origin needs one coordinate per base axis");
    return *r.probe.origin;
  }
  std::vector<double> c(d.dimension);
  for (int j = 0; j < d.dimension; ++j) c[j] = 0.5 * (d.lower[j] + d.upper[j]);
  return c;
}

// Ray spec: "last-axis" or a comma-separated direction vector.
std::vector<double> ray_direction(const Resolved& r, int dim) {
  if (r.probe.ray == "last-axis") {
    std::vector<double> d(dim, 0.0);
    d[dim - 1] = 1.0;
    return d;
  }
  std::vector<double> d = parse_csv(r.probe.ray, "--ray");
  if (static_cast<int>(d.size()) != dim)
    throw ConfigError("--ray needs 'last-axis' or one component per base axis");
  double norm = 0.0;
  for (double v : d) norm += v * v;
  if (!(norm > 0.0)) throw ConfigError("--ray direction must be nonzero");
  return d;
}

// ------------------------------------------------------------------ reports

ordered_json stats_json(const EquationStats& s) {
  return ordered_json{{"sup", s.sup}, {"mean", s.mean}};
}

ordered_json residuals_json(const ResidualReport& rep) {
  ordered_json out;
  out["points"] = rep.points;
  out["base_equation"] = stats_json(rep.base_eq);
  out["integrability"] = stats_json(rep.integrability);
  out["vertical"] = stats_json(rep.vertical);
  out["trace_base"] = stats_json(rep.trace_base);
  out["trace_warped"] = stats_json(rep.trace_warped);
  if (rep.has_catino) out["catino"] = stats_json(rep.catino);
  out["all_within_tolerance"] = rep.equations_pass;
  return out;
}

ordered_json constants_json(const ResidualReport& rep, const WarpedSolitonData& data) {
  ordered_json out;
  out["mu_declared"] = data.fiber_mu();
  out["mu_hat"] = rep.mu_hat;
  out["mu_spread"] = rep.mu_spread;
  out["alpha"] = rep.alpha.alpha;
  out["alpha_spread"] = rep.alpha.spread;
  out["alpha_components"] = rep.alpha.components_used;
  out["alpha_degenerate"] = rep.alpha.degenerate;
  out["rho_hat"] = rep.constants.rho;
  out["lambda_hat"] = rep.constants.lambda;
  out["lambda_spread"] = rep.constants.lambda_spread;
  out["constants_valid"] = rep.constants.valid;
  if (!rep.constants.note.empty()) out["note"] = rep.constants.note;
  if (const RhoEinsteinMode* mode = data.rho_mode()) {
    out["declared_lambda"] = mode->lambda;
    out["declared_rho"] = mode->rho;
  }
  out["rho_at_one_sixth"] = rep.rho_at_one_sixth;
  out["mu_constant"] = rep.mu_constant;
  return out;
}

const char* flag_name(ScalarBoundReport::Flag f) {
  switch (f) {
    case ScalarBoundReport::Flag::consistent: return "consistent";
    case ScalarBoundReport::Flag::violated: return "violated";
    default: return "out_of_range";
  }
}

ordered_json scalar_bound_json(const ScalarBoundReport& s) {
  ordered_json out;
  out["flag"] = flag_name(s.flag);
  out["rho"] = s.rho;
  out["lambda"] = s.lambda;
  out["bound"] = s.bound;
  out["sampled_inf"] = s.sampled_inf;
  out["note"] = s.note;
  return out;
}

ordered_json config_echo(const Resolved& r) {
  ordered_json c;
  c["mode"] = r.mode;
  if (r.mode == "gallery" && !r.from_example) {
    // each per-example report carries its own config echo
  } else if (r.from_example) {
    ordered_json e;
    e["name"] = std::string(example_name(r.spec.id));
    e["n"] = r.spec.n;
    e["m"] = r.spec.m;
    if (r.spec.id == ExampleId::schouten_linear) {
      e["c"] = r.spec.c;
      std::vector<double> dir = r.spec.direction;
      if (dir.empty()) {
        dir.assign(static_cast<std::size_t>(r.spec.n), 0.0);
        dir.back() = 1.0;
      }
      e["direction"] = dir;
    }
    e["explicit_lambda"] = r.spec.explicit_lambda;
    c["example"] = std::move(e);
  } else {
    ordered_json mj;
    mj["dimension"] = r.dimension;
    mj["exponent"] = r.exponent_text;
    mj["lower"] = r.lower;
    mj["upper"] = r.upper;
    mj["inset"] = r.inset;
    c["metric"] = std::move(mj);
    if (r.has_soliton) {
      ordered_json sj;
      sj["warping"] = r.warping_text;
      sj["potential"] = r.potential_text;
      if (!r.lambda_text.empty()) {
        sj["lambda_expr"] = r.lambda_text;
      } else {
        sj["lambda"] = *r.lambda_const;
        sj["rho"] = *r.rho_const;
      }
      sj["fiber_dimension"] = r.fiber_dim;
      sj["fiber_mu"] = r.fiber_mu;
      c["soliton"] = std::move(sj);
    }
  }
  if (r.mode == "verify" || r.mode == "gallery") {
    c["sampling"] = ordered_json{
        {"points", r.points}, {"seed", r.seed}, {"low_discrepancy", r.low_discrepancy}};
    c["tolerances"] =
        ordered_json{{"residual", r.tol.residual}, {"constancy", r.tol.constancy}};
  }
  if (r.mode == "geodesic" || r.mode == "growth") {
    c["probe"] = ordered_json{{"rays", r.probe.rays},
                              {"horizon", r.probe.horizon},
                              {"step", r.probe.step},
                              {"seed", r.seed}};
  } else if (r.mode == "arclength") {
    ordered_json pj;
    pj["ray"] = r.probe.ray;
    pj["from"] = r.probe.from;
    if (r.probe.to) pj["to"] = *r.probe.to;
    c["probe"] = std::move(pj);
  } else if (r.mode == "volume") {
    c["probe"] = ordered_json{{"radii", r.probe.radii},
                              {"samples", r.probe.samples},
                              {"step", r.probe.step},
                              {"seed", r.seed},
                              {"weight", r.probe.weight}};
  }
  return c;
}

// One full verification pass: residual table, recovered constants, and the
// scalar-curvature lower bound when a (lambda, rho) structure is declared.
ordered_json verify_document(const Resolved& r, const WarpedSolitonData& data,
                             bool* pass_out) {
  auto pts = sample_points(data.domain(), r.points, r.seed, r.low_discrepancy);
  ResidualReport rep = verify_soliton(data, pts, r.tol);

  ordered_json doc;
  doc["residuals"] = residuals_json(rep);
  doc["constants"] = constants_json(rep, data);
  ordered_json probes;
  if (data.is_rho_einstein())
    probes["scalar_bound"] = scalar_bound_json(scalar_bound_report(data, pts));
  doc["probes"] = std::move(probes);
  *pass_out = rep.pass;
  return doc;
}

std::string exit_name(ExitReason e) {
  return e == ExitReason::horizon ? "horizon" : "domain_boundary";
}

ordered_json geodesic_probe(const Resolved& r, const Built& built,
                            const Domain& original) {
  const ConformalMetric& g = built.metric();
  const int n = g.dim();
  std::vector<double> origin = probe_origin(r, original);
  if (!original.inner_contains(origin))
    throw ConfigError("probe origin lies outside the domain interior");

  ordered_json rays = ordered_json::array();
  for (int k = 0; k < r.probe.rays; ++k) {
    Rng rng(derive_seed(r.seed, static_cast<std::uint64_t>(k)));
    std::vector<double> dir = rng.next_direction(n);
    std::vector<double> v = metric_normalize(g, origin, dir);
    Trajectory tr = integrate_geodesic(g, origin, v, r.probe.horizon, r.probe.step);
    double drift = 0.0;
    const double s0 = tr.speeds.empty() ? 1.0 : tr.speeds.front();
    for (double s : tr.speeds) drift = std::max(drift, std::abs(s - s0));
    ordered_json row;
    row["direction"] = dir;
    row["exit"] = exit_name(tr.exit);
    row["reached_t"] = tr.times.empty() ? 0.0 : tr.times.back();
    row["final_position"] = tr.positions.empty() ? origin : tr.positions.back();
    row["speed_drift"] = drift;
    rays.push_back(std::move(row));
  }
  ordered_json out;
  out["origin"] = origin;
  out["rays"] = std::move(rays);
  return out;
}

ordered_json arclength_probe(const Resolved& r, const Built& built,
                             const Domain& original) {
  const ConformalMetric& g = built.metric();
  const int n = g.dim();
  std::vector<double> origin(static_cast<std::size_t>(n), 0.0);
  if (r.probe.origin) origin = probe_origin(r, original);
  std::vector<double> dir = ray_direction(r, n);

  std::vector<Expr> curve;
  curve.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    curve.push_back(constant(origin[j]) + constant(dir[j]) * variable(0));

  const double t1 = r.probe.to ? *r.probe.to
                               : std::numeric_limits<double>::infinity();
  ArcLength len = curve_arclength(g, curve, r.probe.from, t1);

  ordered_json out;
  out["origin"] = origin;
  out["direction"] = dir;
  out["from"] = r.probe.from;
  out["to"] = r.probe.to ? ordered_json(*r.probe.to) : ordered_json("infinity");
  out["value"] = len.value;
  out["converged"] = len.converged;
  out["reached_t"] = len.reached_t;
  if (!r.probe.to) {
    out["flag"] = len.converged ? "incomplete along ray: finite total length"
                                : "length diverges along ray";
  }
  return out;
}

// Ratio series are decimated for the report; the tail statistic is computed
// on the full-resolution series by the library.
ordered_json growth_probe(const Resolved& r, const Built& built,
                          const Domain& original) {
  if (!built.data)
    throw ConfigError("growth probe needs a potential: add a soliton section");
  const ConformalMetric& g = built.metric();
  const int n = g.dim();
  std::vector<double> origin = probe_origin(r, original);
  if (!original.inner_contains(origin))
    throw ConfigError("probe origin lies outside the domain interior");

  ordered_json rays = ordered_json::array();
  double tail_min = std::numeric_limits<double>::infinity();
  double tail_max = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < r.probe.rays; ++k) {
    Rng rng(derive_seed(r.seed, static_cast<std::uint64_t>(k)));
    std::vector<double> dir = rng.next_direction(n);
    std::vector<double> v = metric_normalize(g, origin, dir);
    GrowthSeries series = potential_growth(g, built.data->potential(), origin, v,
                                           r.probe.horizon, r.probe.step);
    tail_min = std::min(tail_min, series.tail_max);
    tail_max = std::max(tail_max, series.tail_max);

    const std::size_t count = series.times.size();
    const std::size_t stride = std::max<std::size_t>(1, count / 64);
    ordered_json times = ordered_json::array();
    ordered_json ratios = ordered_json::array();
    for (std::size_t i = 0; i < count; i += stride) {
      times.push_back(series.times[i]);
      ratios.push_back(series.ratios[i]);
    }
    ordered_json row;
    row["direction"] = dir;
    row["tail_max"] = series.tail_max;
    row["reached_t"] = series.reached_t;
    row["exit"] = exit_name(series.exit);
    row["times"] = std::move(times);
    row["ratios"] = std::move(ratios);
    rays.push_back(std::move(row));
  }
  ordered_json out;
  out["origin"] = origin;
  out["tail_over_rays"] = ordered_json{{"min", tail_min}, {"max", tail_max}};
  out["rays"] = std::move(rays);
  return out;
}

Expr volume_weight(const Resolved& r, const Built& built, int dim,
                   std::string* note) {
  const std::string& w = r.probe.weight;
  if (w == "none") return constant(0.0);
  if (w != "auto") return parse_field(w, dim, "probe.weight");
  if (!built.data) {
    *note = "no soliton data: unweighted volume";
    return constant(0.0);
  }
  const WarpedSolitonData& data = *built.data;
  if (const RhoEinsteinMode* mode = data.rho_mode()) {
    const double beta = 1.0 - 2.0 * mode->rho * (data.total_dim() - 1);
    if (std::abs(beta) < 1e-9) {
      // Schouten boundary: the 1/(1 - 2 rho (N-1)) normalization blows up,
      // fall back to the raw potential.
      *note = "weight normalization is singular at this rho; using phi";
      return data.potential();
    }
    *note = "weight = phi / (1 - 2 rho (N - 1))";
    return constant(1.0 / beta) * data.potential();
  }
  *note = "explicit-Lambda mode: weight = phi";
  return data.potential();
}

ordered_json volume_probe(const Resolved& r, const Built& built,
                          const Domain& original) {
  const ConformalMetric& g = built.metric();
  std::vector<double> center = probe_origin(r, original);
  if (!original.inner_contains(center))
    throw ConfigError("probe origin lies outside the domain interior");

  std::string weight_note;
  Expr weight = volume_weight(r, built, g.dim(), &weight_note);

  std::vector<VolumeEstimate> estimates;
  ordered_json radii = ordered_json::array();
  for (double radius : r.probe.radii) {
    VolumeEstimate est = weighted_ball_volume(g, weight, center, radius,
                                              r.probe.samples, r.seed, r.probe.step);
    estimates.push_back(est);
    ordered_json row;
    row["radius"] = est.radius;
    row["value"] = est.value;
    row["std_error"] = est.std_error;
    row["samples"] = est.n_samples;
    row["clipped"] = est.clipped;
    radii.push_back(std::move(row));
  }
  ordered_json out;
  out["center"] = center;
  if (!weight_note.empty()) out["weight_note"] = weight_note;
  out["estimates"] = std::move(radii);
  if (estimates.size() >= 4) {
    GrowthFit fit = growth_bound_check(estimates);
    out["gaussian_fit"] = ordered_json{{"c0", fit.c0},
                                       {"intercept", fit.intercept},
                                       {"rms_residual", fit.rms_residual},
                                       {"fits", fit.fits}};
  }
  return out;
}

// -------------------------------------------------------------- text output

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string render_scalar(const ordered_json& v) {
  if (v.is_number_float()) return fmt9(v.get<double>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

bool inline_array(const ordered_json& a) {
  if (a.size() > 8) return false;
  for (const auto& v : a)
    if (v.is_object() || v.is_array()) return false;
  return true;
}

void flatten(const ordered_json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      flatten(v, prefix.empty() ? k : prefix + "." + k, rows);
    return;
  }
  if (j.is_array()) {
    if (inline_array(j)) {
      std::string joined = "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) joined += ", ";
        joined += render_scalar(j[i]);
      }
      joined += "]";
      rows.emplace_back(prefix, std::move(joined));
      return;
    }
    for (std::size_t i = 0; i < j.size(); ++i)
      flatten(j[i], prefix + "[" + std::to_string(i) + "]", rows);
    return;
  }
  rows.emplace_back(prefix, render_scalar(j));
}

void write_text(const ordered_json& doc, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(doc, "", rows);
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) {
    out << k;
    out.write("                                                                ",
              static_cast<std::streamsize>(
                  std::min<std::size_t>(width - k.size() + 2, 64)));
    out << v << "\n";
  }
}

void emit(const ordered_json& doc, const Resolved& r, std::ostream& out,
          std::ostream& err) {
  std::ostringstream body;
  if (r.format == "json")
    body << doc.dump(2) << "\n";
  else
    write_text(doc, body);
  if (r.output.empty()) {
    out << body.str();
    return;
  }
  std::ofstream file(r.output, std::ios::binary);
  if (!file) throw ConfigError("cannot open output file: " + r.output);
  file << body.str();
  err << "report written to " << r.output << "\n";
}

// --------------------------------------------------------------------- run

int run_resolved(const Resolved& r, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  ordered_json doc;
  doc["config"] = config_echo(r);
  bool pass = true;

  if (r.mode == "verify") {
    Built built = build_data(r, std::nullopt);
    if (!built.data)
      throw ConfigError("verify needs a soliton section or --example");
    err << "verify: " << r.points << " points, seed " << r.seed << "\n";
    ordered_json body = verify_document(r, *built.data, &pass);
    for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  } else if (r.mode == "gallery") {
    ordered_json reports = ordered_json::array();
    for (ExampleId id : all_examples()) {
      Resolved sub = r;
      sub.mode = "verify";
      sub.from_example = true;
      sub.spec = default_spec(id);
      err << "gallery: " << example_name(id) << "\n";
      Built built = build_data(sub, std::nullopt);
      bool sub_pass = true;
      ordered_json body = verify_document(sub, *built.data, &sub_pass);
      ordered_json entry;
      entry["config"] = config_echo(sub);
      for (auto& [k, v] : body.items()) entry[k] = std::move(v);
      entry["verdict"] = sub_pass ? "pass" : "fail";
      pass = pass && sub_pass;
      reports.push_back(std::move(entry));
    }
    doc["reports"] = std::move(reports);
  } else {
    const Domain original = original_domain(r);
    const int pinned = pinned_lower_axis(r);
    ordered_json probes;
    if (r.mode == "geodesic" || r.mode == "growth") {
      std::optional<Domain> widened;
      if (r.from_example) {
        std::vector<double> origin = probe_origin(r, original);
        widened = widen_box(original, origin, 3.0 * r.probe.horizon + 10.0, pinned);
      }
      Built built = build_data(r, widened);
      err << r.mode << ": " << r.probe.rays << " rays, horizon "
          << r.probe.horizon << "\n";
      probes[r.mode] = r.mode == "geodesic" ? geodesic_probe(r, built, original)
                                            : growth_probe(r, built, original);
    } else if (r.mode == "arclength") {
      std::optional<Domain> widened;
      Built probe_shape = build_data(r, std::nullopt);
      const int n = probe_shape.metric().dim();
      std::vector<double> origin(static_cast<std::size_t>(n), 0.0);
      if (r.probe.origin) origin = probe_origin(r, original);
      std::vector<double> dir = ray_direction(r, n);
      if (r.from_example) {
        const double tmax = r.probe.to ? *r.probe.to : 1.26e12;
        widened = widen_along_ray(original, origin, dir, tmax, pinned);
      }
      Built built = widened ? build_data(r, widened) : std::move(probe_shape);
      err << "arclength: ray " << r.probe.ray << " from " << r.probe.from << "\n";
      probes["arclength"] = arclength_probe(r, built, original);
    } else if (r.mode == "volume") {
      std::optional<Domain> widened;
      if (r.from_example) {
        std::vector<double> center = probe_origin(r, original);
        const double max_r =
            *std::max_element(r.probe.radii.begin(), r.probe.radii.end());
        widened = widen_box(original, center, 3.0 * max_r + 10.0, pinned);
      }
      Built built = build_data(r, widened);
      err << "volume: " << r.probe.radii.size() << " radii, "
          << r.probe.samples << " directions\n";
      probes["volume"] = volume_probe(r, built, original);
    } else {
      throw ConfigError("unknown mode: " + r.mode);
    }
    doc["probes"] = std::move(probes);
  }

  doc["verdict"] = pass ? "pass" : "fail";
  const auto t1 = std::chrono::steady_clock::now();
  doc["meta"] = ordered_json{
      {"schema", kReportSchema},
      {"tool", std::string("warpsol ") + kToolVersion},
      {"wall_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()}};

  emit(doc, r, out, err);
  return pass ? 0 : 1;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_option("--example", o.example,
                  "gallery example: hyperbolic_traceless, cosh_traceless, "
                  "halfspace_steady, schouten_linear");
  sub->add_option("--n", o.n, "base dimension override");
  sub->add_option("--m", o.m, "fiber dimension override");
  sub->add_option("--c", o.c, "soliton constant (schouten_linear)");
  sub->add_option("--direction", o.direction_csv,
                  "unit covector, comma separated (schouten_linear)");
  sub->add_flag("--explicit-lambda", o.explicit_lambda,
                "treat Lambda as an expression even when (lambda, rho) applies");
  sub->add_option("--points", o.points, "sample count (default 200)");
  sub->add_option("--seed", o.seed, "RNG seed (default 2024)");
  sub->add_flag("--low-discrepancy", o.low_discrepancy,
                "Halton sampling instead of pseudorandom");
  sub->add_option("--tol", o.tol_residual, "residual sup-norm gate (default 1e-6)");
  sub->add_option("--constancy-tol", o.tol_constancy,
                  "constant-spread gate (default 1e-8)");
  sub->add_option("--format", o.format, "json or text (default text)");
  sub->add_option("--output", o.output, "write the report to a file");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"construct and verify gradient rho-Einstein soliton warped products"};
  app.require_subcommand(0, 1);
  add_common(&app, o);

  struct ModeDesc {
    const char* name;
    const char* help;
  };
  const ModeDesc modes[] = {
      {"verify", "check the construction equations on a random sample"},
      {"gallery", "verify all four built-in example families"},
      {"geodesic", "integrate random geodesic rays"},
      {"arclength", "measure the length of a parametric ray"},
      {"growth", "potential growth along random geodesic rays"},
      {"volume", "weighted geodesic-ball volume estimates"},
  };
  for (const ModeDesc& m : modes) {
    CLI::App* sub = app.add_subcommand(m.name, m.help);
    add_common(sub, o);
    if (std::string(m.name) == "geodesic" || std::string(m.name) == "growth") {
      sub->add_option("--rays", o.rays, "number of random rays (default 10)");
      sub->add_option("--horizon", o.horizon, "integration horizon (default 50)");
      sub->add_option("--step", o.step, "integrator step (default 1e-3)");
      sub->add_option("--origin", o.origin_csv, "start point, comma separated");
    } else if (std::string(m.name) == "arclength") {
      sub->add_option("--ray", o.ray, "'last-axis' or a direction vector");
      sub->add_option("--from", o.from, "parameter start (default 1)");
      sub->add_option("--to", o.to, "parameter end (default: infinity)");
      sub->add_option("--origin", o.origin_csv, "ray base point (default 0)");
    } else if (std::string(m.name) == "volume") {
      sub->add_option("--radii", o.radii_csv, "radii, comma separated");
      sub->add_option("--samples", o.samples, "directions per radius (default 128)");
      sub->add_option("--step", o.step, "integrator step (default 1e-3)");
      sub->add_option("--origin", o.origin_csv, "ball center, comma separated");
      sub->add_option("--weight", o.weight, "'auto', 'none', or an expression");
    }
  }

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("warpsol");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  for (const CLI::App* sub : app.get_subcommands()) o.mode = sub->get_name();

  try {
    Resolved r = resolve(o);
    return run_resolved(r, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << " (byte " << e.offset() << ")\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace warpsol::cli
