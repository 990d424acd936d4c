#include "kfp/cli_runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "kfp/discrete_complex.hpp"
#include "kfp/errors.hpp"
#include "kfp/hypothesis_checker.hpp"
#include "kfp/landscape.hpp"
#include "kfp/symbol_geometry.hpp"

namespace kfp {

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json vec_json(const Vec& v) { return json(v); }

json cvec_json(std::span<const cplx> v) {
  json a = json::array();
  for (const cplx& z : v) a.push_back(complex_to_json(z));
  return a;
}

// --- config parsing -------------------------------------------------------------------

// Best-effort position of the first occurrence of "key" in the source text.
std::pair<int, int> locate(const std::string& text, const std::string& key) {
  const std::size_t at = text.find('"' + key + '"');
  if (at == std::string::npos) return {0, 0};
  int line = 1, col = 1;
  for (std::size_t i = 0; i < at; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto [line, col] = locate(text_, key);
    std::string where = source_;
    if (line > 0) where += ":" + std::to_string(line) + ":" + std::to_string(col);
    throw ConfigError(where + ": " + what, line, col);
  }

  void keys(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(section, "'" + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
      if (!ok.count(k)) fail(k, "unknown key '" + k + "' in '" + section + "'");
  }

  void positive(const json& obj, const char* key, double& dst) const {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number()) fail(key, std::string("'") + key + "' must be a number");
    const double v = obj[key].get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, std::string("'") + key + "' must be positive");
    dst = v;
  }

  void nonnegative(const json& obj, const char* key, double& dst) const {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number()) fail(key, std::string("'") + key + "' must be a number");
    const double v = obj[key].get<double>();
    if (!(v >= 0.0) || !std::isfinite(v)) fail(key, std::string("'") + key + "' must be non-negative");
    dst = v;
  }

  void integer(const json& obj, const char* key, int& dst, int lo) const {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number_integer()) fail(key, std::string("'") + key + "' must be an integer");
    const long long v = obj[key].get<long long>();
    if (v < lo || v > 1'000'000) fail(key, std::string("'") + key + "' is out of range");
    dst = static_cast<int>(v);
  }

  void h_list(const json& obj, const char* key, std::vector<double>& dst) const {
    if (!obj.contains(key)) return;
    const json& a = obj[key];
    if (!a.is_array() || a.empty()) fail(key, std::string("'") + key + "' must be a non-empty array");
    std::vector<double> out;
    for (const auto& v : a) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) fail(key, "h values must be positive numbers");
      out.push_back(v.get<double>());
    }
    for (std::size_t i = 1; i < out.size(); ++i)
      if (!(out[i] < out[i - 1])) fail(key, std::string("'") + key + "' must be strictly decreasing");
    dst = std::move(out);
  }

 private:
  const std::string& text_;
  std::string source_;
};

ModelSpec resolve_model(const std::string& name) {
  try {
    return registry_model(name);
  } catch (const InvalidModel&) {
    std::string known;
    for (const auto& n : registry_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown model '" + name + "' (known: " + known + ")");
  }
}

// --- shared pieces ---------------------------------------------------------------------

std::vector<CriticalPoint> critical_points(const RunConfig& c) { return find_critical_points(c.model); }

CVec lattice_for(const RunConfig& c, const std::vector<CriticalPoint>& cps, int degree, double radius) {
  std::vector<MuLattice> lat;
  for (const auto& cp : cps) lat.push_back(build_lattice(c.model, cp, radius, std::max(degree, 0)));
  return lattice_values(lat, degree);
}

json critical_json(const RunConfig& c, const CriticalPoint& cp) {
  return json{{"location", vec_json(cp.location)},
              {"value", cp.value},
              {"index", cp.index},
              {"hessian", matrix_to_json(cp.hessian.matrix)},
              {"hessian_eigenvalues", vec_json(cp.hessian.eigenvalues)},
              {"lambdas", cvec_json(fundamental_eigs(c.model, cp))}};
}

json spectrum_values_json(const SpectrumResult& s) {
  json a = json::array();
  for (const auto& v : s.values)
    a.push_back(json{{"re", v.value.real()}, {"im", v.value.imag()}, {"residual", v.residual},
                     {"deflated", v.deflated}});
  return a;
}

json grid_json(const GridSpec& g) { return json{{"half_width", vec_json(g.half_width)}, {"intervals", g.intervals}}; }

}  // namespace

// --- RunConfig -------------------------------------------------------------------------

SpectrumOptions RunConfig::spectrum_options() const {
  SpectrumOptions o;
  o.count = solver.count;
  o.basis = solver.basis;
  o.tol = solver.tol;
  o.shifts = solver.shifts;
  o.window = solver.window;
  o.seed = seed;
  return o;
}

json RunConfig::to_json() const {
  json shifts = json::array();
  for (const cplx& z : solver.shifts) shifts.push_back(json::array({z.real(), z.imag()}));
  return json{
      {"model", model_name.empty() ? model_to_json(model) : json(model_name)},
      {"grid",
       {{"resolution", grid.resolution},
        {"tail", grid.tail},
        {"max_half_width", grid.max_half_width},
        {"stabilization", grid.stabilization}}},
      {"solver",
       {{"shifts", shifts},
        {"count", solver.count},
        {"basis", solver.basis},
        {"tol", solver.tol},
        {"window", solver.window},
        {"lattice_window", solver.lattice_window},
        {"lattice_radius", solver.lattice_radius},
        {"imaginary_bound", solver.imaginary_bound},
        {"pairing_tol", solver.pairing_tol}}},
      {"sweep",
       {{"h", sweep.h},
        {"slope_tolerance", sweep.slope_tolerance},
        {"cutoff_radius", sweep.cutoff_radius},
        {"prefactor_factor", sweep.prefactor_factor}}},
      {"hypotheses",
       {{"horizon", hypotheses.horizon},
        {"per_ring", hypotheses.per_ring},
        {"ring_radius", hypotheses.ring_radius},
        {"ring_gap", hypotheses.ring_gap},
        {"threshold", hypotheses.threshold},
        {"exclusion", hypotheses.exclusion},
        {"max_constant", hypotheses.max_constant}}},
      {"resolvent",
       {{"h", resolvent.h},
        {"radius", resolvent.radius},
        {"count", resolvent.count},
        {"proximity", resolvent.proximity},
        {"resolution", resolvent.resolution},
        {"max_ratio", resolvent.max_ratio}}},
      {"structure",
       {{"d1d0", structure.d1d0},
        {"kernel", structure.kernel},
        {"intertwining", structure.intertwining},
        {"adjoint", structure.adjoint}}},
      {"h", h},
      {"degree", degree},
      {"seed", seed},
      {"output", output}};
}

RunConfig default_run_config(const std::string& model) {
  RunConfig c;
  c.model_name = model;
  c.model = resolve_model(model);
  c.defaults_used = {"grid", "solver", "sweep", "hypotheses", "resolvent", "structure"};
  return c;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  const json j = parse_json_text(text, source);
  const Reader r(text, source);
  r.keys(j, "config",
         {"model", "grid", "solver", "sweep", "hypotheses", "resolvent", "structure", "h", "degree", "seed",
          "output"});
  RunConfig c;
  if (j.contains("model")) {
    const json& m = j["model"];
    if (m.is_string()) {
      try {
        c.model_name = m.get<std::string>();
        c.model = resolve_model(c.model_name);
      } catch (const ConfigError& e) {
        r.fail("model", e.what());
      }
    } else {
      try {
        c.model = model_from_json(m, false);
      } catch (const ConfigError& e) {
        r.fail("model", e.what());
      } catch (const InvalidModel& e) {
        r.fail("model", std::string("model: ") + e.what());
      }
      c.model_name.clear();
    }
  } else {
    c.model = resolve_model(c.model_name);
  }

  for (const char* s : {"grid", "solver", "sweep", "hypotheses", "resolvent", "structure"})
    if (!j.contains(s)) c.defaults_used.push_back(s);

  if (j.contains("grid")) {
    const json& g = j["grid"];
    r.keys(g, "grid", {"resolution", "tail", "max_half_width", "stabilization"});
    r.positive(g, "resolution", c.grid.resolution);
    r.positive(g, "tail", c.grid.tail);
    r.positive(g, "max_half_width", c.grid.max_half_width);
    r.nonnegative(g, "stabilization", c.grid.stabilization);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    r.keys(s, "solver",
           {"shifts", "count", "basis", "tol", "window", "lattice_window", "lattice_radius", "imaginary_bound",
            "pairing_tol"});
    if (s.contains("shifts")) {
      const json& a = s["shifts"];
      if (!a.is_array() || a.empty()) r.fail("shifts", "'shifts' must be a non-empty array");
      c.solver.shifts.clear();
      for (const auto& z : a) {
        if (z.is_number()) {
          c.solver.shifts.emplace_back(z.get<double>(), 0.0);
        } else if (z.is_array() && z.size() == 2 && z[0].is_number() && z[1].is_number()) {
          c.solver.shifts.emplace_back(z[0].get<double>(), z[1].get<double>());
        } else {
          r.fail("shifts", "each shift is a number or a [re, im] pair");
        }
      }
      if (c.solver.shifts.front().imag() != 0.0) r.fail("shifts", "the first shift must be real");
    }
    r.integer(s, "count", c.solver.count, 1);
    r.integer(s, "basis", c.solver.basis, 0);
    r.positive(s, "tol", c.solver.tol);
    r.positive(s, "window", c.solver.window);
    r.positive(s, "lattice_window", c.solver.lattice_window);
    r.positive(s, "lattice_radius", c.solver.lattice_radius);
    r.nonnegative(s, "imaginary_bound", c.solver.imaginary_bound);
    r.positive(s, "pairing_tol", c.solver.pairing_tol);
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    r.keys(s, "sweep", {"h", "slope_tolerance", "cutoff_radius", "prefactor_factor"});
    r.h_list(s, "h", c.sweep.h);
    r.positive(s, "slope_tolerance", c.sweep.slope_tolerance);
    r.positive(s, "cutoff_radius", c.sweep.cutoff_radius);
    r.positive(s, "prefactor_factor", c.sweep.prefactor_factor);
  }
  if (j.contains("hypotheses")) {
    const json& s = j["hypotheses"];
    r.keys(s, "hypotheses",
           {"horizon", "per_ring", "ring_radius", "ring_gap", "threshold", "exclusion", "max_constant"});
    r.positive(s, "horizon", c.hypotheses.horizon);
    r.integer(s, "per_ring", c.hypotheses.per_ring, 4);
    r.positive(s, "ring_radius", c.hypotheses.ring_radius);
    r.positive(s, "ring_gap", c.hypotheses.ring_gap);
    r.positive(s, "threshold", c.hypotheses.threshold);
    r.positive(s, "exclusion", c.hypotheses.exclusion);
    r.positive(s, "max_constant", c.hypotheses.max_constant);
  }
  if (j.contains("resolvent")) {
    const json& s = j["resolvent"];
    r.keys(s, "resolvent", {"h", "radius", "count", "proximity", "resolution", "max_ratio"});
    r.h_list(s, "h", c.resolvent.h);
    r.positive(s, "radius", c.resolvent.radius);
    r.integer(s, "count", c.resolvent.count, 1);
    r.positive(s, "proximity", c.resolvent.proximity);
    r.positive(s, "resolution", c.resolvent.resolution);
    r.positive(s, "max_ratio", c.resolvent.max_ratio);
  }
  if (j.contains("structure")) {
    const json& s = j["structure"];
    r.keys(s, "structure", {"d1d0", "kernel", "intertwining", "adjoint"});
    r.positive(s, "d1d0", c.structure.d1d0);
    r.positive(s, "kernel", c.structure.kernel);
    r.positive(s, "intertwining", c.structure.intertwining);
    r.positive(s, "adjoint", c.structure.adjoint);
  }
  r.positive(j, "h", c.h);
  r.integer(j, "degree", c.degree, 0);
  if (c.degree > 1) r.fail("degree", "'degree' must be 0 or 1");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) r.fail("seed", "'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) {
    if (!j["output"].is_string() || j["output"].get<std::string>().empty())
      r.fail("output", "'output' must be a non-empty string");
    c.output = j["output"].get<std::string>();
  }
  return c;
}

// --- commands --------------------------------------------------------------------------

CommandResult cmd_analyze(const RunConfig& c) {
  const auto cps = critical_points(c);
  const WellStructure w = classify_landscape(cps);

  json points = json::array();
  for (const auto& cp : cps) {
    json pj = critical_json(c, cp);
    // throws ImaginaryAxisEigenvalue when the Hamilton matrix touches the imaginary axis
    const StableForm f = stable_quadratic_form(c.model, cp, Direction::outgoing, SymbolChoice::q);
    pj["outgoing_form"] = matrix_to_json(f.form.matrix);
    pj["eikonal_residual"] = f.eikonal_residual;
    points.push_back(std::move(pj));
  }

  std::vector<MuLattice> lat;
  for (const auto& cp : cps) lat.push_back(build_lattice(c.model, cp, c.solver.lattice_radius, c.model.dim));

  // saddle geometry: outgoing form of q, incoming form of q_check
  const StableForm plus = stable_quadratic_form(c.model, w.saddle, Direction::outgoing, SymbolChoice::q);
  const StableForm minus_check =
      stable_quadratic_form(c.model, w.saddle, Direction::incoming, SymbolChoice::q_check);
  const QuadraticForm gap = QuadraticForm::from(plus.form.matrix - w.saddle.hessian.matrix, true);
  const double mirror = max_abs(minus_check.form.matrix + plus.form.matrix) / max_abs(plus.form.matrix);
  const bool geometry_ok = plus.form.positive_definite() && plus.eikonal_residual <= 1e-8 && gap.n_neg == 0 &&
                           gap.n_zero == 1 && mirror <= 1e-8;

  json report{
      {"model", model_to_json(c.model)},
      {"critical_points", points},
      {"wells",
       {{"minus", vec_json(w.minus.location)},
        {"plus", vec_json(w.plus.location)},
        {"saddle", vec_json(w.saddle.location)},
        {"S_minus", w.s_minus},
        {"S_plus", w.s_plus},
        {"S_min", w.s_min},
        {"shallow", w.shallow}}},
      {"saddle_lambdas", cvec_json(fundamental_eigs(c.model, w.saddle))},
      {"lattice", lattice_to_json(lat)},
      {"saddle_geometry",
       {{"phi_plus", matrix_to_json(plus.form.matrix)},
        {"phi_plus_eigenvalues", vec_json(plus.form.eigenvalues)},
        {"eikonal_residual", plus.eikonal_residual},
        {"symmetry_defect", plus.symmetry_defect},
        {"gap_eigenvalues", vec_json(gap.eigenvalues)},
        {"incoming_check_mirror_defect", mirror},
        {"pass", geometry_ok}}},
      {"pass", geometry_ok}};

  CommandResult out;
  out.files.emplace_back("analysis.json", dump(report));
  std::ostringstream s;
  s << "double well: S_-1 = " << w.s_minus << ", S_+1 = " << w.s_plus << ", S_min = " << w.s_min;
  out.summary = s.str();
  out.exit = geometry_ok ? exit_code::ok : exit_code::failed_check;
  return out;
}

CommandResult cmd_check(const RunConfig& c) {
  const auto cps = critical_points(c);
  const auto& hc = c.hypotheses;
  const bool defaults = std::find(c.defaults_used.begin(), c.defaults_used.end(), "hypotheses") !=
                        c.defaults_used.end();

  bool all = true;
  json ny17 = json::array();
  for (const auto& cp : cps) {
    const Ny17Result r = evaluate_ny17(c.model, cp, hc.horizon);
    const bool ok = r.passed && r.constant <= hc.max_constant;
    all = all && ok;
    ny17.push_back(json{{"location", vec_json(cp.location)},
                        {"index", cp.index},
                        {"constant", r.passed ? json(r.constant) : json(nullptr)},
                        {"min_eigenvalue", r.averaged.eigenvalues.front()},
                        {"pass", ok}});
  }
  const auto ring = default_sample_ring(cps, hc.per_ring, hc.ring_radius, hc.ring_gap);
  const AverageReport avg =
      evaluate_ny19_ny20(c.model, cps, ring, hc.horizon, hc.threshold, hc.exclusion, "default sample ring");
  all = all && avg.passed;

  json report{{"model", c.model.name},
              {"horizon", hc.horizon},
              {"max_constant", hc.max_constant},
              {"defaults_used", defaults},
              {"ny17", ny17},
              {"ny19_ny20", avg.to_json()},
              {"pass", all}};
  CommandResult out;
  out.files.emplace_back("hypotheses.json", dump(report));
  out.files.emplace_back("ny19_ny20.csv", avg.to_csv());
  out.summary = std::string(all ? "hypotheses certified" : "hypotheses not certified") +
                (defaults ? " (defaults used for the hypothesis samples)" : "");
  out.exit = all ? exit_code::ok : exit_code::hypothesis_fails;
  return out;
}

CommandResult cmd_spectrum(const RunConfig& c) {
  const double h = c.h;
  const DiscreteComplex cx = complex_for_h(c.model, h, c.grid, c.degree == 1);
  const SpectrumResult s = low_spectrum(cx, c.degree, c.spectrum_options());

  const auto cps = critical_points(c);
  const CVec lat_all = lattice_for(c, cps, c.degree, c.solver.lattice_radius);
  CVec lat, comp;
  for (const cplx& m : lat_all)
    if (std::abs(m) < c.solver.lattice_window) lat.push_back(m);
  for (const cplx& z : s.scaled())
    if (std::abs(z) < c.solver.lattice_window) comp.push_back(z);
  const LatticeMatch match = match_lattice(comp, lat);

  const double d = c.solver.imaginary_bound > 0 ? c.solver.imaginary_bound
                                                 : default_imaginary_bound(lattice_for(c, cps, 0, c.solver.lattice_radius));
  const int violations = window_violations(s, c.solver.window, d);
  bool pass = s.accretive && s.conjugate_closed && s.window_covered && violations == 0;

  json report{{"h", h},
              {"degree", c.degree},
              {"grid", grid_json(s.grid)},
              {"stabilization", s.stabilization},
              {"op_norm", s.op_norm},
              {"window", c.solver.window},
              {"values", spectrum_values_json(s)},
              {"accretive", s.accretive},
              {"conjugate_closed", s.conjugate_closed},
              {"window_covered", s.window_covered},
              {"imaginary_bound", d},
              {"window_violations", violations},
              {"lattice_window", c.solver.lattice_window},
              {"lattice_max_deviation", match.max_deviation},
              {"lattice_unmatched_computed", cvec_json(match.unmatched_computed)},
              {"lattice_unmatched", cvec_json(match.unmatched_lattice)}};
  if (c.degree == 1) {
    const double mu1 = splitting_value(cx, c.spectrum_options());
    double tilde = 0.0;
    for (const auto& v : s.values)
      if (!v.deflated) {
        tilde = v.value.real();
        break;
      }
    const double rel = std::abs(tilde - mu1) / mu1;
    report["mu1_degree0"] = mu1;
    report["mu1_degree1"] = tilde;
    report["pairing_relative_difference"] = rel;
    pass = pass && rel <= c.solver.pairing_tol;
  }
  report["pass"] = pass;

  CommandResult out;
  out.files.emplace_back("spectrum.csv", spectrum_csv({s}, {match}));
  out.files.emplace_back("spectrum.json", dump(report));
  std::ostringstream m;
  m << s.values.size() << " values below " << c.solver.window << "h at h = " << h << ", degree " << c.degree
    << "; lattice deviation " << match.max_deviation;
  out.summary = m.str();
  out.exit = pass ? exit_code::ok : exit_code::failed_check;
  return out;
}

CommandResult cmd_splitting(const RunConfig& c) {
  const WellStructure w = classify_landscape(critical_points(c));
  std::vector<SplittingPoint> table;
  for (double h : c.sweep.h)
    table.push_back({h, splitting_value(complex_for_h(c.model, h, c.grid), c.spectrum_options())});
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.h < b.h; });
  const SplittingFit fit = fit_splitting(table);

  bool monotone = true;
  for (std::size_t i = 1; i < fit.table.size(); ++i) monotone = monotone && fit.table[i].mu1 > fit.table[i - 1].mu1;
  const double target = 2.0 * w.s_min;
  const json fj = fit_json(fit, target, c.sweep.slope_tolerance * target);

  const InteractionData p = predict_prefactor(c.model, w, c.sweep.cutoff_radius);
  const double ratio = p.total / fit.prefactor;
  const bool prefactor_ok = std::max(ratio, 1.0 / ratio) <= c.sweep.prefactor_factor && p.sensitivity <= 0.2;
  json pj = p.to_json();
  pj["fitted_prefactor"] = fit.prefactor;
  pj["ratio"] = ratio;
  pj["factor_limit"] = c.sweep.prefactor_factor;
  pj["pass"] = prefactor_ok;

  const bool pass = fj["pass"].get<bool>() && monotone && prefactor_ok;
  CommandResult out;
  out.files.emplace_back("splitting.csv", splitting_csv(fit));
  out.files.emplace_back("fit.json", dump(fj));
  out.files.emplace_back("prefactor.json", dump(pj));
  std::ostringstream m;
  m << "slope " << fit.slope << " (target " << target << "), prefactor " << fit.prefactor << " vs predicted "
    << p.total << ", R^2 " << fit.r2;
  out.summary = m.str();
  out.exit = pass ? exit_code::ok : exit_code::failed_check;
  return out;
}

CommandResult cmd_complex_verify(const RunConfig& c) {
  const DiscreteComplex cx = complex_for_h(c.model, c.h, c.grid, true);
  const ComplexDefects d = complex_defects(cx);
  ModelSpec t = c.model;
  t.a = c.model.a.transpose();
  const DiscreteComplex ct = complex_for_h(t, c.h, c.grid, false);
  const double adjoint = adjoint_symmetry_check(cx, ct) / cx.lap0.max_abs();
  const auto& s = c.structure;
  const bool pass =
      d.d1d0 <= s.d1d0 && d.kernel <= s.kernel && d.intertwining <= s.intertwining && adjoint <= s.adjoint;
  json report{{"h", c.h},
              {"grid", grid_json(cx.grid)},
              {"stabilization", cx.stabilization},
              {"nodes", cx.nodes.size()},
              {"edges", cx.edges.size()},
              {"faces", cx.faces.size()},
              {"maxwellian_tail", maxwellian_tail_estimate(c.model, cx.grid, c.h)},
              {"d1d0", d.d1d0},
              {"kernel", d.kernel},
              {"intertwining", d.intertwining},
              {"adjoint_symmetry", adjoint},
              {"tolerances", {{"d1d0", s.d1d0}, {"kernel", s.kernel}, {"intertwining", s.intertwining}, {"adjoint", s.adjoint}}},
              {"pass", pass}};
  CommandResult out;
  out.files.emplace_back("complex.json", dump(report));
  std::ostringstream m;
  m << "d1d0 " << d.d1d0 << ", kernel " << d.kernel << ", intertwining " << d.intertwining << ", adjoint "
    << adjoint;
  out.summary = m.str();
  out.exit = pass ? exit_code::ok : exit_code::failed_check;
  return out;
}

CommandResult cmd_resolvent(const RunConfig& c) {
  const auto& rc = c.resolvent;
  LabGridOptions g = c.grid;
  g.resolution = std::max(g.resolution, rc.resolution);
  std::ostringstream csv;
  csv.precision(17);
  csv << "h,z_re,z_im,sigma_min,norm,scaled\n";
  json per_h = json::array();
  std::vector<double> worst;
  bool pass = true;
  for (double h : rc.h) {
    const DiscreteComplex cx = complex_for_h(c.model, h, g);
    SpectrumOptions o = c.spectrum_options();
    o.window = rc.radius + 1.0;
    const SpectrumResult s = low_spectrum(cx, 0, o);
    CVec spec;
    for (const auto& v : s.values) spec.push_back(v.value);
    const CVec z = default_probes(h, rc.radius, rc.count);
    std::vector<ResolventPoint> pts;
    try {
      pts = resolvent_probe(cx, z, spec, rc.proximity);
    } catch (const std::invalid_argument& e) {
      per_h.push_back(json{{"h", h}, {"error", e.what()}});
      pass = false;
      continue;
    }
    double mx = 0.0;
    for (const auto& p : pts) {
      csv << h << ',' << p.z.real() << ',' << p.z.imag() << ',' << p.sigma_min << ',' << p.norm << ','
          << p.scaled << '\n';
      mx = std::max(mx, p.scaled);
    }
    worst.push_back(mx);
    per_h.push_back(json{{"h", h}, {"grid", grid_json(cx.grid)}, {"max_scaled", mx}});
  }
  double ratio = 1.0;
  for (std::size_t i = 1; i < worst.size(); ++i)
    ratio = std::max(ratio, std::max(worst[i] / worst[i - 1], worst[i - 1] / worst[i]));
  pass = pass && ratio <= rc.max_ratio;
  json report{{"radius", rc.radius}, {"probes", rc.count}, {"per_h", per_h}, {"max_ratio", ratio},
              {"ratio_limit", rc.max_ratio}, {"pass", pass}};
  CommandResult out;
  out.files.emplace_back("resolvent.csv", csv.str());
  out.files.emplace_back("resolvent.json", dump(report));
  out.summary = "resolvent factor " + std::to_string(ratio);
  out.exit = pass ? exit_code::ok : exit_code::failed_check;
  return out;
}

// --- front end -------------------------------------------------------------------------

void write_atomic(const std::string& dir, const std::string& name, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target = fs::path(dir) / name;
  const fs::path tmp = fs::path(dir) / ("." + name + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << contents;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double-well Kramers-Fokker-Planck spectral lab"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path, out_dir, model;
  double h = 0.0;
  int degree = -1;
  std::uint64_t seed = 42;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--model", model, "registry model name (overrides the config)");
  app.add_option("--h", h, "semiclassical parameter (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--degree", degree, "form degree for spectrum")->check(CLI::Range(0, 1));
  CLI::Option* seed_opt = app.add_option("--seed", seed, "start-vector seed")->capture_default_str();

  using Cmd = CommandResult (*)(const RunConfig&);
  const std::vector<std::pair<std::string, std::pair<Cmd, std::string>>> commands{
      {"analyze", {cmd_analyze, "critical points, actions, symbol lattice and saddle geometry"}},
      {"check", {cmd_check, "dynamical hypothesis certificates"}},
      {"spectrum", {cmd_spectrum, "low-lying spectrum at one h"}},
      {"splitting", {cmd_splitting, "h sweep, exponential fit and prefactor prediction"}},
      {"complex-verify", {cmd_complex_verify, "structural identities of the discrete complex"}},
      {"resolvent", {cmd_resolvent, "resolvent norm probes"}}};
  for (const auto& [name, cmd] : commands) app.add_subcommand(name, cmd.second);

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config_error;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) throw ConfigError(config_path + ": cannot open");
      std::ostringstream text;
      text << f.rdbuf();
      cfg = parse_run_config(text.str(), config_path);
    } else {
      cfg = default_run_config();
    }
    if (!model.empty()) {
      cfg.model_name = model;
      cfg.model = resolve_model(model);
    }
    if (h > 0) cfg.h = h;
    if (degree >= 0) cfg.degree = degree;
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output = out_dir;

    const CLI::App* sub = app.get_subcommands().front();
    Cmd cmd = nullptr;
    for (const auto& [name, c] : commands)
      if (name == sub->get_name()) cmd = c.first;
    const CommandResult r = cmd(cfg);
    std::filesystem::create_directories(cfg.output);
    for (const auto& [name, contents] : r.files) write_atomic(cfg.output, name, contents);
    write_atomic(cfg.output, "config.json", dump(cfg.to_json()));
    out << sub->get_name() << ": " << r.summary << "\n";
    return r.exit;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::config_error;
  } catch (const NotDoubleWell& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::not_double_well;
  } catch (const ImaginaryAxisEigenvalue& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::imaginary_axis;
  } catch (const HypothesisFails& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::hypothesis_fails;
  } catch (const NotConverged& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::not_converged;
  } catch (const NoConvergence& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::not_converged;
  } catch (const ResidualTooLarge& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::not_converged;
  } catch (const BadFit& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::bad_fit;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::internal_error;
  }
}

}  // namespace kfp
