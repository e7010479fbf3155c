#pragma once

// Command-line front end. run_cli is the whole program; main only forwards
// argv and the standard streams so tests can drive it in-process.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clairaut/clairaut.hpp"

namespace clairaut::cli {

enum ExitCode { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumeric = 3 };

/// Flag values that are wrong on their face (bad syntax, missing bindings).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// "a=1, b=expr" split at top-level commas; order of appearance is kept.
inline std::vector<std::pair<std::string, std::string>> split_bindings(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string item;
  int depth = 0;
  auto flush = [&] {
    auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
    if (item.empty()) return;
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("expected name=value, got '" + item + "'");
    std::string name = item.substr(0, eq), value = item.substr(eq + 1);
    name.erase(name.find_last_not_of(" \t") + 1);
    for (const auto& [n, v] : out)
      if (n == name) throw UsageError("'" + name + "' is bound twice");
    out.emplace_back(name, value);
    item.clear();
  };
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0)
      flush();
    else
      item += c;
  }
  flush();
  return out;
}

/// Values may be constant expressions such as -sqrt(2).
inline Bindings parse_values(const std::string& text) {
  Bindings b;
  for (const auto& [name, value] : split_bindings(text)) {
    Expr e = parse_expression(value);
    auto free = free_symbols(e);
    if (!free.empty()) throw UsageError("value of '" + name + "' uses unbound symbol '" + *free.begin() + "'");
    b[name] = evaluate(e, {});
  }
  return b;
}

/// Phase point from bindings of every coordinate and regular momentum, and
/// optionally degenerate velocities under d(name).
inline PhasePoint point_from(const ClairautTransform& ct, const Bindings& b) {
  PhasePoint pt;
  std::set<std::string> used;
  auto need = [&](const std::string& name) {
    auto it = b.find(name);
    if (it == b.end()) throw UsageError("unbound symbol '" + name + "': --at/--init must bind it");
    used.insert(name);
    return it->second;
  };
  for (const auto& c : ct.model().coords) pt.q.push_back(need(c));
  for (const auto& c : ct.split().regular) pt.p.push_back(need(momentum_name(c)));
  std::vector<double> v;
  for (const auto& c : ct.split().degenerate) {
    auto it = b.find(velocity_name(c));
    if (it != b.end()) v.push_back(it->second), used.insert(it->first);
  }
  if (!v.empty()) {
    if (v.size() != ct.d()) throw UsageError("bind all degenerate velocities or none");
    pt.v_deg = v;
  }
  for (const auto& [name, value] : b)
    if (!used.count(name)) throw UsageError("'" + name + "' is not a coordinate, regular momentum or degenerate velocity");
  return pt;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open '" + path + "'");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void emit(const ordered_json& j, const std::string& out, std::ostream& os) {
  if (out.empty()) {
    os << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw UsageError("cannot write '" + out + "'");
  f << j.dump(2) << "\n";
}

struct Setup {
  LagrangianModel model;
  VariableSplit split;
  std::unique_ptr<ClairautTransform> ct;
  GaugeClassification cls;
  std::size_t probes = 17;
};

inline Setup setup(const std::string& path, std::uint64_t seed, double tol) {
  Setup s;
  s.model = parse_model(read_text(path));
  auto probes = generate_probes(s.model, s.probes, seed);
  s.split = split_variables(s.model, probes, tol);
  s.ct = std::make_unique<ClairautTransform>(s.model, s.split);
  s.cls = classify(*s.ct, generate_phase_points(*s.ct, s.probes, seed), tol);
  return s;
}

inline ordered_json names_of(const ClairautTransform& ct, const std::vector<int>& idx) {
  ordered_json j = ordered_json::array();
  for (int a : idx) j.push_back(ct.split().degenerate[a]);
  return j;
}

inline ordered_json matrix_json(const Matrix& m) {
  ordered_json j = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

inline int cmd_analyze(const std::string& path, std::uint64_t seed, double tol, const std::string& out,
                       std::ostream& os) {
  auto s = setup(path, seed, tol);
  ordered_json j;
  j["model"] = path;
  j["coords"] = s.model.coords;
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : s.model.params) params[k] = v;
  j["params"] = params;
  j["hessian_rank"] = s.split.r;
  j["regular"] = s.split.regular;
  j["degenerate"] = s.split.degenerate;
  j["permutation"] = s.split.permutation;
  j["classification"] = {{"kind", to_string(s.cls.kind)},
                         {"rank_F", s.cls.rank_F},
                         {"solve_block", names_of(*s.ct, s.cls.subblock)}};
  j["probes"] = s.probes;
  j["seed"] = seed;
  j["tolerances"] = {{"rank", tol}, {"newton", s.ct->newton().tol}};
  emit(j, out, os);
  return kOk;
}

inline int cmd_transform(const std::string& path, const std::string& at, std::uint64_t seed, double tol,
                         const std::string& out, std::ostream& os) {
  auto s = setup(path, seed, tol);
  const auto& ct = *s.ct;
  PhasePoint pt = point_from(ct, parse_values(at));
  auto pd = ct.resolve(pt);
  ordered_json j;
  j["model"] = path;
  j["H_phys"] = pd.H;
  ordered_json vel = ordered_json::object(), b = ordered_json::object(), dh = ordered_json::object(),
               vd = ordered_json::object();
  for (std::size_t i = 0; i < ct.r(); ++i) vel[ct.split().regular[i]] = pd.V(i);
  for (std::size_t a = 0; a < ct.d(); ++a) vd[ct.split().degenerate[a]] = pd.v_deg(a);
  Vector d = long_derivative_H(ct, pd);
  for (std::size_t a = 0; a < ct.d(); ++a) {
    b[ct.split().degenerate[a]] = pd.B(a);
    dh[ct.split().degenerate[a]] = d(a);
  }
  j["regular_velocities"] = vel;
  j["degenerate_velocities"] = vd;
  j["B"] = b;
  j["DH"] = dh;
  j["F"] = matrix_json(field_strength(ct, pd));
  std::vector<double> pbar(ct.n());
  for (std::size_t i = 0; i < ct.r(); ++i) pbar[ct.reg(i)] = pt.p[i];
  for (std::size_t a = 0; a < ct.d(); ++a) pbar[ct.deg(a)] = pd.B(a);
  j["clairaut_residual"] = clairaut_residual(ct, pt.q, pbar, to_std(pd.v_deg));
  emit(j, out, os);
  return kOk;
}

inline GaugeInput parse_gauge(const ClairautTransform& ct, const GaugeClassification& cls, const std::string& text) {
  GaugeInput g = GaugeInput::defaults(ct, cls);
  for (const auto& [name, value] : split_bindings(text)) {
    auto& deg = ct.split().degenerate;
    auto it = std::find(deg.begin(), deg.end(), name);
    if (it == deg.end()) throw UsageError("gauge '" + name + "' is not a degenerate coordinate");
    auto a = static_cast<std::size_t>(it - deg.begin());
    std::string v = value;
    v.erase(0, v.find_first_not_of(" \t"));
    v.erase(v.find_last_not_of(" \t") + 1);
    if (v == "solve") {
      g.modes[a] = GaugeMode::solve();
    } else if (v == "zero") {
      g.modes[a] = GaugeMode::zero();
    } else {
      Expr e = parse_expression(v);
      for (const auto& sym : free_symbols(e))
        if (sym != kTimeSymbol) throw UsageError("gauge for '" + name + "' may only use t, found '" + sym + "'");
      g.modes[a] = GaugeMode::prescribed(e);
    }
  }
  detail::check_gauge(ct, g, cls);
  return g;
}

struct SimulateFlags {
  std::string init, gauge, out, plot, columns;
  double t0 = 0.0, t1 = 1.0, dt = 1e-3, tol = 1e-5;
};

inline int cmd_simulate(const std::string& path, const SimulateFlags& f, std::uint64_t seed, double rank_tol,
                        std::ostream& os, std::ostream& err) {
  IntegratorConfig cfg{f.t0, f.t1, f.dt, 1e-6};
  try {
    cfg.steps();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto s = setup(path, seed, rank_tol);
  const auto& ct = *s.ct;
  PhasePoint pt = point_from(ct, parse_values(f.init));
  GaugeInput g = parse_gauge(ct, s.cls, f.gauge);
  Trajectory tr = integrate(ct, pt, g, s.cls, cfg);
  if (tr.samples.size() >= 3) el_residual(ct, tr);
  if (f.out.empty()) {
    write_csv(os, ct, tr);
  } else {
    std::ofstream o(f.out);
    if (!o) throw UsageError("cannot write '" + f.out + "'");
    write_csv(o, ct, tr);
  }
  if (!f.plot.empty()) {
    std::vector<std::string> cols;
    if (f.columns.empty()) {
      for (const auto& c : ct.model().coords) cols.push_back("q:" + c);
    } else {
      std::stringstream ss(f.columns);
      for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    }
    std::ofstream o(f.plot);
    if (!o) throw UsageError("cannot write '" + f.plot + "'");
    write_svg(o, ct, tr, cols);
  }
  double el = 0.0;
  for (const auto& smp : tr.samples) el = std::max(el, smp.el);
  std::ostream& summary = f.out.empty() ? err : os;
  summary << "samples " << tr.samples.size() << " max_el_residual " << format_number(el)
          << " max_consistency_residual " << format_number(tr.max_consistency)
          << (tr.initially_inconsistent ? " (initial data off the constraint surface)" : "") << "\n";
  if (tr.failure) {
    err << "error: " << *tr.failure << "\n";
    return kNumeric;
  }
  return el > f.tol || tr.max_consistency > f.tol ? kVerifyFailed : kOk;
}

inline int cmd_verify(const std::string& path, std::uint64_t seed, const std::string& out, std::ostream& os) {
  auto model = parse_model(read_text(path));
  VerifyOptions opt;
  opt.seed = seed;
  auto report = run_verify(model, path, opt);
  emit(report, out, os);
  return report["pass"].get<bool>() ? kOk : kVerifyFailed;
}

struct PdeFlags {
  std::string f, mode = "envelope", c, at, out;
  std::size_t s = 0;
};

inline int cmd_pde(const PdeFlags& fl, std::ostream& os) {
  auto xs = parse_values(fl.at);
  // x1..xn with no gaps; n also bounds the z indices in f.
  std::vector<double> x;
  for (std::size_t k = 1; xs.count("x" + std::to_string(k)); ++k) x.push_back(xs["x" + std::to_string(k)]);
  if (x.size() != xs.size()) throw UsageError("--at must bind x1..xn without gaps");
  auto prob = ClairautProblem::parse(fl.f, std::max<std::size_t>(x.size(), 1));
  std::size_t n = prob.n();
  if (x.size() != n) throw UsageError("--at binds " + std::to_string(x.size()) + " coordinates, f needs " + std::to_string(n));
  auto cs = parse_values(fl.c);
  auto constants = [&](std::size_t from) {
    std::vector<double> c;
    for (std::size_t k = from + 1; k <= n; ++k) {
      auto it = cs.find("c" + std::to_string(k));
      if (it == cs.end()) throw UsageError("--c must bind c" + std::to_string(k));
      c.push_back(it->second);
    }
    if (c.size() != cs.size()) throw UsageError("--c binds constants the mode does not use");
    return c;
  };
  Solution y;
  std::size_t s = 0;
  if (fl.mode == "general") {
    auto c = constants(0);
    y = general_solution(prob, c);
  } else if (fl.mode == "mixed") {
    s = fl.s;
    if (s > n) throw UsageError("--s exceeds the number of variables");
    auto c = constants(s);
    y = [&prob, s, c](const std::vector<double>& p) { return mixed_solution(prob, s, c, p); };
  } else if (fl.mode == "envelope") {
    s = n;
    constants(n);
    y = [&prob](const std::vector<double>& p) { return envelope_solution(prob, p); };
  } else {
    throw UsageError("--mode must be general, mixed or envelope");
  }
  ordered_json j;
  j["f"] = to_string(prob.f());
  j["mode"] = fl.mode;
  j["n"] = n;
  j["s"] = s;
  j["x"] = x;
  j["value"] = y(x);
  j["residual"] = clairaut_pde_residual(prob, y, x);
  emit(j, fl.out, os);
  return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Mixed Legendre-Clairaut analysis of finite-dimensional Lagrangians"};
  app.require_subcommand(1);
  std::uint64_t seed = 42;
  double rank_tol = kDefaultRankTol;
  std::string model, at, out;
  SimulateFlags sim;
  PdeFlags pde;

  auto add_common = [&](CLI::App* sub, bool with_model) {
    if (with_model) sub->add_option("model", model, "model file (.lag)")->required();
    sub->add_option("--seed", seed, "probe sampling seed");
    sub->add_option("--out", out, "write the report here instead of stdout");
  };
  auto* analyze = app.add_subcommand("analyze", "Hessian split and gauge classification");
  add_common(analyze, true);
  analyze->add_option("--tol", rank_tol, "relative rank threshold");
  auto* transform = app.add_subcommand("transform", "H_phys, B, F and diagnostics at a point");
  add_common(transform, true);
  transform->add_option("--at", at, "q and regular p bindings, optionally d(y) for degenerate y")->required();
  transform->add_option("--tol", rank_tol, "relative rank threshold");
  auto* simulate = app.add_subcommand("simulate", "integrate the equations of motion to CSV");
  simulate->add_option("model", model, "model file (.lag)")->required();
  simulate->add_option("--seed", seed, "probe sampling seed");
  simulate->add_option("--init", sim.init, "initial q and regular p")->required();
  simulate->add_option("--gauge", sim.gauge, "degenerate velocities: name=<expr in t>|solve|zero");
  simulate->add_option("--t0", sim.t0);
  simulate->add_option("--t1", sim.t1);
  simulate->add_option("--dt", sim.dt);
  simulate->add_option("--tol", sim.tol, "exit 1 when a residual exceeds this");
  simulate->add_option("--out", sim.out, "CSV path (default stdout)");
  simulate->add_option("--plot", sim.plot, "SVG path");
  simulate->add_option("--columns", sim.columns, "comma-separated CSV columns to plot");
  auto* verify = app.add_subcommand("verify", "run the property suite, JSON report");
  add_common(verify, true);
  auto* pdecmd = app.add_subcommand("pde", "Clairaut PDE solutions");
  pdecmd->add_option("--f", pde.f, "f(z1..zn)")->required();
  pdecmd->add_option("--mode", pde.mode, "general|mixed|envelope");
  pdecmd->add_option("--s", pde.s, "number of resolved slots in mixed mode");
  pdecmd->add_option("--c", pde.c, "constants c_k for unresolved slots");
  pdecmd->add_option("--at", pde.at, "x1..xn")->required();
  pdecmd->add_option("--out", pde.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    os << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*analyze) return cmd_analyze(model, seed, rank_tol, out, os);
    if (*transform) return cmd_transform(model, at, seed, rank_tol, out, os);
    if (*simulate) return cmd_simulate(model, sim, seed, rank_tol, os, err);
    if (*verify) return cmd_verify(model, seed, out, os);
    if (*pdecmd) return cmd_pde(pde, os);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}

}  // namespace clairaut::cli
