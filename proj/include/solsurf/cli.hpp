#pragma once

// Command-line front end: verify, surface, models. run() is the whole program;
// main() only forwards argv.

#include <CLI11.hpp>

#include <iostream>

#include "solsurf/report.hpp"

namespace solsurf::cli {

enum Exit : int { kPass = 0, kFail = 1, kUsage = 2 };

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Thresholds {
  double lambda_spread = 1e-9;
  double zcc = 1e-10;
  double det = 1e-8;
  double unitarity = 1e-6;
  double path = 1e-6;
  double eq7 = 1e-8;
  double order_lo = 3.0;  // accepted residual ratio under h -> h/2
  double order_hi = 5.0;
  double cross = 1e-3;
  double closure = 1e-4;

  void set(const std::string& name, double v) {
    if (!(v > 0.0)) throw UsageError("threshold '" + name + "' must be positive");
    for (auto& [k, p] : fields())
      if (k == name) {
        *p = v;
        return;
      }
    throw UsageError("unknown threshold '" + name + "'");
  }
  [[nodiscard]] Json to_json() const {
    Json j = Json::object();
    for (auto& [k, p] : const_cast<Thresholds*>(this)->fields()) j[k] = *p;
    return j;
  }

 private:
  std::vector<std::pair<std::string, double*>> fields() {
    return {{"lambda_spread", &lambda_spread}, {"zcc", &zcc},           {"det", &det},
            {"unitarity", &unitarity},         {"path", &path},         {"eq7", &eq7},
            {"order_lo", &order_lo},           {"order_hi", &order_hi}, {"cross", &cross},
            {"closure", &closure}};
  }
};

struct RunConfig {
  std::string model = "sine-gordon";
  std::string model_file;
  std::string solution;
  std::vector<std::string> params;
  std::string lambda = "1";
  std::string grid;
  std::string immersion;
  std::vector<std::string> characteristics;
  std::string alpha = "1";
  std::string S;
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "obj";
  bool cross_check = false;
  bool from_tangents = false;
  std::vector<std::string> thresholds;
};

// ---------------------------------------------------------------------------
// Parsing helpers

inline std::vector<double> split_numbers(const std::string& text, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("bad number '" + item + "' in " + what);
    }
  }
  return v;
}

inline cplx parse_lambda(const std::string& text) {
  auto v = split_numbers(text, "--lambda");
  if (v.empty() || v.size() > 2) throw UsageError("--lambda expects re[,im]");
  return {v[0], v.size() == 2 ? v[1] : 0.0};
}

inline GridSpec parse_grid(const std::string& text) {
  auto v = split_numbers(text, "--grid");
  if (v.size() != 6) throw UsageError("--grid expects x1min,x1max,n1,x2min,x2max,n2");
  GridSpec g;
  g.x1_lo = v[0];
  g.x1_hi = v[1];
  g.x2_lo = v[3];
  g.x2_hi = v[4];
  if (v[2] != std::floor(v[2]) || v[5] != std::floor(v[5])) throw UsageError("grid sizes must be integers");
  g.n1 = static_cast<int>(v[2]);
  g.n2 = static_cast<int>(v[5]);
  try {
    g.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return g;
}

/// Same domain, spacing halved; the base node keeps its position.
inline GridSpec refine(const GridSpec& g) {
  GridSpec f = g;
  f.n1 = 2 * g.n1 - 1;
  f.n2 = 2 * g.n2 - 1;
  f.base_i = 2 * g.base_i;
  f.base_j = 2 * g.base_j;
  return f;
}

/// Options the parser knows; any other --name value pair is a family parameter.
inline const std::set<std::string>& known_options() {
  static const std::set<std::string> k{"model",  "model-file",    "solution", "param",     "lambda", "grid",
                                       "immersion", "characteristic", "alpha", "S",         "epsilon", "seed",
                                       "out",    "format",        "cross-check", "from-tangents", "threshold",
                                       "help"};
  return k;
}

inline std::vector<std::string> rewrite_parameter_flags(const std::vector<std::string>& args) {
  static const std::set<std::string> flags{"cross-check", "from-tangents", "help"};
  std::vector<std::string> out;
  for (std::size_t k = 0; k < args.size(); ++k) {
    const std::string& a = args[k];
    if (a.size() <= 2 || a.rfind("--", 0) != 0) {
      out.push_back(a);
      continue;
    }
    std::string body = a.substr(2);
    auto eq = body.find('=');
    std::string name = body.substr(0, eq);
    if (known_options().count(name)) {
      out.push_back(a);
      if (eq == std::string::npos && !flags.count(name) && k + 1 < args.size()) out.push_back(args[++k]);
      continue;
    }
    if (eq != std::string::npos) {
      out.insert(out.end(), {"--param", body});
    } else if (k + 1 < args.size()) {
      out.insert(out.end(), {"--param", name + "=" + args[k + 1]});
      ++k;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

struct Resolved {
  ModelDefinition model;
  const SolutionFamily* family = nullptr;
  ParamValues params;
  cplx lam;
  GridSpec grid;
  Thresholds thresholds;
};

inline ModelDefinition resolve_model(const RunConfig& c) {
  if (!c.model_file.empty()) {
    std::string text;
    try {
      text = read_file(c.model_file);
    } catch (const IoError& e) {
      throw UsageError(e.what());
    }
    return load_model(text);
  }
  return builtin(c.model);
}

inline Resolved resolve(const RunConfig& c, const std::string& default_grid) {
  Resolved r;
  r.model = resolve_model(c);
  if (c.solution.empty()) {
    if (r.model.families.size() != 1) throw UsageError("--solution is required for this model");
    r.family = &r.model.families.front();
  } else {
    r.family = &r.model.family(c.solution);
  }
  ParamValues given;
  for (const auto& p : c.params) {
    auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects name=value, got '" + p + "'");
    std::string name = p.substr(0, eq);
    if (!r.family->param(name))
      throw UsageError("solution '" + r.family->name + "' has no parameter '" + name + "'");
    auto v = split_numbers(p.substr(eq + 1), "--param " + name);
    if (v.size() != 1) throw UsageError("--param " + name + " expects one number");
    given[name] = v[0];
  }
  r.params = r.family->defaults(given);
  r.lam = parse_lambda(c.lambda);
  if (r.model.is_singular(r.lam))
    throw SingularLambdaError("lambda is a singular value of model '" + r.model.name + "'");
  r.grid = parse_grid(c.grid.empty() ? default_grid : c.grid);
  for (const auto& t : c.thresholds) {
    auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError("--threshold expects name=value");
    auto v = split_numbers(t.substr(eq + 1), "--threshold");
    if (v.size() != 1) throw UsageError("--threshold expects one number");
    r.thresholds.set(t.substr(0, eq), v[0]);
  }
  return r;
}

inline Json header(const std::string& command, const RunConfig& c, const Resolved& r) {
  return Json{{"schema", kReportSchema},
              {"command", command},
              {"model", r.model.name},
              {"solution", r.family->name},
              {"params", params_json(r.params)},
              {"lambda", complex_json(r.lam)},
              {"grid", grid_json(r.grid)},
              {"seed", c.seed},
              {"thresholds", r.thresholds.to_json()}};
}

class Checks {
 public:
  explicit Checks(std::ostream& log) : log_(log) {}
  void add(Json check, const std::string& summary) {
    bool ok = check.at("passed").get<bool>();
    all_ = all_ && ok;
    log_ << (ok ? "PASS " : "FAIL ") << check.at("name").get<std::string>() << "  " << summary << "\n";
    list_.push_back(std::move(check));
  }
  [[nodiscard]] bool all_passed() const { return all_; }
  [[nodiscard]] const Json& list() const { return list_; }

 private:
  std::ostream& log_;
  Json list_ = Json::array();
  bool all_ = true;
};

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Residual ratio under h -> h/2 lies in the second-order window, or the
/// coarse residual is already at roundoff.
inline bool second_order(double coarse, double fine, const Thresholds& t) {
  if (coarse < 1e-12) return true;
  double ratio = fine > 0.0 ? coarse / fine : std::numeric_limits<double>::infinity();
  return ratio >= t.order_lo && ratio <= t.order_hi;
}

inline Json convergence_json(const std::string& name, const ResidualReport& coarse, const GridSpec& gc,
                             const ResidualReport& fine, const GridSpec& gf, const Thresholds& t) {
  return Json{{"name", name},
              {"passed", second_order(coarse.max_abs, fine.max_abs, t)},
              {"ratio", fine.max_abs > 0.0 ? coarse.max_abs / fine.max_abs : 0.0},
              {"order_window", {t.order_lo, t.order_hi}},
              {"coarse", residual_json(coarse, gc)},
              {"fine", residual_json(fine, gf)}};
}

inline void emit(const Json& report, const RunConfig& c, const std::string& file, std::ostream& out) {
  std::string text = dump_report(report);
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::filesystem::create_directories(c.out);
  write_file_atomic(std::filesystem::path(c.out) / file, text);
}

inline std::vector<NamedCharacteristic> selected_characteristics(const RunConfig& c, const ModelDefinition& m,
                                                                 const SolutionFamily& fam) {
  std::vector<NamedCharacteristic> out;
  if (c.characteristics.empty()) {
    for (const auto& ch : m.characteristics)
      if (fam.binding_for(ch.name)) out.push_back(ch);
    return out;
  }
  for (const auto& n : c.characteristics) out.push_back(m.characteristic(n));
  return out;
}

// ---------------------------------------------------------------------------
// verify

inline int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& log) {
  Resolved r = resolve(c, "-2,2,161,-2,2,161");
  const auto& m = r.model;
  const auto& fam = *r.family;
  const auto& t = r.thresholds;
  auto chars = selected_characteristics(c, m, fam);
  Json report = header("verify", c, r);
  Json names = Json::array();
  for (const auto& ch : chars) names.push_back(ch.name);
  report["characteristics"] = names;
  Checks checks(log);

  auto li = check_lambda_independence(m, c.seed);
  checks.add(Json{{"name", "lambda_independence"},
                  {"passed", li.max_spread < t.lambda_spread},
                  {"max_spread", li.max_spread},
                  {"jet_samples", li.jet_samples},
                  {"lambda_samples", li.lambda_samples}},
             "spread " + sci(li.max_spread));

  auto zcc = zcc_residual_on(m, fam, r.params, r.grid);
  checks.add(Json{{"name", "zcc_on_shell"}, {"passed", zcc.max_abs < t.zcc}, {"residual", residual_json(zcc, r.grid)}},
             "max " + sci(zcc.max_abs));

  auto row = integrate_wavefunction(m, fam, r.params, r.lam, r.grid);
  IntegrationOptions col_opts;
  col_opts.order = PathOrder::ColumnFirst;
  auto col = integrate_wavefunction(m, fam, r.params, r.lam, r.grid, col_opts);
  auto audit = audit_wavefunction(row, &col);
  auto U = evaluate_on_grid(fam, r.params, r.lam, r.grid, {m.U1, m.U2});
  double skew = 0.0;
  for (const auto& g : U)
    for (int i = 0; i < r.grid.n1; ++i)
      for (int j = 0; j < r.grid.n2; ++j) skew = std::max(skew, anti_hermitian_defect(g(i, j)));
  bool unitary_expected = skew < 1e-12;
  Json wf{{"name", "wavefunction"},
          {"passed", false},
          {"det_max_dev", audit.det_max_dev},
          {"unitarity_max", audit.unitarity_max},
          {"unitarity_checked", unitary_expected},
          {"path_max", audit.path_max},
          {"path_far_corner", audit.path_far_corner}};
  bool wf_ok = audit.det_max_dev < t.det && audit.path_max < t.path &&
               (!unitary_expected || audit.unitarity_max < t.unitarity);
  wf["passed"] = wf_ok;
  checks.add(wf, "det " + sci(audit.det_max_dev) + " unitarity " +
                     (unitary_expected ? sci(audit.unitarity_max) : std::string("n/a")) + " path " +
                     sci(audit.path_max));

  for (const auto& ch : chars) {
    auto z = zcc_symmetry_residual(m, ch.R, fam, r.params, r.grid);
    checks.add(Json{{"name", "zcc_symmetry:" + ch.name},
                    {"passed", z.max_abs < t.eq7},
                    {"residual", residual_json(z, r.grid)}},
               "max " + sci(z.max_abs));
  }

  GridSpec fine = refine(r.grid);
  auto fine_wave = integrate_wavefunction(m, fam, r.params, r.lam, fine);
  for (const auto& ch : chars) {
    if (!fam.binding_for(ch.name)) continue;
    VariationOptions vo;
    vo.epsilon = c.epsilon;
    auto vc = variation_wavefunction(m, fam, r.params, ch, r.lam, r.grid, vo);
    auto vf = variation_wavefunction(m, fam, r.params, ch, r.lam, fine, vo);
    auto rc = lsp_symmetry_residual(m, ch.R, row, vc);
    auto rf = lsp_symmetry_residual(m, ch.R, fine_wave, vf);
    Json j = convergence_json("lsp_symmetry:" + ch.name, rc, r.grid, rf, fine, t);
    j["epsilon"] = vc.epsilon;
    j["halving"] = halving_json(vc.halving);
    checks.add(j, "coarse " + sci(rc.max_abs) + " fine " + sci(rf.max_abs) + " ratio " +
                      sci(j["ratio"].get<double>()));
  }

  report["checks"] = checks.list();
  report["passed"] = checks.all_passed();
  emit(report, c, "verify.json", out);
  return checks.all_passed() ? kPass : kFail;
}

// ---------------------------------------------------------------------------
// surface

struct Built {
  WavefunctionGrid wave;
  TangentGrid tangents;
  ImmersionGrid F;
  std::optional<ClosureAudit> closure;
  std::optional<HalvingDiagnostic> halving;
};

inline MatrixExpr resolve_S(const std::string& s, int dim) {
  if (s == "e1" || s == "e2" || s == "e3") {
    if (dim != 2) throw UsageError("--S " + s + " needs a 2x2 model");
    return su2_basis_exprs()[static_cast<std::size_t>(s[1] - '1')];
  }
  std::string text;
  try {
    text = read_file(s);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  for (const auto& sec : parse_config(text))
    if (sec.name == "S") return detail::read_matrix(sec, dim);
  throw ConfigError("gauge file has no [S] section", 0);
}

inline ImmersionSpec immersion_spec(const RunConfig& c, const ModelDefinition& m) {
  ImmersionSpec s;
  if (c.immersion == "sym-tafel") {
    try {
      s.alpha = parse_expr(c.alpha, ParseOptions{std::set<std::string>{}});
    } catch (const ParseError& e) {
      throw UsageError(std::string("--alpha: ") + e.what());
    }
  } else if (c.immersion == "gauge") {
    if (c.S.empty()) throw UsageError("--immersion gauge needs --S");
    s.S = resolve_S(c.S, m.dim);
  } else if (c.immersion == "generalized") {
    if (c.characteristics.size() != 1) throw UsageError("--immersion generalized needs one --characteristic");
    s.characteristic = m.characteristic(c.characteristics.front());
  } else {
    throw UsageError("--immersion must be sym-tafel, gauge or generalized");
  }
  try {
    s.validate(m);
  } catch (const DimensionError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return s;
}

inline Built build_direct(const RunConfig& c, const Resolved& r, const ImmersionSpec& s, const GridSpec& g) {
  const auto& m = r.model;
  const auto& fam = *r.family;
  auto wave = integrate_wavefunction(m, fam, r.params, r.lam, g);
  auto tangents = evaluate_tangents(m, s, wave);
  if (s.alpha) {
    SymTafelOptions o;
    o.dlam = c.epsilon;
    auto F = immersion_symtafel(m, fam, r.params, r.lam, g, *s.alpha, o);
    auto h = F.halving;
    return {std::move(wave), std::move(tangents), std::move(F), std::nullopt, h};
  }
  if (s.S) {
    auto F = immersion_gauge(wave, *s.S);
    return {std::move(wave), std::move(tangents), std::move(F), std::nullopt, std::nullopt};
  }
  VariationOptions vo;
  vo.epsilon = c.epsilon;
  auto var = variation_wavefunction(m, fam, r.params, *s.characteristic, r.lam, g, vo);
  auto F = immersion_generalized(wave, var);
  return {std::move(wave), std::move(tangents), std::move(F), std::nullopt, var.halving};
}

inline Built build_from_tangents(const RunConfig& c, const Resolved& r, const ImmersionSpec& s, const GridSpec& g) {
  auto surf = integrate_surface_from_tangents(r.model, s, *r.family, r.params, r.lam, g, c.seed);
  return {std::move(surf.wave), std::move(surf.tangents), std::move(surf.F), surf.closure, std::nullopt};
}

inline Json closure_json(const ClosureAudit& a) {
  return Json{{"rectangles", a.rectangles}, {"max_ratio", a.max_ratio}, {"threshold", a.threshold}, {"passed", a.passed}};
}

inline int cmd_surface(const RunConfig& c, std::ostream& out, std::ostream& log) {
  if (c.format != "obj" && c.format != "csv") throw UsageError("--format must be obj or csv");
  Resolved r = resolve(c, "-2,2,161,-2,2,161");
  ImmersionSpec s = immersion_spec(c, r.model);
  const auto& t = r.thresholds;
  auto build = [&](const GridSpec& g) { return c.from_tangents ? build_from_tangents(c, r, s, g) : build_direct(c, r, s, g); };

  Json report = header("surface", c, r);
  report["immersion"] = c.immersion;
  report["route"] = c.from_tangents ? "from-tangents" : "direct";
  if (s.alpha) report["alpha"] = to_string(*s.alpha);
  if (s.characteristic) report["characteristic"] = s.characteristic->name;
  if (!c.S.empty()) report["S"] = c.S;
  Checks checks(log);

  GridSpec fine_grid = refine(r.grid);
  Built coarse = build(r.grid);
  Built fine = build(fine_grid);
  auto tc = tangent_consistency(coarse.F, coarse.tangents, coarse.wave);
  auto tf = tangent_consistency(fine.F, fine.tangents, fine.wave);
  checks.add(convergence_json("tangent_consistency", tc, r.grid, tf, fine_grid, t),
             "coarse " + sci(tc.max_abs) + " fine " + sci(tf.max_abs));
  if (coarse.halving) report["halving"] = halving_json(*coarse.halving);

  if (coarse.closure) {
    ClosureAudit a = *fine.closure;
    a.threshold = t.closure;
    a.passed = a.max_ratio < t.closure;
    Json j{{"name", "closure"}, {"passed", a.passed}, {"coarse", closure_json(*coarse.closure)}, {"fine", closure_json(a)}};
    checks.add(j, "fine ratio " + sci(a.max_ratio));
  }

  if (c.cross_check) {
    Built other = c.from_tangents ? build_direct(c, r, s, r.grid) : build_from_tangents(c, r, s, r.grid);
    double d = max_difference(coarse.F.f, other.F.f);
    Json j{{"name", "cross_route"}, {"passed", d < t.cross}, {"discrepancy", d}};
    if (other.closure) j["closure"] = closure_json(*other.closure);
    checks.add(j, "discrepancy " + sci(d));
  }

  auto rank = rank_summary(coarse.tangents, coarse.wave);
  report["rank"] = Json{{"nodes", rank.nodes}, {"dependent", rank.dependent}, {"min_det", rank.min_det}};

  if (s.S) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i = 0; i < r.grid.n1; ++i)
      for (int j = 0; j < r.grid.n2; ++j) {
        NumericMatrix raw = coarse.F.f(i, j) + coarse.F.offset;
        double n = std::sqrt(std::max(0.0, inner_product(raw, raw)));
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
    report["F_norm"] = Json{{"min", lo}, {"max", hi}};
    log << "F norm in [" << sci(lo) << ", " << sci(hi) << "]\n";
  }

  std::filesystem::path dir = c.out.empty() ? std::filesystem::path(".") : std::filesystem::path(c.out);
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "immersion.json", dump_report(immersion_json(coarse.F)));
  Json files = Json::array({"immersion.json"});
  if (r.model.dim == 2) {
    auto mesh = to_mesh(coarse.F);
    std::string mesh_name = std::string("surface.") + c.format;
    export_mesh(mesh, c.format == "obj" ? MeshFormat::Obj : MeshFormat::Csv, dir / mesh_name);
    files.push_back(mesh_name);
    report["mesh"] = Json{{"valid", mesh.valid_count()}, {"nodes", mesh.points.size()}, {"max_defect", mesh.max_defect}};
    if (r.grid.n1 >= 7 && r.grid.n2 >= 7) {
      auto curv = curvature(mesh);
      write_file_atomic(dir / "curvature.json", dump_report(curvature_json(curv)));
      files.push_back("curvature.json");
      report["curvature"] = curvature_summary_json(curv.summary);
      report["curvature"]["folded"] = curv.folded;
      report["curvature"]["degenerate"] = curv.degenerate;
      log << "K mean " << sci(curv.summary.K_mean) << " relative spread " << sci(curv.summary.K_relative_spread())
          << "\n";
    }
  }
  files.push_back("surface.json");
  report["files"] = files;
  report["checks"] = checks.list();
  report["passed"] = checks.all_passed();
  write_file_atomic(dir / "surface.json", dump_report(report));
  (void)out;
  return checks.all_passed() ? kPass : kFail;
}

// ---------------------------------------------------------------------------
// models

inline int cmd_models(const std::string& action, const std::string& name, const RunConfig& c, std::ostream& out) {
  if (action == "list") {
    for (const auto& n : builtin_names()) out << n << "\n";
    return kPass;
  }
  if (!c.model_file.empty()) {
    out << serialize(resolve_model(c));
    return kPass;
  }
  if (name.empty()) throw UsageError("models show needs a model name");
  out << serialize(builtin(name));
  return kPass;
}

// ---------------------------------------------------------------------------

inline void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--model", c.model, "built-in model name");
  sub->add_option("--model-file", c.model_file, "model definition file");
  sub->add_option("--solution", c.solution, "solution family");
  sub->add_option("--param", c.params, "family parameter name=value (repeatable; --name value also works)");
  sub->add_option("--lambda", c.lambda, "spectral parameter re[,im]");
  sub->add_option("--grid", c.grid, "x1min,x1max,n1,x2min,x2max,n2");
  sub->add_option("--characteristic", c.characteristics, "characteristic name (repeatable)");
  sub->add_option("--epsilon", c.epsilon, "finite-difference step for variations and d/dlambda");
  sub->add_option("--seed", c.seed, "seed for randomized checks");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--threshold", c.thresholds, "override a threshold name=value (repeatable)");
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  args = rewrite_parameter_flags(args);
  RunConfig c;
  CLI::App app{"solsurf: soliton surfaces from Lax pairs and their symmetries"};
  app.require_subcommand(1);
  auto* verify = app.add_subcommand("verify", "run the Lax pair, wavefunction and symmetry checks");
  add_common(verify, c);
  auto* surface = app.add_subcommand("surface", "build an immersion, its mesh and curvature");
  add_common(surface, c);
  surface->add_option("--immersion", c.immersion, "sym-tafel | gauge | generalized")->required();
  surface->add_option("--alpha", c.alpha, "alpha(lambda) for sym-tafel");
  surface->add_option("--S", c.S, "gauge matrix: e1, e2, e3 or a file with an [S] section");
  surface->add_option("--format", c.format, "obj | csv");
  surface->add_flag("--cross-check", c.cross_check, "also build the surface by the other route");
  surface->add_flag("--from-tangents", c.from_tangents, "integrate the tangents instead of evaluating F");
  auto* models = app.add_subcommand("models", "list or show models");
  std::string action, name;
  models->add_option("action", action, "list | show")->required()->check(CLI::IsMember({"list", "show"}));
  models->add_option("name", name, "model name for show");
  models->add_option("--model-file", c.model_file, "show a model file instead");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*verify) return cmd_verify(c, out, err);
    if (*surface) return cmd_surface(c, out, err);
    return cmd_models(action, name, c, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
  } catch (const SingularLambdaError& e) {
    err << "singular lambda: " << e.what() << "\n";
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
  } catch (const MissingBindingError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const IntegrationError& e) {
    err << "integration failed: " << e.what() << "\n";
    return kFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFail;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace solsurf::cli
