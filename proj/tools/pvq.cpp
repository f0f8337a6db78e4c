// pvq: command-line front end for the pvq library.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pvq/io.hpp"

namespace {

using namespace pvq;
using Json = io::Json;

struct Common {
  std::string poly;
  std::string context_file;
  std::string sigma;
  double L = 0;
  std::string mask_file;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  Tolerances tol;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::BadConfig, "not a number: '" + s + "'");
}

std::vector<std::int64_t> parse_ints(const std::string& s) {
  std::vector<std::int64_t> out;
  for (const auto& item : split(s, ',')) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadConfig, "not an integer: '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_double(item));
  return out;
}

std::vector<Rational> parse_rationals(const std::string& s) {
  std::vector<Rational> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_rational(item));
  return out;
}

/// Pulls --tol-KEY=VALUE arguments out of argv.
std::vector<std::string> extract_tolerances(int argc, char** argv, Tolerances& tol) {
  std::map<std::string, double*> keys{{"root", &tol.root},         {"unit", &tol.unit},   {"lin", &tol.lin},
                                      {"decay", &tol.decay},       {"boundary", &tol.boundary},
                                      {"mask", &tol.mask},         {"mahler", &tol.mahler},
                                      {"zero", &tol.zero},         {"v_clip", &tol.v_clip}};
  std::vector<std::string> rest;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a.rfind("--tol-", 0) != 0) {
      rest.push_back(a);
      continue;
    }
    auto eq = a.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, "tolerance flags take the form --tol-KEY=VALUE");
    std::string key = a.substr(6, eq - 6);
    std::replace(key.begin(), key.end(), '-', '_');
    auto it = keys.find(key);
    if (it == keys.end()) throw Error(ErrorCode::BadConfig, "unknown tolerance '" + key + "'");
    const double v = parse_double(a.substr(eq + 1));
    if (!(v > 0)) throw Error(ErrorCode::BadConfig, "tolerances must be positive");
    *it->second = v;
  }
  return rest;
}

ContextPtr load_context(const Common& c) {
  if (!c.poly.empty() && !c.context_file.empty()) throw Error(ErrorCode::BadConfig, "give --poly or --context, not both");
  if (!c.poly.empty()) return Context::build(parse_ints(c.poly), 53, c.tol);
  if (!c.context_file.empty()) return io::context_from_json(io::parse_json(io::read_file(c.context_file), c.context_file));
  throw Error(ErrorCode::BadConfig, "a context is required (--poly or --context)");
}

/// One value: uniform window; n - 1 values: sigma_2..sigma_n; n values: full vector.
Window load_window(const Context& ctx, const std::string& text) {
  if (text.empty()) throw Error(ErrorCode::BadConfig, "--sigma is required");
  auto s = parse_doubles(text);
  const auto n = static_cast<std::size_t>(ctx.degree());
  if (s.size() == 1) return Window::uniform(ctx, s[0]);
  if (s.size() + 1 == n) return Window::from_internal(ctx, s);
  return Window(ctx, s);
}

double require_L(const Common& c) {
  if (!(c.L > 0)) throw Error(ErrorCode::BadConfig, "--L must be positive");
  return c.L;
}

RefinementMask load_mask(const Common& c) {
  if (c.mask_file.empty()) throw Error(ErrorCode::BadConfig, "--mask is required");
  return io::mask_from_json(io::parse_json(io::read_file(c.mask_file), c.mask_file), c.tol);
}

Element parse_element(const ContextPtr& ctx, const std::string& text) {
  auto coords = parse_rationals(text);
  if (coords.size() > static_cast<std::size_t>(ctx->degree()))
    throw Error(ErrorCode::BadConfig, "element has more coordinates than the field degree");
  coords.resize(static_cast<std::size_t>(ctx->degree()), Rational(0));
  return Element(ctx, coords);
}

void write_output(const Common& c, const std::string& name, const std::string& text) {
  if (c.out_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw Error(ErrorCode::BadConfig, "cannot create '" + c.out_dir + "': " + ec.message());
  io::write_file((std::filesystem::path(c.out_dir) / name).string(), text);
}

Json roots_json(const Context& ctx) {
  Json out = Json::array();
  for (const auto& r : ctx.roots()) {
    if (r.imag() == 0)
      out.push_back(static_cast<double>(r.real()));
    else
      out.push_back({static_cast<double>(r.real()), static_cast<double>(r.imag())});
  }
  return out;
}

Json complex_json(Complex z) { return {z.real(), z.imag()}; }

CheckReport delone_report(const Quasilattice& q, double margin) {
  auto d = delone_constants(q, margin);
  CheckReport r{"QL2 uniform discreteness", d.violations, {}};
  r.add("min_gap", d.min_gap);
  r.add("max_gap", d.max_gap);
  r.add("bound", d.bound);
  return r;
}

CheckReport meyer_report(const Quasilattice& q) {
  auto m = check_meyer(q);
  CheckReport r{"Meyer property", m.violations, {}};
  r.add("pairs_checked", static_cast<double>(m.pairs_checked));
  r.add("corrections", static_cast<double>(m.corrections.size()));
  r.add("max_steps", static_cast<double>(m.max_steps));
  r.add("double_window_gaps", static_cast<double>(m.double_window_gaps));
  return r;
}

std::string expansion_csv(const SubstitutionRule& rule, const std::vector<ExpandedPoint>& pts) {
  std::ostringstream out;
  out << "value";
  for (int i = 0; i < rule.context->degree(); ++i) out << ",l_" << i;
  out << ",type\n";
  for (const auto& p : pts) {
    out << io::fmt(p.value);
    for (auto v : p.preimage) out << ',' << v;
    out << ',' << p.type << '\n';
  }
  return out.str();
}

std::vector<Sample> load_samples(const std::string& path) {
  std::vector<Sample> out;
  std::istringstream in(io::read_file(path));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto cells = split(line, ',');
    if (cells.size() != 2) throw Error(ErrorCode::BadConfig, "sample rows need x,value");
    out.push_back({parse_double(cells[0]), parse_double(cells[1])});
  }
  return out;
}

void emit(const Json& j) { std::cout << io::dump(j) << '\n'; }

Json error_json(ErrorCode code, const std::string& message) {
  return {{"error", std::string(to_string(code))}, {"message", message}, {"exit_code", exit_code(code)}};
}

int fail(ErrorCode code, const std::string& message, const Json& extra = Json::object()) {
  Json j = error_json(code, message);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::cerr << j.dump() << '\n';
  return exit_code(code);
}

}  // namespace

int main(int argc, char** argv) {
  Common c;
  std::vector<std::string> args;
  try {
    args = extract_tolerances(argc, argv, c.tol);
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  }

  CLI::App app{"Pisot quasilattices, substitution rules and refinable masks"};
  app.require_subcommand(1);
  app.add_option("--poly", c.poly, "minimal polynomial coefficients c_0..c_{n-1}, monic implied")->allow_extra_args(false);
  app.add_option("--context", c.context_file, "context JSON file");
  app.add_option("--sigma", c.sigma, "window: one value, sigma_2..sigma_n, or the full vector");
  app.add_option("--L", c.L, "half-width");
  app.add_option("--mask", c.mask_file, "mask JSON file");
  app.add_option("--out", c.out_dir, "output directory");
  app.add_option("--seed", c.seed, "seed for sampled estimators");
  app.add_option("--threads", c.threads, "cap on concurrent tasks")->check(CLI::PositiveNumber);

  std::function<void()> action;
  auto group = [&](const std::string& name, const std::string& help) {
    auto* g = app.add_subcommand(name, help);
    g->require_subcommand(1);
    g->fallthrough();
    return g;
  };
  auto command = [&](CLI::App* g, const std::string& name, const std::string& help, std::function<void()> run) {
    auto* s = g->add_subcommand(name, help);
    s->fallthrough();
    s->callback([&action, run] { action = run; });
    return s;
  };

  // ---- pv
  auto* pv = group("pv", "PV number contexts");
  command(pv, "classify", "roots and PV/Salem classification", [&] {
    auto ctx = load_context(c);
    Json j{{"classification", std::string(to_string(ctx->classification()))},
           {"degree", ctx->degree()},
           {"lambda", static_cast<double>(ctx->lambda())},
           {"unit_constant", ctx->unit_constant()},
           {"roots", roots_json(*ctx)}};
    write_output(c, "context.json", io::dump(io::to_json(*ctx)) + "\n");
    emit(j);
  });
  std::string alpha_text = "1";
  int k_max = 40;
  auto* pvnorm = command(pv, "pvnorm", "distance of lambda^k alpha to the nearest integer", [&] {
    auto ctx = load_context(c);
    auto terms = pvnorm_sequence(parse_element(ctx, alpha_text), k_max);
    Json rows = Json::array();
    std::ostringstream csv;
    csv << "k,nearest,distance\n";
    for (const auto& t : terms) {
      rows.push_back({{"k", t.k}, {"nearest", t.nearest.str()}, {"distance", static_cast<double>(t.distance)}});
      csv << t.k << ',' << t.nearest.str() << ',' << io::fmt(t.distance) << '\n';
    }
    write_output(c, "pvnorm.csv", csv.str());
    emit({{"terms", rows}});
  });
  pvnorm->add_option("--alpha", alpha_text, "power-basis coordinates, rationals allowed");
  pvnorm->add_option("--k-max", k_max);

  // ---- qlat
  auto* ql = group("qlat", "cut-and-project quasilattices");
  double budget = 1e8;
  auto* gen = command(ql, "generate", "points of L(sigma) in [-L, L]", [&] {
    auto ctx = load_context(c);
    GenerateOptions opt;
    opt.boundary_tol = c.tol.boundary;
    opt.cell_budget = budget;
    auto q = generate(ctx, load_window(*ctx, c.sigma), require_L(c), opt);
    write_output(c, "points.csv", io::points_csv(q));
    Json j{{"points", q.size()}, {"boundary_skipped", q.boundary_skipped()}};
    if (q.size() > 0) {
      j["min_value"] = static_cast<double>(q.points().front().value);
      j["max_value"] = static_cast<double>(q.points().back().value);
    }
    emit(j);
  });
  gen->add_option("--budget", budget, "enumeration cell budget");
  double margin = 5;
  auto* gaps = command(ql, "gaps", "gap alphabet and Delone constants", [&] {
    auto ctx = load_context(c);
    auto q = generate(ctx, load_window(*ctx, c.sigma), require_L(c));
    Json letters = Json::array();
    for (const auto& g : gap_alphabet(q, margin))
      letters.push_back({{"length", g.preimage}, {"value", static_cast<double>(g.value)}, {"multiplicity", g.multiplicity}});
    auto d = delone_constants(q, margin);
    Json j{{"letters", letters},
           {"min_gap", d.min_gap},
           {"max_gap", d.max_gap},
           {"min_gap_bound", d.bound},
           {"violations", d.violations}};
    write_output(c, "gaps.json", io::dump(j) + "\n");
    emit(j);
  });
  gaps->add_option("--margin", margin, "interior margin");
  std::string kind;
  std::string xi_text;
  auto* check = command(ql, "check", "lemma checks: group-laws, inflation, meyer, delone", [&] {
    auto ctx = load_context(c);
    const auto w = load_window(*ctx, c.sigma);
    const double L = require_L(c);
    CheckReport r;
    if (kind == "group-laws") {
      r = check_group_laws(ctx, w, xi_text.empty() ? w : load_window(*ctx, xi_text), L);
    } else if (kind == "inflation") {
      r = check_inflation(generate(ctx, w, L), c.tol.boundary);
    } else if (kind == "meyer") {
      r = meyer_report(generate(ctx, w, L));
    } else if (kind == "delone") {
      r = delone_report(generate(ctx, w, L), margin);
    } else {
      throw Error(ErrorCode::UnknownCommand, "unknown check '" + kind + "'");
    }
    Json j = io::to_json(r);
    write_output(c, "report.json", io::dump(j) + "\n");
    emit(j);
  });
  check->add_option("--kind", kind, "group-laws | inflation | meyer | delone")->required();
  check->add_option("--xi", xi_text, "second window for group-laws");
  check->add_option("--margin", margin, "interior margin for delone");

  // ---- subst
  auto* sb = group("subst", "substitution rules");
  bool strict = false;
  std::string rule_file;
  auto rule_of = [&] {
    if (!rule_file.empty()) return io::rule_from_json(io::parse_json(io::read_file(rule_file), rule_file));
    auto ctx = load_context(c);
    DeriveOptions opt;
    opt.refine_types = !strict;
    opt.generate.boundary_tol = c.tol.boundary;
    return derive_rule(ctx, load_window(*ctx, c.sigma), require_L(c), opt);
  };
  auto* derive = command(sb, "derive", "derive the substitution rule of L(sigma)", [&] {
    auto rule = rule_of();
    write_output(c, "rule.json", io::dump(io::to_json(rule)) + "\n");
    emit({{"types", rule.size()},
          {"letters", rule.letters.size()},
          {"refinement_rounds", rule.refinement_rounds},
          {"singular_origin", rule.singular_origin},
          {"spectral_radius", spectral_radius(rule.incidence())},
          {"lambda", static_cast<double>(rule.context->lambda())}});
  });
  derive->add_flag("--strict", strict, "tile types are the gap letters; no refinement");
  int k_steps = 0;
  auto* exp = command(sb, "expand", "tiles of lambda^k [0, c_1) by substitution", [&] {
    auto rule = rule_of();
    auto pts = expand(rule, k_steps);
    write_output(c, "expand.csv", expansion_csv(rule, pts));
    Json values = Json::array();
    if (pts.size() <= 64)
      for (const auto& p : pts) values.push_back(static_cast<double>(p.value));
    Json j{{"k", k_steps}, {"count", pts.size()}};
    if (!values.empty()) j["values"] = values;
    emit(j);
  });
  exp->add_option("--k", k_steps, "substitution steps")->required();
  exp->add_option("--rule", rule_file, "rule JSON file (otherwise derived)");
  derive->add_option("--rule", rule_file, "rule JSON file to re-validate");
  auto* vm = command(sb, "mask", "0/1 matrices of the vector refinement equation", [&] {
    auto rule = rule_of();
    Json out = Json::array();
    for (const auto& m : vector_mask(rule)) {
      Json a = Json::array();
      for (Eigen::Index i = 0; i < m.a.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.a.cols(); ++k) row.push_back(m.a(i, k));
        a.push_back(row);
      }
      out.push_back({{"offset", m.offset}, {"value", static_cast<double>(m.value)}, {"matrix", a}});
    }
    Json j{{"lambda", static_cast<double>(rule.context->lambda())}, {"matrices", out}};
    write_output(c, "vector_mask.json", io::dump(j) + "\n");
    emit(j);
  });
  vm->add_option("--rule", rule_file, "rule JSON file (otherwise derived)");

  // ---- refine
  auto* rf = group("refine", "refinement masks");
  MahlerOptions mahler_opt;
  auto* mahler = command(rf, "mahler", "Mahler measure of the mask polynomial", [&] {
    auto m = load_mask(c);
    Json j = io::to_json(mahler_mask(m, c.tol, mahler_opt));
    j["rank"] = m.rank();
    emit(j);
  });
  mahler->add_option("--start-grid", mahler_opt.start_grid);
  mahler->add_option("--max-samples", mahler_opt.max_samples);
  command(rf, "rho", "rho(f) = -ln M(A) / ln|lambda|", [&] {
    auto m = load_mask(c);
    auto M = mahler_mask(m, c.tol);
    emit({{"rho", rho(m, c.tol)}, {"mahler", M.value}, {"method", std::string(to_string(M.method))}});
  });
  int spu = 0;
  auto* hat = command(rf, "hat", "(1 / 2L ln L) integral of ln|f^| over [-L, L]", [&] {
    auto m = load_mask(c);
    MeanLogHatOptions opt;
    if (spu > 0) opt.samples_per_unit = spu;
    auto r = mean_log_hat(m, require_L(c), opt, c.tol);
    emit({{"value", r.value}, {"target", -rho(m, c.tol)}, {"samples", r.samples}, {"clipped", r.clipped}});
  });
  hat->add_option("--spu", spu, "samples per unit length");
  auto* ml = command(rf, "meanlog", "(1 / 2L) integral of ln|A| over [-L, L]", [&] {
    auto m = load_mask(c);
    auto r = mean_log_mask(m, require_L(c), spu > 0 ? spu : 16, c.tol);
    emit({{"value", r.value},
          {"ln_mahler", std::log(mahler_mask(m, c.tol).value)},
          {"samples", r.samples},
          {"clipped", r.clipped},
          {"near_zero", r.near_zero}});
  });
  ml->add_option("--spu", spu, "samples per unit length");
  std::string v_text = "0.01,0.05,0.1,0.5";
  std::size_t samples = 100000;
  auto* sl = command(rf, "sublevel", "measure of {|A| <= v} and the fitted constant", [&] {
    auto m = load_mask(c);
    auto r = sublevel_measure(m, parse_doubles(v_text), require_L(c), samples, c.seed);
    Json meas = Json::array();
    std::ostringstream csv;
    csv << "v,measure\n";
    for (const auto& [v, mu] : r.measure) {
      meas.push_back({v, mu});
      csv << io::fmt(v) << ',' << io::fmt(mu) << '\n';
    }
    write_output(c, "sublevel.csv", csv.str());
    emit({{"measure", meas},
          {"constant", r.constant},
          {"constant_doubled", r.constant_doubled},
          {"stable", r.stable},
          {"seed", c.seed}});
  });
  sl->add_option("--v", v_text, "increasing levels");
  sl->add_option("--samples", samples);
  auto* erdos = command(rf, "erdos", "f^(alpha lambda^k) with exact arguments", [&] {
    auto m = load_mask(c);
    if (!m.dilation().context) throw Error(ErrorCode::NotPV, "erdos needs an algebraic dilation");
    auto r = erdos_sequence(m, parse_element(m.dilation().context, alpha_text), k_max, c.tol);
    write_output(c, "erdos.csv", io::sequence_csv(r.terms));
    emit({{"base", complex_json(r.base)},
          {"plateau", r.plateau},
          {"last", complex_json(r.terms.back().value)},
          {"last_modulus", std::abs(r.terms.back().value)}});
  });
  erdos->add_option("--alpha", alpha_text, "power-basis coordinates of alpha");
  erdos->add_option("--k-max", k_max);
  std::string q_text;
  auto* orbit = command(rf, "orbit", "mean of ln|P_trig| over a torus orbit", [&] {
    auto m = load_mask(c);
    const auto& ctx = m.dilation().context;
    if (!ctx) throw Error(ErrorCode::NotPV, "orbit needs an algebraic dilation");
    std::vector<Rational> q = q_text.empty() ? orbit_start(parse_element(ctx, alpha_text)) : parse_rationals(q_text);
    auto r = orbit_mean(ctx, m, q, c.tol);
    Json cyc = Json::array();
    for (const auto& x : r.cycle) {
      Json row = Json::array();
      for (const auto& v : x) row.push_back(rational_to_string(v));
      cyc.push_back(row);
    }
    emit({{"cycle_length", r.cycle_length}, {"preperiod", r.preperiod}, {"mean", r.mean}, {"cycle", cyc}});
  });
  orbit->add_option("--q", q_text, "torus point, rational coordinates");
  orbit->add_option("--alpha", alpha_text, "start at (Tr(alpha lambda^i))");

  // ---- mra
  auto* mr = group("mra", "multiresolution nesting");
  command(mr, "xi", "xi_j = (1 - |lambda_j|) sigma_j", [&] {
    auto ctx = load_context(c);
    emit({{"xi", derive_xi(*ctx, load_window(*ctx, c.sigma)).sigma()}});
  });
  std::string tau_text;
  bool non_strict = false;
  std::size_t bins = 10;
  auto* nest = command(mr, "nesting", "lambda tau + tau_j in L(sigma)", [&] {
    auto ctx = load_context(c);
    std::vector<Element> taus;
    if (!tau_text.empty()) {
      for (const auto& t : split(tau_text, ';')) taus.push_back(parse_element(ctx, t));
    } else if (!c.mask_file.empty()) {
      auto m = load_mask(c);
      if (!m.dilation().context || !m.dilation().context->same_field(*ctx))
        throw Error(ErrorCode::ContextMismatch, "mask dilation is not the context's lambda");
      for (const auto& t : m.translations()) taus.emplace_back(ctx, t);
    } else {
      throw Error(ErrorCode::BadConfig, "give translations with --tau or --mask");
    }
    auto cfg = make_config(ctx, load_window(*ctx, c.sigma), taus, !non_strict, c.tol);
    Json j = io::to_json(check_nesting(cfg, require_L(c), bins, c.tol));
    j["xi"] = cfg.xi.sigma();
    j["translation_margins"] = cfg.margins;
    write_output(c, "nesting.json", io::dump(j) + "\n");
    emit(j);
  });
  nest->add_option("--tau", tau_text, "translations: coordinates separated by ',', elements by ';'");
  nest->add_flag("--non-strict", non_strict, "keep translations outside L(xi)");
  nest->add_option("--bins", bins, "margin histogram bins");
  std::string samples_file;
  int level = 0;
  auto* proj = command(mr, "project", "piecewise-constant projection at level k", [&] {
    auto ctx = load_context(c);
    auto q = generate(ctx, load_window(*ctx, c.sigma), require_L(c));
    auto f = project_pc(q, load_samples(samples_file), level);
    for (const auto& w : f.warnings) std::cerr << Json{{"warning", w}}.dump() << '\n';
    write_output(c, "projection.csv", io::projection_csv(f));
    emit({{"level", f.level}, {"intervals", f.values.size()}, {"empty_intervals", f.empty_intervals}});
  });
  proj->add_option("--samples", samples_file, "CSV with header and rows x,value")->required();
  proj->add_option("--k", level, "level");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const std::string what = e.what();
    const bool command_error = e.get_name() == "ExtrasError" ||
                               (e.get_name() == "RequiredError" && what.find("subcommand") != std::string::npos);
    return fail(command_error ? ErrorCode::UnknownCommand : ErrorCode::BadConfig, what);
  }

  try {
    if (!action) return fail(ErrorCode::UnknownCommand, "no command given");
    action();
  } catch (const ZeroHitError& e) {
    return fail(e.code(), e.what(), {{"exponent", e.exponent()}});
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::BadConfig, e.what());
  }
  return 0;
}
