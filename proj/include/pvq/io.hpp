#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvq/mra.hpp"
#include "pvq/qlat.hpp"
#include "pvq/refine.hpp"
#include "pvq/subst.hpp"

namespace pvq::io {

using Json = nlohmann::json;

/// 17 significant digits.
inline std::string fmt(long double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
  return buf;
}

namespace detail {

inline void dump(const Json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const std::string colon = indent > 0 ? ": " : ":";
  if (j.is_number_float()) {
    const double v = j.get<double>();
    out += std::isfinite(v) ? fmt(v) : "null";
  } else if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ',';
      first = false;
      out += pad + Json(it.key()).dump() + colon;
      dump(it.value(), indent, depth + 1, out);
    }
    out += close + '}';
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    out += '[';
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i > 0) out += ',';
      out += pad;
      dump(j[i], indent, depth + 1, out);
    }
    out += close + ']';
  } else {
    out += j.dump();
  }
}

}  // namespace detail

/// JSON text with every floating-point number at 17 significant digits.
inline std::string dump(const Json& j, int indent = 2) {
  std::string out;
  detail::dump(j, indent, 0, out);
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::BadConfig, "cannot write '" + path + "'");
  out << text;
}

inline Json parse_json(const std::string& text, const std::string& what = "input") {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadConfig, what + " is not valid JSON: " + e.what());
  }
}

namespace detail {

template <class T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::BadConfig, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("field '") + key + "': " + e.what());
  }
}

inline Rational rational(const Json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long long>());
  throw Error(ErrorCode::BadConfig, "rational coordinates must be integers or \"p/q\" strings");
}

inline Json preimage(const Preimage& l) { return Json(l); }

inline Preimage preimage(const Json& j, std::size_t n) {
  Preimage l;
  try {
    l = j.get<Preimage>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::BadConfig, "preimage must be an integer array");
  }
  if (l.size() != n) throw Error(ErrorCode::BadConfig, "preimage has the wrong length");
  return l;
}

}  // namespace detail

// ---- contexts

inline Json to_json(const Context& ctx) {
  return {{"coeffs", ctx.coeffs()}, {"precision_bits", ctx.precision_bits()}};
}

/// Roots are always recomputed from the coefficients.
inline ContextPtr context_from_json(const Json& j) {
  auto coeffs = detail::get<std::vector<std::int64_t>>(j, "coeffs");
  const int bits = j.contains("precision_bits") ? detail::get<int>(j, "precision_bits") : 53;
  return Context::build(std::move(coeffs), bits);
}

// ---- masks

inline Json to_json(const RefinementMask& m) {
  Json out;
  const auto& d = m.dilation();
  if (d.algebraic() && d.degree() >= 2)
    out["lambda"] = {{"poly", d.context->coeffs()}, {"precision_bits", d.context->precision_bits()}};
  else
    out["lambda"] = {{"real", static_cast<double>(d.value)}};
  Json coeffs = Json::array();
  for (const auto& a : m.coeffs()) coeffs.push_back({a.real(), a.imag()});
  out["coeffs"] = coeffs;
  Json taus = Json::array();
  for (const auto& t : m.translations()) {
    Json row = Json::array();
    for (const auto& c : t) row.push_back(rational_to_string(c));
    taus.push_back(row);
  }
  out["translations"] = taus;
  return out;
}

inline RefinementMask mask_from_json(const Json& j, const Tolerances& tol = {}) {
  const auto lam = detail::get<Json>(j, "lambda");
  Dilation dil;
  if (lam.contains("poly")) {
    const int bits = lam.contains("precision_bits") ? detail::get<int>(lam, "precision_bits") : 53;
    dil = Dilation::algebraic(Context::build(detail::get<std::vector<std::int64_t>>(lam, "poly"), bits));
  } else if (lam.contains("real")) {
    dil = Dilation::real(detail::get<double>(lam, "real"));
  } else {
    throw Error(ErrorCode::BadConfig, "lambda needs 'poly' or 'real'");
  }
  std::vector<Complex> coeffs;
  for (const auto& c : detail::get<Json>(j, "coeffs")) {
    if (c.is_number()) {
      coeffs.emplace_back(c.get<double>(), 0.0);
    } else if (c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number()) {
      coeffs.emplace_back(c[0].get<double>(), c[1].get<double>());
    } else {
      throw Error(ErrorCode::BadConfig, "coefficients must be numbers or [re, im] pairs");
    }
  }
  std::vector<std::vector<Rational>> taus;
  for (const auto& t : detail::get<Json>(j, "translations")) {
    std::vector<Rational> row;
    if (t.is_array())
      for (const auto& c : t) row.push_back(detail::rational(c));
    else
      row.push_back(detail::rational(t));
    taus.push_back(std::move(row));
  }
  return build_mask(std::move(dil), std::move(coeffs), std::move(taus), tol);
}

// ---- substitution rules

inline Json to_json(const SubstitutionRule& r) {
  Json letters = Json::array();
  for (const auto& g : r.letters)
    letters.push_back({{"length", g.preimage}, {"value", static_cast<double>(g.value)}, {"multiplicity", g.multiplicity}});
  Json types = Json::array();
  for (const auto& t : r.types)
    types.push_back({{"length", t.length},
                     {"value", static_cast<double>(t.value)},
                     {"letter", t.letter},
                     {"occurrences", t.occurrences}});
  Json dec = Json::array();
  for (const auto& d : r.decomposition) {
    Json row = Json::array();
    for (const auto& c : d) row.push_back({{"offset", c.offset}, {"type", c.type}});
    dec.push_back(row);
  }
  const Eigen::MatrixXd M = r.incidence();
  Json inc = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(static_cast<long long>(M(i, k)));
    inc.push_back(row);
  }
  return {{"context", to_json(*r.context)},
          {"letters", letters},
          {"types", types},
          {"decomposition", dec},
          {"incidence", inc},
          {"refinement_rounds", r.refinement_rounds},
          {"singular_origin", r.singular_origin}};
}

/// Lengths are recomputed from the exact preimages and the rule is validated.
inline SubstitutionRule rule_from_json(const Json& j) {
  SubstitutionRule r;
  r.context = context_from_json(detail::get<Json>(j, "context"));
  const auto n = static_cast<std::size_t>(r.context->degree());
  auto value = [&](const Preimage& l) { return embed_preimage(*r.context, l)[0].real(); };
  for (const auto& g : detail::get<Json>(j, "letters")) {
    Preimage l = detail::preimage(detail::get<Json>(g, "length"), n);
    r.letters.push_back({value(l), l, detail::get<std::size_t>(g, "multiplicity")});
  }
  for (const auto& t : detail::get<Json>(j, "types")) {
    Preimage l = detail::preimage(detail::get<Json>(t, "length"), n);
    const int letter = detail::get<int>(t, "letter");
    if (letter < 0 || static_cast<std::size_t>(letter) >= r.letters.size() || r.letters[static_cast<std::size_t>(letter)].preimage != l)
      throw Error(ErrorCode::BadConfig, "tile type does not match its letter");
    r.types.push_back({l, value(l), letter, detail::get<std::size_t>(t, "occurrences")});
  }
  for (const auto& d : detail::get<Json>(j, "decomposition")) {
    std::vector<Child> row;
    for (const auto& c : d) row.push_back({detail::preimage(detail::get<Json>(c, "offset"), n), detail::get<int>(c, "type")});
    r.decomposition.push_back(std::move(row));
  }
  r.refinement_rounds = j.contains("refinement_rounds") ? detail::get<std::size_t>(j, "refinement_rounds") : 0;
  r.singular_origin = j.contains("singular_origin") && detail::get<bool>(j, "singular_origin");
  if (auto why = validate_rule(r); !why.empty()) throw Error(ErrorCode::BadConfig, "invalid rule: " + why);
  return r;
}

// ---- reports

inline Json to_json(const CheckReport& r) {
  Json details = Json::array();
  for (const auto& [k, v] : r.details) details.push_back({{"name", k}, {"value", v}});
  return {{"lemma", r.lemma}, {"violations", r.violations}, {"details", details}};
}

inline CheckReport report_from_json(const Json& j) {
  CheckReport r{detail::get<std::string>(j, "lemma"), detail::get<std::size_t>(j, "violations"), {}};
  for (const auto& d : detail::get<Json>(j, "details")) r.add(detail::get<std::string>(d, "name"), detail::get<double>(d, "value"));
  return r;
}

inline Json to_json(const NestingReport& r) {
  Json w = Json::array();
  for (const auto& l : r.witnesses) w.push_back(l);
  return {{"violations", r.violations},
          {"checked_pairs", r.checked_pairs},
          {"min_margin", r.min_margin},
          {"histogram", {{"edges", r.edges}, {"counts", r.counts}}},
          {"witnesses", w}};
}

inline Json to_json(const MahlerResult& m) {
  Json out{{"value", m.value}, {"method", std::string(to_string(m.method))}, {"error_estimate", m.error_estimate}};
  if (m.univariate_limit) out["univariate_limit"] = *m.univariate_limit;
  if (m.grid) out["grid"] = m.grid;
  return out;
}

// ---- CSV

inline std::string points_csv(const Quasilattice& q) {
  std::ostringstream out;
  const int n = q.context()->degree();
  out << "value";
  for (int i = 0; i < n; ++i) out << ",l_" << i;
  out << ",margin\n";
  for (const auto& p : q.points()) {
    out << fmt(p.value);
    for (auto v : p.preimage) out << ',' << v;
    out << ',' << fmt(p.margin) << '\n';
  }
  return out.str();
}

namespace detail {

inline std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::size_t columns) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != columns) throw Error(ErrorCode::BadConfig, "CSV row has " + std::to_string(cells.size()) + " columns");
    if (header) {
      header = false;
      continue;
    }
    rows.push_back(std::move(cells));
  }
  if (header) throw Error(ErrorCode::BadConfig, "CSV has no header");
  return rows;
}

inline double number(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadConfig, "bad number '" + s + "' in CSV");
  }
}

}  // namespace detail

/// Reloads a point dump and checks every row against the window: the preimage
/// must be inside, and the stored value and margin must match the recomputed ones.
inline std::vector<LatticePoint> points_from_csv(const std::string& text, const Context& ctx, const Window& w,
                                                 double tol = 1e-9) {
  const auto n = static_cast<std::size_t>(ctx.degree());
  std::vector<LatticePoint> pts;
  for (const auto& row : detail::csv_rows(text, n + 2)) {
    Preimage l;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = detail::number(row[i + 1]);
      if (v != std::floor(v)) throw Error(ErrorCode::BadConfig, "preimage entries must be integers");
      l.push_back(static_cast<long long>(v));
    }
    const auto conj = embed_preimage(ctx, l);
    const double margin = w.margin(conj);
    if (!(margin > 0)) throw Error(ErrorCode::BadConfig, "point outside the window");
    const long double value = conj[0].real();
    if (std::abs(static_cast<double>(value) - detail::number(row[0])) > tol * std::max(1.0L, std::abs(value)) ||
        std::abs(margin - detail::number(row[n + 1])) > tol)
      throw Error(ErrorCode::BadConfig, "stored value or margin disagrees with the preimage");
    pts.push_back({value, std::move(l), margin});
  }
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i - 1].value < pts[i].value)) throw Error(ErrorCode::BadConfig, "points are not increasing");
  return pts;
}

inline std::string sequence_csv(const std::vector<ErdosTerm>& terms) {
  std::ostringstream out;
  out << "k,re,im,modulus\n";
  for (const auto& t : terms)
    out << t.k << ',' << fmt(t.value.real()) << ',' << fmt(t.value.imag()) << ',' << fmt(std::abs(t.value)) << '\n';
  return out.str();
}

inline std::vector<ErdosTerm> sequence_from_csv(const std::string& text) {
  std::vector<ErdosTerm> out;
  for (const auto& row : detail::csv_rows(text, 4)) {
    const double k = detail::number(row[0]);
    out.push_back({static_cast<int>(k), Complex(detail::number(row[1]), detail::number(row[2]))});
    if (std::abs(std::abs(out.back().value) - detail::number(row[3])) > 1e-12 * std::max(1.0, detail::number(row[3])))
      throw Error(ErrorCode::BadConfig, "modulus column disagrees with re, im");
  }
  return out;
}

/// breakpoint,value rows; the last breakpoint closes the final interval and has no value.
inline std::string projection_csv(const PiecewiseConstant& f) {
  std::ostringstream out;
  out << "breakpoint,value\n";
  for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
    out << fmt(f.breakpoints[i]) << ',';
    if (i < f.values.size()) out << fmt(f.values[i]);
    out << '\n';
  }
  return out.str();
}

inline PiecewiseConstant projection_from_csv(const std::string& text, int level = 0) {
  PiecewiseConstant f;
  f.level = level;
  const auto rows = detail::csv_rows(text, 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f.breakpoints.push_back(detail::number(rows[i][0]));
    if (i + 1 < rows.size()) f.values.push_back(detail::number(rows[i][1]));
    else if (!rows[i][1].empty()) throw Error(ErrorCode::BadConfig, "last breakpoint carries a value");
    if (i > 0 && !(f.breakpoints[i - 1] < f.breakpoints[i])) throw Error(ErrorCode::BadConfig, "breakpoints not increasing");
  }
  return f;
}

}  // namespace pvq::io
