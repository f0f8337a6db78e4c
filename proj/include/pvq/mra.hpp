#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "pvq/algnum.hpp"
#include "pvq/qlat.hpp"

namespace pvq {

/// xi_j = (1 - |lambda_j|) sigma_j, so that |lambda_j| sigma_j + xi_j = sigma_j.
inline Window derive_xi(const Context& ctx, const Window& sigma) {
  if (ctx.classification() != Classification::PV) throw Error(ErrorCode::NotPV, "derive_xi needs a PV context");
  if (!ctx.unit_constant()) throw Error(ErrorCode::NotUnitConstant, "derive_xi needs |c_0| = 1");
  std::vector<double> xi(sigma.size(), 0.0);
  for (std::size_t j = 1; j < xi.size(); ++j)
    xi[j] = static_cast<double>((1.0L - std::abs(ctx.roots()[j])) * static_cast<long double>(sigma[j]));
  return Window(ctx, xi);
}

struct MRAConfig {
  ContextPtr context;
  Window sigma;
  Window xi;
  std::vector<Preimage> translations;
  std::vector<double> margins;  // window margin of each tau_j in L(xi)
};

/// Validates the translations against L(xi). With strict = false, translations
/// outside the window are kept (negative controls) and show up as negative margins.
inline MRAConfig make_config(ContextPtr ctx, const Window& sigma, const std::vector<Element>& translations,
                             bool strict = true, const Tolerances& tol = {}) {
  MRAConfig cfg{ctx, sigma, derive_xi(*ctx, sigma), {}, {}};
  for (const auto& t : translations) {
    if (!ctx->same_field(*t.context())) throw Error(ErrorCode::ContextMismatch, "translation from another field");
    Preimage l = t.integer_coords();
    const double m = cfg.xi.margin(embed_preimage(*ctx, l));
    if (strict && !(m > tol.boundary))
      throw Error(ErrorCode::TranslationOutsideWindow,
                  "translation " + std::to_string(static_cast<double>(t.real_value())) + " is not in L(xi)");
    cfg.translations.push_back(std::move(l));
    cfg.margins.push_back(m);
  }
  if (cfg.translations.empty()) throw Error(ErrorCode::BadConfig, "no translations");
  return cfg;
}

struct NestingReport {
  std::size_t violations = 0;
  std::size_t checked_pairs = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::vector<double> edges;          // bin edges over [0, max sigma_j]
  std::vector<std::size_t> counts;    // margins per bin, non-positive ones in the first
  std::vector<Preimage> witnesses;    // first few lambda tau + tau_j outside L(sigma)

  CheckReport to_report() const {
    CheckReport r{"multiresolution nesting", violations, {}};
    r.add("checked_pairs", static_cast<double>(checked_pairs));
    r.add("min_margin", min_margin);
    return r;
  }
};

/// lambda tau + tau_j in L(sigma) for every tau in L(sigma) with |tau| <= L / |lambda|.
inline NestingReport check_nesting(const MRAConfig& cfg, double L, std::size_t bins = 10,
                                   const Tolerances& tol = {}, const GenerateOptions& opt = {}) {
  const auto& ctx = *cfg.context;
  if (bins == 0) throw Error(ErrorCode::BadConfig, "histogram needs at least one bin");
  auto q = generate(cfg.context, cfg.sigma, static_cast<double>(L / std::abs(ctx.lambda())), opt);

  NestingReport out;
  const double top = *std::max_element(cfg.sigma.sigma().begin(), cfg.sigma.sigma().end());
  for (std::size_t b = 0; b <= bins; ++b) out.edges.push_back(top * static_cast<double>(b) / static_cast<double>(bins));
  out.counts.assign(bins, 0);

  for (const auto& p : q.points()) {
    const Preimage scaled = times_lambda(ctx, p.preimage);
    for (const auto& t : cfg.translations) {
      const Preimage l = add(scaled, t);
      const double m = cfg.sigma.margin(embed_preimage(ctx, l));
      ++out.checked_pairs;
      out.min_margin = std::min(out.min_margin, m);
      auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(m / top * static_cast<double>(bins))));
      ++out.counts[std::min(bin, bins - 1)];
      if (!(m > tol.boundary)) {
        ++out.violations;
        if (out.witnesses.size() < 8) out.witnesses.push_back(l);
      }
    }
  }
  return out;
}

/// Breakpoints lambda^{-k} L(sigma), sorted, with exact preimages.
struct Breakpoints {
  std::vector<long double> values;
  std::vector<Preimage> preimages;
};

inline Breakpoints level_breakpoints(const Quasilattice& q, int k) {
  const auto& ctx = *q.context();
  if (k < 0) throw Error(ErrorCode::BadConfig, "level must be non-negative");
  const long double scale = std::pow(ctx.lambda(), static_cast<long double>(-k));
  std::vector<std::pair<long double, Preimage>> pts;
  for (const auto& p : q.points()) {
    Preimage l = p.preimage;
    for (int i = 0; i < k; ++i) l = divide_by_lambda(ctx, l);
    pts.emplace_back(p.value * scale, std::move(l));
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Breakpoints out;
  for (auto& [v, l] : pts) {
    out.values.push_back(v);
    out.preimages.push_back(std::move(l));
  }
  return out;
}

struct LevelInclusion {
  std::size_t checked = 0;
  std::size_t missing = 0;
};

/// Level-k breakpoints inside the span of level k+1 must be level-(k+1) breakpoints.
inline LevelInclusion check_level_inclusion(const Quasilattice& q, int k) {
  const auto coarse = level_breakpoints(q, k);
  const auto fine = level_breakpoints(q, k + 1);
  const std::set<Preimage> fine_set(fine.preimages.begin(), fine.preimages.end());
  LevelInclusion out;
  for (std::size_t i = 0; i < coarse.values.size(); ++i) {
    if (coarse.values[i] < fine.values.front() || coarse.values[i] > fine.values.back()) continue;
    ++out.checked;
    if (!fine_set.count(coarse.preimages[i])) ++out.missing;
  }
  return out;
}

struct Sample {
  double x;
  double value;
};

/// Function constant on [b_i, b_{i+1}) for consecutive level-k breakpoints.
struct PiecewiseConstant {
  int level = 0;
  std::vector<long double> breakpoints;
  std::vector<double> values;        // one per interval
  std::size_t empty_intervals = 0;   // intervals filled from the nearest sample
  std::vector<std::string> warnings;

  /// Index of the interval containing x, or npos outside the breakpoints.
  std::size_t interval(long double x) const {
    if (breakpoints.empty() || x < breakpoints.front() || x >= breakpoints.back()) return npos;
    return static_cast<std::size_t>(std::upper_bound(breakpoints.begin(), breakpoints.end(), x) - breakpoints.begin()) - 1;
  }
  double operator()(long double x) const {
    const auto i = interval(x);
    if (i == npos) throw Error(ErrorCode::InsufficientCoverage, "point outside the breakpoint range");
    return values[i];
  }
  bool on_breakpoint(long double x, long double tol = 1e-12L) const {
    auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), x);
    if (it != breakpoints.end() && *it - x <= tol) return true;
    return it != breakpoints.begin() && x - *(it - 1) <= tol;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Projection onto functions constant between level-k breakpoints: each
/// interval gets the mean of its samples; intervals without samples take the
/// value of the nearest interval that has samples, which keeps the projection
/// idempotent.
inline PiecewiseConstant project_pc(const Quasilattice& q, const std::vector<Sample>& samples, int k) {
  if (samples.empty()) throw Error(ErrorCode::BadConfig, "no samples");
  auto bp = level_breakpoints(q, k);
  PiecewiseConstant out;
  out.level = k;
  out.breakpoints = std::move(bp.values);
  if (out.breakpoints.size() < 2) throw Error(ErrorCode::InsufficientCoverage, "fewer than two breakpoints");

  const std::size_t n = out.breakpoints.size() - 1;
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  std::vector<bool> uniform(n, true);
  std::vector<double> first(n, 0.0);
  for (const auto& s : samples) {
    const auto i = out.interval(s.x);
    if (i == PiecewiseConstant::npos)
      throw Error(ErrorCode::InsufficientCoverage, "sample at " + std::to_string(s.x) + " outside the breakpoint range");
    if (count[i] == 0) first[i] = s.value;
    uniform[i] = uniform[i] && s.value == first[i];
    sum[i] += s.value;
    ++count[i];
  }

  out.values.resize(n);
  std::vector<std::size_t> filled;
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] > 0) {
      out.values[i] = uniform[i] ? first[i] : sum[i] / static_cast<double>(count[i]);
      filled.push_back(i);
    }
  }
  auto mid = [&](std::size_t i) { return (out.breakpoints[i] + out.breakpoints[i + 1]) / 2; };
  for (std::size_t i = 0, next = 0; i < n; ++i) {
    if (count[i] > 0) continue;
    while (next < filled.size() && filled[next] < i) ++next;
    std::size_t pick = next < filled.size() ? filled[next] : filled[next - 1];
    if (next > 0 && (next == filled.size() || mid(i) - mid(filled[next - 1]) <= mid(filled[next]) - mid(i)))
      pick = filled[next - 1];
    out.values[i] = out.values[pick];
    ++out.empty_intervals;
  }
  if (out.empty_intervals > 0)
    out.warnings.push_back("EmptyInterval: " + std::to_string(out.empty_intervals) +
                           " intervals without samples filled by nearest neighbor");
  return out;
}

/// Samples of f at the given abscissae.
inline std::vector<Sample> sample(const PiecewiseConstant& f, const std::vector<double>& xs) {
  std::vector<Sample> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back({x, f(x)});
  return out;
}

}  // namespace pvq
