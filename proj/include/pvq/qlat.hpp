#pragma once

/**
 * @file qlat.hpp
 * @brief Cut-and-project quasilattices L(sigma) and checks of their lattice laws.
 *
 * L(sigma) = { (V^T l)_1 : l in Z^n, |(V^T l)_j| < sigma_j for j >= 2 }.
 * Points are enumerated over an integer bounding box of the parallelotope
 * X = (V^T)^{-1}[(-L, L) x prod_j (-sigma_j, sigma_j)] and tested one by one.
 * Each point keeps its integer preimage l, so every set operation (inclusion,
 * sums, gaps, inflation) is decided on exact integer vectors.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pvq/algnum.hpp"
#include "pvq/error.hpp"

namespace pvq {

using Preimage = std::vector<long long>;

inline Preimage add(const Preimage& a, const Preimage& b) {
  Preimage out(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Preimage sub(const Preimage& a, const Preimage& b) {
  Preimage out(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

/// Coordinates of lambda * (sum_i l_i lambda^i), i.e. C^T l.
inline Preimage times_lambda(const Context& ctx, const Preimage& l) {
  const auto& c = ctx.coeffs();
  const std::size_t n = l.size();
  Preimage out(n, 0);
  for (std::size_t i = 1; i < n; ++i) out[i] = l[i - 1];
  for (std::size_t i = 0; i < n; ++i) out[i] -= c[i] * l[n - 1];
  return out;
}

/// Inverse of times_lambda; requires |c_0| = 1.
inline Preimage divide_by_lambda(const Context& ctx, const Preimage& l) {
  if (!ctx.unit_constant()) throw Error(ErrorCode::NotUnitConstant, "lambda is not a unit");
  const auto& c = ctx.coeffs();
  const std::size_t n = l.size();
  Preimage out(n, 0);
  out[n - 1] = -l[0] * c[0];  // c_0 = +-1 so 1/c_0 = c_0
  for (std::size_t i = 1; i < n; ++i) out[i - 1] = l[i] + c[i] * out[n - 1];
  return out;
}

/// Conjugate embeddings (V^T l)_j of an integer preimage.
inline std::vector<ComplexL> embed_preimage(const Context& ctx, const Preimage& l) {
  std::vector<ComplexL> out;
  out.reserve(ctx.roots().size());
  for (const auto& root : ctx.roots()) {
    ComplexL acc = 0;
    for (std::size_t i = l.size(); i-- > 0;) acc = acc * root + static_cast<long double>(l[i]);
    out.push_back(acc);
  }
  return out;
}

/// An admissible window vector: sigma_1 = 0, sigma_j > 0, equal on conjugate pairs.
class Window {
 public:
  Window() = default;
  Window(const Context& ctx, std::vector<double> sigma) : sigma_(std::move(sigma)) {
    if (ctx.degree() < 2) throw Error(ErrorCode::InadmissibleWindow, "quasilattices need degree >= 2");
    if (sigma_.size() != static_cast<std::size_t>(ctx.degree()))
      throw Error(ErrorCode::InadmissibleWindow, "window length must equal the field degree");
    if (sigma_[0] != 0.0) throw Error(ErrorCode::InadmissibleWindow, "sigma_1 must be 0");
    for (std::size_t j = 1; j < sigma_.size(); ++j) {
      if (!(sigma_[j] > 0.0) || !std::isfinite(sigma_[j]))
        throw Error(ErrorCode::InadmissibleWindow, "sigma_j must be positive for j >= 2");
      const auto k = static_cast<std::size_t>(ctx.partner(static_cast<int>(j)));
      if (sigma_[k] != sigma_[j])
        throw Error(ErrorCode::InadmissibleWindow, "sigma must agree on complex conjugate pairs");
    }
  }

  /// Window from sigma_2..sigma_n (sigma_1 = 0 implied).
  static Window from_internal(const Context& ctx, const std::vector<double>& internal) {
    std::vector<double> s{0.0};
    s.insert(s.end(), internal.begin(), internal.end());
    return Window(ctx, s);
  }

  /// Window with all internal components equal to s.
  static Window uniform(const Context& ctx, double s) {
    return from_internal(ctx, std::vector<double>(static_cast<std::size_t>(ctx.degree() - 1), s));
  }

  const std::vector<double>& sigma() const { return sigma_; }
  double operator[](std::size_t j) const { return sigma_[j]; }
  std::size_t size() const { return sigma_.size(); }

  bool operator<=(const Window& o) const {
    for (std::size_t j = 0; j < sigma_.size(); ++j)
      if (sigma_[j] > o.sigma_[j]) return false;
    return true;
  }
  Window operator+(const Window& o) const {
    Window w = *this;
    for (std::size_t j = 0; j < sigma_.size(); ++j) w.sigma_[j] += o.sigma_[j];
    return w;
  }
  Window scaled(double f) const {
    Window w = *this;
    for (auto& s : w.sigma_) s *= f;
    return w;
  }

  /// 2^{1-n} prod_{j>=2} sigma_j^{-1}: the uniform-discreteness bound.
  double min_gap_bound() const {
    double b = std::pow(2.0, 1.0 - static_cast<double>(sigma_.size()));
    for (std::size_t j = 1; j < sigma_.size(); ++j) b /= sigma_[j];
    return b;
  }
  /// prod_{j>=2} sigma_j^{-1}: lower bound on |p| for nonzero points.
  double nonzero_point_bound() const {
    double b = 1.0;
    for (std::size_t j = 1; j < sigma_.size(); ++j) b /= sigma_[j];
    return b;
  }

  /// min_j (sigma_j - |z_j|) over internal coordinates.
  double margin(const std::vector<ComplexL>& conj) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < sigma_.size(); ++j)
      m = std::min(m, sigma_[j] - static_cast<double>(std::abs(conj[j])));
    return m;
  }

 private:
  std::vector<double> sigma_;
};

struct LatticePoint {
  long double value;
  Preimage preimage;
  double margin;
};

struct GenerateOptions {
  double boundary_tol = 1e-9;
  double cell_budget = 1e8;
};

class Quasilattice {
 public:
  Quasilattice(ContextPtr ctx, Window window, double half_width, std::vector<LatticePoint> points,
               std::size_t boundary_skipped)
      : ctx_(std::move(ctx)),
        window_(std::move(window)),
        half_width_(half_width),
        points_(std::move(points)),
        boundary_skipped_(boundary_skipped) {
    for (std::size_t i = 0; i < points_.size(); ++i) index_.emplace(points_[i].preimage, i);
  }

  const ContextPtr& context() const { return ctx_; }
  const Window& window() const { return window_; }
  double half_width() const { return half_width_; }
  const std::vector<LatticePoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  std::size_t boundary_skipped() const { return boundary_skipped_; }

  std::optional<std::size_t> find(const Preimage& l) const {
    auto it = index_.find(l);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const Preimage& l) const { return index_.count(l) != 0; }

  /// Index of the first point with value >= v.
  std::size_t lower_bound(long double v) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), v,
                               [](const LatticePoint& p, long double x) { return p.value < x; });
    return static_cast<std::size_t>(it - points_.begin());
  }

  /// Indices [first, last) of points with lo <= value <= hi.
  std::pair<std::size_t, std::size_t> range(long double lo, long double hi) const {
    auto first = lower_bound(lo);
    auto last = std::upper_bound(points_.begin(), points_.end(), hi,
                                 [](long double x, const LatticePoint& p) { return x < p.value; });
    return {first, static_cast<std::size_t>(last - points_.begin())};
  }

 private:
  ContextPtr ctx_;
  Window window_;
  double half_width_;
  std::vector<LatticePoint> points_;
  std::size_t boundary_skipped_;
  std::map<Preimage, std::size_t> index_;
};

namespace detail {

/// Real rows of the cut-and-project map with their half-widths: the physical
/// row (lambda_1^i) with L, then one row per real conjugate and two rows
/// (real and imaginary part) per conjugate pair.
struct Slab {
  Eigen::MatrixXd rows;
  Eigen::VectorXd half;
};

inline Slab slab(const Context& ctx, const Window& w, double L) {
  const int n = ctx.degree();
  Slab s{Eigen::MatrixXd(n, n), Eigen::VectorXd(n)};
  int r = 0;
  for (int j = 0; j < n; ++j) {
    const ComplexL root = ctx.roots()[static_cast<std::size_t>(j)];
    const double h = j == 0 ? L : w[static_cast<std::size_t>(j)];
    if (ctx.is_real_root(j)) {
      ComplexL p = 1;
      for (int i = 0; i < n; ++i, p *= root) s.rows(r, i) = static_cast<double>(p.real());
      s.half(r++) = h;
    } else if (root.imag() > 0) {
      ComplexL p = 1;
      for (int i = 0; i < n; ++i, p *= root) {
        s.rows(r, i) = static_cast<double>(p.real());
        s.rows(r + 1, i) = static_cast<double>(p.imag());
      }
      s.half(r) = h;
      s.half(r + 1) = h;
      r += 2;
    }
  }
  return s;
}

}  // namespace detail

/// Integer bounding box half-extents of the enumeration parallelotope.
inline std::vector<long long> enumeration_box(const Context& ctx, const Window& w, double L) {
  auto s = detail::slab(ctx, w, L);
  Eigen::MatrixXd inv = s.rows.inverse();
  std::vector<long long> box;
  for (int i = 0; i < inv.rows(); ++i) {
    double extent = 0;
    for (int k = 0; k < inv.cols(); ++k) extent += std::abs(inv(i, k)) * s.half(k);
    box.push_back(static_cast<long long>(std::ceil(extent)) + 1);
  }
  return box;
}

/// Enumerates L(sigma) within [-L, L].
///
/// The first n-1 preimage coordinates run over the bounding box; for each
/// prefix the admissible range of the last coordinate is solved from the slab
/// rows, and every candidate is then tested on its embeddings. Candidates whose
/// window margin or distance to +-L is below the boundary tolerance are left
/// out and counted in boundary_skipped.
inline Quasilattice generate(ContextPtr ctx, const Window& w, double L, const GenerateOptions& opt = {}) {
  if (!(L > 0)) throw Error(ErrorCode::BadConfig, "half-width L must be positive");
  if (w.size() != static_cast<std::size_t>(ctx->degree()))
    throw Error(ErrorCode::InadmissibleWindow, "window does not match the context degree");
  const int n = ctx->degree();
  auto s = detail::slab(*ctx, w, L);
  auto box = enumeration_box(*ctx, w, L);

  double cells = 1;
  for (int i = 0; i + 1 < n; ++i) cells *= static_cast<double>(2 * box[static_cast<std::size_t>(i)] + 1);
  if (cells > opt.cell_budget)
    throw Error(ErrorCode::WindowTooLarge, "enumeration box has " + std::to_string(cells) + " cells");

  std::vector<LatticePoint> pts;
  std::size_t skipped = 0;
  Preimage l(static_cast<std::size_t>(n), 0);
  for (int i = 0; i + 1 < n; ++i) l[static_cast<std::size_t>(i)] = -box[static_cast<std::size_t>(i)];
  const long long last_box = box.back();

  while (true) {
    // Range of the last coordinate compatible with every slab row.
    double lo = static_cast<double>(-last_box), hi = static_cast<double>(last_box);
    bool empty = false;
    for (int r = 0; r < n && !empty; ++r) {
      double a = 0;
      for (int i = 0; i + 1 < n; ++i) a += s.rows(r, i) * static_cast<double>(l[static_cast<std::size_t>(i)]);
      const double b = s.rows(r, n - 1);
      const double h = s.half(r) * (1 + 1e-12) + 1e-9;
      if (std::abs(b) < 1e-300) {
        if (std::abs(a) > h) empty = true;
        continue;
      }
      double t1 = (-h - a) / b, t2 = (h - a) / b;
      if (t1 > t2) std::swap(t1, t2);
      lo = std::max(lo, t1);
      hi = std::min(hi, t2);
    }
    if (!empty && lo <= hi) {
      for (long long t = static_cast<long long>(std::floor(lo)); t <= static_cast<long long>(std::ceil(hi)); ++t) {
        l[static_cast<std::size_t>(n - 1)] = t;
        auto conj = embed_preimage(*ctx, l);
        const long double value = conj[0].real();
        const double margin = w.margin(conj);
        if (margin <= -opt.boundary_tol) continue;
        const double edge = static_cast<double>(L - std::abs(value));
        if (edge <= -opt.boundary_tol) continue;
        if (margin < opt.boundary_tol || std::abs(edge) < opt.boundary_tol) {
          ++skipped;
          continue;
        }
        pts.push_back({value, l, margin});
      }
    }
    // Odometer over the first n-1 coordinates.
    int i = 0;
    for (; i + 1 < n; ++i) {
      auto& c = l[static_cast<std::size_t>(i)];
      if (c < box[static_cast<std::size_t>(i)]) {
        ++c;
        break;
      }
      c = -box[static_cast<std::size_t>(i)];
    }
    if (i + 1 >= n) break;
  }

  std::sort(pts.begin(), pts.end(), [](const LatticePoint& a, const LatticePoint& b) {
    return a.value < b.value || (a.value == b.value && a.preimage < b.preimage);
  });
  return Quasilattice(std::move(ctx), w, L, std::move(pts), skipped);
}

struct GapType {
  long double value;
  Preimage preimage;
  std::size_t multiplicity;
};

/// Distinct consecutive differences among points in [-L + margin, L - margin],
/// identified by their exact preimage difference; sorted by length.
inline std::vector<GapType> gap_alphabet(const Quasilattice& q, double margin) {
  const double lim = q.half_width() - margin;
  auto [first, last] = q.range(-lim, lim);
  if (last < first + 2) throw Error(ErrorCode::TooFewPoints, "fewer than two interior points");
  std::map<Preimage, GapType> gaps;
  for (std::size_t i = first; i + 1 < last; ++i) {
    const auto& a = q.points()[i];
    const auto& b = q.points()[i + 1];
    Preimage d = sub(b.preimage, a.preimage);
    auto [it, inserted] = gaps.try_emplace(d, GapType{b.value - a.value, d, 0});
    ++it->second.multiplicity;
  }
  std::vector<GapType> out;
  for (auto& [k, g] : gaps) {
    g.value = embed_preimage(*q.context(), g.preimage)[0].real();
    out.push_back(g);
  }
  std::sort(out.begin(), out.end(), [](const GapType& a, const GapType& b) { return a.value < b.value; });
  return out;
}

struct DeloneConstants {
  long double min_gap;
  long double max_gap;
  double bound;            // 2^{1-n} prod sigma_j^{-1}
  std::size_t violations;  // gaps below bound - tol
};

inline DeloneConstants delone_constants(const Quasilattice& q, double margin = 0.0, double tol = 1e-9) {
  const double lim = q.half_width() - margin;
  auto [first, last] = q.range(-lim, lim);
  if (last < first + 2) throw Error(ErrorCode::TooFewPoints, "fewer than two interior points");
  DeloneConstants out{std::numeric_limits<long double>::infinity(), 0, q.window().min_gap_bound(), 0};
  for (std::size_t i = first; i + 1 < last; ++i) {
    long double g = q.points()[i + 1].value - q.points()[i].value;
    out.min_gap = std::min(out.min_gap, g);
    out.max_gap = std::max(out.max_gap, g);
    if (g < out.bound - tol) ++out.violations;
  }
  return out;
}

/// A generic check outcome: which lemma, how many violations, and named
/// numeric details in insertion order.
struct CheckReport {
  std::string lemma;
  std::size_t violations = 0;
  std::vector<std::pair<std::string, double>> details;

  void add(std::string key, double value) { details.emplace_back(std::move(key), value); }
  double get(const std::string& key) const {
    for (const auto& [k, v] : details)
      if (k == key) return v;
    throw Error(ErrorCode::BadConfig, "report has no detail '" + key + "'");
  }
};

/// Group laws of L(sigma), L(xi) and L(sigma + xi) inside [-L/2, L/2].
///
/// (i) sigma <= xi implies inclusion; when sigma is not <= xi a witness of
/// non-inclusion is searched for. (ii) sums of points land in L(sigma + xi),
/// checked on exact preimages. (iii) the reverse inclusion is reported as the
/// fraction of L(sigma + xi) that is hit by sums of generated points.
inline CheckReport check_group_laws(const ContextPtr& ctx, const Window& sigma, const Window& xi, double L,
                                    const GenerateOptions& opt = {}) {
  auto qs = generate(ctx, sigma, L, opt);
  auto qx = generate(ctx, xi, L, opt);
  auto qsum = generate(ctx, sigma + xi, L, opt);
  const long double half = L / 2;

  CheckReport r{"QL1 group laws", 0, {}};

  std::size_t incl_checked = 0, incl_viol = 0, witnesses = 0;
  const bool ordered = sigma <= xi;
  auto [f0, f1] = qs.range(-half, half);
  for (std::size_t i = f0; i < f1; ++i) {
    ++incl_checked;
    if (!qx.contains(qs.points()[i].preimage)) {
      if (ordered)
        ++incl_viol;
      else
        ++witnesses;
    }
  }
  r.add("inclusion_applicable", ordered ? 1 : 0);
  r.add("inclusion_checked", static_cast<double>(incl_checked));
  r.add("inclusion_violations", static_cast<double>(incl_viol));
  r.add("non_inclusion_witnesses", static_cast<double>(witnesses));

  std::size_t sums = 0, sum_viol = 0;
  for (const auto& x : qs.points()) {
    auto [y0, y1] = qx.range(-half - x.value, half - x.value);
    for (std::size_t k = y0; k < y1; ++k) {
      ++sums;
      if (!qsum.contains(add(x.preimage, qx.points()[k].preimage))) ++sum_viol;
    }
  }
  r.add("sum_pairs_checked", static_cast<double>(sums));
  r.add("sum_violations", static_cast<double>(sum_viol));

  std::size_t targets = 0, covered = 0;
  auto [z0, z1] = qsum.range(-half, half);
  for (std::size_t i = z0; i < z1; ++i) {
    const auto& z = qsum.points()[i];
    ++targets;
    auto [x0, x1] = qs.range(z.value - L, z.value + L);
    for (std::size_t k = x0; k < x1; ++k)
      if (qx.contains(sub(z.preimage, qs.points()[k].preimage))) {
        ++covered;
        break;
      }
  }
  r.add("coverage_checked", static_cast<double>(targets));
  r.add("coverage_fraction", targets ? static_cast<double>(covered) / static_cast<double>(targets) : 0.0);
  r.violations = incl_viol + sum_viol;
  return r;
}

/// Inflation symmetry lambda L(sigma) = L([0, |lambda_j| sigma_j]) for unit lambda.
inline CheckReport check_inflation(const Quasilattice& q, double tol = 1e-9) {
  const auto& ctx = *q.context();
  if (!ctx.unit_constant())
    throw Error(ErrorCode::NotUnitConstant, "inflation symmetry needs |c_0| = 1");
  const long double lam = ctx.lambda();
  const double L = q.half_width();
  std::vector<double> shrunk{0.0};
  for (std::size_t j = 1; j < q.window().size(); ++j)
    shrunk.push_back(static_cast<double>(std::abs(ctx.roots()[j])) * q.window()[j]);

  CheckReport r{"QL5 inflation", 0, {}};
  std::size_t fwd = 0, fwd_viol = 0;
  double margin_err = 0;
  for (const auto& p : q.points()) {
    if (std::abs(lam * p.value) > L - tol) continue;
    ++fwd;
    Preimage img = times_lambda(ctx, p.preimage);
    if (!q.contains(img)) ++fwd_viol;
    auto conj = embed_preimage(ctx, img);
    for (std::size_t j = 1; j < conj.size(); ++j) {
      // margin in the shrunken window is |lambda_j| times the original margin
      const double orig = q.window()[j] - static_cast<double>(std::abs(embed_preimage(ctx, p.preimage)[j]));
      const double now = shrunk[j] - static_cast<double>(std::abs(conj[j]));
      margin_err = std::max(margin_err, std::abs(now - static_cast<double>(std::abs(ctx.roots()[j])) * orig));
      if (now <= 0) ++fwd_viol;
    }
  }
  std::size_t rev = 0, rev_viol = 0;
  for (const auto& p : q.points()) {
    auto conj = embed_preimage(ctx, p.preimage);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < conj.size(); ++j) m = std::min(m, shrunk[j] - static_cast<double>(std::abs(conj[j])));
    if (m <= tol) continue;
    ++rev;
    if (!q.contains(divide_by_lambda(ctx, p.preimage))) ++rev_viol;
  }
  r.add("forward_checked", static_cast<double>(fwd));
  r.add("forward_violations", static_cast<double>(fwd_viol));
  r.add("reverse_checked", static_cast<double>(rev));
  r.add("reverse_violations", static_cast<double>(rev_viol));
  r.add("max_margin_error", margin_err);
  r.violations = fwd_viol + rev_viol;
  return r;
}

struct MeyerResult {
  struct Correction {
    Preimage preimage;
    long double value;
    std::size_t count;
  };
  std::vector<Correction> corrections;  // the observed finite set F
  std::size_t pairs_checked = 0;
  std::size_t violations = 0;
  std::size_t max_steps = 0;            // longest walk through consecutive points of L(2 sigma)
  std::size_t double_window_gaps = 0;   // |D(2 sigma)| seen along the walks
};

/// Finite correction set F with L(sigma) + L(sigma) in L(sigma) + F.
///
/// For interior x, y (|x|, |y| <= L/2, |x + y| <= L - max gap) w is the largest
/// point of L(sigma) not exceeding z = x + y, and z - w is recorded by exact preimage. The walk from w
/// to z through consecutive points of L(2 sigma) expresses z - w as a sum of
/// gaps from D(2 sigma); pairs where w or the walk is missing count as
/// violations.
inline MeyerResult check_meyer(const Quasilattice& q, const GenerateOptions& opt = {}) {
  const double L = q.half_width();
  auto q2 = generate(q.context(), q.window().scaled(2.0), L, opt);
  auto [i0, i1] = q.range(-L / 2, L / 2);
  if (i1 < i0 + 2) throw Error(ErrorCode::TooFewPoints, "fewer than two interior points");

  long double max_gap = 0;
  for (std::size_t i = 0; i + 1 < q.size(); ++i)
    max_gap = std::max(max_gap, q.points()[i + 1].value - q.points()[i].value);
  const long double reach = L - max_gap;

  MeyerResult out;
  std::map<Preimage, MeyerResult::Correction> F;
  std::map<Preimage, int> gaps2;
  for (std::size_t a = i0; a < i1; ++a) {
    for (std::size_t b = i0; b < i1; ++b) {
      const auto& x = q.points()[a];
      const auto& y = q.points()[b];
      long double zv = x.value + y.value;
      if (std::abs(zv) > reach) continue;
      ++out.pairs_checked;
      Preimage z = add(x.preimage, y.preimage);
      std::optional<std::size_t> w;
      if (auto hit = q.find(z)) {
        w = *hit;
      } else {
        std::size_t ub = q.lower_bound(zv);
        if (ub > 0 && ub <= q.size()) w = ub - 1;
      }
      if (!w || std::abs(zv - q.points()[*w].value) > 2 * L) {
        ++out.violations;
        continue;
      }
      const auto& wp = q.points()[*w];
      Preimage corr = sub(z, wp.preimage);
      auto [it, fresh] = F.try_emplace(corr, MeyerResult::Correction{corr, zv - wp.value, 0});
      ++it->second.count;

      auto zi = q2.find(z);
      auto wi = q2.find(wp.preimage);
      if (!zi || !wi || *zi < *wi) {
        ++out.violations;
        continue;
      }
      out.max_steps = std::max(out.max_steps, *zi - *wi);
      for (std::size_t s = *wi; s < *zi; ++s) gaps2[sub(q2.points()[s + 1].preimage, q2.points()[s].preimage)] = 1;
    }
  }
  for (auto& [k, c] : F) {
    c.value = embed_preimage(*q.context(), c.preimage)[0].real();
    out.corrections.push_back(c);
  }
  std::sort(out.corrections.begin(), out.corrections.end(),
            [](const auto& a, const auto& b) { return a.value < b.value; });
  out.double_window_gaps = gaps2.size();
  return out;
}

}  // namespace pvq
