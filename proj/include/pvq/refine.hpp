#pragma once

/**
 * @file refine.hpp
 * @brief Refinement masks, their Mahler measures, Fourier products and the
 *        log-average estimators built on them.
 *
 * A mask is A(y) = |lambda|^{-1} sum_j a_j exp(2 pi i tau_j y) with
 * sum_j a_j = |lambda|. Translations are kept as exact coordinate vectors in
 * the power basis of Q(lambda) (a single rational when lambda is an integer or
 * a plain real), which gives an exact rank computation and an integer exponent
 * matrix E with tau_j = sum_k E_jk r_k. The polynomial
 * P(z) = |lambda|^{-1} sum_j a_j z^{E_j} then satisfies
 * |A(y)| = |P(exp(2 pi i r_1 y), ..., exp(2 pi i r_d y))|.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pvq/algnum.hpp"
#include "pvq/roots.hpp"

namespace pvq {

/// Dilation factor of a mask. When lambda is algebraic (or an integer) the
/// context carries it exactly; a plain real dilation has no context.
struct Dilation {
  ContextPtr context;
  long double value = 0;

  static Dilation algebraic(ContextPtr ctx) {
    long double v = ctx->lambda();
    return {std::move(ctx), v};
  }
  /// Integers become degree-one contexts so that exact phase reduction applies.
  static Dilation real(long double x) {
    const long double r = std::nearbyint(x);
    if (r == x && std::abs(r) >= 2 && std::abs(r) < 9.0e18L)
      return algebraic(Context::rational_integer(static_cast<std::int64_t>(r)));
    return {nullptr, x};
  }
  int degree() const { return context ? context->degree() : 1; }
  bool algebraic() const { return context != nullptr; }
};

class RefinementMask {
 public:
  const Dilation& dilation() const { return dilation_; }
  long double lambda() const { return dilation_.value; }
  long double abs_lambda() const { return std::abs(dilation_.value); }
  const std::vector<Complex>& coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  const std::vector<std::vector<Rational>>& translations() const { return translations_; }
  const std::vector<long double>& translation_values() const { return tau_; }

  int rank() const { return static_cast<int>(basis_.size()); }
  /// r_k as coordinate vectors and as reals.
  const std::vector<std::vector<Rational>>& basis() const { return basis_; }
  const std::vector<long double>& frequencies() const { return r_; }
  /// Exponents after the common monomial shift (all entries >= 0).
  const std::vector<std::vector<long long>>& exponents() const { return exponents_; }
  const std::vector<long long>& shift() const { return shift_; }

  /// A(y) from the defining sum.
  Complex operator()(long double y) const {
    Complex s = 0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) s += coeffs_[j] * unit_phase(tau_[j] * y);
    return s / static_cast<double>(abs_lambda());
  }

  /// P(z_1, ..., z_d).
  Complex polynomial(std::span<const Complex> z) const {
    Complex s = 0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) {
      Complex term = coeffs_[j];
      for (std::size_t k = 0; k < z.size(); ++k) term *= std::pow(z[k], static_cast<int>(exponents_[j][k]));
      s += term;
    }
    return s / static_cast<double>(abs_lambda());
  }

  /// P_trig(t) = P(exp(2 pi i t_1), ..., exp(2 pi i t_d)).
  Complex trig(std::span<const long double> t) const {
    Complex s = 0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) {
      long double phase = 0;
      for (std::size_t k = 0; k < t.size(); ++k) phase += static_cast<long double>(exponents_[j][k]) * t[k];
      s += coeffs_[j] * unit_phase(phase);
    }
    return s / static_cast<double>(abs_lambda());
  }

  /// Univariate coefficients of P when the rank is one.
  std::vector<Complex> univariate() const {
    if (rank() != 1) throw Error(ErrorCode::BadConfig, "mask has rank " + std::to_string(rank()));
    long long top = 0;
    for (const auto& e : exponents_) top = std::max(top, e[0]);
    std::vector<Complex> c(static_cast<std::size_t>(top + 1), 0.0);
    for (std::size_t j = 0; j < coeffs_.size(); ++j)
      c[static_cast<std::size_t>(exponents_[j][0])] += coeffs_[j] / static_cast<double>(abs_lambda());
    return c;
  }

  /// sum_j |a_j tau_j| 2 pi / |lambda|: Lipschitz constant of A at 0.
  long double derivative_bound() const {
    long double s = 0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j) s += std::abs(coeffs_[j]) * std::abs(tau_[j]);
    return 2 * std::numbers::pi_v<long double> * s / abs_lambda();
  }

  friend RefinementMask build_mask(Dilation dilation, std::vector<Complex> coeffs,
                                   std::vector<std::vector<Rational>> translations, const Tolerances& tol);

 private:
  Dilation dilation_;
  std::vector<Complex> coeffs_;
  std::vector<std::vector<Rational>> translations_;
  std::vector<long double> tau_;
  std::vector<std::vector<Rational>> basis_;
  std::vector<long double> r_;
  std::vector<std::vector<long long>> exponents_;
  std::vector<long long> shift_;
};

namespace detail {

inline long double coordinate_value(const Dilation& d, const std::vector<Rational>& coords) {
  if (!d.context) return to_long_double(coords[0]);
  return Element(d.context, coords).real_value();
}

/// Row echelon basis of the Z-span of integer rows, with positive pivots.
inline std::vector<std::vector<BigInt>> integer_row_basis(std::vector<std::vector<BigInt>> rows) {
  if (rows.empty()) return rows;
  const std::size_t n = rows[0].size();
  std::size_t r = 0;
  for (std::size_t col = 0; col < n && r < rows.size(); ++col) {
    while (true) {
      // smallest nonzero |entry| at or below r
      std::size_t best = rows.size();
      for (std::size_t i = r; i < rows.size(); ++i)
        if (rows[i][col] != 0 && (best == rows.size() || abs(rows[i][col]) < abs(rows[best][col]))) best = i;
      if (best == rows.size()) break;
      std::swap(rows[r], rows[best]);
      bool done = true;
      for (std::size_t i = r + 1; i < rows.size(); ++i) {
        if (rows[i][col] == 0) continue;
        BigInt qt = rows[i][col] / rows[r][col];
        for (std::size_t k = 0; k < n; ++k) rows[i][k] -= qt * rows[r][k];
        if (rows[i][col] != 0) done = false;
      }
      if (done) {
        if (rows[r][col] < 0)
          for (auto& v : rows[r]) v = -v;
        ++r;
        break;
      }
    }
  }
  rows.resize(r);
  return rows;
}

}  // namespace detail

/// Validates a mask and computes its exponent representation.
inline RefinementMask build_mask(Dilation dilation, std::vector<Complex> coeffs,
                                 std::vector<std::vector<Rational>> translations, const Tolerances& tol = {}) {
  if (!(std::abs(dilation.value) > 1)) throw Error(ErrorCode::BadConfig, "|lambda| must exceed 1");
  if (coeffs.empty() || coeffs.size() != translations.size())
    throw Error(ErrorCode::BadConfig, "coefficients and translations must be nonempty and of equal length");
  const std::size_t n = static_cast<std::size_t>(dilation.degree());
  for (auto& t : translations) {
    if (t.size() > n) throw Error(ErrorCode::BadConfig, "translation has more coordinates than the field degree");
    t.resize(n, Rational(0));
  }
  for (const auto& a : coeffs)
    if (a == Complex(0)) throw Error(ErrorCode::ZeroCoefficient, "mask coefficients must be nonzero");
  Complex sum = std::accumulate(coeffs.begin(), coeffs.end(), Complex(0));
  const double abs_lam = static_cast<double>(std::abs(dilation.value));
  if (std::abs(sum - Complex(abs_lam)) > tol.mask * std::max(1.0, abs_lam))
    throw Error(ErrorCode::SumRuleViolated, "coefficients sum to (" + std::to_string(sum.real()) + ", " +
                                                std::to_string(sum.imag()) + "), expected |lambda|");

  RefinementMask m;
  m.dilation_ = std::move(dilation);
  m.coeffs_ = std::move(coeffs);
  m.translations_ = std::move(translations);
  for (const auto& t : m.translations_) m.tau_.push_back(detail::coordinate_value(m.dilation_, t));
  for (std::size_t j = 1; j < m.tau_.size(); ++j) {
    bool increasing = m.tau_[j] > m.tau_[j - 1];
    if (m.tau_[j] == m.tau_[j - 1] && m.translations_[j] != m.translations_[j - 1]) {
      // equal in floating point but distinct: decide exactly
      Rational diff = m.dilation_.context
                          ? (Element(m.dilation_.context, m.translations_[j]) -
                             Element(m.dilation_.context, m.translations_[j - 1])).trace()
                          : m.translations_[j][0] - m.translations_[j - 1][0];
      increasing = diff > 0;
    }
    if (!increasing) throw Error(ErrorCode::NonIncreasingTranslations, "translations must be strictly increasing");
  }

  // Common denominator, integer rows, lattice basis.
  BigInt den = 1;
  for (const auto& t : m.translations_)
    for (const auto& c : t) den = boost::multiprecision::lcm(den, boost::multiprecision::denominator(c));
  std::vector<std::vector<BigInt>> rows;
  for (const auto& t : m.translations_) {
    std::vector<BigInt> row;
    for (const auto& c : t) row.push_back(boost::multiprecision::numerator(Rational(c * den)));
    rows.push_back(std::move(row));
  }
  auto basis = detail::integer_row_basis(rows);
  for (const auto& b : basis) {
    std::vector<Rational> r;
    for (const auto& v : b) r.emplace_back(v, den);
    m.r_.push_back(detail::coordinate_value(m.dilation_, r));
    m.basis_.push_back(std::move(r));
  }
  const std::size_t d = basis.size();
  std::vector<std::size_t> pivot;
  for (const auto& b : basis) {
    std::size_t c = 0;
    while (b[c] == 0) ++c;
    pivot.push_back(c);
  }
  std::vector<std::vector<long long>> E;
  for (const auto& row : rows) {
    std::vector<BigInt> rest = row;
    std::vector<long long> e(d, 0);
    for (std::size_t k = 0; k < d; ++k) {
      BigInt q = rest[pivot[k]] / basis[k][pivot[k]];
      if (q * basis[k][pivot[k]] != rest[pivot[k]])
        throw Error(ErrorCode::BadConfig, "translation outside the computed lattice");
      if (abs(q) > BigInt(std::numeric_limits<long long>::max() / 4))
        throw Error(ErrorCode::Overflow, "exponent does not fit in 64 bits");
      e[k] = q.convert_to<long long>();
      for (std::size_t c = 0; c < rest.size(); ++c) rest[c] -= q * basis[k][c];
    }
    for (const auto& v : rest)
      if (v != 0) throw Error(ErrorCode::BadConfig, "translation outside the computed lattice");
    E.push_back(std::move(e));
  }
  m.shift_.assign(d, 0);
  for (std::size_t k = 0; k < d; ++k) {
    long long lo = 0;
    for (const auto& e : E) lo = std::min(lo, e[k]);
    m.shift_[k] = lo;
    for (auto& e : E) e[k] -= lo;
  }
  m.exponents_ = std::move(E);
  return m;
}

/// Convenience for rational (or integer-dilation) masks given as real numbers.
inline RefinementMask build_mask(Dilation dilation, std::vector<Complex> coeffs, const std::vector<Rational>& taus,
                                 const Tolerances& tol = {}) {
  std::vector<std::vector<Rational>> t;
  for (const auto& v : taus) t.push_back({v});
  return build_mask(std::move(dilation), std::move(coeffs), std::move(t), tol);
}

enum class MahlerMethod { Jensen, TorusQuadrature, UnivariateLimit };

inline std::string_view to_string(MahlerMethod m) {
  switch (m) {
    case MahlerMethod::Jensen: return "jensen";
    case MahlerMethod::TorusQuadrature: return "torus_quadrature";
    case MahlerMethod::UnivariateLimit: return "univariate_limit";
  }
  return "unknown";
}

struct MahlerResult {
  double value;
  MahlerMethod method;
  double error_estimate;
  // torus quadrature only
  std::optional<double> univariate_limit;
  std::size_t grid = 0;
};

/// |c| prod max(1, |omega_j|) over the roots of the polynomial.
inline MahlerResult mahler_univariate(std::span<const Complex> coeffs) {
  std::size_t lead = coeffs.size();
  while (lead > 0 && coeffs[lead - 1] == Complex(0)) --lead;
  if (lead == 0) throw Error(ErrorCode::ZeroPolynomial, "polynomial is identically zero");
  auto rs = find_roots(coeffs.subspan(0, lead));
  long double m = std::abs(static_cast<ComplexL>(coeffs[lead - 1]));
  long double rel = 0;
  for (std::size_t j = 0; j < rs.roots.size(); ++j) {
    const long double r = std::abs(rs.roots[j]);
    if (r > 1) m *= r;
    if (r + rs.corrections[j] >= 1) rel += rs.corrections[j] / std::max(r, 1.0L);
  }
  return {static_cast<double>(m), MahlerMethod::Jensen, static_cast<double>(m * rel) + 1e-16 * static_cast<double>(m),
          std::nullopt, 0};
}

inline MahlerResult mahler_univariate(const std::vector<Complex>& coeffs) {
  return mahler_univariate(std::span<const Complex>(coeffs));
}

struct MahlerOptions {
  std::size_t start_grid = 32;
  std::size_t max_samples = std::size_t{1} << 24;
  std::size_t max_specialized_degree = 1000;
};

namespace detail {

/// Mean of ln|P_trig| over an N^d midpoint grid shifted by an irrational offset.
inline long double torus_mean_log(const RefinementMask& mask, std::size_t N, double v_clip) {
  const std::size_t d = static_cast<std::size_t>(mask.rank());
  const std::size_t m = mask.size();
  // phase[k][j][i] = exp(2 pi i E_jk t_i) along dimension k
  std::vector<std::vector<std::vector<Complex>>> phase(d, std::vector<std::vector<Complex>>(m, std::vector<Complex>(N)));
  for (std::size_t k = 0; k < d; ++k) {
    long double g = 0.6180339887498948482L * static_cast<long double>(k + 1);
    const long double offset = g - std::floor(g);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < N; ++i)
        phase[k][j][i] = unit_phase(static_cast<long double>(mask.exponents()[j][k]) *
                                    (static_cast<long double>(i) + offset) / static_cast<long double>(N));
  }
  std::vector<Complex> base(m);
  for (std::size_t j = 0; j < m; ++j) base[j] = mask.coeffs()[j] / static_cast<double>(mask.abs_lambda());

  // partial[k][j]: product of base and phases of dimensions >= k at the current index
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) total *= N;
  std::vector<std::size_t> idx(d, 0);
  std::vector<Complex> outer(m);
  long double acc = 0;
  for (std::size_t s = 0; s < total; s += N) {
    for (std::size_t j = 0; j < m; ++j) {
      Complex c = base[j];
      for (std::size_t k = 1; k < d; ++k) c *= phase[k][j][idx[k]];
      outer[j] = c;
    }
    long double row = 0;
    for (std::size_t i = 0; i < N; ++i) {
      Complex v = 0;
      for (std::size_t j = 0; j < m; ++j) v += outer[j] * phase[0][j][i];
      row += std::log(std::max(std::abs(v), v_clip));
    }
    acc += row;
    for (std::size_t k = 1; k < d && ++idx[k] == N; ++k) idx[k] = 0;
  }
  return acc / static_cast<long double>(total);
}

}  // namespace detail

/// Mahler measure of P(z_1, z_2, ..., z_d) specialized to z_k = z^{K^(k-1)}.
inline MahlerResult mahler_specialized(const RefinementMask& mask, long long K) {
  const std::size_t d = static_cast<std::size_t>(mask.rank());
  std::vector<long long> w(d, 1);
  for (std::size_t k = 1; k < d; ++k) w[k] = w[k - 1] * K;
  long long top = 0;
  std::vector<long long> deg;
  for (const auto& e : mask.exponents()) {
    long long s = 0;
    for (std::size_t k = 0; k < d; ++k) s += e[k] * w[k];
    deg.push_back(s);
    top = std::max(top, s);
  }
  std::vector<Complex> c(static_cast<std::size_t>(top + 1), 0.0);
  for (std::size_t j = 0; j < deg.size(); ++j)
    c[static_cast<std::size_t>(deg[j])] += mask.coeffs()[j] / static_cast<double>(mask.abs_lambda());
  auto r = mahler_univariate(c);
  r.method = MahlerMethod::UnivariateLimit;
  return r;
}

/// M(A) = M(P). Rank one goes through Jensen's formula; higher rank uses a
/// doubling torus grid cross-checked against a univariate specialization.
inline MahlerResult mahler_mask(const RefinementMask& mask, const Tolerances& tol = {}, const MahlerOptions& opt = {}) {
  if (mask.rank() == 0) {
    // every translation is 0: P is the constant sum / |lambda| = 1
    Complex c = std::accumulate(mask.coeffs().begin(), mask.coeffs().end(), Complex(0)) /
                static_cast<double>(mask.abs_lambda());
    return {std::abs(c), MahlerMethod::Jensen, 0.0, std::nullopt, 0};
  }
  if (mask.rank() == 1) return mahler_univariate(mask.univariate());

  const std::size_t d = static_cast<std::size_t>(mask.rank());
  std::size_t N = opt.start_grid;
  double prev = std::exp(static_cast<double>(detail::torus_mean_log(mask, N, tol.v_clip)));
  double change = std::numeric_limits<double>::infinity();
  while (true) {
    std::size_t next = 2 * N, total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= next;
    if (total > opt.max_samples) break;
    N = next;
    double cur = std::exp(static_cast<double>(detail::torus_mean_log(mask, N, tol.v_clip)));
    change = std::abs(cur - prev);
    prev = cur;
    if (change <= tol.mahler * std::max(1.0, cur)) break;
  }
  if (!(change <= tol.mahler * std::max(1.0, prev)))
    throw Error(ErrorCode::QuadratureNonconvergent,
                "torus grid doubling still changes M by " + std::to_string(change) + " at N = " + std::to_string(N));

  long long top = 1;
  for (const auto& e : mask.exponents())
    for (auto v : e) top = std::max(top, v);
  long long K = static_cast<long long>(
      std::floor(std::pow(static_cast<double>(opt.max_specialized_degree) / static_cast<double>(top),
                          1.0 / static_cast<double>(d - 1))));
  K = std::max<long long>(K, top + 1);
  auto uni = mahler_specialized(mask, K);
  return {prev, MahlerMethod::TorusQuadrature, change + std::abs(prev - uni.value), uni.value, N};
}

/// -ln M(A) / ln |lambda|.
inline double rho(const RefinementMask& mask, const MahlerResult& m) {
  return -std::log(m.value) / static_cast<double>(std::log(mask.abs_lambda()));
}

inline double rho(const RefinementMask& mask, const Tolerances& tol = {}) { return rho(mask, mahler_mask(mask, tol)); }

/// f^(y) = prod_{k >= 1} A(y lambda^{-k}), truncated once the remaining factors
/// are within tail_tol of 1 in total.
inline Complex fourier_hat(const RefinementMask& mask, long double y, double tail_tol = 1e-15) {
  if (y == 0) return 1.0;
  const long double lam = mask.lambda();
  const long double abs_lam = mask.abs_lambda();
  const long double C = mask.derivative_bound();
  Complex prod = 1.0;
  long double arg = y;
  long double bound = C * std::abs(y);  // C |y| |lambda|^{-k} before division
  for (int k = 1; k < 100000; ++k) {
    arg /= lam;
    bound /= abs_lam;
    prod *= mask(arg);
    if (prod == Complex(0)) return prod;
    // remaining tail: sum_{j > k} C |y| |lambda|^{-j}
    if (bound / (abs_lam - 1) <= tail_tol) break;
  }
  return prod;
}

struct MeanLogResult {
  double value;
  std::size_t samples;
  std::size_t clipped;     // |A| below v_clip
  std::size_t near_zero;   // |A| below tol_zero
};

/// (1/2L) int_{-L}^{L} ln|A| by the trapezoid rule with 2 L spu + 1 intervals.
inline MeanLogResult mean_log_mask(const RefinementMask& mask, double L, int samples_per_unit = 16,
                                   const Tolerances& tol = {}) {
  if (!(L >= 1)) throw Error(ErrorCode::BadConfig, "mean_log_mask needs L >= 1");
  const auto N = static_cast<std::size_t>(std::ceil(2 * L * samples_per_unit)) + 1;
  const long double h = 2.0L * L / static_cast<long double>(N);
  long double acc = 0;
  std::size_t clipped = 0, near = 0;
  for (std::size_t i = 0; i <= N; ++i) {
    const long double y = -static_cast<long double>(L) + static_cast<long double>(i) * h;
    const double a = std::abs(mask(y));
    if (a < tol.v_clip) ++clipped;
    if (a <= tol.zero) ++near;
    const long double w = (i == 0 || i == N) ? 0.5L : 1.0L;
    acc += w * std::log(std::max(a, tol.v_clip));
  }
  if (clipped == N + 1) throw Error(ErrorCode::AllSamplesClipped, "every sample of |A| is below v_clip");
  return {static_cast<double>(acc * h / (2.0L * L)), N + 1, clipped, near};
}

struct MeanLogHatOptions {
  int samples_per_unit = 32;
  std::size_t min_shell_samples = 257;
  double tail_tol = 1e-14;
};

/// (1 / (2 L ln L)) int_{-L}^{L} ln|f^(y)| dy.
///
/// ln|f^(y)| = sum_k ln|A(y lambda^{-k})|, and shell k contributes
/// |lambda|^k int_{-R_k}^{R_k} ln|A(u)| du with R_k = L |lambda|^{-k}. Each
/// shell is integrated by the midpoint rule with about 2 R_k spu nodes, so the
/// work is proportional to L rather than L times the product length.
inline MeanLogResult mean_log_hat(const RefinementMask& mask, double L, const MeanLogHatOptions& opt = {},
                                  const Tolerances& tol = {}) {
  const long double abs_lam = mask.abs_lambda();
  if (!(L >= abs_lam * abs_lam)) throw Error(ErrorCode::BadConfig, "mean_log_hat needs L >= lambda^2");
  const long double C = mask.derivative_bound();
  long double total = 0;
  std::size_t samples = 0, clipped = 0, near = 0;
  long double scale = 1;
  for (int k = 1;; ++k) {
    scale *= abs_lam;
    const long double R = static_cast<long double>(L) / scale;
    // ln|A(u)| = O(u) odd part + O(u^2): the rest contributes below L tail_tol
    if (C * R < 1e-6L && scale * R * R * R * C * C < opt.tail_tol * L) break;
    const auto n = std::max<std::size_t>(opt.min_shell_samples,
                                         2 * static_cast<std::size_t>(std::ceil(R * opt.samples_per_unit)) + 1);
    const long double h = 2 * R / static_cast<long double>(n);
    long double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double u = -R + (static_cast<long double>(i) + 0.5L) * h;
      const double a = std::abs(mask(u));
      if (a < tol.v_clip) ++clipped;
      if (a <= tol.zero) ++near;
      acc += std::log(std::max(a, tol.v_clip));
    }
    samples += n;
    total += scale * acc * h;
  }
  if (samples > 0 && clipped == samples) throw Error(ErrorCode::AllSamplesClipped, "every sample is clipped");
  return {static_cast<double>(total / (2.0L * L * std::log(static_cast<long double>(L)))), samples, clipped, near};
}

struct SublevelResult {
  std::vector<std::pair<double, double>> measure;  // (v, mu estimate) at L
  double constant;          // sup_v mu / (L v^{1/(m-1)}) at L
  double constant_doubled;  // the same at 2L
  bool stable;              // constants within a factor 2
};

namespace detail {

inline std::vector<double> sublevel_counts(const RefinementMask& mask, const std::vector<double>& v, double L,
                                           std::size_t samples, long double u0) {
  std::vector<double> mu(v.size(), 0.0);
  const long double h = 2.0L * L / static_cast<long double>(samples);
  // stratified: one point per cell, jittered by a Weyl sequence so that a
  // grid commensurate with a period of A does not quantize the counts
  const long double step = 0.6180339887498948482L;
  long double u = u0;
  for (std::size_t i = 0; i < samples; ++i) {
    u += step;
    u -= std::floor(u);
    const double a = std::abs(mask(-static_cast<long double>(L) + (static_cast<long double>(i) + u) * h));
    auto it = std::lower_bound(v.begin(), v.end(), a);
    for (auto k = static_cast<std::size_t>(it - v.begin()); k < v.size(); ++k) mu[k] += 1;
  }
  for (auto& m : mu) m *= static_cast<double>(h);
  return mu;
}

}  // namespace detail

/// Measure of {y in [-L, L] : |A(y)| <= v} by stratified sampling. The seed
/// picks the starting phase of the jitter sequence; seed 0 starts at 1/2.
inline SublevelResult sublevel_measure(const RefinementMask& mask, const std::vector<double>& v_grid, double L,
                                       std::size_t samples, std::uint64_t seed = 0) {
  if (mask.size() < 2) throw Error(ErrorCode::BadConfig, "sublevel bound needs at least two coefficients");
  if (samples < 10000) throw Error(ErrorCode::BadConfig, "sublevel_measure needs at least 1e4 samples");
  for (std::size_t i = 0; i < v_grid.size(); ++i)
    if (!(v_grid[i] > 0) || (i > 0 && !(v_grid[i] > v_grid[i - 1])))
      throw Error(ErrorCode::BadConfig, "v grid must be positive and increasing");
  const double expo = 1.0 / static_cast<double>(mask.size() - 1);
  auto fit = [&](const std::vector<double>& mu, double len) {
    double c = 0;
    for (std::size_t i = 0; i < v_grid.size(); ++i) c = std::max(c, mu[i] / (len * std::pow(v_grid[i], expo)));
    return c;
  };
  long double u0 = 0.5L;
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    u0 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
  auto mu = detail::sublevel_counts(mask, v_grid, L, samples, u0);
  auto mu2 = detail::sublevel_counts(mask, v_grid, 2 * L, 2 * samples, u0);
  SublevelResult out;
  for (std::size_t i = 0; i < v_grid.size(); ++i) out.measure.emplace_back(v_grid[i], mu[i]);
  out.constant = fit(mu, L);
  out.constant_doubled = fit(mu2, 2 * L);
  out.stable = out.constant > 0 && out.constant_doubled > 0 && out.constant_doubled <= 2 * out.constant &&
               out.constant <= 2 * out.constant_doubled;
  return out;
}

/// x - round(x) for x in Q(lambda), reduced through its exact trace:
/// x = Tr(x) - sum_{j >= 2} x_j, so the phase is frac(Tr x) - sum_{j >= 2} x_j.
inline long double reduced_phase(const Element& x, std::span<const ComplexL> conj) {
  long double t = to_long_double(frac_rational(x.trace()));
  for (std::size_t j = 1; j < conj.size(); ++j) t -= conj[j].real();
  t -= std::nearbyint(t);
  return t;
}

/// Embedding from coordinates loses the small conjugates once the coordinates
/// are large; callers following x lambda^k should pass conjugates propagated
/// multiplicatively instead.
inline long double reduced_phase(const Element& x) {
  const auto conj = x.embed();
  return reduced_phase(x, conj);
}

struct ErdosTerm {
  int k;
  Complex value;
};

struct ErdosResult {
  Complex base;                   // f^(alpha)
  std::vector<ErdosTerm> terms;   // f^(alpha lambda^k), k = 0..k_max
  double plateau;                 // max relative change of |f^| over the last 5 steps
};

namespace detail {

inline void require_integral_translations(const RefinementMask& mask) {
  for (const auto& t : mask.translations())
    for (const auto& c : t)
      if (!is_integer(c)) throw Error(ErrorCode::NotIntegral, "translations must lie in Z[lambda]");
}

inline double plateau_statistic(const std::vector<ErdosTerm>& terms, std::size_t window = 5) {
  double p = 0;
  const std::size_t n = terms.size();
  for (std::size_t i = n > window ? n - window : 1; i < n; ++i) {
    const double a = std::abs(terms[i].value), b = std::abs(terms[i - 1].value);
    p = std::max(p, a > 0 ? std::abs(a - b) / a : std::numeric_limits<double>::infinity());
  }
  return p;
}

}  // namespace detail

/// f^(alpha lambda^k) for k = 0..k_max through
/// f^(alpha lambda^k) = f^(alpha) prod_{j<k} A(alpha lambda^j), with every
/// argument tau_i alpha lambda^j kept exact and reduced modulo 1 by its trace.
inline ErdosResult erdos_sequence(const RefinementMask& mask, const Element& alpha, int k_max,
                                  const Tolerances& tol = {}, double tail_tol = 1e-15) {
  const auto& dil = mask.dilation();
  if (!dil.context || dil.context->classification() != Classification::PV)
    throw Error(ErrorCode::NotPV, "erdos_sequence needs a PV dilation");
  if (!dil.context->same_field(*alpha.context())) throw Error(ErrorCode::ContextMismatch, "alpha is from another field");
  detail::require_integral_translations(mask);
  if (k_max < 0) throw Error(ErrorCode::BadConfig, "k_max must be non-negative");
  const auto ctx = dil.context;
  const double inv = 1.0 / static_cast<double>(mask.abs_lambda());

  // f^(alpha): the factors A(alpha lambda^{-j}) are evaluated on small arguments.
  const long double a = alpha.real_value();
  {
    long double arg = a;
    const long double C = mask.derivative_bound();
    for (int j = 1; j < 100000 && a != 0; ++j) {
      arg /= mask.lambda();
      if (std::abs(mask(arg)) <= tol.zero)
        throw ZeroHitError(-j, "A(alpha lambda^" + std::to_string(-j) + ") vanishes");
      if (C * std::abs(arg) / (mask.abs_lambda() - 1) <= tail_tol) break;
    }
  }
  ErdosResult out{fourier_hat(mask, a, tail_tol), {}, 0};

  std::vector<Element> x;
  std::vector<std::vector<ComplexL>> conj;
  for (const auto& t : mask.translations()) {
    x.push_back(Element(ctx, t) * alpha);
    conj.push_back(x.back().embed());
  }
  const auto& roots = ctx->roots();
  Complex value = out.base;
  for (int k = 0; k <= k_max; ++k) {
    out.terms.push_back({k, value});
    if (k == k_max) break;
    Complex A = 0;
    for (std::size_t i = 0; i < x.size(); ++i) A += mask.coeffs()[i] * unit_phase(reduced_phase(x[i], conj[i]));
    A *= inv;
    if (std::abs(A) <= tol.zero) throw ZeroHitError(k, "A(alpha lambda^" + std::to_string(k) + ") vanishes");
    value *= A;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = x[i].times_lambda();
      for (std::size_t j = 0; j < roots.size(); ++j) conj[i][j] *= roots[j];
    }
  }
  out.plateau = detail::plateau_statistic(out.terms);
  return out;
}

/// The same sequence with A evaluated at the floating-point arguments alpha lambda^k.
inline std::vector<ErdosTerm> erdos_sequence_direct(const RefinementMask& mask, long double alpha, int k_max) {
  std::vector<ErdosTerm> out;
  Complex value = fourier_hat(mask, alpha);
  long double y = alpha;
  for (int k = 0; k <= k_max; ++k) {
    out.push_back({k, value});
    value *= mask(y);
    y *= mask.lambda();
  }
  return out;
}

struct OrbitResult {
  std::size_t cycle_length;
  std::size_t preperiod;
  double mean;
  std::vector<std::vector<Rational>> cycle;
};

/// Starting torus point (Tr(alpha), Tr(alpha lambda), ...) of the orbit that
/// alpha lambda^k (1, lambda, ..., lambda^{n-1}) approaches modulo 1.
inline std::vector<Rational> orbit_start(const Element& alpha) {
  std::vector<Rational> q;
  Element x = alpha;
  for (int i = 0; i < alpha.degree(); ++i, x = x.times_lambda()) q.push_back(x.trace());
  return q;
}

/// Orbit of q under the companion endomorphism of the torus, and the mean of
/// ln|P_trig(x)| = ln| |lambda|^{-1} sum_j a_j exp(2 pi i <t_j, x>) | over its cycle,
/// where t_j are the integer coordinates of tau_j.
inline OrbitResult orbit_mean(const ContextPtr& ctx, const RefinementMask& mask, const std::vector<Rational>& q,
                              const Tolerances& tol = {}, std::size_t max_steps = 10'000'000) {
  if (!mask.dilation().context || !ctx->same_field(*mask.dilation().context))
    throw Error(ErrorCode::ContextMismatch, "mask dilation is not the context's lambda");
  detail::require_integral_translations(mask);
  const int n = ctx->degree();
  if (static_cast<int>(q.size()) != n) throw Error(ErrorCode::BadConfig, "orbit point must have n coordinates");

  BigInt D = 1;
  for (const auto& c : q) D = boost::multiprecision::lcm(D, boost::multiprecision::denominator(c));
  auto reduce = [&](std::vector<BigInt>& s) {
    for (auto& v : s) {
      v %= D;
      if (v < 0) v += D;
    }
  };
  std::vector<BigInt> s;
  for (const auto& c : q) s.push_back(boost::multiprecision::numerator(Rational(c * D)));
  reduce(s);

  const auto& coeffs = ctx->coeffs();
  std::map<std::vector<BigInt>, std::size_t> seen;
  std::vector<std::vector<BigInt>> path;
  while (!seen.count(s)) {
    if (path.size() >= max_steps) throw Error(ErrorCode::Overflow, "orbit longer than the step budget");
    seen.emplace(s, path.size());
    path.push_back(s);
    std::vector<BigInt> next(static_cast<std::size_t>(n));
    for (int i = 0; i + 1 < n; ++i) next[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i + 1)];
    BigInt last = 0;
    for (int i = 0; i < n; ++i) last -= BigInt(coeffs[static_cast<std::size_t>(i)]) * s[static_cast<std::size_t>(i)];
    next[static_cast<std::size_t>(n - 1)] = last;
    reduce(next);
    s = std::move(next);
  }
  const std::size_t start = seen.at(s);
  OrbitResult out{path.size() - start, start, 0, {}};

  std::vector<std::vector<long long>> t;
  for (const auto& tr : mask.translations()) {
    std::vector<long long> row;
    for (const auto& c : tr) row.push_back(boost::multiprecision::numerator(c).convert_to<long long>());
    t.push_back(std::move(row));
  }
  const double inv = 1.0 / static_cast<double>(mask.abs_lambda());
  long double acc = 0;
  for (std::size_t i = start; i < path.size(); ++i) {
    std::vector<Rational> x;
    for (const auto& v : path[i]) x.emplace_back(v, D);
    Complex P = 0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      Rational phase = 0;
      for (int k = 0; k < n; ++k) phase += Rational(t[j][static_cast<std::size_t>(k)]) * x[static_cast<std::size_t>(k)];
      P += mask.coeffs()[j] * unit_phase(to_long_double(frac_rational(phase)));
    }
    P *= inv;
    if (std::abs(P) <= tol.zero) throw Error(ErrorCode::ZeroOnOrbit, "P_trig vanishes on the cycle");
    acc += std::log(std::abs(P));
    out.cycle.push_back(std::move(x));
  }
  out.mean = static_cast<double>(acc / static_cast<long double>(out.cycle_length));
  return out;
}

}  // namespace pvq
