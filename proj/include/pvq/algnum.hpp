#pragma once

/**
 * @file algnum.hpp
 * @brief Minimal polynomials of PV numbers and exact arithmetic in Q(lambda).
 *
 * A Context owns the monic integer minimal polynomial of lambda, its roots
 * (lambda_1 real and of maximal modulus, conjugate pairs adjacent), the
 * companion matrix and the Vandermonde matrix of the roots. Elements of
 * Q(lambda) are stored as exact rational coordinates over the power basis
 * 1, lambda, ..., lambda^{n-1}; everything that decides lattice membership
 * (traces, norms, integrality) stays in exact arithmetic.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvq/error.hpp"
#include "pvq/numeric.hpp"
#include "pvq/roots.hpp"

namespace pvq {

enum class Classification { PV, Salem, Neither };

inline std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::PV: return "PV";
    case Classification::Salem: return "Salem";
    case Classification::Neither: return "neither";
  }
  return "neither";
}

using IntMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

class Context {
 public:
  /// Builds the context of z^n + c_{n-1} z^{n-1} + ... + c_0 from c_0..c_{n-1}.
  static std::shared_ptr<const Context> build(std::vector<std::int64_t> coeffs, int precision_bits = 53,
                                              const Tolerances& tol = {}) {
    if (coeffs.size() < 2)
      throw Error(ErrorCode::NonMonic, "expected a monic polynomial of degree >= 2 (c_0..c_{n-1})");
    if (coeffs.front() == 0) throw Error(ErrorCode::ZeroConstantTerm, "c_0 must be nonzero");
    if (precision_bits < 24 || precision_bits > 64)
      throw Error(ErrorCode::UnsupportedPrecision,
                  "precision_bits must lie in [24, 64]; roots are refined in extended precision");
    if (auto r = rational_root(coeffs))
      throw Error(ErrorCode::RationalRootFound, "z = " + std::to_string(*r) + " is a root; polynomial is reducible");
    auto ctx = std::shared_ptr<Context>(new Context(std::move(coeffs), precision_bits, tol));
    ctx->warnings_.push_back(
        "irreducibility is assumed: only the rational root test was applied");
    return ctx;
  }

  /// Degree-one context z - m for an integer dilation |m| >= 2 (Haar, Cantor masks).
  static std::shared_ptr<const Context> rational_integer(std::int64_t m, const Tolerances& tol = {}) {
    if (m == 0) throw Error(ErrorCode::ZeroConstantTerm, "integer dilation must be nonzero");
    return std::shared_ptr<Context>(new Context({-m}, 64, tol));
  }

  int degree() const { return static_cast<int>(coeffs_.size()); }
  const std::vector<std::int64_t>& coeffs() const { return coeffs_; }
  int precision_bits() const { return precision_bits_; }
  const Tolerances& tolerances() const { return tol_; }

  const std::vector<ComplexL>& roots() const { return roots_; }
  long double lambda() const { return roots_[0].real(); }
  /// Index of the complex conjugate of root j (j itself for real roots).
  int partner(int j) const { return partner_[static_cast<std::size_t>(j)]; }
  bool is_real_root(int j) const { return partner(j) == j; }

  Classification classification() const { return classification_; }
  bool unit_constant() const { return coeffs_.front() == 1 || coeffs_.front() == -1; }
  /// 1 - max_{j >= 2} |lambda_j|; positive margin certifies PV at working precision.
  double pv_margin() const { return pv_margin_; }
  /// max_{j >= 2} |lambda_j| (0 for degree one).
  double second_modulus() const { return 1.0 - pv_margin_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Frobenius companion matrix: superdiagonal ones, last row -c_0..-c_{n-1}.
  IntMatrix companion() const {
    const int n = degree();
    IntMatrix c = IntMatrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) c(i, i + 1) = 1;
    for (int j = 0; j < n; ++j) c(n - 1, j) = -coeffs_[static_cast<std::size_t>(j)];
    return c;
  }

  /// V(i, j) = lambda_j^i.
  Eigen::MatrixXcd vandermonde() const {
    const int n = degree();
    Eigen::MatrixXcd v(n, n);
    for (int j = 0; j < n; ++j) {
      ComplexL p = 1;
      for (int i = 0; i < n; ++i) {
        v(i, j) = Complex(static_cast<double>(p.real()), static_cast<double>(p.imag()));
        p *= roots_[static_cast<std::size_t>(j)];
      }
    }
    return v;
  }

  double abs_det_vandermonde() const { return std::abs(vandermonde().determinant()); }

  /// max_{i,j} |(C^k V - V D^k)_{ij}| / max(1, |lambda_1|^k).
  double companion_residual(int k) const {
    const int n = degree();
    Eigen::MatrixXcd c = companion().cast<double>().cast<Complex>();
    Eigen::MatrixXcd v = vandermonde();
    Eigen::MatrixXcd ck = Eigen::MatrixXcd::Identity(n, n);
    for (int i = 0; i < k; ++i) ck = ck * c;
    Eigen::MatrixXcd dk = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      ComplexL r = std::pow(roots_[static_cast<std::size_t>(j)], k);
      dk(j, j) = Complex(static_cast<double>(r.real()), static_cast<double>(r.imag()));
    }
    double scale = std::max(1.0, std::pow(std::abs(static_cast<double>(lambda())), k));
    return (ck * v - v * dk).cwiseAbs().maxCoeff() / scale;
  }

  /// |Lambda(lambda_j)| for every root.
  std::vector<long double> root_residuals() const {
    std::vector<long double> out;
    for (const auto& r : roots_) out.push_back(std::abs(evaluate(r)));
    return out;
  }

  ComplexL evaluate(ComplexL z) const {
    ComplexL p = 1;
    for (std::size_t i = coeffs_.size(); i-- > 0;) p = p * z + static_cast<long double>(coeffs_[i]);
    return p;
  }

  bool same_field(const Context& other) const { return coeffs_ == other.coeffs_; }

 private:
  Context(std::vector<std::int64_t> coeffs, int precision_bits, const Tolerances& tol)
      : coeffs_(std::move(coeffs)), precision_bits_(precision_bits), tol_(tol) {
    compute_roots();
    classify();
  }

  static std::optional<std::int64_t> rational_root(const std::vector<std::int64_t>& c) {
    // Monic: any rational root is an integer dividing c_0.
    const std::int64_t c0 = c.front() < 0 ? -c.front() : c.front();
    auto is_root = [&](std::int64_t r) {
      BigInt acc = 1;
      for (std::size_t i = c.size(); i-- > 0;) acc = acc * r + c[i];
      return acc == 0;
    };
    for (std::int64_t d = 1; d * d <= c0; ++d) {
      if (c0 % d != 0) continue;
      for (std::int64_t cand : {d, -d, c0 / d, -(c0 / d)})
        if (is_root(cand)) return cand;
    }
    return std::nullopt;
  }

  void compute_roots() {
    const int n = degree();
    if (n == 1) {
      roots_ = {ComplexL(-static_cast<long double>(coeffs_[0]), 0)};
      partner_ = {0};
      return;
    }
    std::vector<ComplexL> poly;
    for (auto c : coeffs_) poly.push_back(static_cast<long double>(c));
    poly.push_back(1);
    RootSet rs = find_roots(std::span<const ComplexL>(poly));

    // Newton refinement on the exact integer polynomial.
    for (auto& z : rs.roots) {
      for (int step = 0; step < 4; ++step) {
        ComplexL p = 1, dp = 0;
        for (std::size_t i = coeffs_.size(); i-- > 0;) {
          dp = dp * z + p;
          p = p * z + static_cast<long double>(coeffs_[i]);
        }
        if (dp == ComplexL(0)) break;
        z -= p / dp;
      }
    }

    std::vector<ComplexL> real_roots, upper;
    for (auto z : rs.roots) {
      long double scale = std::max(1.0L, std::abs(z));
      if (std::abs(z.imag()) <= 1e-10L * scale)
        real_roots.emplace_back(z.real(), 0);
      else if (z.imag() > 0)
        upper.push_back(z);
    }
    if (real_roots.size() + 2 * upper.size() != rs.roots.size())
      throw Error(ErrorCode::RootFindingDiverged, "nonreal roots are not closed under conjugation");
    if (real_roots.empty())
      throw Error(ErrorCode::AmbiguousLeadingRoot, "polynomial has no real root");

    std::sort(real_roots.begin(), real_roots.end(),
              [](const ComplexL& a, const ComplexL& b) { return std::abs(a) > std::abs(b); });
    if (real_roots.size() > 1 &&
        std::abs(std::abs(real_roots[0]) - std::abs(real_roots[1])) <= tol_.unit)
      throw Error(ErrorCode::AmbiguousLeadingRoot, "two real roots share the maximal modulus");
    for (const auto& z : upper)
      if (std::abs(z) >= std::abs(real_roots[0]) - tol_.unit)
        throw Error(ErrorCode::AmbiguousLeadingRoot, "a nonreal root has maximal modulus");

    roots_.push_back(real_roots[0]);
    std::sort(real_roots.begin() + 1, real_roots.end(),
              [](const ComplexL& a, const ComplexL& b) { return a.real() > b.real(); });
    roots_.insert(roots_.end(), real_roots.begin() + 1, real_roots.end());
    std::sort(upper.begin(), upper.end(), [](const ComplexL& a, const ComplexL& b) {
      return a.real() > b.real();
    });
    for (const auto& z : upper) {
      roots_.push_back(z);
      roots_.push_back(std::conj(z));
    }
    partner_.resize(roots_.size());
    for (std::size_t j = 0; j < roots_.size(); ++j) partner_[j] = static_cast<int>(j);
    for (std::size_t j = 1 + (real_roots.size() - 1); j + 1 < roots_.size(); j += 2) {
      partner_[j] = static_cast<int>(j + 1);
      partner_[j + 1] = static_cast<int>(j);
    }
    for (const auto& r : roots_)
      if (std::abs(evaluate(r)) > tol_.root * std::max(1.0L, std::pow(std::abs(r), degree())))
        throw Error(ErrorCode::RootFindingDiverged, "root residual exceeds tol_root after refinement");
  }

  void classify() {
    const long double lead = std::abs(roots_[0]);
    long double second = 0;
    bool touches_circle = false;
    for (std::size_t j = 1; j < roots_.size(); ++j) {
      long double m = std::abs(roots_[j]);
      second = std::max(second, m);
      if (std::abs(m - 1.0L) <= tol_.unit) touches_circle = true;
    }
    pv_margin_ = static_cast<double>(1.0L - second);
    if (lead > 1.0L && second < 1.0L - tol_.unit)
      classification_ = Classification::PV;
    else if (lead > 1.0L && second <= 1.0L + tol_.unit && touches_circle)
      classification_ = Classification::Salem;
    else
      classification_ = Classification::Neither;
  }

  std::vector<std::int64_t> coeffs_;
  int precision_bits_;
  Tolerances tol_;
  std::vector<ComplexL> roots_;
  std::vector<int> partner_;
  Classification classification_ = Classification::Neither;
  double pv_margin_ = 0;
  std::vector<std::string> warnings_;
};

using ContextPtr = std::shared_ptr<const Context>;

/// An exact element q_0 + q_1 lambda + ... + q_{n-1} lambda^{n-1} of Q(lambda).
class Element {
 public:
  Element() = default;
  Element(ContextPtr ctx, std::vector<Rational> coords) : ctx_(std::move(ctx)), coords_(std::move(coords)) {
    if (!ctx_) throw Error(ErrorCode::ContextMismatch, "element without context");
    if (coords_.size() != static_cast<std::size_t>(ctx_->degree()))
      throw Error(ErrorCode::ContextMismatch, "coordinate count differs from field degree");
  }

  static Element zero(ContextPtr ctx) {
    const auto n = static_cast<std::size_t>(ctx->degree());
    return Element(std::move(ctx), std::vector<Rational>(n, Rational(0)));
  }
  static Element one(ContextPtr ctx) { return integer(std::move(ctx), 1); }
  static Element integer(ContextPtr ctx, long long value) {
    Element e = zero(std::move(ctx));
    e.coords_[0] = value;
    return e;
  }
  /// lambda^k for k >= 0.
  static Element lambda_power(ContextPtr ctx, int k) {
    Element e = one(ctx);
    for (int i = 0; i < k; ++i) e = e.times_lambda();
    return e;
  }
  static Element from_integers(ContextPtr ctx, std::span<const long long> coords) {
    std::vector<Rational> q(coords.begin(), coords.end());
    return Element(std::move(ctx), std::move(q));
  }

  const ContextPtr& context() const { return ctx_; }
  const std::vector<Rational>& coords() const { return coords_; }
  int degree() const { return static_cast<int>(coords_.size()); }

  bool is_zero() const {
    return std::all_of(coords_.begin(), coords_.end(), [](const Rational& q) { return q == 0; });
  }
  /// Membership in Z[lambda]: every coordinate is an integer.
  bool is_integral() const { return std::all_of(coords_.begin(), coords_.end(), is_integer); }

  /// Integer coordinates; throws NotIntegral outside Z[lambda] or on 64-bit overflow.
  std::vector<long long> integer_coords() const {
    std::vector<long long> out;
    for (const auto& q : coords_) {
      if (!is_integer(q)) throw Error(ErrorCode::NotIntegral, "element is not in Z[lambda]");
      const BigInt& num = boost::multiprecision::numerator(q);
      if (num > std::numeric_limits<long long>::max() || num < std::numeric_limits<long long>::min())
        throw Error(ErrorCode::Overflow, "integer coordinate exceeds 64 bits");
      out.push_back(num.convert_to<long long>());
    }
    return out;
  }

  /// Multiplication by lambda, reducing lambda^n through the minimal polynomial.
  Element times_lambda() const {
    const auto& c = ctx_->coeffs();
    const std::size_t n = coords_.size();
    std::vector<Rational> out(n);
    const Rational top = coords_[n - 1];
    for (std::size_t i = n; i-- > 1;) out[i] = coords_[i - 1];
    out[0] = 0;
    for (std::size_t i = 0; i < n; ++i) out[i] -= top * c[i];
    return Element(ctx_, std::move(out));
  }

  Element operator+(const Element& b) const {
    check_same(b);
    std::vector<Rational> out(coords_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.coords_[i];
    return Element(ctx_, std::move(out));
  }
  Element operator-(const Element& b) const {
    check_same(b);
    std::vector<Rational> out(coords_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.coords_[i];
    return Element(ctx_, std::move(out));
  }
  Element operator-() const {
    std::vector<Rational> out(coords_);
    for (auto& q : out) q = -q;
    return Element(ctx_, std::move(out));
  }
  Element operator*(const Rational& s) const {
    std::vector<Rational> out(coords_);
    for (auto& q : out) q *= s;
    return Element(ctx_, std::move(out));
  }
  Element operator*(const Element& b) const {
    check_same(b);
    // sum_i b_i (a lambda^i), accumulating a lambda^i by repeated times_lambda.
    Element acc = zero(ctx_);
    Element power = *this;
    for (std::size_t i = 0; i < b.coords_.size(); ++i) {
      if (b.coords_[i] != 0)
        for (std::size_t k = 0; k < coords_.size(); ++k) acc.coords_[k] += b.coords_[i] * power.coords_[k];
      if (i + 1 < b.coords_.size()) power = power.times_lambda();
    }
    return acc;
  }
  bool operator==(const Element& b) const { return ctx_->same_field(*b.ctx_) && coords_ == b.coords_; }

  /// Matrix of multiplication by this element on the power basis; column k
  /// holds the coordinates of (this * lambda^k).
  std::vector<std::vector<Rational>> multiplication_matrix() const {
    const std::size_t n = coords_.size();
    std::vector<std::vector<Rational>> m(n, std::vector<Rational>(n));
    Element col = *this;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) m[i][k] = col.coords_[i];
      if (k + 1 < n) col = col.times_lambda();
    }
    return m;
  }

  /// Exact inverse; throws ZeroPolynomial for the zero element.
  Element inverse() const {
    if (is_zero()) throw Error(ErrorCode::ZeroPolynomial, "zero element has no inverse");
    auto m = multiplication_matrix();
    const std::size_t n = m.size();
    std::vector<Rational> rhs(n, Rational(0));
    rhs[0] = 1;
    // Gauss-Jordan on [M | e_0].
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      while (piv < n && m[piv][col] == 0) ++piv;
      std::swap(m[piv], m[col]);
      std::swap(rhs[piv], rhs[col]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col || m[r][col] == 0) continue;
        Rational f = m[r][col] / m[col][col];
        for (std::size_t k = col; k < n; ++k) m[r][k] -= f * m[col][k];
        rhs[r] -= f * rhs[col];
      }
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] /= m[i][i];
    return Element(ctx_, std::move(rhs));
  }

  /// Conjugate embeddings: component j is sum_i q_i lambda_j^i.
  std::vector<ComplexL> embed() const {
    std::vector<ComplexL> out;
    for (const auto& root : ctx_->roots()) {
      ComplexL acc = 0;
      for (std::size_t i = coords_.size(); i-- > 0;) acc = acc * root + to_long_double(coords_[i]);
      out.push_back(acc);
    }
    out[0] = ComplexL(out[0].real(), 0);
    return out;
  }

  long double real_value() const { return embed()[0].real(); }

  /// Trace of the multiplication matrix, exact.
  Rational trace() const {
    auto m = multiplication_matrix();
    Rational t = 0;
    for (std::size_t i = 0; i < m.size(); ++i) t += m[i][i];
    return t;
  }

  /// Determinant of the multiplication matrix, exact.
  Rational norm() const {
    auto m = multiplication_matrix();
    const std::size_t n = m.size();
    Rational det = 1;
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      while (piv < n && m[piv][col] == 0) ++piv;
      if (piv == n) return 0;
      if (piv != col) {
        std::swap(m[piv], m[col]);
        det = -det;
      }
      det *= m[col][col];
      for (std::size_t r = col + 1; r < n; ++r) {
        if (m[r][col] == 0) continue;
        Rational f = m[r][col] / m[col][col];
        for (std::size_t k = col; k < n; ++k) m[r][k] -= f * m[col][k];
      }
    }
    return det;
  }

 private:
  void check_same(const Element& b) const {
    if (!ctx_ || !b.ctx_ || !ctx_->same_field(*b.ctx_))
      throw Error(ErrorCode::ContextMismatch, "elements belong to different fields");
  }

  ContextPtr ctx_;
  std::vector<Rational> coords_;
};

enum class ElemOp { Add, Sub, Mul };

inline Element elem_arith(const Element& a, const Element& b, ElemOp op) {
  switch (op) {
    case ElemOp::Add: return a + b;
    case ElemOp::Sub: return a - b;
    case ElemOp::Mul: return a * b;
  }
  return a;
}

struct TraceNorm {
  Rational trace;
  Rational norm;
};

inline TraceNorm trace_and_norm(const Element& a) { return {a.trace(), a.norm()}; }

struct PvNormTerm {
  int k;
  BigInt nearest;          // n_k = trace(lambda^k a)
  long double distance;    // |lambda^k a - n_k|
};

/// n_k = trace(lambda^k a) computed exactly and the distance |lambda^k a - n_k|.
///
/// The distance equals |sum_{j>=2} lambda_j^k a_j| because the trace is the sum
/// of all conjugates; it is evaluated from the small conjugates so that it keeps
/// full relative precision even when lambda^k a itself is large.
inline std::vector<PvNormTerm> pvnorm_sequence(const Element& a, int k_max) {
  const auto& ctx = *a.context();
  if (ctx.classification() != Classification::PV)
    throw Error(ErrorCode::NotPV, "pvnorm_sequence requires a PV context");
  if (!a.is_integral()) throw Error(ErrorCode::NotIntegral, "pvnorm_sequence requires a in Z[lambda]");

  const auto conj = a.embed();
  std::vector<PvNormTerm> out;
  Element power = a;
  for (int k = 0; k <= k_max; ++k) {
    Rational t = power.trace();
    ComplexL tail = 0;
    for (std::size_t j = 1; j < conj.size(); ++j) tail += std::pow(ctx.roots()[j], k) * conj[j];
    out.push_back({k, boost::multiprecision::numerator(t), std::abs(tail)});
    power = power.times_lambda();
  }
  return out;
}

}  // namespace pvq
