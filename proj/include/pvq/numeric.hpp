#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "pvq/error.hpp"

namespace pvq {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;
using Complex = std::complex<double>;
using ComplexL = std::complex<long double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Module-wide tolerances. Every field can be overridden from the CLI with
/// --tol-KEY=VALUE.
struct Tolerances {
  double root = 1e-13;      // |Lambda(lambda_j)| after Newton refinement
  double unit = 1e-9;       // |lambda_j| vs 1 classification band
  double lin = 1e-10;       // linear-algebra identities
  double decay = 0.02;      // relative, on decay-ratio fits
  double boundary = 1e-9;   // window membership margin
  double mask = 1e-12;      // sum rule of mask coefficients
  double mahler = 1e-6;     // grid-doubling change accepted by torus quadrature
  double zero = 1e-12;      // |A| below this counts as a zero of the mask
  double v_clip = 1e-300;   // clip level inside log integrals
};

inline Rational floor_rational(const Rational& q) {
  BigInt num = boost::multiprecision::numerator(q);
  BigInt den = boost::multiprecision::denominator(q);
  BigInt fl = num / den;
  if (num < 0 && fl * den != num) fl -= 1;
  return Rational(fl);
}

/// Representative of q modulo 1 in [0, 1).
inline Rational frac_rational(const Rational& q) { return q - floor_rational(q); }

inline bool is_integer(const Rational& q) { return boost::multiprecision::denominator(q) == 1; }

inline long double to_long_double(const Rational& q) {
  // Split off the integer part so large numerators keep their low digits.
  Rational fl = floor_rational(q);
  Rational fr = q - fl;
  long double ip = boost::multiprecision::numerator(fl).convert_to<long double>();
  long double fp = boost::multiprecision::numerator(fr).convert_to<long double>() /
                   boost::multiprecision::denominator(fr).convert_to<long double>();
  return ip + fp;
}

inline double to_double(const Rational& q) { return static_cast<double>(to_long_double(q)); }

/// Parses "p", "-p" or "p/q".
inline Rational parse_rational(const std::string& text) {
  try {
    auto slash = text.find('/');
    if (slash == std::string::npos) return Rational(BigInt(text));
    BigInt num(text.substr(0, slash));
    BigInt den(text.substr(slash + 1));
    if (den == 0) throw Error(ErrorCode::BadConfig, "zero denominator in '" + text + "'");
    return Rational(num, den);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadConfig, "cannot parse rational '" + text + "'");
  }
}

inline std::string rational_to_string(const Rational& q) {
  if (is_integer(q)) return boost::multiprecision::numerator(q).str();
  return boost::multiprecision::numerator(q).str() + "/" + boost::multiprecision::denominator(q).str();
}

/// e^{2 pi i t} with t reduced modulo 1 first.
inline Complex unit_phase(long double t) {
  long double r = t - std::floor(t);
  long double a = 2.0L * std::numbers::pi_v<long double> * r;
  return {static_cast<double>(std::cos(a)), static_cast<double>(std::sin(a))};
}

}  // namespace pvq
