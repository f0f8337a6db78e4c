#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "pvq/error.hpp"
#include "pvq/numeric.hpp"

namespace pvq {

struct RootSet {
  std::vector<ComplexL> roots;
  /// Final Newton correction |p(z)/p'(z)| per root; a bound on the root error
  /// for simple roots.
  std::vector<long double> corrections;
  /// |p(z)| / |leading coefficient| per root.
  std::vector<long double> residuals;
  int iterations = 0;
};

namespace detail {

inline void horner(std::span<const ComplexL> coeffs, ComplexL z, ComplexL& p, ComplexL& dp) {
  p = coeffs.back();
  dp = 0;
  for (std::size_t i = coeffs.size() - 1; i-- > 0;) {
    dp = dp * z + p;
    p = p * z + coeffs[i];
  }
}

}  // namespace detail

/// All roots of sum_k coeffs[k] z^k by Aberth-Ehrlich simultaneous iteration
/// followed by Newton polishing. Coefficients are low to high; the leading one
/// must be nonzero. Zero roots are split off exactly.
inline RootSet find_roots(std::span<const ComplexL> coeffs_in, int max_iterations = 1000) {
  std::size_t lead = coeffs_in.size();
  while (lead > 0 && coeffs_in[lead - 1] == ComplexL(0)) --lead;
  if (lead == 0) throw Error(ErrorCode::ZeroPolynomial, "polynomial is identically zero");

  std::size_t zeros = 0;
  while (coeffs_in[zeros] == ComplexL(0)) ++zeros;
  std::vector<ComplexL> coeffs(coeffs_in.begin() + zeros, coeffs_in.begin() + lead);
  const std::size_t degree = coeffs.size() - 1;

  RootSet out;
  out.roots.assign(zeros, ComplexL(0));
  out.corrections.assign(zeros, 0);
  out.residuals.assign(zeros, 0);
  if (degree == 0) return out;

  // Normalize to a monic polynomial.
  const ComplexL leading = coeffs.back();
  for (auto& c : coeffs) c /= leading;

  // Initial guesses on a circle whose radius is the geometric mean of the root
  // moduli, rotated off the real axis to break conjugate symmetry.
  const long double radius = std::pow(std::abs(coeffs.front()), 1.0L / static_cast<long double>(degree));
  std::vector<ComplexL> z(degree);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  for (std::size_t k = 0; k < degree; ++k) {
    long double angle = two_pi * static_cast<long double>(k) / static_cast<long double>(degree) + 0.4L;
    z[k] = std::polar(radius, angle);
  }

  const long double eps = std::numeric_limits<long double>::epsilon();
  std::vector<bool> done(degree, false);
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    bool all_done = true;
    for (std::size_t k = 0; k < degree; ++k) {
      if (done[k]) continue;
      ComplexL p, dp;
      detail::horner(coeffs, z[k], p, dp);
      if (p == ComplexL(0)) {
        done[k] = true;
        continue;
      }
      ComplexL ratio = p / dp;
      ComplexL sum = 0;
      for (std::size_t j = 0; j < degree; ++j)
        if (j != k) sum += 1.0L / (z[k] - z[j]);
      ComplexL w = ratio / (1.0L - ratio * sum);
      z[k] -= w;
      if (!std::isfinite(z[k].real()) || !std::isfinite(z[k].imag()))
        throw Error(ErrorCode::RootFindingDiverged, "Aberth iteration produced a non-finite iterate");
      if (std::abs(w) <= 8 * eps * std::max(1.0L, std::abs(z[k])))
        done[k] = true;
      else
        all_done = false;
    }
    if (all_done) break;
  }
  if (iter == max_iterations)
    throw Error(ErrorCode::RootFindingDiverged, "Aberth iteration did not converge");

  for (std::size_t k = 0; k < degree; ++k) {
    long double correction = 0;
    for (int step = 0; step < 3; ++step) {
      ComplexL p, dp;
      detail::horner(coeffs, z[k], p, dp);
      if (dp == ComplexL(0)) break;
      ComplexL delta = p / dp;
      correction = std::abs(delta);
      if (correction > 1e-6L * std::max(1.0L, std::abs(z[k]))) break;  // multiple root cluster
      z[k] -= delta;
    }
    ComplexL p, dp;
    detail::horner(coeffs, z[k], p, dp);
    out.roots.push_back(z[k]);
    out.corrections.push_back(correction);
    out.residuals.push_back(std::abs(p));
  }
  out.iterations = iter;
  return out;
}

inline RootSet find_roots(std::span<const Complex> coeffs, int max_iterations = 1000) {
  std::vector<ComplexL> wide(coeffs.begin(), coeffs.end());
  return find_roots(std::span<const ComplexL>(wide), max_iterations);
}

}  // namespace pvq
