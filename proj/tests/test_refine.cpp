#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "pvq/refine.hpp"

namespace {

using namespace pvq;
using R = Rational;

const double kPhi = 1.6180339887498949;
const double kPi = std::numbers::pi;

ContextPtr golden() { return Context::build({-1, -1}); }

RefinementMask haar() { return build_mask(Dilation::real(2), {1.0, 1.0}, std::vector<R>{0, 1}); }
RefinementMask cantor() { return build_mask(Dilation::real(3), {1.5, 1.5}, std::vector<R>{0, 2}); }
RefinementMask bernoulli() {
  return build_mask(Dilation::algebraic(golden()), {kPhi / 2, kPhi / 2}, std::vector<std::vector<R>>{{0}, {1}});
}
// A(y) = 1 + e(y) - e(2y) over lambda = 2
RefinementMask three_term() { return build_mask(Dilation::real(2), {2.0, 2.0, -2.0}, std::vector<R>{0, 1, 2}); }
// P = (1 + z1 + z2) / 3 with tau = (0, 1, phi)
RefinementMask two_frequency() {
  return build_mask(Dilation::algebraic(golden()), {kPhi / 3, kPhi / 3, kPhi / 3},
                    std::vector<std::vector<R>>{{0, 0}, {1, 0}, {0, 1}});
}

std::vector<RefinementMask> examples() { return {haar(), cantor(), bernoulli(), three_term(), two_frequency()}; }

TEST(BuildMask, ClassicalExamples) {
  auto h = haar();
  EXPECT_EQ(h.rank(), 1);
  EXPECT_EQ(h.frequencies()[0], 1);
  EXPECT_EQ(h.univariate(), (std::vector<Complex>{0.5, 0.5}));
  auto c = cantor();
  EXPECT_EQ(c.rank(), 1);
  EXPECT_EQ(c.basis()[0][0], R(2));
  EXPECT_EQ(c.univariate(), (std::vector<Complex>{0.5, 0.5}));
  auto b = bernoulli();
  EXPECT_EQ(b.rank(), 1);
  EXPECT_EQ(b.basis()[0], (std::vector<R>{1, 0}));
  EXPECT_EQ(two_frequency().rank(), 2);
  EXPECT_NEAR(std::abs(b(0) - Complex(1)), 0, 1e-15);
}

TEST(BuildMask, RankAndShift) {
  // tau = (-1/2, 1/3, 5/6): rank 1, r = 1/6, exponents shifted to start at 0
  auto m = build_mask(Dilation::real(2.5), {1.0, 1.0, 0.5}, std::vector<R>{R(-1, 2), R(1, 3), R(5, 6)});
  EXPECT_EQ(m.rank(), 1);
  EXPECT_EQ(m.basis()[0][0], R(1, 6));
  EXPECT_EQ(m.exponents(), (std::vector<std::vector<long long>>{{0}, {5}, {8}}));
  EXPECT_EQ(m.shift(), (std::vector<long long>{-3}));
    auto g = golden();
  auto q = build_mask(Dilation::algebraic(g), {0.5, 0.5, 0.3, kPhi - 1.3}, std::vector<std::vector<R>>{{0, 0}, {2, 0}, {0, 3}, {2, 2}});
  EXPECT_EQ(q.rank(), 2);
  for (std::size_t j = 0; j < q.size(); ++j) {
    std::vector<R> sum(2, R(0));
    for (int k = 0; k < q.rank(); ++k)
      for (int c = 0; c < 2; ++c)
        sum[static_cast<std::size_t>(c)] += R(q.exponents()[j][static_cast<std::size_t>(k)] + q.shift()[static_cast<std::size_t>(k)]) *
                                             q.basis()[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
    EXPECT_EQ(sum, q.translations()[j]);
  }
}

TEST(BuildMask, Errors) {
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::UnknownCommand;
  };
  EXPECT_EQ(code([] { build_mask(Dilation::real(2), {1.0, 0.9}, std::vector<R>{0, 1}); }), ErrorCode::SumRuleViolated);
  EXPECT_EQ(code([] { build_mask(Dilation::real(2), {2.0, 0.0}, std::vector<R>{0, 1}); }), ErrorCode::ZeroCoefficient);
  EXPECT_EQ(code([] { build_mask(Dilation::real(2), {1.0, 1.0}, std::vector<R>{1, 0}); }),
            ErrorCode::NonIncreasingTranslations);
  EXPECT_EQ(code([] { build_mask(Dilation::real(2), {1.0, 1.0}, std::vector<R>{1, 1}); }),
            ErrorCode::NonIncreasingTranslations);
  EXPECT_EQ(code([] { build_mask(Dilation::real(0.5), {0.25, 0.25}, std::vector<R>{0, 1}); }), ErrorCode::BadConfig);
}

TEST(BuildMask, ExponentRepresentation) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-40, 40);
  for (const auto& m : examples()) {
    for (int i = 0; i < 50; ++i) {
      const long double y = dist(rng);
      std::vector<long double> t;
      long double s = 0;
      for (int k = 0; k < m.rank(); ++k) {
        t.push_back(m.frequencies()[static_cast<std::size_t>(k)] * y);
        s += static_cast<long double>(m.shift()[static_cast<std::size_t>(k)]) * m.frequencies()[static_cast<std::size_t>(k)] * y;
      }
      Complex via = unit_phase(s) * m.trig(t);
      EXPECT_NEAR(std::abs(m(y) - via), 0, 1e-12);
    }
  }
}

TEST(Mahler, Univariate) {
  auto half = mahler_univariate(std::vector<Complex>{0.5, 0.5});
  EXPECT_NEAR(half.value, 0.5, 1e-15);
  EXPECT_EQ(half.method, MahlerMethod::Jensen);
  auto lehmer = mahler_univariate(std::vector<Complex>{1, 1, 0, -1, -1, -1, -1, -1, 0, 1, 1});
  EXPECT_NEAR(lehmer.value, 1.17628, 1e-5);
  EXPECT_NEAR(lehmer.value, 1.1762808182599176, 1e-12);
  EXPECT_NEAR(mahler_univariate(std::vector<Complex>{1, 1, -1}).value, (1 + std::sqrt(5.0)) / 2, 1e-14);
  // lower bound |leading coefficient|
  auto lead = mahler_univariate(std::vector<Complex>{1, 0, 3});
  EXPECT_GE(lead.value, 3.0);
  EXPECT_NEAR(lead.value, 3.0, 1e-14);
  try {
    mahler_univariate(std::vector<Complex>{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroPolynomial);
  }
}

TEST(Mahler, Masks) {
  EXPECT_NEAR(mahler_mask(haar()).value, 0.5, 1e-14);
  EXPECT_NEAR(mahler_mask(cantor()).value, 0.5, 1e-14);
  EXPECT_NEAR(mahler_mask(bernoulli()).value, 0.5, 1e-14);
  EXPECT_NEAR(mahler_mask(three_term()).value, (1 + std::sqrt(5.0)) / 2, 1e-12);
  auto b = bernoulli();
  EXPECT_EQ(mahler_mask(b).value, mahler_univariate(b.univariate()).value);
}

TEST(Mahler, TwoFrequencyMethodsAgree) {
  auto m = two_frequency();
  auto r = mahler_mask(m);
  EXPECT_EQ(r.method, MahlerMethod::TorusQuadrature);
  ASSERT_TRUE(r.univariate_limit);
  EXPECT_NEAR(r.value, *r.univariate_limit, 1e-4);
  // M(1 + x + y) is Smyth's constant 1.38135644451849779...
  EXPECT_NEAR(r.value, 1.3813564445184977 / 3, 1e-6);
  EXPECT_NEAR(*r.univariate_limit, 1.3813564445184977 / 3, 1e-6);
  EXPECT_LT(r.error_estimate, 1e-5);
}

TEST(Mahler, QuadratureBudget) {
  MahlerOptions opt;
  opt.max_samples = 64 * 64;
  Tolerances tol;
  tol.mahler = 1e-12;
  try {
    mahler_mask(two_frequency(), tol, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QuadratureNonconvergent);
    EXPECT_EQ(exit_code(e.code()), 3);
  }
}

TEST(Rho, Table) {
  EXPECT_NEAR(rho(haar()), 1.0, 1e-10);
  EXPECT_NEAR(rho(cantor()), std::log(2.0) / std::log(3.0), 1e-12);
  EXPECT_NEAR(rho(cantor()), 0.63093, 1e-5);
  EXPECT_NEAR(rho(bernoulli()), std::log(2.0) / std::log(kPhi), 1e-12);
  EXPECT_NEAR(rho(three_term()), -0.69424, 1e-5);
  EXPECT_LT(rho(three_term()), 0);
  // negative dilation uses |lambda|
  auto neg = build_mask(Dilation::algebraic(Context::build({-1, 1})), {kPhi / 2, kPhi / 2},
                        std::vector<std::vector<R>>{{0}, {1}});
  EXPECT_NEAR(rho(neg), std::log(2.0) / std::log(kPhi), 1e-12);
}

TEST(FourierHat, Values) {
  for (const auto& m : examples()) EXPECT_EQ(fourier_hat(m, 0), Complex(1));
  EXPECT_NEAR(std::abs(fourier_hat(haar(), 0.5)), 2 / kPi, 1e-13);
  for (double y : {0.1, 0.37, 1.3, 7.25}) EXPECT_NEAR(std::abs(fourier_hat(haar(), y)), std::abs(std::sin(kPi * y) / (kPi * y)), 1e-13);
}

TEST(FourierHat, FunctionalEquation) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-3, 3);
  auto neg = build_mask(Dilation::algebraic(Context::build({-1, 1})), {kPhi / 2, kPhi / 2},
                        std::vector<std::vector<R>>{{0}, {1}});
  auto all = examples();
  all.push_back(neg);
  for (const auto& m : all) {
    for (int i = 0; i < 20; ++i) {
      const long double y = dist(rng);
      for (int k = 1; k <= 8; ++k) {
        Complex rhs = fourier_hat(m, y);
        long double arg = y;
        for (int j = 0; j < k; ++j, arg *= m.lambda()) rhs *= m(arg);
        Complex lhs = fourier_hat(m, y * std::pow(m.lambda(), static_cast<long double>(k)));
        EXPECT_NEAR(std::abs(lhs - rhs), 0, 1e-10);
      }
    }
  }
}

TEST(MeanLogMask, Haar) {
  auto h = haar();
  auto a = mean_log_mask(h, 1e3);
  auto b = mean_log_mask(h, 1e4);
  EXPECT_NEAR(b.value, std::log(0.5), 0.01);
  EXPECT_LT(std::abs(b.value - std::log(0.5)), std::abs(a.value - std::log(0.5)));
  EXPECT_EQ(b.clipped, 0u);
}

TEST(MeanLogMask, ConstantMask) {
  auto one = build_mask(Dilation::real(2), {2.0}, std::vector<R>{0});
  EXPECT_EQ(mean_log_mask(one, 10).value, 0.0);
  EXPECT_EQ(mahler_mask(one).value, 1.0);
}

TEST(MeanLogMask, ConvergenceBand) {
  for (const auto& m : examples()) {
    const double target = std::log(mahler_mask(m).value);
    for (double L : {250.0, 1000.0}) {
      const double now = std::abs(mean_log_mask(m, L).value - target);
      const double before = std::abs(mean_log_mask(m, L / 4).value - target);
      EXPECT_LE(now, 2 * before + 0.02) << L;
    }
  }
  auto b = bernoulli();
  const double e3 = std::abs(mean_log_mask(b, 1e3).value - std::log(0.5));
  const double e4 = std::abs(mean_log_mask(b, 1e4).value - std::log(0.5));
  EXPECT_LE(e4, e3 + 0.02);
  EXPECT_LT(e4, 0.02);
}

TEST(MeanLogMask, AllClipped) {
  Tolerances tol;
  tol.v_clip = 10;  // every |A| <= 1 is clipped
  try {
    mean_log_mask(haar(), 2, 16, tol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllSamplesClipped);
  }
}

TEST(MeanLogHat, HaarAndCantor) {
  auto h = mean_log_hat(haar(), std::ldexp(1.0, 14));
  EXPECT_NEAR(h.value, -1.0, 0.1);
  auto c = mean_log_hat(cantor(), std::pow(3.0, 10));
  EXPECT_NEAR(c.value, -0.6309, 0.1);
}

// Errors shrink like c / ln L; a two-point extrapolation in 1 / ln L recovers -rho.
TEST(MeanLogHat, ExtrapolatedLimit) {
  struct Case {
    RefinementMask mask;
    double L1, L2;
    double rho;
  };
  for (const auto& c : {Case{haar(), 1024, 16384, 1.0}, Case{cantor(), 729, 59049, std::log(2.0) / std::log(3.0)},
                        Case{bernoulli(), std::pow(kPhi, 12), std::pow(kPhi, 20), std::log(2.0) / std::log(kPhi)}}) {
    const double a = mean_log_hat(c.mask, c.L1).value, b = mean_log_hat(c.mask, c.L2).value;
    EXPECT_LT(std::abs(b + c.rho), std::abs(a + c.rho));
    const double x1 = 1 / std::log(c.L1), x2 = 1 / std::log(c.L2);
    const double limit = b - (a - b) / (x1 - x2) * x2;
    EXPECT_NEAR(limit, -c.rho, 0.01);
  }
}

TEST(MeanLogHat, GoldenBernoulliFiniteScale) {
  // observed finite-scale value at L = phi^20: -rho - 0.1558
  auto r = mean_log_hat(bernoulli(), std::pow(kPhi, 20));
  EXPECT_NEAR(r.value + std::log(2.0) / std::log(kPhi), -0.1558, 0.001);
  try {
    mean_log_hat(haar(), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadConfig);
  }
}

TEST(Sublevel, HaarClosedForm) {
  std::vector<double> v{0.01, 0.05, 0.1, 0.3, 0.6, 0.9};
  auto r = sublevel_measure(haar(), v, 50, 200000);
  for (const auto& [level, mu] : r.measure) {
    const double exact = 100 * 2 * std::asin(level) / kPi;
    EXPECT_NEAR(mu, exact, 0.02 * exact) << level;
  }
  auto full = sublevel_measure(haar(), {0.5, 1.0 + 1e-12}, 50, 20000);
  EXPECT_NEAR(full.measure.back().second, 100, 1e-9);
  EXPECT_TRUE(r.stable);
}

TEST(Sublevel, ThreeTermStable) {
  // |1 + z - z^2| = |1 - 2i sin t| on the circle, so levels start at 1
  auto r = sublevel_measure(three_term(), {1.01, 1.1, 1.5, 2.0}, 100, 400000);
  EXPECT_TRUE(r.stable);
  EXPECT_GT(r.constant, 0);
  EXPECT_LE(r.constant_doubled, 2 * r.constant);
  EXPECT_GE(r.constant_doubled, r.constant / 2);
}

TEST(Erdos, GoldenBernoulliPlateau) {
  auto g = golden();
  auto r = erdos_sequence(bernoulli(), Element::one(g), 40);
  ASSERT_EQ(r.terms.size(), 41u);
  EXPECT_LT(r.plateau, 1e-6);
  EXPECT_GT(std::abs(r.terms.back().value), 0);
  EXPECT_GT(std::abs(r.terms.back().value), 1e-3);
}

TEST(Erdos, ZeroAlpha) {
  auto g = golden();
  auto r = erdos_sequence(bernoulli(), Element::zero(g), 10);
  for (const auto& t : r.terms) EXPECT_NEAR(std::abs(t.value - Complex(1)), 0, 1e-14);
}

TEST(Erdos, HaarHitsZero) {
  auto h = haar();
  try {
    erdos_sequence(h, Element::one(h.dilation().context), 10);
    FAIL();
  } catch (const ZeroHitError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroHit);
    EXPECT_EQ(e.exponent(), -1);
  }
  // alpha = 1/3 never meets a half-integer
  auto ok = erdos_sequence(h, Element(h.dilation().context, {R(1, 3)}), 20);
  EXPECT_GT(std::abs(ok.terms.back().value), 0);
}

TEST(Erdos, ExactAgreesWithDirect) {
  auto g = golden();
  auto b = bernoulli();
  for (auto alpha : {Element::one(g), Element(g, {R(1, 3), R(2, 5)}), Element(g, {R(-2), R(1, 7)})}) {
    auto exact = erdos_sequence(b, alpha, 20);
    auto direct = erdos_sequence_direct(b, alpha.real_value(), 20);
    for (int k = 0; k <= 20; ++k)
      EXPECT_NEAR(std::abs(exact.terms[static_cast<std::size_t>(k)].value - direct[static_cast<std::size_t>(k)].value), 0, 1e-8) << k;
  }
}

TEST(Erdos, PhaseReductionAtForty) {
  // phi^40 = L_40 - psi^40 with L_40 the Lucas number and psi = -1/phi
  auto g = golden();
  Element x = Element::lambda_power(g, 40);
  long double psi40 = std::pow(static_cast<long double>(kPhi) - 1, 40);
  EXPECT_NEAR(static_cast<double>(reduced_phase(x) + psi40), 0, 1e-12);
  EXPECT_EQ(x.trace(), R(228826127));
}

TEST(Erdos, Preconditions) {
  auto g = golden();
  auto half = build_mask(Dilation::algebraic(g), {kPhi / 2, kPhi / 2}, std::vector<std::vector<R>>{{0}, {R(1, 2)}});
  EXPECT_THROW(erdos_sequence(half, Element::one(g), 5), Error);
  auto plain = build_mask(Dilation::real(2.5), {1.25, 1.25}, std::vector<R>{0, 1});
  try {
    erdos_sequence(plain, Element::one(g), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPV);
  }
}

// Independent orbit walk with long long fractions over a fixed denominator.
struct OracleOrbit {
  std::size_t pre, cyc;
  double mean;
};
OracleOrbit oracle_orbit(long long den, std::vector<long long> s, const std::vector<long long>& c, double a0, double a1) {
  std::vector<std::vector<long long>> seen;
  auto mod = [den](long long v) { return ((v % den) + den) % den; };
  for (auto& v : s) v = mod(v);
  while (std::find(seen.begin(), seen.end(), s) == seen.end()) {
    seen.push_back(s);
    std::vector<long long> n(s.size());
    for (std::size_t i = 0; i + 1 < s.size(); ++i) n[i] = s[i + 1];
    long long last = 0;
    for (std::size_t i = 0; i < s.size(); ++i) last -= c[i] * s[i];
    n.back() = mod(last);
    s = n;
  }
  auto start = static_cast<std::size_t>(std::find(seen.begin(), seen.end(), s) - seen.begin());
  double acc = 0;
  for (std::size_t i = start; i < seen.size(); ++i) {
    // Bernoulli: P_trig(x) = (a0 + a1 e(x_1)) / phi with tau = (0, 1)
    double x = static_cast<double>(seen[i][0]) / static_cast<double>(den);
    acc += std::log(std::abs(a0 + a1 * std::exp(Complex(0, 2 * kPi * x))) / kPhi);
  }
  return {start, seen.size() - start, acc / static_cast<double>(seen.size() - start)};
}

TEST(Orbit, FixedPointAtZero) {
  auto g = golden();
  auto r = orbit_mean(g, bernoulli(), {R(0), R(0)});
  EXPECT_EQ(r.cycle_length, 1u);
  EXPECT_EQ(r.preperiod, 0u);
  EXPECT_NEAR(r.mean, 0, 1e-15);
}

TEST(Orbit, ThirdsMatchesOracle) {
  auto g = golden();
  auto r = orbit_mean(g, bernoulli(), {R(1, 3), R(0)});
  auto o = oracle_orbit(3, {1, 0}, {-1, -1}, kPhi / 2, kPhi / 2);
  EXPECT_EQ(r.cycle_length, o.cyc);
  EXPECT_EQ(r.preperiod, o.pre);
  EXPECT_NEAR(r.mean, o.mean, 1e-12);
  EXPECT_TRUE(std::isfinite(r.mean));
  EXPECT_LE(r.cycle_length + r.preperiod, 9u);
}

TEST(Orbit, PigeonholeBound) {
  auto c = Context::build({1, -1, -2});
  auto mask = build_mask(Dilation::algebraic(c), {static_cast<double>(c->lambda() / 2), static_cast<double>(c->lambda() / 2)},
                         std::vector<std::vector<R>>{{0}, {1}});
  for (long long den : {3, 5, 7}) {
    auto r = orbit_mean(c, mask, {R(1, den), R(0), R(den - 1, den)});
    EXPECT_LE(r.cycle_length + r.preperiod, static_cast<std::size_t>(den * den * den));
    auto o = oracle_orbit(den, {1, 0, den - 1}, {1, -1, -2}, 0, 0);
    EXPECT_EQ(r.cycle_length, o.cyc);
    EXPECT_EQ(r.preperiod, o.pre);
  }
}

TEST(Orbit, MatchesErdosGrowth) {
  // alpha lambda^k approaches the orbit of (Tr alpha, Tr alpha lambda) mod 1, so
  // ln|f^(alpha lambda^k)| grows by the orbit mean per step.
  auto g = golden();
  auto b = bernoulli();
  Element alpha(g, {R(1, 3), R(0)});
  auto orbit = orbit_mean(g, b, orbit_start(alpha));
  auto seq = erdos_sequence(b, alpha, 80);
  const std::size_t P = orbit.cycle_length;
  const double rate = (std::log(std::abs(seq.terms[80].value)) - std::log(std::abs(seq.terms[80 - 4 * P].value))) /
                      static_cast<double>(4 * P);
  EXPECT_NEAR(rate, orbit.mean, 1e-8);
}

TEST(Orbit, ZeroOnOrbit) {
  auto g = golden();
  try {
    orbit_mean(g, bernoulli(), {R(1, 2), R(0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroOnOrbit);
  }
  // a zero met only before the cycle does not count: 1/2 -> 0 under doubling
  auto h = haar();
  auto r = orbit_mean(h.dilation().context, h, {R(1, 2)});
  EXPECT_EQ(r.preperiod, 1u);
  EXPECT_EQ(r.cycle_length, 1u);
  EXPECT_NEAR(r.mean, 0, 1e-15);
}

}  // namespace
