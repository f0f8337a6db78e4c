#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pvq/mra.hpp"

namespace {

using namespace pvq;
using R = Rational;

ContextPtr golden() { return Context::build({-1, -1}); }
ContextPtr plastic() { return Context::build({-1, -1, 0}); }
ContextPtr quartic() { return Context::build({-1, 0, 0, -1}); }

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::UnknownCommand;
}

std::vector<Element> elements(const ContextPtr& ctx, const Quasilattice& q, long double lo, long double hi,
                              std::size_t max_count = 1000) {
  std::vector<Element> out;
  for (const auto& p : q.points()) {
    if (p.value < lo || p.value > hi || out.size() == max_count) continue;
    std::vector<R> c;
    for (auto v : p.preimage) c.emplace_back(v);
    out.emplace_back(ctx, c);
  }
  return out;
}

TEST(DeriveXi, Golden) {
  auto g = golden();
  auto xi = derive_xi(*g, Window::uniform(*g, 1.0));
  EXPECT_NEAR(xi[1], 0.3820, 1e-4);
  EXPECT_NEAR(xi[1], 2 - (1 + std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_EQ(xi[0], 0.0);
  double prev = 1;
  for (double s : {0.5, 0.1, 1e-3, 1e-9}) {
    const double x = derive_xi(*g, Window::uniform(*g, s))[1];
    EXPECT_GT(x, 0);
    EXPECT_LT(x, prev);
    prev = x;
  }
}

TEST(DeriveXi, PlasticPairEqual) {
  auto p = plastic();
  auto xi = derive_xi(*p, Window::uniform(*p, 2.0));
  EXPECT_EQ(xi[1], xi[2]);
  // conjugates -0.6624 +- 0.5623i
  const double mod = std::hypot(-0.662358978622373, 0.562279512062301);
  EXPECT_NEAR(xi[1], (1 - mod) * 2.0, 1e-12);
}

TEST(DeriveXi, WindowIdentity) {
  Tolerances tol;
  for (auto ctx : {golden(), plastic(), quartic()}) {
    std::vector<double> s{0};
    for (int j = 1; j < ctx->degree(); ++j) s.push_back(0.7 + 0.1 * j);
    for (int j = 1; j < ctx->degree(); ++j)
      if (ctx->partner(j) < j) s[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(ctx->partner(j))];
    Window sigma(*ctx, s);
    auto xi = derive_xi(*ctx, sigma);
    for (std::size_t j = 1; j < s.size(); ++j)
      EXPECT_NEAR(static_cast<double>(std::abs(ctx->roots()[j])) * sigma[j] + xi[j], sigma[j], tol.lin);
  }
}

TEST(DeriveXi, Errors) {
  auto c = Context::build({2, -4});  // x^2 - 4x + 2, PV with c_0 = 2
  EXPECT_EQ(code_of([&] { derive_xi(*c, Window::uniform(*c, 1.0)); }), ErrorCode::NotUnitConstant);
  auto salem = Context::build({1, -1, -1, -1});
  EXPECT_EQ(code_of([&] { derive_xi(*salem, Window::uniform(*salem, 1.0)); }), ErrorCode::NotPV);
  auto g = golden();
  EXPECT_EQ(code_of([&] { derive_xi(*g, Window(*g, {0, -1})); }), ErrorCode::InadmissibleWindow);
}

struct NestCase {
  ContextPtr ctx;
  double s;
  double L;
};

TEST(Nesting, ZeroViolationsInsideXi) {
  for (const auto& c : {NestCase{golden(), 1.0, 30}, NestCase{golden(), 0.37, 60}, NestCase{plastic(), 1.0, 40},
                        NestCase{quartic(), 3.0, 40}}) {
    const auto sigma = Window::uniform(*c.ctx, c.s);
    const auto xi = derive_xi(*c.ctx, sigma);
    // L(xi) is sparse for thin windows: its first nonzero point is near prod xi_j^{-1}
    auto taus = elements(c.ctx, generate(c.ctx, xi, 1000), 0, 1000, 4);
    ASSERT_GE(taus.size(), 3u);
    auto cfg = make_config(c.ctx, sigma, taus);
    auto r = check_nesting(cfg, c.L);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_GT(r.min_margin, 0);
    EXPECT_EQ(r.checked_pairs, generate(c.ctx, sigma, c.L / std::abs(static_cast<double>(c.ctx->lambda()))).size() * taus.size());
    std::size_t total = 0;
    for (auto n : r.counts) total += n;
    EXPECT_EQ(total, r.checked_pairs);
    EXPECT_EQ(r.to_report().violations, 0u);
  }
}

TEST(Nesting, ZeroTranslation) {
  auto g = golden();
  const auto sigma = Window::uniform(*g, 1.0);
  auto cfg = make_config(g, sigma, {Element::zero(g)});
  auto r = check_nesting(cfg, 30);
  EXPECT_EQ(r.violations, 0u);
  // lambda tau has conjugate psi tau', margin at least (1 - |psi|) sigma
  EXPECT_GE(r.min_margin, 1 - 0.6180339887498949 - 1e-12);
}

TEST(Nesting, NegativeControl) {
  auto g = golden();
  const auto sigma = Window::uniform(*g, 1.0);
  const auto xi = derive_xi(*g, sigma);
  // brute force: the point of L(sigma) near 0 whose conjugate is farthest outside xi
  const double phi = (1 + std::sqrt(5.0)) / 2;
  auto pts = oracle::scan({phi, 1 - phi}, {0, 1.0}, 10, 20);
  std::vector<long long> best;
  double worst = 0;
  for (const auto& l : pts) {
    const double conj = std::abs(static_cast<double>(l[0]) + static_cast<double>(l[1]) * (1 - phi));
    if (conj > xi[1] && conj > worst) {
      worst = conj;
      best = l;
    }
  }
  ASSERT_FALSE(best.empty());
  Element tau(g, {R(best[0]), R(best[1])});
  EXPECT_EQ(code_of([&] { make_config(g, sigma, {tau}); }), ErrorCode::TranslationOutsideWindow);
  auto cfg = make_config(g, sigma, {Element::zero(g), tau}, false);
  EXPECT_LT(cfg.margins[1], 0);
  auto r = check_nesting(cfg, 30);
  EXPECT_GT(r.violations, 0u);
  EXPECT_LE(r.min_margin, 0);
  ASSERT_FALSE(r.witnesses.empty());
  EXPECT_LE(sigma.margin(embed_preimage(*g, r.witnesses.front())), 0);
}

TEST(Nesting, Deterministic) {
  auto p = plastic();
  const auto sigma = Window::uniform(*p, 1.0);
  auto taus = elements(p, generate(p, derive_xi(*p, sigma), 400), 0, 400, 3);
  auto a = check_nesting(make_config(p, sigma, taus), 40);
  auto b = check_nesting(make_config(p, sigma, taus), 40);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.min_margin, b.min_margin);
}

TEST(Levels, BreakpointInclusion) {
  auto g = golden();
  auto q = generate(g, Window::uniform(*g, 1.0), 400);
  for (int k = 0; k <= 4; ++k) {
    auto r = check_level_inclusion(q, k);
    EXPECT_GT(r.checked, 50u) << k;
    EXPECT_EQ(r.missing, 0u) << k;
  }
  for (auto ctx : {plastic(), Context::build({-1, 1})}) {
    auto qq = generate(ctx, Window::uniform(*ctx, 1.0), 200);
    for (int k = 0; k <= 3; ++k) EXPECT_EQ(check_level_inclusion(qq, k).missing, 0u) << k;
  }
}

TEST(Levels, ExactScaledPreimages) {
  auto g = golden();
  auto q = generate(g, Window::uniform(*g, 1.0), 50);
  auto bp = level_breakpoints(q, 3);
  ASSERT_EQ(bp.values.size(), q.size());
  EXPECT_TRUE(std::is_sorted(bp.values.begin(), bp.values.end()));
  for (std::size_t i = 0; i < bp.values.size(); ++i) {
    const auto& l = bp.preimages[i];
    EXPECT_NEAR(static_cast<double>(l[0]) + static_cast<double>(l[1]) * 1.6180339887498949, static_cast<double>(bp.values[i]), 1e-9);
  }
}

std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> xs;
  const double h = (hi - lo) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(lo + (static_cast<double>(i) + 0.3819660112501051) * h);
  return xs;
}

TEST(Projection, Constant) {
  auto g = golden();
  auto q = generate(g, Window::uniform(*g, 1.0), 40);
  std::vector<Sample> s;
  for (double x : grid(-8, 8, 4000)) s.push_back({x, 2.5});
  for (int k = 0; k <= 3; ++k) {
    auto f = project_pc(q, s, k);
    for (std::size_t i = 0; i < f.values.size(); ++i) EXPECT_EQ(f.values[i], 2.5);
  }
}

TEST(Projection, IndicatorReprojection) {
  auto g = golden();
  auto q = generate(g, Window::uniform(*g, 1.0), 60);
  const auto at0 = q.find({0, 0});
  ASSERT_TRUE(at0);
  const long double c1 = q.points()[*at0 + 1].value;
  auto xs = grid(-20, 20, 20000);
  std::vector<Sample> s;
  for (double x : xs) s.push_back({x, (x >= 0 && x < c1) ? 1.0 : 0.0});
  auto f0 = project_pc(q, s, 0);
  for (const auto& p : s) EXPECT_EQ(f0(p.x), p.value);
  auto f1 = project_pc(q, sample(f0, xs), 1);
  std::size_t compared = 0;
  for (double x : xs) {
    if (f1.on_breakpoint(x)) continue;
    EXPECT_EQ(f1(x), f0(x));
    ++compared;
  }
  EXPECT_GT(compared, 19000u);
}

TEST(Projection, LevelKFunctionsLieInNextLevel) {
  auto g = golden();
  auto q = generate(g, Window::uniform(*g, 1.0), 300);
  auto xs = grid(-30, 30, 60000);
  std::vector<Sample> s;
  for (double x : xs) s.push_back({x, std::sin(x) + 0.1 * x});
  for (int k = 0; k <= 3; ++k) {
    auto fk = project_pc(q, s, k);
    auto next = project_pc(q, sample(fk, xs), k + 1);
    for (double x : xs)
      if (!next.on_breakpoint(x)) ASSERT_EQ(next(x), fk(x)) << k << " " << x;
  }
}

TEST(Projection, Idempotent) {
  auto p = plastic();
  auto q = generate(p, Window::uniform(*p, 1.0), 40);
  auto xs = grid(-10, 10, 5000);
  std::vector<Sample> s;
  for (double x : xs) s.push_back({x, std::cos(3 * x)});
  auto f = project_pc(q, s, 1);
  auto again = project_pc(q, sample(f, xs), 1);
  EXPECT_EQ(again.values, f.values);
}

TEST(Projection, EmptyIntervalsAndCoverage) {
  auto g = golden();
  auto q = generate(g, Window::uniform(*g, 1.0), 20);
  std::vector<Sample> sparse{{-5.0, 1.0}, {0.1, 2.0}, {5.0, 3.0}};
  auto f = project_pc(q, sparse, 0);
  EXPECT_GT(f.empty_intervals, 0u);
  ASSERT_FALSE(f.warnings.empty());
  EXPECT_NE(f.warnings.front().find("EmptyInterval"), std::string::npos);
  EXPECT_EQ(f(-19.0), 1.0);
  EXPECT_EQ(f(19.0), 3.0);
  EXPECT_EQ(code_of([&] { project_pc(q, {{25.0, 1.0}}, 0); }), ErrorCode::InsufficientCoverage);
  // level 2 shrinks the covered range by phi^2
  EXPECT_EQ(code_of([&] { project_pc(q, {{10.0, 1.0}}, 2); }), ErrorCode::InsufficientCoverage);
}

}  // namespace
