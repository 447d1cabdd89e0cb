#include "qlb/condition_checker.hpp"
#include "qlb/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace qlb;

namespace {

Potential canonical_oscillating(int dim) {
    return Potential::separable({1, 0, 0}, {0, 1, 5}, 1, dim);
}

void expect_nondecreasing(const std::vector<ProbePoint>& probes) {
    for (std::size_t k = 1; k < probes.size(); ++k) {
        EXPECT_LE(probes[k - 1].R, probes[k].R);
        EXPECT_LE(probes[k - 1].value, probes[k].value) << "R = " << probes[k].R;
    }
}

// ℋ for the canonical N = 3 data written out by hand: p = 2, g = s^{0.1},
// 𝒢(t) = t^{0.9}/2, so g(𝒢^{-1}(y)) = (2y)^{1/9}; a_osc = 2(1+s)^{-5},
// ā = 1 + (1+s)^{-5}.
double canonical_H(double s) {
    // ∫_0^s t²(1+t)^{-5} dt = s³(s+4) / (12 (1+s)⁴).
    const double u = 1 + s;
    const double moment = s * s * s * (s + 4) / (12 * u * u * u * u);
    const double mass = s - std::expm1(-4 * std::log1p(s)) / 4;
    return 2 * moment / (s * s) * std::pow(2 * s * mass, 1.0 / 9);
}

// ∫_0^∞ canonical_H via Simpson in log s on [1e-12, S] plus the leading tail term.
double canonical_Hbar_oracle() {
    const double lo = std::log(1e-12), hi = std::log(1e9);
    const int n = 400000;
    const double h = (hi - lo) / n;
    auto f = [](double x) {
        const double s = std::exp(x);
        return canonical_H(s) * s;
    };
    double sum = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4 : 2) * f(lo + i * h);
    const double S = std::exp(hi);
    const double tail = std::pow(2.0, 1.0 / 9) / 6 * (9.0 / 7) * std::pow(S, -7.0 / 9);
    return sum * h / 3 + tail;
}

}  // namespace

TEST(Classifier, TextbookTails) {
    const ProbeSchedule from2{2, 2, 40};
    EXPECT_EQ(classify_improper_integral([](double t) { return 1 / t; }, 1).behaviour,
              IntegralBehaviour::divergent);
    const auto conv = classify_improper_integral([](double t) { return 1 / (t * t); }, 1);
    EXPECT_EQ(conv.behaviour, IntegralBehaviour::convergent);
    EXPECT_NEAR(conv.fitted_tail_exponent, -2, 1e-6);
    EXPECT_NE(classify_improper_integral([](double t) { return 1 / (t * std::log(t)); }, 2, from2).behaviour,
              IntegralBehaviour::convergent);
}

TEST(Classifier, ProbesNondecreasing) {
    for (auto f : std::vector<std::function<double(double)>>{
             [](double t) { return 1 / t; }, [](double t) { return std::exp(-t); },
             [](double t) { return std::pow(t, -1.5) * (2 + std::sin(t)); }}) {
        const auto c = classify_improper_integral(f, 1);
        EXPECT_GE(c.probes.size(), 6u);
        expect_nondecreasing(c.probes);
    }
}

TEST(Classifier, OrderConsistent) {
    // A pointwise larger integrand than a divergent one is never called convergent.
    const std::vector<std::function<double(double)>> divergent{
        [](double t) { return 1 / t; }, [](double t) { return std::pow(t, -0.9); },
        [](double t) { return 1 / (t * std::log(t)); }};
    const ProbeSchedule from2{2, 2, 40};
    for (const auto& f : divergent) {
        if (classify_improper_integral(f, 2, from2).behaviour != IntegralBehaviour::divergent) continue;
        for (double c : {1.0, 1.5, 10.0}) {
            auto bigger = [&](double t) { return c * f(t) + 1 / (t * t); };
            EXPECT_NE(classify_improper_integral(bigger, 2, from2).behaviour, IntegralBehaviour::convergent);
        }
    }
}

TEST(Classifier, FewProbesAreInconclusive) {
    ProbeSchedule s;
    s.count = 5;
    EXPECT_EQ(classify_improper_integral([](double t) { return 1 / t; }, 1, s).behaviour,
              IntegralBehaviour::inconclusive);
}

TEST(Classifier, RejectsBadIntegrand) {
    EXPECT_THROW(classify_improper_integral([](double) { return -1.0; }, 1), DataError);
    EXPECT_THROW(classify_improper_integral([](double) { return std::nan(""); }, 1), DataError);
}

TEST(KellerOsserman, Examples) {
    const ProblemParams p2(2, 0.6, 3);
    EXPECT_EQ(check_keller_osserman(Nonlinearity::power(1, 0.5), p2).verdict, Verdict::holds);
    const auto cubic = check_keller_osserman(Nonlinearity::power(1, 3), p2);
    EXPECT_EQ(cubic.verdict, Verdict::fails);
    expect_nondecreasing(cubic.probe_values);
}

TEST(KellerOsserman, BorderlineNeverFails) {
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const ProblemParams pp(p, 0.6, 3);
        EXPECT_NE(check_keller_osserman(Nonlinearity::power(1, p - 1), pp).verdict, Verdict::fails) << p;
    }
}

TEST(KellerOsserman, ScalingInvariant) {
    for (double p : {1.5, 2.0, 3.0}) {
        const ProblemParams pp(p, 0.6, 3);
        for (double q : {0.3, p - 1, p + 0.5}) {
            const auto ref = check_keller_osserman(Nonlinearity::power(1, q), pp);
            for (double lambda : {1e-3, 0.5, 7.0, 1e4}) {
                const auto v = check_keller_osserman(Nonlinearity::power(lambda, q), pp);
                EXPECT_EQ(v.verdict, ref.verdict) << p << " " << q << " " << lambda;
            }
        }
    }
}

TEST(KellerOsserman, PowerLogGrowsFasterThanBorderline) {
    // s log(1+s) for p = 2: G ~ t² log t / 2, ∫ (t² log t)^{-1/2} diverges like log log.
    const ProblemParams p2(2, 0.6, 3);
    EXPECT_NE(check_keller_osserman(Nonlinearity::power_log(1, 1), p2).verdict, Verdict::fails);
    EXPECT_EQ(check_keller_osserman(Nonlinearity::power_log(1, 1.5), p2).verdict, Verdict::fails);
}

TEST(GrowthG, Examples) {
    EXPECT_EQ(check_growth_g(Nonlinearity::power(1, 0.5), ProblemParams(2, 0.6, 3)).verdict, Verdict::holds);
    EXPECT_EQ(check_growth_g(Nonlinearity::power(1, 1), ProblemParams(2, 1, 3)).verdict, Verdict::fails);
    const double e = 2 * 0.6 * (2 * 0.6 - 1);
    EXPECT_EQ(check_growth_g(Nonlinearity::power(1, e), ProblemParams(2, 0.6, 3)).verdict, Verdict::holds);
}

TEST(PotentialDivergence, Examples) {
    for (int dim : {1, 2, 3}) {
        for (double p : {1.5, 2.0, 3.0}) {
            EXPECT_EQ(check_potential_divergence([](double) { return 1.0; }, ProblemParams(p, 0.6, dim)).verdict,
                      Verdict::holds)
                << dim << " " << p;
        }
    }
    const ProblemParams p3(2, 0.6, 3);
    const auto steep = check_potential_divergence([](double r) { return std::pow(1 + r, -4); }, p3);
    EXPECT_EQ(steep.verdict, Verdict::fails);
    expect_nondecreasing(steep.probe_values);
    EXPECT_NE(check_potential_divergence([](double r) { return std::pow(1 + r, -2); }, p3).verdict,
              Verdict::fails);
}

TEST(Lair, Examples) {
    EXPECT_EQ(check_lair([](double) { return 1.0; }).verdict, Verdict::holds);
    EXPECT_EQ(check_lair([](double r) { return std::pow(1 + r, -4); }).verdict, Verdict::fails);
    EXPECT_NE(check_lair([](double r) { return std::pow(1 + r, -2); }).verdict, Verdict::fails);
}

TEST(Hbar, RadialIsExactlyZero) {
    const ProblemParams pp(2, 0.51, 3);
    const auto v = compute_Hbar(Potential::radial(DecayProfile{1, 1, 5}, 3), Nonlinearity::power(1, 0.1), pp);
    EXPECT_EQ(v.verdict, Verdict::holds);
    ASSERT_TRUE(v.hbar_value);
    EXPECT_EQ(*v.hbar_value, 0.0);
}

TEST(Hbar, CanonicalMatchesQuadratureOracle) {
    const ProblemParams pp(2, 0.51, 3);
    const auto g = Nonlinearity::power(1, 0.1);
    const auto a = canonical_oscillating(3);
    const OscillationIntegrand H(a, g, pp);
    for (double s : {1e-3, 0.1, 1.0, 10.0, 1e3, 1e5}) {
        EXPECT_NEAR(H(s), canonical_H(s), 1e-8 * canonical_H(s)) << s;
    }
    const auto v = compute_Hbar(a, g, pp);
    EXPECT_EQ(v.verdict, Verdict::holds);
    EXPECT_NEAR(v.fitted_tail_exponent, -2 + 2.0 / 9, 1e-3);
    ASSERT_TRUE(v.hbar_value && v.hbar_truncated && v.hbar_tail);
    EXPECT_DOUBLE_EQ(*v.hbar_value, *v.hbar_truncated + *v.hbar_tail);
    const double oracle = canonical_Hbar_oracle();
    EXPECT_NEAR(*v.hbar_value, oracle, 1e-7 * oracle);
}

TEST(Hbar, PlaneCaseDiverges) {
    const ProblemParams pp(2, 0.51, 2);
    const auto v = compute_Hbar(canonical_oscillating(2), Nonlinearity::power(1, 0.1), pp);
    EXPECT_EQ(v.verdict, Verdict::fails);
    EXPECT_NEAR(v.fitted_tail_exponent, -7.0 / 9, 1e-2);
    ASSERT_TRUE(v.hbar_value);
    EXPECT_TRUE(std::isinf(*v.hbar_value));
}

TEST(Hbar, TruncatedIsMonotoneInRadius) {
    const ProblemParams pp(2, 0.51, 2);
    const auto a = canonical_oscillating(2);
    const auto g = Nonlinearity::power(1, 0.1);
    double prev = 0;
    for (double R : {1.0, 5.0, 10.0, 20.0}) {
        const double v = truncated_Hbar(a, g, pp, R);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Hbar, RejectsNonInvertibleCalG) {
    const ProblemParams pp(2, 0.51, 3);
    EXPECT_THROW(compute_Hbar(canonical_oscillating(3), Nonlinearity::power(1, 1), pp), InvertibilityError);
}

TEST(DeltaMonotone, Examples) {
    const ProblemParams pp(2, 0.51, 3);
    EXPECT_EQ(check_delta_monotone(Nonlinearity::power(1, 0.1), pp, 0.1).verdict, Verdict::holds);
    EXPECT_EQ(check_delta_monotone(Nonlinearity::power(1, 0.1), pp, 0.01).verdict, Verdict::fails);
    EXPECT_EQ(check_delta_monotone(Nonlinearity::power(1, 0.1), pp, 0.2).verdict, Verdict::fails);
}

TEST(HypothesisMatrix, PurePowerIncompatibility) {
    const ProblemParams pp(2, 1, 3);
    for (double q : {0.5, 1.0, 2.0, 3.0}) {
        const auto rep = hypothesis_matrix(pp, Nonlinearity::power(1, q), Potential::radial(DecayProfile{}, 3));
        EXPECT_TRUE(rep.pure_power_family_incompatible) << q;
        EXPECT_FALSE(rep.g_and_G_jointly_hold) << q;
        EXPECT_FALSE(rep.thm11_hypotheses_hold) << q;
    }
}

TEST(HypothesisMatrix, CanonicalRadialCase) {
    const auto rep = hypothesis_matrix(ProblemParams(2, 0.6, 3), Nonlinearity::power(1, 0.5),
                                       Potential::radial(DecayProfile{}, 3));
    EXPECT_FALSE(rep.pure_power_family_incompatible);
    EXPECT_TRUE(rep.g_and_G_jointly_hold);
    EXPECT_TRUE(rep.thm11_hypotheses_hold);
    // failed lists hypotheses of both theorems; none of the radial-theorem ones may appear.
    for (const char* name : {"G", "g", "potential_divergence", "a_radial"}) {
        EXPECT_EQ(std::count(rep.failed.begin(), rep.failed.end(), name), 0) << name;
    }
    ASSERT_TRUE(rep.lair);
    EXPECT_EQ(rep.lair->verdict, Verdict::holds);
}

TEST(HypothesisMatrix, CanonicalOscillatingCase) {
    const auto rep = hypothesis_matrix(ProblemParams(2, 0.51, 3), Nonlinearity::power(1, 0.1),
                                       canonical_oscillating(3), 0.1);
    EXPECT_FALSE(rep.a_radial);
    EXPECT_TRUE(rep.p_at_least_2);
    EXPECT_TRUE(rep.calG_invertible);
    EXPECT_TRUE(rep.thm12_hypotheses_hold);
    EXPECT_FALSE(rep.thm11_hypotheses_hold);  // a is not radial
    ASSERT_TRUE(rep.hbar);
    EXPECT_EQ(rep.hbar->verdict, Verdict::holds);
}

TEST(HypothesisMatrix, MissingDeltaBlocksOscillatingCase) {
    const auto rep = hypothesis_matrix(ProblemParams(2, 0.51, 3), Nonlinearity::power(1, 0.1),
                                       canonical_oscillating(3));
    EXPECT_FALSE(rep.thm12_hypotheses_hold);
}
