#include "qlb/ball_sandwich_solver.hpp"
#include "qlb/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qlb;

namespace {

struct Setup {
    ProblemParams params;
    Nonlinearity g;
    DualTransform dual;
    Potential a;
};

Setup radial_plane(double p = 2, double decay = 4) {
    const ProblemParams pp(p, 0.51, 2);
    return {pp, Nonlinearity::power(1, 0.1), DualTransform(pp), Potential::radial(DecayProfile{1, 1, decay}, 2)};
}

Setup oscillating_plane() {
    const ProblemParams pp(2, 0.51, 2);
    return {pp, Nonlinearity::power(1, 0.1), DualTransform(pp),
            Potential::separable({1, 0, 0}, {0, 1, 4}, 1, 2)};
}

// max |w_n - w_α(|x|)| over interior nodes.
double radial_error(const BallSolution& s, const RadialSolution& w_alpha) {
    double err = 0;
    for (std::size_t k = 0; k < s.w_n.size(); ++k) {
        const double r = std::hypot(s.x[k], s.y[k]);
        err = std::max(err, std::abs(s.w_n[k] - interpolate_profile(w_alpha, r)));
    }
    return err;
}

}  // namespace

TEST(ForcingTable, MatchesDirectEvaluation) {
    auto s = radial_plane();
    const ForcingTable table(s.g, s.dual, 1.0, 50.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, std::log(50.0));
    for (int i = 0; i < 500; ++i) {
        const double w = std::exp(u(rng));
        const double direct = s.g(s.dual.f(w)) * s.dual.f_prime(w);
        EXPECT_NEAR(table(w), direct, 1e-9 * direct) << w;
    }
    EXPECT_EQ(table(200.0), s.g(s.dual.f(200.0)) * s.dual.f_prime(200.0));
}

TEST(ForcingTable, MaxSlopeBoundsDifferenceQuotients) {
    auto s = radial_plane();
    const ForcingTable table(s.g, s.dual, 0.5, 30.0);
    const double L = table.max_slope(1.0, 10.0);
    EXPECT_GE(L, 0.0);
    for (double w = 1.0; w < 10.0; w += 0.01) {
        EXPECT_LE((table(w + 0.01) - table(w)) / 0.01, L * (1 + 1e-9) + 1e-12) << w;
    }
}

TEST(Bracketing, RadialPairIsOrdered) {
    auto s = radial_plane();
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 1.0, 1e-10, 50);
    EXPECT_EQ(pair.report.hbar, 0.0);
    EXPECT_EQ(pair.report.beta, 3.0);
    EXPECT_GE(pair.report.min_gap, 0.0);
    EXPECT_TRUE(pair.report.ordering_violations.empty());
    EXPECT_TRUE(std::isinf(pair.report.S_beta_estimate));
    EXPECT_EQ(pair.report.u_alpha_centre, s.dual.f(2.0));
}

TEST(Bracketing, CanonicalSpaceCase) {
    const ProblemParams pp(2, 0.51, 3);
    const auto g = Nonlinearity::power(1, 0.1);
    const DualTransform dual(pp);
    const auto a = Potential::separable({1, 0, 0}, {0, 1, 5}, 1, 3);
    const auto pair = build_bracketing_pair(pp, a, g, dual, 2.0, 0.5, 1e-10, 100);
    EXPECT_EQ(pair.report.beta, 2.0 + 0.5 + pair.report.hbar);
    EXPECT_GT(pair.report.hbar, 0.0);
    EXPECT_GT(pair.report.min_gap, 0.0);
    EXPECT_TRUE(std::isinf(pair.report.S_beta_estimate));
    EXPECT_EQ(pair.w_alpha.radii.back(), 100.0);
    const auto bound = calG_growth_bound(pair.w_alpha, a, g, pp);
    EXPECT_TRUE(bound.holds);
    EXPECT_LT(bound.crossover_radius, 100.0);
}

TEST(Bracketing, BetaBelowAlphaViolatesAtCentre) {
    auto s = radial_plane();
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 0.5, 1e-10, 20, {}, 1.5);
    EXPECT_TRUE(pair.report.beta_overridden);
    ASSERT_FALSE(pair.report.ordering_violations.empty());
    EXPECT_EQ(pair.report.ordering_violations.front(), 0.0);
    EXPECT_EQ(pair.report.S_beta_estimate, 0.0);
    EXPECT_LT(pair.report.min_gap, 0.0);
}

TEST(Bracketing, DivergentBudgetIsAHypothesisFailure) {
    auto s = oscillating_plane();
    const auto a = Potential::separable({1, 0, 0}, {0, 1, 5}, 1, 2);
    EXPECT_THROW(build_bracketing_pair(s.params, a, s.g, s.dual, 2.0, 0.5, 1e-10, 20), HypothesisError);
}

TEST(GrowthBound, SquareRootMajorantClosedForm) {
    const ProblemParams pp(2, 0.6, 3);
    const auto g = Nonlinearity::power(1, 0.5);
    const DualTransform dual(pp);
    const auto a = Potential::radial(DecayProfile{1, 0, 0}, 3);
    const auto w = picard_solve(pp, [](double) { return 1.0; }, g, dual, 2.0, 20.0, 1e-10);
    const auto bound = calG_growth_bound(w, a, g, pp);
    for (std::size_t i = 1; i < bound.radii.size(); ++i) {
        const double r = bound.radii[i];
        EXPECT_NEAR(bound.majorant[i], 4 * r * r * r * r, 1e-9 * 4 * r * r * r * r) << r;
    }
    EXPECT_TRUE(bound.holds);
    EXPECT_GT(bound.crossover_radius, 0.0);
    for (std::size_t i = 0; i < bound.radii.size(); ++i) {
        if (bound.radii[i] >= bound.crossover_radius) {
            EXPECT_LE(w.w[i], bound.majorant[i]);
        }
    }
}

TEST(GrowthBound, NoCrossoverIsAnIntegrityError) {
    const ProblemParams pp(2, 0.6, 3);
    const auto g = Nonlinearity::power(1, 0.5);
    const DualTransform dual(pp);
    const auto a = Potential::radial(DecayProfile{1, 0, 0}, 3);
    // On [0, 0.5] the majorant 4r⁴ <= 0.25 stays below w_α >= 2.
    const auto w = picard_solve(pp, [](double) { return 1.0; }, g, dual, 2.0, 0.5, 1e-10);
    EXPECT_THROW(calG_growth_bound(w, a, g, pp), IntegrityError);
}

TEST(BallSolve, RadialOracleSecondOrder) {
    auto s = radial_plane();
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 0.5, 1e-12, 5);
    std::vector<double> errs;
    for (double h : {0.1, 0.05}) {
        const auto ball =
            dirichlet_monotone_solve(s.params, s.a, s.g, s.dual, 5, pair.w_alpha, pair.w_beta, h, 1e-12);
        EXPECT_TRUE(ball.converged);
        EXPECT_TRUE(ball.sandwich_ok) << ball.diagnostic;
        EXPECT_EQ(ball.bracket_violations, 0u);
        EXPECT_EQ(ball.ascent_violations, 0u);
        EXPECT_EQ(ball.boundary_value, interpolate_profile(pair.w_alpha, 5.0));
        errs.push_back(radial_error(ball, pair.w_alpha));
    }
    EXPECT_GE(std::log2(errs[0] / errs[1]), 1.8) << errs[0] << " " << errs[1];
}

TEST(BallSolve, AscentFromSubsolution) {
    auto s = radial_plane();
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 0.5, 1e-12, 5);
    const auto ball =
        dirichlet_monotone_solve(s.params, s.a, s.g, s.dual, 5, pair.w_alpha, pair.w_beta, 0.1, 1e-12);
    for (std::size_t k = 0; k < ball.w_n.size(); ++k) {
        EXPECT_GE(ball.w_n[k], ball.sub_values[k] - ball.bracket_slack);
        EXPECT_LE(ball.w_n[k], ball.super_values[k] + ball.bracket_slack);
        EXPECT_GE(ball.w_n[k], 2.0 - ball.bracket_slack);
    }
    EXPECT_GT(ball.update_history.size(), 0u);
}

TEST(BallSolve, DegenerateP3Converges) {
    std::vector<double> errs;
    auto s = radial_plane(3);
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 0.5, 1e-12, 5);
    for (double h : {0.2, 0.1}) {
        const auto ball =
            dirichlet_monotone_solve(s.params, s.a, s.g, s.dual, 5, pair.w_alpha, pair.w_beta, h, 1e-10);
        EXPECT_TRUE(ball.converged) << ball.diagnostic;
        EXPECT_TRUE(ball.sandwich_ok) << ball.diagnostic;
        errs.push_back(radial_error(ball, pair.w_alpha));
    }
    EXPECT_LT(errs[1], errs[0]);
}

TEST(BallSolve, ZeroPotentialConstantBoundary) {
    const ProblemParams pp(2, 0.51, 2);
    const auto g = Nonlinearity::power(1, 0.1);
    const DualTransform dual(pp);
    const auto a = Potential::radial(DecayProfile{0, 0, 0}, 2);
    const auto pair = build_bracketing_pair(pp, a, g, dual, 1.5, 0.5, 1e-12, 5);
    const auto ball = dirichlet_monotone_solve(pp, a, g, dual, 5, pair.w_alpha, pair.w_beta, 0.1, 1e-12);
    for (double w : ball.w_n) EXPECT_NEAR(w, 1.5, 1e-12);
}

TEST(BallSolve, OscillatingPotentialSandwiched) {
    auto s = oscillating_plane();
    const double budget = truncated_Hbar(s.a, s.g, s.params, 10.0);
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 0.5, 1e-12, 10, budget);
    EXPECT_GT(pair.report.min_gap, 0.0);
    const auto ball =
        dirichlet_monotone_solve(s.params, s.a, s.g, s.dual, 10, pair.w_alpha, pair.w_beta, 0.05, 1e-10);
    EXPECT_TRUE(ball.converged);
    EXPECT_TRUE(ball.sandwich_ok) << ball.diagnostic;
    EXPECT_EQ(ball.ascent_violations, 0u);
    // Non-radial: the field differs between (r, 0) and (-r, 0).
    EXPECT_GT(std::abs(ball.value_at(2, 0) - ball.value_at(-2, 0)), 1e-4);
}

TEST(BallSolve, RejectsSpaceDimension) {
    const ProblemParams pp(2, 0.51, 3);
    const auto g = Nonlinearity::power(1, 0.1);
    const DualTransform dual(pp);
    const auto a = Potential::radial(DecayProfile{1, 0, 0}, 3);
    const auto pair = build_bracketing_pair(pp, a, g, dual, 2.0, 0.5, 1e-10, 5);
    EXPECT_THROW(dirichlet_monotone_solve(pp, a, g, dual, 5, pair.w_alpha, pair.w_beta, 0.1, 1e-10),
                 PreconditionError);
}

TEST(Limit, NestedRadialBallsStabilize) {
    auto s = radial_plane();
    const auto pair = build_bracketing_pair(s.params, s.a, s.g, s.dual, 2.0, 0.5, 1e-12, 20);
    std::vector<BallSolution> balls;
    for (int n : {5, 10, 20}) {
        balls.push_back(
            dirichlet_monotone_solve(s.params, s.a, s.g, s.dual, n, pair.w_alpha, pair.w_beta, 0.1, 1e-12));
    }
    const std::vector<std::pair<double, double>> probes{{0, 0}, {1, 0}, {0, 2}, {1, 1}};
    const auto lim = extract_limit({&balls[0], &balls[1], &balls[2]}, probes);
    EXPECT_TRUE(lim.stabilized);
    EXPECT_LE(lim.last_difference, 1e-3);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const double r = std::hypot(probes[i].first, probes[i].second);
        EXPECT_NEAR(lim.values[i].back(), interpolate_profile(pair.w_alpha, r), 1e-3);
    }
    EXPECT_THROW(extract_limit({&balls[0], &balls[1]}, probes), PreconditionError);
}
