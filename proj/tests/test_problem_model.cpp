#include "qlb/errors.hpp"
#include "qlb/problem_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace qlb;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    const double h = (b - a) / panels;
    double sum = f(a) + f(b);
    for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4 : 2) * f(a + i * h);
    return sum * h / 3;
}

}  // namespace

TEST(Nonlinearity, PowerValues) {
    const auto g = Nonlinearity::power(2.0, 0.5);
    EXPECT_EQ(g(0.0), 0.0);
    EXPECT_EQ(g(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(g(4.0), 4.0);
    EXPECT_TRUE(g.is_pure_power());
    EXPECT_THROW(Nonlinearity::power(0.0, 1.0), DataError);
    EXPECT_THROW(Nonlinearity::power(1.0, -0.5), DataError);
}

TEST(AntiderivativeG, Examples) {
    EXPECT_NEAR(antiderivative_G(Nonlinearity::power(1, 0.5), 1.0), 2.0 / 3.0, 1e-14);
    EXPECT_EQ(antiderivative_G(Nonlinearity::power(1, 0.5), 0.0), 0.0);
    EXPECT_EQ(antiderivative_G(Nonlinearity::power_log(1, 1), 0.0), 0.0);
    EXPECT_NEAR(antiderivative_G(Nonlinearity::power(1, 1), 2.0), 2.0, 1e-14);
}

TEST(AntiderivativeG, PowerLogAgainstSimpson) {
    const auto g = Nonlinearity::power_log(1.5, 0.7);
    for (double t : {0.1, 1.0, 7.0, 60.0}) {
        const double expect = simpson([&](double s) { return 1.5 * std::pow(s, 0.7) * std::log1p(s); }, 0, t);
        EXPECT_NEAR(antiderivative_G(g, t), expect, 1e-10 * std::max(1.0, expect)) << t;
    }
}

TEST(AntiderivativeG, PowerLogClosedFormAtUnitExponent) {
    // ∫_0^t s log(1+s) ds = ((t²-1) log(1+t) - t²/2 + t) / 2.
    const auto g = Nonlinearity::power_log(1, 1);
    for (double t : {0.5, 3.0, 100.0, 1e4}) {
        const double expect = ((t * t - 1) * std::log1p(t) - t * t / 2 + t) / 2;
        EXPECT_NEAR(antiderivative_G(g, t), expect, 1e-10 * expect) << t;
    }
}

TEST(AntiderivativeG, CacheIsOrderIndependent) {
    const auto g1 = Nonlinearity::power_log(1, 0.3);
    const auto g2 = Nonlinearity::power_log(1, 0.3);
    const std::vector<double> ts{50.0, 0.3, 7.0, 1e3, 2.5};
    std::vector<double> forward, backward(ts.size());
    for (double t : ts) forward.push_back(antiderivative_G(g1, t));
    for (std::size_t i = ts.size(); i-- > 0;) backward[i] = antiderivative_G(g2, ts[i]);
    EXPECT_EQ(forward, backward);
}

TEST(Tabulated, LinearSamplesReproduceClosedForms) {
    const auto g = Nonlinearity::tabulated({0, 1, 2, 3, 4}, {0, 1, 2, 3, 4});
    for (double t : {0.25, 1.5, 3.75}) {
        EXPECT_NEAR(g(t), t, 1e-14);
        EXPECT_NEAR(antiderivative_G(g, t), t * t / 2, 1e-10);
    }
    EXPECT_NEAR(g(8.0), 8.0, 1e-12);  // power-law tail through the last two samples
}

TEST(Tabulated, ShapePreservingOnMonotoneData) {
    const auto g = Nonlinearity::tabulated({0.5, 1, 1.1, 4, 9}, {0.1, 0.2, 2.0, 2.05, 9});
    double prev = 0;
    for (double t = 0; t <= 12; t += 0.01) {
        EXPECT_GE(g(t), prev - 1e-15) << t;
        prev = g(t);
    }
    EXPECT_EQ(g(0.0), 0.0);
}

TEST(Tabulated, RejectsInvalidSamples) {
    EXPECT_THROW(Nonlinearity::tabulated({1, 2, 3}, {1, 0.5, 2}), DataError);
    EXPECT_THROW(Nonlinearity::tabulated({1, 2, 3}, {-1, 0, 2}), DataError);
    EXPECT_THROW(Nonlinearity::tabulated({1, 1, 3}, {1, 1, 2}), DataError);
    EXPECT_THROW(Nonlinearity::tabulated({0, 1, 2}, {0.5, 1, 2}), DataError);
}

TEST(Tabulated, ReadsCsvWithHeader) {
    const auto path = std::filesystem::temp_directory_path() / "qlb_samples_test.csv";
    {
        std::ofstream out(path);
        out << "s,g\n0.5,0.25\n1,1\n2,4\n";
    }
    const auto [xs, ys] = read_samples_csv(path.string());
    std::filesystem::remove(path);
    ASSERT_EQ(xs.size(), 3u);
    EXPECT_DOUBLE_EQ(xs[1], 1.0);
    EXPECT_DOUBLE_EQ(ys[2], 4.0);
    EXPECT_THROW(read_samples_csv("/nonexistent/qlb.csv"), DataError);
}

TEST(CalG, Examples) {
    const ProblemParams p2(2, 1, 3);
    EXPECT_NEAR(calG(Nonlinearity::power(1, 0.5), p2, 4.0), 1.0, 1e-15);
    for (double t : {0.1, 1.0, 10.0}) EXPECT_NEAR(calG(Nonlinearity::power(1, 1), p2, t), 0.5, 1e-15);
    EXPECT_NEAR(calG(Nonlinearity::power(1, 0.1), p2, 1.0), 0.5, 1e-15);
}

TEST(CalG, SingularWhereGVanishes) {
    const ProblemParams p2(2, 1, 3);
    const auto g = Nonlinearity::tabulated({0, 1, 2}, {0, 0, 1});
    EXPECT_THROW(calG(g, p2, 0.5), SingularValueError);
}

TEST(CalGInverse, Examples) {
    const ProblemParams p2(2, 1, 3);
    EXPECT_NEAR(calG_inverse(Nonlinearity::power(1, 0.5), p2, 1.0), 4.0, 1e-12);
    EXPECT_NEAR(calG_inverse(Nonlinearity::power(1, 0.1), p2, 0.5), 1.0, 1e-12);
    EXPECT_THROW(calG_inverse(Nonlinearity::power(1, 1), p2, 0.7), InvertibilityError);
    EXPECT_THROW(calG_inverse(Nonlinearity::power(1, 2), p2, 0.7), InvertibilityError);
}

TEST(CalGInverse, ClosedFormMatchesBisection) {
    // The closed form for pure powers against a plain bisection on calG.
    for (auto [p, q, lambda] : {std::tuple{2.0, 0.5, 1.0}, std::tuple{3.0, 1.2, 0.3},
                                std::tuple{2.5, 0.1, 4.0}}) {
        const ProblemParams pp(p, 1, 3);
        const auto g = Nonlinearity::power(lambda, q);
        for (double y : {1e-3, 0.4, 5.0, 1e3}) {
            double lo = 1e-300, hi = 1.0;
            while (calG(g, pp, hi) < y) hi *= 2;
            for (int i = 0; i < 400; ++i) {
                const double mid = std::sqrt(lo * hi);
                (calG(g, pp, mid) < y ? lo : hi) = mid;
            }
            EXPECT_NEAR(calG_inverse(g, pp, y), hi, 1e-10 * hi) << p << " " << q << " " << y;
        }
    }
}

TEST(CalGInverse, RoundTripOnScreenedKinds) {
    // p = 3 keeps every g below s^{p-1} at both ends, so 𝒢 increases.
    const ProblemParams pp(3, 0.6, 3);
    const std::vector<Nonlinearity> gs{Nonlinearity::power(1, 0.5), Nonlinearity::power_log(1, 0.2),
                                       Nonlinearity::tabulated({0.5, 1, 2, 4, 8}, {0.6, 0.8, 1.1, 1.4, 1.8})};
    for (const auto& g : gs) {
        const CalGInverter inv(g, pp);
        for (double t : {0.01, 0.3, 2.0, 40.0, 1e4}) {
            EXPECT_NEAR(inv(calG(g, pp, t)), t, 1e-8 * std::max(1.0, t)) << t;
        }
    }
}

TEST(CalGScreen, FlagsConstantAndDecreasing) {
    const ProblemParams p2(2, 1, 3);
    EXPECT_TRUE(screen_calG(Nonlinearity::power(1, 1), p2).constant);
    EXPECT_FALSE(screen_calG(Nonlinearity::power(1, 1), p2).increasing);
    EXPECT_FALSE(screen_calG(Nonlinearity::power(1, 3), p2).increasing);
    EXPECT_TRUE(screen_calG(Nonlinearity::power(1, 0.5), p2).increasing);
}

TEST(Radialize, RadialProfileIsExact) {
    const auto a = Potential::radial(DecayProfile{0, 1, 4}, 3);
    const auto r = radialize(a, 1.0);
    EXPECT_DOUBLE_EQ(r.lower, 1.0 / 16);
    EXPECT_DOUBLE_EQ(r.upper, 1.0 / 16);
    EXPECT_EQ(r.osc, 0.0);
    for (double s : {0.0, 0.3, 7.0, 1e4}) EXPECT_EQ(radialize(a, s).osc, 0.0);
}

TEST(Radialize, SeparableExtrema) {
    for (int dim : {2, 3}) {
        const auto a = Potential::separable({1, 0, 0}, {0, 1, 5}, 1, dim);
        const auto c = radialize(a, 0.0);
        EXPECT_DOUBLE_EQ(c.lower, 1.0);
        EXPECT_DOUBLE_EQ(c.upper, 1.0);
        EXPECT_EQ(c.osc, 0.0);
        const auto r = radialize(a, 1.0);
        EXPECT_NEAR(r.lower, 1 - 1.0 / 32, 1e-12) << dim;
        EXPECT_NEAR(r.upper, 1 + 1.0 / 32, 1e-12) << dim;
        EXPECT_NEAR(r.osc, 1.0 / 16, 1e-12) << dim;
    }
}

TEST(Radialize, HigherFrequencyInPlane) {
    // cos(3θ) reaches ±1 on the circle; in the axisymmetric N = 3 case θ ∈ [0, π] also covers both.
    const auto a = Potential::separable({2, 0, 0}, {0.5, 0, 0}, 3, 2);
    const auto r = radialize(a, 2.0);
    EXPECT_NEAR(r.lower, 1.5, 1e-12);
    EXPECT_NEAR(r.upper, 2.5, 1e-12);
}

TEST(Radialize, SampledMatchesSeparable) {
    const auto sep = Potential::separable({1, 0.5, 2}, {0, 0.4, 3}, 2, 2);
    const auto gen = Potential::sampled(
        [](double r, double th) { return 1 + 0.5 / std::pow(1 + r, 2) + 0.4 / std::pow(1 + r, 3) * std::cos(2 * th); },
        2);
    for (double r : {0.5, 2.0, 10.0}) {
        EXPECT_NEAR(gen.radialize(r).lower, sep.radialize(r).lower, 1e-9) << r;
        EXPECT_NEAR(gen.radialize(r).upper, sep.radialize(r).upper, 1e-9) << r;
    }
}

TEST(Radialize, OrderingAndContinuity) {
    const auto a = Potential::sampled(
        [](double r, double th) { return 2 + std::sin(r) * std::cos(th) + 0.3 * std::cos(3 * th + r); }, 2);
    const double dr = 1e-3;
    double prev_lo = a.radialize(dr).lower, prev_hi = a.radialize(dr).upper;
    for (double r = 2 * dr; r < 5; r += dr) {
        const auto v = a.radialize(r);
        EXPECT_LE(v.lower, v.upper);
        EXPECT_GE(v.osc, 0.0);
        // Lipschitz bound of the data (|∂_r a| <= 1.3) plus sampling slack.
        EXPECT_LE(std::abs(v.lower - prev_lo), 1.3 * dr + 1e-6) << r;
        EXPECT_LE(std::abs(v.upper - prev_hi), 1.3 * dr + 1e-6) << r;
        prev_lo = v.lower;
        prev_hi = v.upper;
    }
}

TEST(Potential, PointEvaluation) {
    const auto a = Potential::separable({1, 0, 0}, {0, 1, 4}, 1, 2);
    EXPECT_DOUBLE_EQ(a.at_point(0, 0), 1.0);
    EXPECT_NEAR(a.at_point(1, 0), 1 + 1.0 / 16, 1e-15);
    EXPECT_NEAR(a.at_point(-1, 0), 1 - 1.0 / 16, 1e-15);
    EXPECT_NEAR(a.at_point(0, 1), 1.0, 1e-15);
}

TEST(Potential, ValidateRejectsNegative) {
    const auto bad = Potential::separable({0.5, 0, 0}, {1, 0, 0}, 1, 2);
    EXPECT_THROW(bad.validate({0.5, 1.0}), DataError);
    const auto ok = Potential::separable({1, 0, 0}, {0, 1, 5}, 1, 3);
    EXPECT_NO_THROW(ok.validate({0.0, 0.5, 1.0, 100.0}));
}
