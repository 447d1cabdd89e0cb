#include "qlb/condition_checker.hpp"

#include "qlb/errors.hpp"
#include "qlb/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

namespace qlb {

const char* to_string(ConditionId id) {
    switch (id) {
        case ConditionId::KO_G: return "KO_G";
        case ConditionId::growth_g: return "growth_g";
        case ConditionId::potential_div: return "potential_div";
        case ConditionId::oscillation_Hbar: return "oscillation_Hbar";
        case ConditionId::lair_1_4: return "lair_1_4";
        case ConditionId::delta_monotone: return "delta_monotone";
    }
    return "?";
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::fails: return "fails";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

const char* to_string(IntegralBehaviour b) {
    switch (b) {
        case IntegralBehaviour::divergent: return "divergent";
        case IntegralBehaviour::convergent: return "convergent";
        case IntegralBehaviour::inconclusive: return "inconclusive";
    }
    return "?";
}

std::vector<double> ProbeSchedule::radii() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int k = 0; k < count; ++k) out.push_back(r0 * std::pow(ratio, k));
    return out;
}

namespace {

constexpr std::size_t kFitWindow = 8;
constexpr int kMinProbes = 6;

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

// Slope of log y against log x; -inf when the last value is zero.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    if (y.back() <= 0) return -HUGE_VAL;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] <= 0) continue;
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    if (lx.size() < 2) return -HUGE_VAL;
    return ls_slope(lx, ly);
}

Verdict divergence_verdict(IntegralBehaviour b) {
    switch (b) {
        case IntegralBehaviour::divergent: return Verdict::holds;
        case IntegralBehaviour::convergent: return Verdict::fails;
        default: return Verdict::inconclusive;
    }
}

ConditionVerdict from_classification(ConditionId id, const IntegralClassification& c,
                                     Verdict verdict) {
    ConditionVerdict v;
    v.condition_id = id;
    v.verdict = verdict;
    v.probe_values = c.probes;
    v.fitted_tail_exponent = c.fitted_tail_exponent;
    v.score = c.increment_slope;
    std::ostringstream note;
    note << "tail " << to_string(c.behaviour) << " (increment slope " << c.increment_slope
         << ", integrand exponent " << c.fitted_tail_exponent << ")";
    v.note = note.str();
    return v;
}

}  // namespace

IntegralClassification classify_improper_integral(const std::function<double(double)>& integrand,
                                                  double lower, const ProbeSchedule& schedule,
                                                  ExpectedMode mode, double margin) {
    if (!(schedule.ratio > 1) || !(schedule.r0 >= lower)) {
        throw PreconditionError("probe schedule needs ratio > 1 and r0 >= lower limit");
    }
    auto checked = [&](double s) {
        const double v = integrand(s);
        if (!std::isfinite(v)) throw DataError("integrand is not finite at s = " + std::to_string(s));
        if (v < 0) throw DataError("integrand is negative at s = " + std::to_string(s));
        return v;
    };

    IntegralClassification out;
    out.margin = margin;
    out.mode = mode;
    const auto radii = schedule.radii();
    if (radii.empty()) return out;

    double partial =
        radii[0] > lower ? integrate<double>(checked, lower, radii[0], 1e-300, 1e-11).value : 0.0;
    out.probes.push_back({radii[0], partial});
    std::vector<double> increments;
    for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
        const double inc = integrate<double>(checked, radii[k], radii[k + 1], 1e-300, 1e-11).value;
        increments.push_back(std::max(inc, 0.0));
        partial += increments.back();
        out.probes.push_back({radii[k + 1], partial});
    }

    if (!increments.empty()) {
        const std::size_t m = std::min(kFitWindow, increments.size());
        std::vector<double> xs(radii.end() - static_cast<std::ptrdiff_t>(m) - 1, radii.end() - 1);
        std::vector<double> ys(increments.end() - static_cast<std::ptrdiff_t>(m), increments.end());
        out.increment_slope = log_log_slope(xs, ys);
    }
    {
        const std::size_t m = std::min(kFitWindow, radii.size());
        std::vector<double> xs(radii.end() - static_cast<std::ptrdiff_t>(m), radii.end());
        std::vector<double> ys;
        for (double x : xs) ys.push_back(checked(x));
        out.fitted_tail_exponent = log_log_slope(xs, ys);
    }

    if (static_cast<int>(radii.size()) < kMinProbes || std::isnan(out.increment_slope)) {
        out.behaviour = IntegralBehaviour::inconclusive;
    } else if (out.increment_slope >= -margin) {
        out.behaviour = IntegralBehaviour::divergent;
    } else if (out.fitted_tail_exponent <= -1.0 - margin) {
        out.behaviour = IntegralBehaviour::convergent;
    } else {
        out.behaviour = IntegralBehaviour::inconclusive;
    }
    out.agrees_with_expectation =
        !(mode == ExpectedMode::divergent_expected && out.behaviour == IntegralBehaviour::convergent) &&
        !(mode == ExpectedMode::convergent_expected && out.behaviour == IntegralBehaviour::divergent);
    return out;
}

ConditionVerdict check_keller_osserman(const Nonlinearity& g, const ProblemParams& params,
                                       const ProbeSchedule& schedule) {
    const double p = params.p();
    auto integrand = [&](double t) {
        const double G = g.antiderivative(t);
        if (!(G > 0)) {
            throw DataError("degenerate nonlinearity: G vanishes at t = " + std::to_string(t));
        }
        return std::pow(G, -1.0 / p);
    };
    const auto c = classify_improper_integral(integrand, 1.0, schedule,
                                              ExpectedMode::unknown);
    return from_classification(ConditionId::KO_G, c, divergence_verdict(c.behaviour));
}

ConditionVerdict check_growth_g(const Nonlinearity& g, const ProblemParams& params,
                                double threshold, double margin) {
    const double gamma = params.gamma();
    const double e = 2 * gamma * (2 * gamma - 1);
    ConditionVerdict v;
    v.condition_id = ConditionId::growth_g;
    std::vector<double> ts, ratios;
    for (int k = 0; k <= 40; ++k) {
        const double t = std::ldexp(1.0, k);
        const double ratio = g(t) / std::pow(t, e);
        if (!std::isfinite(ratio)) throw DataError("g is not finite at t = " + std::to_string(t));
        ts.push_back(t);
        ratios.push_back(ratio);
        v.probe_values.push_back({t, ratio});
    }
    const std::size_t half = ts.size() / 2;
    std::vector<double> tail_t(ts.begin() + static_cast<std::ptrdiff_t>(half), ts.end());
    std::vector<double> tail_r(ratios.begin() + static_cast<std::ptrdiff_t>(half), ratios.end());
    const double running_min = *std::min_element(tail_r.begin(), tail_r.end());
    const double slope = log_log_slope(tail_t, tail_r);
    bool decreasing = true;
    for (std::size_t i = 1; i < tail_r.size(); ++i) {
        if (!(tail_r[i] < tail_r[i - 1] * (1 - 1e-12))) decreasing = false;
    }
    v.fitted_tail_exponent = slope;
    v.score = slope;
    std::ostringstream note;
    note << "g(t)/t^" << e << ": minimum " << running_min << " over t >= " << tail_t.front()
         << ", log-log slope " << slope;
    if (slope <= -margin) {
        v.verdict = Verdict::fails;
        note << " (ratio decays to 0)";
    } else if (running_min < threshold) {
        v.verdict = Verdict::inconclusive;
        note << " (ratio below threshold " << threshold << ")";
    } else if (decreasing && slope < 0) {
        v.verdict = Verdict::inconclusive;
        note << " (ratio still shrinking)";
    } else {
        v.verdict = Verdict::holds;
    }
    v.note = note.str();
    return v;
}

ConditionVerdict check_potential_divergence(const std::function<double(double)>& a_radial,
                                            const ProblemParams& params,
                                            const ProbeSchedule& schedule) {
    const int N = params.dim();
    const double beta = params.radial_exponent();
    auto moment = std::make_shared<CumulativeIntegral>(
        [a_radial, N](double t) { return std::pow(t, N - 1) * a_radial(t); }, 0.0, 1e-14);
    auto integrand = [&](double s) {
        if (s <= 0) return 0.0;
        const double m = (*moment)(s);
        if (!(m > 0)) return 0.0;
        return std::pow(std::pow(s, 1 - N) * m, beta);
    };
    const auto c = classify_improper_integral(integrand, 0.0, schedule, ExpectedMode::unknown);
    return from_classification(ConditionId::potential_div, c, divergence_verdict(c.behaviour));
}

ConditionVerdict check_lair(const std::function<double(double)>& a_radial,
                            const ProbeSchedule& schedule) {
    auto integrand = [&](double r) { return r * a_radial(r); };
    ProbeSchedule s = schedule;
    s.r0 = std::max(s.r0, 1.0);
    const auto c = classify_improper_integral(integrand, 1.0, s, ExpectedMode::unknown);
    return from_classification(ConditionId::lair_1_4, c, divergence_verdict(c.behaviour));
}

OscillationIntegrand::OscillationIntegrand(const Potential& a, const Nonlinearity& g,
                                           const ProblemParams& params, double tol)
    : g_(&g), params_(params) {
    const int N = params.dim();
    osc_moment_ = std::make_shared<CumulativeIntegral>(
        [a, N](double t) { return std::pow(t, N - 1) * a.radialize(t).osc; }, 0.0, tol);
    upper_mass_ = std::make_shared<CumulativeIntegral>(
        [a](double t) { return a.radialize(t).upper; }, 0.0, tol);
    inverse_ = std::make_shared<CalGInverter>(g, params);
}

double OscillationIntegrand::operator()(double s) const {
    if (s <= 0) return 0.0;
    const double beta = params_.radial_exponent();
    const double m = std::pow(s, 1 - params_.dim()) * (*osc_moment_)(s);
    if (!(m > 0)) return 0.0;
    const double mass = (*upper_mass_)(s);
    const double y = s * std::pow(mass, beta);
    if (!(y > 0)) return 0.0;
    const double x = (*inverse_)(y);
    return std::pow(m, beta) * std::pow((*g_)(x), beta);
}

double truncated_Hbar(const Potential& a, const Nonlinearity& g, const ProblemParams& params,
                      double R, double tol) {
    if (a.is_radial() || R <= 0) return 0.0;
    const OscillationIntegrand H(a, g, params, tol * 1e-2);
    const double head = integrate<double>(H, 0.0, std::min(R, 1.0), tol, 1e-12).value;
    if (R <= 1) return head;
    return head + integrate_log<double>(H, 1.0, R, tol, 1e-12).value;
}

ConditionVerdict compute_Hbar(const Potential& a, const Nonlinearity& g,
                              const ProblemParams& params, double tol, double r_cut,
                              const ProbeSchedule& schedule) {
    ConditionVerdict v;
    v.condition_id = ConditionId::oscillation_Hbar;
    v.hbar_cutoff = r_cut;

    bool radial = a.is_radial();
    if (!radial) {
        radial = true;
        for (double r : log_grid(1e-3, r_cut, 200)) {
            if (a.radialize(r).osc != 0) {
                radial = false;
                break;
            }
        }
    }
    if (radial) {
        v.verdict = Verdict::holds;
        v.hbar_value = 0.0;
        v.hbar_truncated = 0.0;
        v.hbar_tail = 0.0;
        v.note = "a_osc vanishes identically; H = 0";
        return v;
    }

    const OscillationIntegrand H(a, g, params, tol * 1e-2);
    const auto c = classify_improper_integral(H, 0.0, schedule, ExpectedMode::convergent_expected);
    const Verdict verdict = c.behaviour == IntegralBehaviour::convergent ? Verdict::holds
                            : c.behaviour == IntegralBehaviour::divergent ? Verdict::fails
                                                                          : Verdict::inconclusive;
    auto out = from_classification(ConditionId::oscillation_Hbar, c, verdict);
    out.hbar_cutoff = r_cut;

    const double head = integrate<double>(H, 0.0, 1.0, tol, 1e-12).value;
    const double body = integrate_log<double>(H, 1.0, r_cut, tol, 1e-12).value;
    out.hbar_truncated = head + body;

    // Power-law tail C s^e fitted on [r_cut/256, r_cut].
    std::vector<double> xs, ys;
    for (double s : log_grid(r_cut / 256, r_cut, 9)) {
        xs.push_back(std::log(s));
        ys.push_back(std::log(H(s)));
    }
    const double e = ls_slope(xs, ys);
    double my = 0, mx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    const double logC = my / xs.size() - e * mx / xs.size();
    if (verdict != Verdict::fails && e < -1) {
        out.hbar_tail = std::exp(logC) * std::pow(r_cut, e + 1) / (-e - 1);
        out.hbar_value = *out.hbar_truncated + *out.hbar_tail;
    } else {
        out.hbar_tail = HUGE_VAL;
        out.hbar_value = HUGE_VAL;
    }
    std::ostringstream note;
    note << out.note << "; truncated at " << r_cut << ", tail exponent " << e;
    out.note = note.str();
    return out;
}

ConditionVerdict check_delta_monotone(const Nonlinearity& g, const ProblemParams& params,
                                      double delta) {
    ConditionVerdict v;
    v.condition_id = ConditionId::delta_monotone;
    v.fitted_tail_exponent = delta;
    const double need = 2 * params.gamma() - 1;
    if (delta < need) {
        v.verdict = Verdict::fails;
        v.note = "delta = " + std::to_string(delta) + " is below 2γ-1 = " + std::to_string(need);
        return v;
    }
    double prev = -HUGE_VAL;
    v.verdict = Verdict::holds;
    for (double t : log_grid(1e-6, 1e12, 361)) {
        const double q = g(t) / std::pow(t, delta);
        v.probe_values.push_back({t, q});
        if (q < prev * (1 - 1e-12)) {
            v.verdict = Verdict::fails;
            v.note = "g(t)/t^delta decreases near t = " + std::to_string(t);
        }
        prev = std::max(prev, q);
    }
    if (v.verdict == Verdict::holds) v.note = "g(t)/t^delta nondecreasing on [1e-6, 1e12]";
    return v;
}

CompatibilityReport hypothesis_matrix(const ProblemParams& params, const Nonlinearity& g,
                                      const Potential& a, std::optional<double> delta) {
    CompatibilityReport rep;
    rep.delta = delta;
    rep.a_radial = a.is_radial();
    rep.p_at_least_2 = params.p() >= 2;
    const double gamma = params.gamma();
    rep.pure_power_family_incompatible = 2 * gamma * (2 * gamma - 1) > params.p() - 1;

    auto lower = [a](double r) { return a.radialize(r).lower; };
    auto upper = [a](double r) { return a.radialize(r).upper; };

    auto ko = std::async(std::launch::async, [&] { return check_keller_osserman(g, params); });
    auto growth = std::async(std::launch::async, [&] { return check_growth_g(g, params); });
    auto pot = std::async(std::launch::async,
                          [&] { return check_potential_divergence(lower, params); });
    auto pot_up = std::async(std::launch::async,
                             [&] { return check_potential_divergence(upper, params); });

    try {
        const CalGInverter inverter(g, params);
        rep.calG_invertible = true;
        if (inverter.screen().small_t_warning) rep.calG_note = inverter.screen().diagnostic;
    } catch (const Error& e) {
        rep.calG_note = e.what();
    }
    if (rep.calG_invertible) {
        rep.hbar = compute_Hbar(a, g, params);
    } else if (rep.a_radial) {
        ConditionVerdict v;
        v.condition_id = ConditionId::oscillation_Hbar;
        v.verdict = Verdict::holds;
        v.hbar_value = 0.0;
        v.note = "a_osc vanishes identically; H = 0 (calG not invertible: " + rep.calG_note + ")";
        rep.hbar = v;
    }
    if (delta) rep.delta_check = check_delta_monotone(g, params, *delta);

    rep.keller_osserman = ko.get();
    rep.growth = growth.get();
    rep.potential = pot.get();
    rep.potential_upper = pot_up.get();
    if (params.dim() >= 3 && params.p() == 2) rep.lair = check_lair(lower);

    const bool G_ok = rep.keller_osserman.verdict == Verdict::holds;
    const bool g_ok = rep.growth.verdict == Verdict::holds;
    const bool pot_ok = rep.potential.verdict == Verdict::holds;
    const bool hbar_ok = rep.hbar && rep.hbar->verdict == Verdict::holds;
    const bool delta_ok = rep.delta_check && rep.delta_check->verdict == Verdict::holds;
    rep.g_and_G_jointly_hold = G_ok && g_ok;
    rep.thm11_hypotheses_hold = rep.a_radial && G_ok && g_ok && pot_ok;
    rep.thm12_hypotheses_hold =
        rep.p_at_least_2 && G_ok && g_ok && pot_ok && delta_ok && rep.calG_invertible && hbar_ok;

    if (!G_ok) rep.failed.emplace_back("G");
    if (!g_ok) rep.failed.emplace_back("g");
    if (!pot_ok) rep.failed.emplace_back("potential_divergence");
    if (!rep.a_radial) rep.failed.emplace_back("a_radial");
    if (!rep.p_at_least_2) rep.failed.emplace_back("p>=2");
    if (!delta_ok) rep.failed.emplace_back("delta_monotone");
    if (!rep.calG_invertible) rep.failed.emplace_back("calG_invertible");
    if (!hbar_ok) rep.failed.emplace_back("Hbar_finite");
    if (g.is_pure_power() && rep.pure_power_family_incompatible) {
        rep.failed.emplace_back("pure_power_g_and_G_incompatible");
    }
    return rep;
}

}  // namespace qlb
