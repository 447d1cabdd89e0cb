#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qlb {

/// The exponent triple (p, γ, N) shared by every formula of the problem.
class ProblemParams {
public:
    /// Throws DomainError unless p > 1, γ > 1/2 and N >= 1.
    ProblemParams(double p, double gamma, int dim);

    double p() const noexcept { return p_; }
    double gamma() const noexcept { return gamma_; }
    int dim() const noexcept { return dim_; }

    /// 1/(p-1), the exponent of the radial integral representation.
    double radial_exponent() const noexcept { return 1.0 / (p_ - 1.0); }
    /// (2γ)^{p-1}, the coefficient of the inverse-transform integrand.
    double transform_coefficient() const noexcept;
    /// p(2γ-1), the power of z inside the inverse-transform integrand.
    double transform_power() const noexcept { return p_ * (2.0 * gamma_ - 1.0); }

private:
    double p_;
    double gamma_;
    int dim_;
};

// Reference evaluators. Each call integrates from scratch; DualTransform below
// is the tabulated evaluator meant for inner loops.

/// ∫_0^u [1 + (2γ)^{p-1} z^{p(2γ-1)}]^{1/p} dz, odd in u.
double f_inverse(const ProblemParams& params, double u, double tol = 1e-10);
/// f(t): the root y of f_inverse(y) = t, located by bracketed Newton.
double f_eval(const ProblemParams& params, double t, double tol = 1e-10);
/// f'(t) = [1 + (2γ)^{p-1}|f(t)|^{p(2γ-1)}]^{-1/p}.
double f_prime(const ProblemParams& params, double t, double tol = 1e-10);
/// Limit of f(t)/t^{1/(2γ)} as t → ∞, equal to (2γ)^{1/(2γp)}.
double asymptotic_A(const ProblemParams& params);

/// f on the points `ts` (nonnegative, increasing) obtained by integrating the
/// initial value problem y' = [1 + (2γ)^{p-1}|y|^{p(2γ-1)}]^{-1/p}, y(0) = 0.
std::vector<double> f_by_ode(const ProblemParams& params, std::span<const double> ts,
                             double rtol = 1e-13);

/// Tabulated, self-validating evaluator of the change of variables u = f(w).
///
/// Construction integrates the inverse map once onto a geometric knot table;
/// afterwards f_inverse is a short quadrature from the nearest knot and f is a
/// Hermite seed followed by safeguarded Newton on that quadrature. Immutable
/// after construction.
class DualTransform {
public:
    explicit DualTransform(const ProblemParams& params, double accuracy_target = 1e-10,
                           double t_max = 1e15);

    const ProblemParams& params() const noexcept { return params_; }
    double accuracy_target() const noexcept { return accuracy_; }

    double f(double t) const;
    double f_prime(double t) const;
    double f_inverse(double u) const;
    /// f'(t) expressed through u = f(t).
    double f_prime_at_value(double u) const;
    /// Integrand of the inverse map, dt/du at u >= 0.
    double inverse_density(double u) const;

    double asymptotic_A() const noexcept { return asymptotic_A_; }
    /// f(t)/t^{1/(2γ)}, which increases towards asymptotic_A().
    double empirical_ratio(double t) const;
    /// Argument beyond which f is seeded from the asymptotic envelope instead
    /// of the knot table.
    double asymptotic_switchover() const noexcept;
    std::size_t knot_count() const noexcept { return knots_.size(); }

private:
    double series_inverse(double u) const;
    double segment_integral(double from, double to) const;
    double tail_inverse(double u) const;
    double solve_in_bracket(double t, double lo, double hi, long double base, double base_y,
                            double seed) const;

    ProblemParams params_;
    double accuracy_;
    double coeff_;        // (2γ)^{p-1}
    double power_;        // p(2γ-1)
    double inv_p_;
    double series_end_;   // end of the power-series region near 0
    double asymptotic_A_;
    std::vector<double> knots_;
    std::vector<long double> values_;  // f_inverse at the knots
};

inline constexpr std::size_t kPropertyCount = 10;

/// Names "f1" … "f10" of the transform properties, in order.
extern const std::array<const char*, kPropertyCount> kPropertyNames;

struct PropertyCheck {
    std::string name;
    bool passed{true};
    double worst_margin{0};   // most negative (or smallest) margin seen
    std::size_t evaluated{0}; // grid points the property applies to
    std::size_t violations{0};
    std::string note;
};

struct PropertyRow {
    double t{0};
    double f{0};
    double f_prime{0};
    std::array<double, kPropertyCount> margin{};  // NaN where not applicable
};

/// Outcome of verify_properties: per-point margins plus one verdict per property.
struct PropertyReport {
    double p{0}, gamma{0};
    int dim{1};
    double delta{0};
    double accuracy_target{0};
    double asymptotic_A{0};
    double asymptotic_switchover{0};
    double f8_constant{0};   // empirical sup |t| / (|f| + |f|^{2γ})
    double f4_tolerance{1e-6};
    double f7_tolerance{1e-3};
    std::vector<PropertyRow> rows;
    std::array<PropertyCheck, kPropertyCount> checks;

    std::size_t pass_count() const;
    bool all_passed() const { return pass_count() == kPropertyCount; }
};

/// Evaluates the ten transform properties on `grid`.
///
/// Inequalities pass when margin >= -accuracy_target * max(1, |t|). The two
/// limit statements are checked at the extreme grid magnitudes: f(t)/t → 1 at
/// the smallest nonzero |t| within f4_tol, f(t)/t^{1/(2γ)} → A at the largest
/// |t| within f7_tol. Throws PreconditionError when delta < 2γ-1.
PropertyReport verify_properties(const DualTransform& dual, std::span<const double> grid,
                                 double delta, double f4_tol = 1e-6, double f7_tol = 1e-3);

/// n points log-spaced on [lo, hi], plus optionally their negatives and 0.
std::vector<double> log_grid(double lo, double hi, std::size_t n, bool symmetric = false);

}  // namespace qlb
