#pragma once

#include "qlb/dual_transform.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qlb {

class CumulativeIntegral;

enum class NonlinearityKind { power, power_log, tabulated };

/// The nonlinearity g: nondecreasing on [0, ∞) with g(0) = 0.
///
/// Built-in families are λ s^q and λ s^q log(1+s); tabulated data is
/// interpolated with a shape-preserving (Fritsch–Carlson) cubic and extended
/// past the last sample by the power law through the last two samples.
class Nonlinearity {
public:
    static Nonlinearity power(double lambda, double q);
    static Nonlinearity power_log(double lambda, double q);
    /// Throws DataError unless xs strictly increases and ys is nonnegative and
    /// nondecreasing; a sample at 0 must carry the value 0 and (0, 0) is
    /// prepended when xs[0] > 0.
    static Nonlinearity tabulated(std::vector<double> xs, std::vector<double> ys);

    NonlinearityKind kind() const noexcept { return kind_; }
    double lambda() const noexcept { return lambda_; }
    double exponent() const noexcept { return q_; }
    bool is_pure_power() const noexcept { return kind_ == NonlinearityKind::power; }
    const std::vector<double>& sample_x() const noexcept { return xs_; }
    const std::vector<double>& sample_y() const noexcept { return ys_; }

    /// Exponent δ of the monotone quotient g(t)/t^δ, when declared.
    std::optional<double> delta() const noexcept { return delta_; }
    Nonlinearity& set_delta(double delta);

    /// g(s); zero for s <= 0.
    double operator()(double s) const;
    /// G(t) = ∫_0^t g, closed form for powers and cached quadrature otherwise.
    double antiderivative(double t, double tol = 1e-12) const;

private:
    Nonlinearity() = default;
    double interpolate(double s) const;
    void build_cache();

    NonlinearityKind kind_{NonlinearityKind::power};
    double lambda_{1.0};
    double q_{1.0};
    std::optional<double> delta_;
    std::vector<double> xs_, ys_, slopes_;
    double tail_exponent_{1.0};
    std::shared_ptr<const CumulativeIntegral> cache_;
};

/// Reads two-column CSV samples (header line optional).
std::pair<std::vector<double>, std::vector<double>> read_samples_csv(const std::string& path);

/// G(t) = ∫_0^t g(s) ds.
double antiderivative_G(const Nonlinearity& g, double t, double tol = 1e-12);

/// 𝒢(t) = (t/2) g(t)^{-1/(p-1)}; SingularValueError when g(t) = 0.
double calG(const Nonlinearity& g, const ProblemParams& params, double t);

struct CalGScreen {
    bool increasing{false};          // strictly increasing on [t0, t_max]
    bool small_t_warning{false};     // non-monotone somewhere below t0
    bool constant{false};            // the q = p-1 power case
    double t0{1e-6};
    double t_max{1e12};
    std::string diagnostic;
};

/// Log-grid monotonicity screen of 𝒢 on [t0, t_max]; probes below t0 only warn.
CalGScreen screen_calG(const Nonlinearity& g, const ProblemParams& params, double t0 = 1e-6,
                       double t_max = 1e12);

/// 𝒢^{-1} with the monotonicity screen run once at construction.
class CalGInverter {
public:
    /// Throws InvertibilityError when 𝒢 is not strictly increasing.
    CalGInverter(const Nonlinearity& g, const ProblemParams& params);
    double operator()(double y, double tol = 1e-13) const;
    const CalGScreen& screen() const noexcept { return screen_; }

private:
    const Nonlinearity* g_;
    ProblemParams params_;
    CalGScreen screen_;
    double closed_scale_{0}, closed_power_{0};
};

/// 𝒢^{-1}(y). Pure powers λ s^q with q < p-1 use the closed form
/// (2 y λ^{1/(p-1)})^{(p-1)/(p-1-q)}; other kinds are screened and then
/// bracketed. Throws InvertibilityError for non-monotone 𝒢 or unreachable y.
double calG_inverse(const Nonlinearity& g, const ProblemParams& params, double y,
                    double tol = 1e-13);

enum class PotentialKind { radial_profile, radial_times_angular, general_sampled };

/// c0 + c1 (1+r)^{-decay}.
struct DecayProfile {
    double c0{1.0};
    double c1{0.0};
    double decay{0.0};
    double operator()(double r) const;
};

struct Radialized {
    double lower{0};  // a̲(r)
    double upper{0};  // ā(r)
    double osc{0};    // ā(r) - a̲(r)
};

/// The potential a(x) >= 0.
///
/// Positions are given as (r, θ): θ is the polar angle in the plane for N = 2
/// and the angle from the symmetry axis for N >= 3 (axisymmetric data). The
/// separable kind is a(r, θ) = b(r) + m(r) cos(kθ). At r = 0 the angular part
/// is ignored and a(0) = b(0).
class Potential {
public:
    static Potential radial(DecayProfile base, int dim);
    static Potential radial(std::function<double(double)> base, int dim);
    static Potential separable(DecayProfile base, DecayProfile amplitude, int frequency, int dim,
                               int angular_samples = 256);
    static Potential sampled(std::function<double(double, double)> a, int dim,
                             int angular_samples = 256);

    PotentialKind kind() const noexcept { return kind_; }
    bool is_radial() const noexcept { return kind_ == PotentialKind::radial_profile; }
    int dim() const noexcept { return dim_; }
    int angular_samples() const noexcept { return samples_; }
    const DecayProfile& base_profile() const noexcept { return base_params_; }
    const DecayProfile& amplitude_profile() const noexcept { return amp_params_; }
    int frequency() const noexcept { return frequency_; }

    double operator()(double r, double theta) const;
    /// a at Cartesian (x, y) in the plane.
    double at_point(double x, double y) const;
    /// Radialization (a̲, ā, a_osc) at radius r.
    Radialized radialize(double r) const;

    /// Throws DataError when a̲ is negative or a is non-finite on the probes.
    void validate(const std::vector<double>& radii) const;

private:
    Potential() = default;
    double angle_span() const;
    Radialized sample_sphere(double r) const;

    PotentialKind kind_{PotentialKind::radial_profile};
    int dim_{1};
    int samples_{256};
    DecayProfile base_params_;
    DecayProfile amp_params_{0.0, 0.0, 0.0};
    int frequency_{1};
    double ang_min_{0}, ang_max_{0};
    std::function<double(double)> base_;
    std::function<double(double, double)> general_;
};

Radialized radialize(const Potential& a, double r);

}  // namespace qlb
