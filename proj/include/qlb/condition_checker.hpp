#pragma once

#include "qlb/problem_model.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qlb {

enum class ConditionId { KO_G, growth_g, potential_div, oscillation_Hbar, lair_1_4, delta_monotone };
enum class Verdict { holds, fails, inconclusive };
enum class IntegralBehaviour { divergent, convergent, inconclusive };
enum class ExpectedMode { divergent_expected, convergent_expected, unknown };

const char* to_string(ConditionId id);
const char* to_string(Verdict v);
const char* to_string(IntegralBehaviour b);

/// R_k = r0 · ratio^k for k = 0 … count-1.
struct ProbeSchedule {
    double r0{1.0};
    double ratio{2.0};
    int count{40};
    std::vector<double> radii() const;
};

struct ProbePoint {
    double R{0};
    double value{0};  // partial integral I(R), or the probed ratio for growth checks
};

struct IntegralClassification {
    IntegralBehaviour behaviour{IntegralBehaviour::inconclusive};
    std::vector<ProbePoint> probes;
    double increment_slope{0};        // LS slope of log(I(R_{k+1})-I(R_k)) vs log R_k
    double fitted_tail_exponent{0};   // LS slope of log integrand vs log R
    double margin{0.05};
    ExpectedMode mode{ExpectedMode::unknown};
    bool agrees_with_expectation{true};
};

/// Three-way classification of ∫_lower^∞ integrand.
///
/// Increments over [R_k, R_{k+1}] behave like R^{e+1} when the integrand
/// behaves like s^e. Over the last 8 probes the tail is called divergent when
/// the increment slope is >= -margin, convergent when the slope is <= -margin
/// and the integrand exponent is <= -1 - margin, and inconclusive otherwise or
/// with fewer than 6 probes. Throws DataError on a negative or non-finite
/// integrand value.
IntegralClassification classify_improper_integral(const std::function<double(double)>& integrand,
                                                  double lower, const ProbeSchedule& schedule = {},
                                                  ExpectedMode mode = ExpectedMode::unknown,
                                                  double margin = 0.05);

struct ConditionVerdict {
    ConditionId condition_id{ConditionId::KO_G};
    Verdict verdict{Verdict::inconclusive};
    std::vector<ProbePoint> probe_values;
    double fitted_tail_exponent{0};
    double score{0};                    // increment slope, or the ratio trend for growth_g
    std::optional<double> hbar_value;
    std::optional<double> hbar_truncated;
    std::optional<double> hbar_tail;
    double hbar_cutoff{0};
    std::string note;
};

/// (G): ∫_1^∞ G(t)^{-1/p} dt = ∞. Throws DataError if G vanishes on a probe.
ConditionVerdict check_keller_osserman(const Nonlinearity& g, const ProblemParams& params,
                                       const ProbeSchedule& schedule = {});

/// (g): liminf g(t)/t^{2γ(2γ-1)} > 0, probed on t = 2^k up to about 1e12.
ConditionVerdict check_growth_g(const Nonlinearity& g, const ProblemParams& params,
                                double threshold = 1e-12, double margin = 0.05);

/// ∫_0^∞ (s^{1-N} ∫_0^s t^{N-1} a(t) dt)^{1/(p-1)} ds = ∞.
ConditionVerdict check_potential_divergence(const std::function<double(double)>& a_radial,
                                            const ProblemParams& params,
                                            const ProbeSchedule& schedule = {});

/// ∫_1^∞ r a(r) dr = ∞, reported for N >= 3 and p = 2.
ConditionVerdict check_lair(const std::function<double(double)>& a_radial,
                            const ProbeSchedule& schedule = {});

/// The oscillation-budget integrand
/// ℋ(s) = (s^{1-N}∫_0^s t^{N-1} a_osc)^{1/(p-1)} · g(𝒢^{-1}(s (∫_0^s ā)^{1/(p-1)}))^{1/(p-1)}.
class OscillationIntegrand {
public:
    OscillationIntegrand(const Potential& a, const Nonlinearity& g, const ProblemParams& params,
                         double tol = 1e-12);
    double operator()(double s) const;

private:
    const Nonlinearity* g_;
    ProblemParams params_;
    std::shared_ptr<const CumulativeIntegral> osc_moment_;
    std::shared_ptr<const CumulativeIntegral> upper_mass_;
    std::shared_ptr<const CalGInverter> inverse_;
};

/// H̄ = ∫_0^∞ ℋ. Holds when the tail is classified convergent; the value is the
/// integral up to r_cut plus a power-law tail fitted on [r_cut/256, r_cut].
/// A potential with a_osc ≡ 0 on the probes gives exactly 0. Throws
/// InvertibilityError when 𝒢 fails its monotonicity screen.
ConditionVerdict compute_Hbar(const Potential& a, const Nonlinearity& g,
                              const ProblemParams& params, double tol = 1e-10,
                              double r_cut = 1e6, const ProbeSchedule& schedule = {});

/// ∫_0^R ℋ, the budget actually consumed on a ball of radius R.
double truncated_Hbar(const Potential& a, const Nonlinearity& g, const ProblemParams& params,
                      double R, double tol = 1e-10);

/// g(t)/t^δ nondecreasing on a log grid and δ >= 2γ-1.
ConditionVerdict check_delta_monotone(const Nonlinearity& g, const ProblemParams& params,
                                      double delta);

struct CompatibilityReport {
    ConditionVerdict keller_osserman;
    ConditionVerdict growth;
    ConditionVerdict potential;         // potential divergence for a (radial) or a̲
    ConditionVerdict potential_upper;   // potential divergence for ā
    std::optional<ConditionVerdict> lair;
    std::optional<ConditionVerdict> hbar;
    std::optional<ConditionVerdict> delta_check;
    std::optional<double> delta;
    bool a_radial{false};
    bool p_at_least_2{false};
    bool calG_invertible{false};
    std::string calG_note;
    /// Every λ s^q violates (g) or (G): 2γ(2γ-1) > p-1.
    bool pure_power_family_incompatible{false};
    bool g_and_G_jointly_hold{false};
    bool thm11_hypotheses_hold{false};
    bool thm12_hypotheses_hold{false};
    std::vector<std::string> failed;    // names of the hypotheses that did not hold
};

/// Runs every check (concurrently) and combines them into theorem-level flags.
CompatibilityReport hypothesis_matrix(const ProblemParams& params, const Nonlinearity& g,
                                      const Potential& a, std::optional<double> delta = {});

}  // namespace qlb
