#pragma once

#include "qlb/dual_transform.hpp"
#include "qlb/problem_model.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace qlb {

using RadialFunction = std::function<double(double)>;

/// r_i = r_max (e^{κ i/n} - 1) / (e^κ - 1), i = 0 … n; κ = 0 gives a uniform grid.
std::vector<double> graded_grid(double r_max, std::size_t nodes, double grading);

/// Cumulative radial integrals on a fixed grid.
///
/// inner(H)_i = ∫_0^{r_i} s^{N-1} a(s) H(s) ds with H interpolated by cubic
/// Lagrange stencils and the weight s^{N-1} a(s) sampled at 8 Gauss points per
/// cell. outer(J)_i = ∫_0^{r_i} (t^{1-N} J(t))^{1/(p-1)} dt, written as
/// t^β ψ(t) with ψ = (t^{-N} J)^β interpolated and t^β integrated exactly on
/// the first cell, so the r^{p/(p-1)} behaviour at the centre is resolved.
class RadialQuadrature {
public:
    RadialQuadrature(std::vector<double> radii, const RadialFunction& a, int dim, double p);

    const std::vector<double>& radii() const noexcept { return r_; }
    double a_at_centre() const noexcept { return a0_; }

    std::vector<double> inner(const std::vector<double>& H) const;
    /// Requires J from inner(); `h_centre` is H(0), used for ψ(0).
    std::vector<double> outer(const std::vector<double>& J, double h_centre) const;

private:
    static std::size_t stencil_start(std::size_t cell, std::size_t n);

    std::vector<double> r_;
    int dim_;
    double beta_;
    double a0_;
    std::vector<std::array<double, 4>> inner_w_;
    std::vector<std::array<double, 4>> outer_w_;
};

enum class RadialStatus { converged, blowup, step_collapse };
const char* to_string(RadialStatus s);

struct RadialOptions {
    std::size_t nodes{4097};
    double grading{3.0};
    double relaxation{1.0};     // initial Picard damping ω
    double blowup_guard{1e12};
    std::size_t max_iter{50000};
};

struct RadialSolution {
    double alpha{0};
    std::vector<double> radii;
    std::vector<double> w;
    std::vector<double> u;                    // f(w); empty for bare forcings
    RadialStatus status{RadialStatus::converged};
    std::string method;
    std::size_t iterations{0};
    double picard_residual{0};
    std::vector<double> residual_history;
    bool monotone_iterates{true};
    double final_relaxation{1};
    double ode_crosscheck_deviation{std::numeric_limits<double>::quiet_NaN()};
    double blowup_lower_bound_constant{std::numeric_limits<double>::quiet_NaN()};
    std::optional<double> gamma_alpha_estimate;
    double a_infty{0};                        // max of a on the grid
};

/// h(w) = g(f(w)) f'(w), the forcing of the transformed problem.
RadialFunction transformed_forcing(const Nonlinearity& g, const DualTransform& dual);

/// Picard iteration w ← α + ∫_0^r (t^{1-N} ∫_0^t s^{N-1} a h(w) ds)^{1/(p-1)} dt
/// from w ≡ α on a graded grid.
///
/// Convergence is sup_i |Δw_i| / (1 + |w_i|) < tol. The damping halves when
/// that update grows while some node moved down (monotone in exact
/// arithmetic, so a descent is quadrature noise). An iterate above blowup_guard ends the run with
/// status blowup and Γ(α) set to the first radius past the guard; the profile
/// is cut there. Throws NonConvergenceError after max_iter sweeps.
RadialSolution picard_solve(const ProblemParams& params, const RadialFunction& a_radial,
                            const RadialFunction& forcing, double alpha, double r_max, double tol,
                            const RadialOptions& opt = {});
RadialSolution picard_solve(const ProblemParams& params, const RadialFunction& a_radial,
                            const Nonlinearity& g, const DualTransform& dual, double alpha,
                            double r_max, double tol, const RadialOptions& opt = {});

/// Shooting in (w, v), v = r^{N-1} (w')^{p-1}, with Dormand–Prince 5(4) from a
/// series start at r_s = 1e-6 r_max; output on the same graded grid as
/// picard_solve. Step collapse is reported through the status.
RadialSolution ode_shoot(const ProblemParams& params, const RadialFunction& a_radial,
                         const RadialFunction& forcing, double alpha, double r_max, double tol,
                         const RadialOptions& opt = {});
RadialSolution ode_shoot(const ProblemParams& params, const RadialFunction& a_radial,
                         const Nonlinearity& g, const DualTransform& dual, double alpha,
                         double r_max, double tol, const RadialOptions& opt = {});

/// sup |w_a - w_b| over common grid nodes.
double sup_deviation(const RadialSolution& a, const RadialSolution& b);

/// Radial p-Laplacian r^{1-N}(r^{N-1}|v'|^{p-2}v')' in flux form on a
/// nonuniform grid; NaN at the two end nodes.
std::vector<double> radial_p_laplacian(const std::vector<double>& r, const std::vector<double>& v,
                                       int dim, double p);

struct ResidualProfile {
    std::vector<double> radii;
    std::vector<double> residual;
    double max_abs{0};
    double r_lo{0}, r_hi{0};
};

/// Strong-form residual of the original problem at u:
/// Δ_p u + Δ_p(u^{2γ}) u^{2γ-1} - a g(u), at the nodes in [r_lo, r_hi].
ResidualProfile residual_original(const std::vector<double>& radii, const std::vector<double>& u,
                                  const RadialFunction& a_radial, const Nonlinearity& g,
                                  const ProblemParams& params, double r_lo = 0.1,
                                  double r_hi = HUGE_VAL);
ResidualProfile residual_original(const RadialSolution& solution, const RadialFunction& a_radial,
                                  const Nonlinearity& g, const ProblemParams& params,
                                  double r_lo = 0.1, double r_hi = HUGE_VAL);

struct ResidualStudy {
    std::vector<std::size_t> nodes;
    std::vector<double> max_spacing;
    std::vector<double> max_residual;
    std::vector<double> observed_order;   // log2 of successive residual ratios
};

/// Solves on nodes, 2·nodes-1, 4·nodes-3, … and reports the residual order.
ResidualStudy residual_convergence_study(const ProblemParams& params,
                                         const RadialFunction& a_radial, const Nonlinearity& g,
                                         const DualTransform& dual, double alpha, double r_max,
                                         std::size_t base_nodes, int levels, double r_lo,
                                         double r_hi, double tol);

struct LowerBoundReport {
    double A1{0};
    double A2{0};
    double inf_ratio{0};     // inf_{t>=α} g(f(t)) / f(t)^{2γ(2γ-1)}
    double M{0};             // A2 A1^{2γ(2γ-1)} inf_ratio, drives the envelope
    double M_displayed{0};   // A2 A1^{2γ-1} inf_ratio
    double t_low{0}, t_high{0};
    std::vector<double> envelope;   // α + M^{1/(p-1)} ∫_0^r (t^{1-N}∫_0^t s^{N-1} a)^{1/(p-1)}
    double min_margin{0};           // min over nodes of w - envelope
    bool holds{true};
};

/// Constants of the non-extinction lower bound and its check on the grid.
///
/// A1 and A2 are the infima of f(t)/t^{1/(2γ)} and f'(t) t^{2γ-1} over
/// [t_low, max(1e8, max w)], t_low = α by default. Sets
/// solution.blowup_lower_bound_constant. Throws IntegrityError when the
/// envelope is violated.
LowerBoundReport blowup_lower_bound(RadialSolution& solution, const RadialFunction& a_radial,
                                    const DualTransform& dual, const Nonlinearity& g,
                                    const ProblemParams& params,
                                    std::optional<double> t_low = {});

struct ThresholdEstimate {
    double calA{0};
    double A1{0};
    double A2{0};
    std::vector<double> probe_alphas;
    std::vector<bool> probe_ok;
    double resolution{1e-3};
};

struct FamilyMember {
    RadialSolution solution;
    std::optional<LowerBoundReport> bound;
    std::string error;                       // empty on success
};

struct FamilyResult {
    std::vector<FamilyMember> members;       // in input order
    ThresholdEstimate threshold;
    bool ordered{true};                      // w_{α1} <= w_{α2} for α1 < α2
    std::vector<std::pair<double, double>> ordering_violations;  // (α, r)
};

/// Solves every α (concurrently, `threads` workers), checks the comparison
/// property and estimates the threshold 𝒜 by bisection to 1e-3 below the
/// smallest successful α. An α succeeds when the solve converges without
/// blow-up and M > 0 with the envelope satisfied.
FamilyResult sweep_family(const ProblemParams& params, const RadialFunction& a_radial,
                          const Nonlinearity& g, const DualTransform& dual,
                          const std::vector<double>& alphas, double r_max, double tol,
                          const RadialOptions& opt = {}, unsigned threads = 1,
                          double threshold_r_max = 0);

}  // namespace qlb
