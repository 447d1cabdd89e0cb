#pragma once

#include "qlb/condition_checker.hpp"
#include "qlb/radial_solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qlb {

struct SandwichReport {
    double alpha{0};
    double epsilon{0};
    double hbar{0};
    double beta{0};                      // alpha + epsilon + hbar unless overridden
    bool beta_overridden{false};
    double min_gap{0};                   // min over the grid of w_β - w_α
    std::vector<double> ordering_violations;   // radii with w_β <= w_α
    double S_beta_estimate{HUGE_VAL};    // HUGE_VAL: no crossing up to r_max
    double r_max{0};
    double u_alpha_centre{0};            // f(α)
    double u_beta_centre{0};             // f(β)
    std::string hbar_note;
};

struct BracketingPair {
    RadialSolution w_alpha;   // centre α, potential ā
    RadialSolution w_beta;    // centre β, potential a̲
    SandwichReport report;
};

/// The radial pair of the sandwich construction and its ordering scan.
///
/// `hbar` replaces H̄ when given (e.g. the budget ∫_0^R ℋ consumed on a ball
/// of radius R); otherwise H̄ is computed and must be finite, else
/// HypothesisError. `beta` overrides α + ε + H̄ for negative controls.
BracketingPair build_bracketing_pair(const ProblemParams& params, const Potential& a,
                                     const Nonlinearity& g, const DualTransform& dual,
                                     double alpha, double epsilon, double tol, double r_max = 100,
                                     std::optional<double> hbar = {},
                                     std::optional<double> beta = {},
                                     const RadialOptions& opt = {});

struct GrowthBound {
    std::vector<double> radii;
    std::vector<double> majorant;        // 𝒢^{-1}(r (∫_0^r ā)^{1/(p-1)})
    double crossover_radius{HUGE_VAL};   // w_α <= majorant on [crossover, r_max]
    bool holds{false};
};

/// Evaluates the 𝒢^{-1} majorant along w_α. The crossover is the first grid
/// radius where w_α drops below the majorant; past it the bound is asserted.
/// IntegrityError when it fails there or when no crossover is reached.
GrowthBound calG_growth_bound(const RadialSolution& w_alpha, const Potential& a,
                              const Nonlinearity& g, const ProblemParams& params);

/// h(w) = g(f(w)) f'(w) tabulated on a geometric grid in w, interpolated by
/// cubic Lagrange in log w; falls back to direct evaluation off the table.
class ForcingTable {
public:
    ForcingTable(const Nonlinearity& g, const DualTransform& dual, double w_lo, double w_hi,
                 std::size_t points = 4096);
    double operator()(double w) const;
    /// Largest difference quotient of the table on [lo, hi] (>= 0).
    double max_slope(double lo, double hi) const;
    /// Largest decrease rate max(0, -Δh/Δw) of the table on [lo, hi].
    double max_descent(double lo, double hi) const;

private:
    const Nonlinearity* g_;
    const DualTransform* dual_;
    double log_lo_, step_;
    std::vector<double> w_, h_;
    std::vector<std::vector<double>> slope_max_;   // sparse table of segment slopes
};

struct BallOptions {
    std::size_t max_iter{2000};
    double diffusivity_floor{1e-8};   // p > 2: lower bound on |∇w|^{p-2}
    std::size_t table_points{4096};
};

struct BallSolution {
    int n{0};                         // ball radius index
    double radius{0};
    double mesh_h{0};
    int half_width{0};                // nodes span i, j ∈ [-half_width, half_width]
    std::vector<double> x, y;         // interior node coordinates
    std::vector<double> w_n;          // values at the interior nodes
    std::vector<double> sub_values, super_values;
    double boundary_value{0};         // w_α(R)
    std::size_t iterations{0};
    std::vector<double> update_history;
    double bracket_slack{0};
    double consistency_error{0};      // max |Δ_h w_α - a h(w_α)| over interior nodes
    std::size_t bracket_violations{0};
    std::size_t ascent_violations{0};
    bool converged{false};
    bool sandwich_ok{false};
    std::string diagnostic;

    /// Value at (x, y) by bilinear interpolation (exact at nodes); the
    /// boundary value is used for neighbours outside the ball.
    double value_at(double px, double py) const;
    /// Row-major map of the (2·half_width+1)² grid to interior indices, -1
    /// outside the open ball.
    std::vector<long> grid_index;
};

/// Monotone iteration for Δ_p w = a(x) g(f(w)) f'(w) on B_n(0) ⊂ R², w = w_α on
/// the boundary, ascending from the subsolution.
///
/// p = 2: five-point Laplacian with Shortley–Weller boundary rows and a
/// shift λ(x) >= ∂_w[a h] on the local bracket, factored once. The start is
/// w_α - τ(R² - |x|²)/4, an exact discrete subsolution when τ covers the
/// consistency defect of w_α, so every sweep ascends. p > 2: the
/// diffusivity |∇w|^{p-2} is frozen per sweep (floored, evaluated at edge
/// midpoints), the matrix is refactored and the update is relaxed by 1/(p-1).
/// Each sweep is checked against w_α - s <= w <= w_β + s where s is the
/// larger discrete consistency defect of w_α and w_β times R²/4 plus tol.
BallSolution dirichlet_monotone_solve(const ProblemParams& params, const Potential& a,
                                      const Nonlinearity& g, const DualTransform& dual, int n,
                                      const RadialSolution& sub, const RadialSolution& super,
                                      double mesh_h, double tol, const BallOptions& opt = {});

struct LimitReport {
    std::vector<double> radii;
    std::vector<std::pair<double, double>> probes;
    std::vector<std::vector<double>> values;        // [probe][ball]
    std::vector<std::vector<double>> differences;   // [probe][k] = |w_{k+1} - w_k|
    double last_difference{0};                      // max over probes
    bool stabilized{false};                         // last differences <= tol
    bool decreasing{true};                          // differences nonincreasing
};

/// Cauchy differences of nested ball solutions at probe points. Needs at least
/// three solutions (PreconditionError otherwise).
LimitReport extract_limit(std::vector<const BallSolution*> solutions,
                          const std::vector<std::pair<double, double>>& probes,
                          double tol = 1e-3);

/// Cubic Lagrange interpolation of a radial profile at radius r.
double interpolate_profile(const RadialSolution& s, double r);

}  // namespace qlb
