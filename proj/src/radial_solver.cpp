#include "qlb/radial_solver.hpp"

#include "qlb/errors.hpp"
#include "qlb/ode.hpp"
#include "qlb/quadrature.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace qlb {

std::vector<double> graded_grid(double r_max, std::size_t nodes, double grading) {
    if (!(r_max > 0) || !std::isfinite(r_max)) throw PreconditionError("r_max > 0 required");
    if (nodes < 5) throw PreconditionError("radial grid needs at least 5 nodes");
    if (grading < 0) throw PreconditionError("grading must be >= 0");
    std::vector<double> r(nodes);
    const double n = static_cast<double>(nodes - 1);
    const double denom = std::expm1(grading);
    for (std::size_t i = 0; i < nodes; ++i) {
        const double s = static_cast<double>(i) / n;
        r[i] = grading == 0 ? r_max * s : r_max * std::expm1(grading * s) / denom;
    }
    r.back() = r_max;
    return r;
}

namespace {

// Lagrange basis on four nodes, evaluated at x.
std::array<double, 4> lagrange4(const double* xs, double x) {
    std::array<double, 4> L{};
    for (int m = 0; m < 4; ++m) {
        double v = 1.0;
        for (int k = 0; k < 4; ++k) {
            if (k != m) v *= (x - xs[k]) / (xs[m] - xs[k]);
        }
        L[m] = v;
    }
    return L;
}

// Monomial coefficients of the Lagrange basis polynomials on four nodes.
std::array<std::array<double, 4>, 4> lagrange4_monomials(const double* xs) {
    std::array<std::array<double, 4>, 4> c{};
    for (int m = 0; m < 4; ++m) {
        std::array<double, 4> poly{1.0, 0.0, 0.0, 0.0};
        double denom = 1.0;
        int degree = 0;
        for (int k = 0; k < 4; ++k) {
            if (k == m) continue;
            // poly *= (x - xs[k])
            for (int d = degree + 1; d > 0; --d) poly[d] = poly[d - 1] - xs[k] * poly[d];
            poly[0] *= -xs[k];
            ++degree;
            denom *= xs[m] - xs[k];
        }
        for (int d = 0; d < 4; ++d) c[m][d] = poly[d] / denom;
    }
    return c;
}

}  // namespace

std::size_t RadialQuadrature::stencil_start(std::size_t cell, std::size_t n) {
    if (cell == 0) return 0;
    return std::min(cell - 1, n - 4);
}

RadialQuadrature::RadialQuadrature(std::vector<double> radii, const RadialFunction& a, int dim,
                                   double p)
    : r_(std::move(radii)), dim_(dim), beta_(1.0 / (p - 1.0)), a0_(a(0.0)) {
    const std::size_t n = r_.size();
    if (n < 4) throw PreconditionError("radial quadrature needs at least 4 nodes");
    if (r_[0] != 0) throw PreconditionError("radial grid must start at 0");
    inner_w_.resize(n - 1);
    outer_w_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j0 = stencil_start(i, n);
        const double* xs = &r_[j0];
        const double lo = r_[i], hi = r_[i + 1];
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        std::array<double, 4> wi{}, wo{};
        for (std::size_t q = 0; q < kLegendre8Nodes.size(); ++q) {
            const double x = mid + half * kLegendre8Nodes[q];
            const double wq = half * kLegendre8Weights[q];
            const auto L = lagrange4(xs, x);
            const double inner_weight = std::pow(x, dim - 1) * a(x);
            const double outer_weight = std::pow(x, beta_);
            for (int m = 0; m < 4; ++m) {
                wi[m] += wq * inner_weight * L[m];
                wo[m] += wq * outer_weight * L[m];
            }
        }
        if (i == 0) {
            // ∫_0^{r_1} t^β L_m(t) dt in closed form, with t = r_1 x.
            const double scale = r_[1];
            double scaled[4];
            for (int k = 0; k < 4; ++k) scaled[k] = xs[k] / scale;
            const auto c = lagrange4_monomials(scaled);
            for (int m = 0; m < 4; ++m) {
                double v = 0;
                for (int d = 0; d < 4; ++d) v += c[m][d] / (beta_ + d + 1.0);
                wo[m] = v * std::pow(scale, beta_ + 1.0);
            }
        }
        inner_w_[i] = wi;
        outer_w_[i] = wo;
    }
}

std::vector<double> RadialQuadrature::inner(const std::vector<double>& H) const {
    const std::size_t n = r_.size();
    std::vector<double> J(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j0 = stencil_start(i, n);
        double piece = 0;
        for (int m = 0; m < 4; ++m) piece += inner_w_[i][m] * H[j0 + m];
        J[i + 1] = J[i] + piece;
    }
    return J;
}

std::vector<double> RadialQuadrature::outer(const std::vector<double>& J, double h_centre) const {
    const std::size_t n = r_.size();
    std::vector<double> psi(n);
    psi[0] = std::pow(std::max(a0_ * h_centre / dim_, 0.0), beta_);
    for (std::size_t i = 1; i < n; ++i) {
        psi[i] = std::pow(std::max(J[i] / std::pow(r_[i], dim_), 0.0), beta_);
    }
    std::vector<double> W(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j0 = stencil_start(i, n);
        double piece = 0;
        for (int m = 0; m < 4; ++m) piece += outer_w_[i][m] * psi[j0 + m];
        W[i + 1] = W[i] + piece;
    }
    return W;
}

const char* to_string(RadialStatus s) {
    switch (s) {
        case RadialStatus::converged: return "converged";
        case RadialStatus::blowup: return "blowup";
        case RadialStatus::step_collapse: return "step_collapse";
    }
    return "?";
}

RadialFunction transformed_forcing(const Nonlinearity& g, const DualTransform& dual) {
    return [&g, &dual](double w) {
        const double u = dual.f(w);
        return g(u) * dual.f_prime_at_value(u);
    };
}

namespace {

void check_inputs(double alpha, double r_max, double tol) {
    if (!(alpha > 0) || !std::isfinite(alpha)) throw PreconditionError("alpha > 0 required");
    if (!(r_max > 0) || !std::isfinite(r_max)) throw PreconditionError("r_max > 0 required");
    if (!(tol > 0)) throw PreconditionError("tol > 0 required");
}

double max_on_grid(const RadialFunction& a, const std::vector<double>& r) {
    double m = 0;
    for (double x : r) m = std::max(m, a(x));
    return m;
}

void cut_at(RadialSolution& s, std::size_t end) {
    s.radii.resize(end);
    s.w.resize(end);
}

void fill_u(RadialSolution& s, const DualTransform& dual) {
    s.u.resize(s.w.size());
    for (std::size_t i = 0; i < s.w.size(); ++i) s.u[i] = dual.f(s.w[i]);
}

}  // namespace

RadialSolution picard_solve(const ProblemParams& params, const RadialFunction& a_radial,
                            const RadialFunction& forcing, double alpha, double r_max, double tol,
                            const RadialOptions& opt) {
    check_inputs(alpha, r_max, tol);
    RadialSolution sol;
    sol.alpha = alpha;
    sol.method = "picard";
    sol.radii = graded_grid(r_max, opt.nodes, opt.grading);
    sol.a_infty = max_on_grid(a_radial, sol.radii);
    const RadialQuadrature quad(sol.radii, a_radial, params.dim(), params.p());
    const std::size_t n = sol.radii.size();

    std::vector<double> w(n, alpha), H(n), w_seen(n, std::nan(""));
    double omega = opt.relaxation;
    double previous = HUGE_VAL;
    for (std::size_t k = 1; k <= opt.max_iter; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] != w_seen[i]) {  // h is only re-evaluated where w moved
                H[i] = forcing(w[i]);
                w_seen[i] = w[i];
            }
        }
        const auto J = quad.inner(H);
        const auto W = quad.outer(J, H[0]);

        std::size_t bad = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(alpha + W[i] <= opt.blowup_guard)) {
                bad = i;
                break;
            }
        }
        if (bad < n) {
            sol.status = RadialStatus::blowup;
            sol.gamma_alpha_estimate = sol.radii[bad];
            sol.w = w;
            cut_at(sol, bad);
            sol.iterations = k;
            sol.final_relaxation = omega;
            return sol;
        }

        double update = 0;
        bool descended = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = alpha + W[i];
            const double next = w[i] + omega * (target - w[i]);
            if (next < w[i] - 1e-13 * (1 + std::abs(w[i]))) descended = true;
            update = std::max(update, std::abs(next - w[i]) / (1 + std::abs(next)));
            w[i] = next;
        }
        if (descended) sol.monotone_iterates = false;
        sol.residual_history.push_back(update);
        if (update < tol) {
            sol.iterations = k;
            sol.picard_residual = update;
            sol.final_relaxation = omega;
            sol.w = std::move(w);
            return sol;
        }
        if (descended && update > previous) omega = std::max(omega / 2, 1.0 / 1024);
        previous = update;
    }
    throw NonConvergenceError("Picard iteration did not reach tol " + std::to_string(tol) +
                                  " in " + std::to_string(opt.max_iter) + " sweeps",
                              sol.residual_history);
}

RadialSolution picard_solve(const ProblemParams& params, const RadialFunction& a_radial,
                            const Nonlinearity& g, const DualTransform& dual, double alpha,
                            double r_max, double tol, const RadialOptions& opt) {
    auto sol = picard_solve(params, a_radial, transformed_forcing(g, dual), alpha, r_max, tol, opt);
    fill_u(sol, dual);
    return sol;
}

RadialSolution ode_shoot(const ProblemParams& params, const RadialFunction& a_radial,
                         const RadialFunction& forcing, double alpha, double r_max, double tol,
                         const RadialOptions& opt) {
    check_inputs(alpha, r_max, tol);
    RadialSolution sol;
    sol.alpha = alpha;
    sol.method = "ode_shoot";
    sol.radii = graded_grid(r_max, opt.nodes, opt.grading);
    sol.a_infty = max_on_grid(a_radial, sol.radii);
    const int N = params.dim();
    const double beta = params.radial_exponent();

    // Series start: v ≈ a(0) h(α) r^N / N, w ≈ α + (a(0) h(α)/N)^β r^{β+1}/(β+1).
    const double rs = std::min(1e-6 * r_max, 0.1 * sol.radii[1]);
    const double c0 = a_radial(0.0) * forcing(alpha);
    Eigen::Vector2d y0;
    y0 << alpha + std::pow(std::max(c0, 0.0) / N, beta) * std::pow(rs, beta + 1) / (beta + 1),
        c0 * std::pow(rs, N) / N;

    auto rhs = [&](double r, const Eigen::Vector2d& y) {
        Eigen::Vector2d d;
        d[0] = std::pow(std::max(y[1], 0.0) / std::pow(r, N - 1), beta);
        d[1] = std::pow(r, N - 1) * a_radial(r) * forcing(y[0]);
        return d;
    };
    const double guard = opt.blowup_guard;
    auto stop = [guard](double, const Eigen::Vector2d& y) { return !(y[0] <= guard); };

    std::vector<double> outputs(sol.radii.begin() + 1, sol.radii.end());
    OdeOptions<double> o;
    o.rtol = std::min(tol, 1e-6);
    o.atol = o.rtol * 1e-2;
    const auto traj =
        dormand_prince<double, 2>(rhs, rs, y0, std::span<const double>(outputs), o, stop);

    sol.w.assign(1, alpha);
    for (const auto& y : traj.states) sol.w.push_back(y[0]);
    sol.iterations = traj.accepted;
    switch (traj.status) {
        case OdeStatus::ok:
            sol.status = RadialStatus::converged;
            break;
        case OdeStatus::stopped:
            sol.status = RadialStatus::blowup;
            sol.gamma_alpha_estimate = traj.t_end;
            break;
        case OdeStatus::step_collapse:
        case OdeStatus::max_steps:
            sol.status = RadialStatus::step_collapse;
            sol.gamma_alpha_estimate = traj.t_end;
            break;
    }
    cut_at(sol, sol.w.size());
    return sol;
}

RadialSolution ode_shoot(const ProblemParams& params, const RadialFunction& a_radial,
                         const Nonlinearity& g, const DualTransform& dual, double alpha,
                         double r_max, double tol, const RadialOptions& opt) {
    auto sol = ode_shoot(params, a_radial, transformed_forcing(g, dual), alpha, r_max, tol, opt);
    fill_u(sol, dual);
    return sol;
}

double sup_deviation(const RadialSolution& a, const RadialSolution& b) {
    const std::size_t n = std::min(a.w.size(), b.w.size());
    double d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a.radii[i] != b.radii[i]) throw PreconditionError("solutions use different grids");
        d = std::max(d, std::abs(a.w[i] - b.w[i]));
    }
    return d;
}

std::vector<double> radial_p_laplacian(const std::vector<double>& r, const std::vector<double>& v,
                                       int dim, double p) {
    const std::size_t n = r.size();
    std::vector<double> out(n, std::nan(""));
    if (n < 3) return out;
    std::vector<double> flux(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = r[i + 1] - r[i];
        const double D = (v[i + 1] - v[i]) / h;
        const double rm = 0.5 * (r[i] + r[i + 1]);
        flux[i] = std::pow(rm, dim - 1) * std::pow(std::abs(D), p - 2) * D;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double width = 0.5 * (r[i + 1] - r[i - 1]);
        out[i] = std::pow(r[i], 1 - dim) * (flux[i] - flux[i - 1]) / width;
    }
    return out;
}

ResidualProfile residual_original(const std::vector<double>& radii, const std::vector<double>& u,
                                  const RadialFunction& a_radial, const Nonlinearity& g,
                                  const ProblemParams& params, double r_lo, double r_hi) {
    if (radii.size() != u.size()) throw PreconditionError("profile and grid lengths differ");
    const double p = params.p();
    const double two_gamma = 2 * params.gamma();
    const int N = params.dim();
    std::vector<double> u2g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) u2g[i] = std::pow(std::abs(u[i]), two_gamma);
    const auto lap_u = radial_p_laplacian(radii, u, N, p);
    const auto lap_u2g = radial_p_laplacian(radii, u2g, N, p);

    ResidualProfile out;
    out.r_lo = r_lo;
    out.r_hi = r_hi;
    for (std::size_t i = 1; i + 1 < radii.size(); ++i) {
        if (radii[i] < r_lo || radii[i] > r_hi) continue;
        const double ui = u[i];
        const double res = lap_u[i] + lap_u2g[i] * std::pow(std::abs(ui), two_gamma - 2) * ui -
                           a_radial(radii[i]) * g(ui);
        out.radii.push_back(radii[i]);
        out.residual.push_back(res);
        out.max_abs = std::max(out.max_abs, std::abs(res));
    }
    return out;
}

ResidualProfile residual_original(const RadialSolution& solution, const RadialFunction& a_radial,
                                  const Nonlinearity& g, const ProblemParams& params, double r_lo,
                                  double r_hi) {
    if (solution.u.size() != solution.w.size()) {
        throw PreconditionError("solution carries no u = f(w) profile");
    }
    return residual_original(solution.radii, solution.u, a_radial, g, params, r_lo, r_hi);
}

ResidualStudy residual_convergence_study(const ProblemParams& params,
                                         const RadialFunction& a_radial, const Nonlinearity& g,
                                         const DualTransform& dual, double alpha, double r_max,
                                         std::size_t base_nodes, int levels, double r_lo,
                                         double r_hi, double tol) {
    ResidualStudy study;
    std::size_t nodes = base_nodes;
    for (int level = 0; level < levels; ++level) {
        RadialOptions opt;
        opt.nodes = nodes;
        const auto sol = picard_solve(params, a_radial, g, dual, alpha, r_max, tol, opt);
        if (sol.status != RadialStatus::converged) {
            throw IntegrityError("residual study: solve did not converge on " +
                                 std::to_string(nodes) + " nodes");
        }
        const auto res = residual_original(sol, a_radial, g, params, r_lo, r_hi);
        double spacing = 0;
        for (std::size_t i = 1; i < sol.radii.size(); ++i) {
            spacing = std::max(spacing, sol.radii[i] - sol.radii[i - 1]);
        }
        study.nodes.push_back(nodes);
        study.max_spacing.push_back(spacing);
        study.max_residual.push_back(res.max_abs);
        if (level > 0) {
            const double prev = study.max_residual[level - 1];
            study.observed_order.push_back(std::log2(prev / res.max_abs));
        }
        nodes = 2 * nodes - 1;
    }
    return study;
}

LowerBoundReport blowup_lower_bound(RadialSolution& solution, const RadialFunction& a_radial,
                                    const DualTransform& dual, const Nonlinearity& g,
                                    const ProblemParams& params, std::optional<double> t_low) {
    if (solution.w.empty()) throw PreconditionError("empty solution");
    LowerBoundReport rep;
    const double gamma = params.gamma();
    const double e_g = 2 * gamma * (2 * gamma - 1);
    const double w_max = *std::max_element(solution.w.begin(), solution.w.end());
    rep.t_low = t_low.value_or(solution.alpha);
    rep.t_high = std::max(1e8, w_max);
    if (!(rep.t_low > 0)) throw PreconditionError("lower-bound threshold must be > 0");

    rep.A1 = rep.A2 = rep.inf_ratio = HUGE_VAL;
    for (double t : log_grid(rep.t_low, rep.t_high, 400)) {
        const double ft = dual.f(t);
        rep.A1 = std::min(rep.A1, ft / std::pow(t, 1 / (2 * gamma)));
        rep.A2 = std::min(rep.A2, dual.f_prime_at_value(ft) * std::pow(t, 2 * gamma - 1));
        rep.inf_ratio = std::min(rep.inf_ratio, g(ft) / std::pow(ft, e_g));
    }
    rep.M = rep.A2 * std::pow(rep.A1, e_g) * rep.inf_ratio;
    rep.M_displayed = rep.A2 * std::pow(rep.A1, 2 * gamma - 1) * rep.inf_ratio;
    solution.blowup_lower_bound_constant = rep.M;

    const RadialQuadrature quad(solution.radii, a_radial, params.dim(), params.p());
    const std::vector<double> ones(solution.radii.size(), 1.0);
    const auto E = quad.outer(quad.inner(ones), 1.0);
    const double scale = std::pow(rep.M, params.radial_exponent());
    rep.envelope.resize(E.size());
    rep.min_margin = HUGE_VAL;
    for (std::size_t i = 0; i < E.size(); ++i) {
        rep.envelope[i] = solution.alpha + scale * E[i];
        const double margin = solution.w[i] - rep.envelope[i];
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-9 * (1 + std::abs(solution.w[i]))) rep.holds = false;
    }
    if (!rep.holds) {
        throw IntegrityError("lower-bound envelope violated (min margin " +
                             std::to_string(rep.min_margin) + ")");
    }
    return rep;
}

FamilyResult sweep_family(const ProblemParams& params, const RadialFunction& a_radial,
                          const Nonlinearity& g, const DualTransform& dual,
                          const std::vector<double>& alphas, double r_max, double tol,
                          const RadialOptions& opt, unsigned threads, double threshold_r_max) {
    FamilyResult out;
    out.members.resize(alphas.size());
    for (std::size_t i = 1; i < alphas.size(); ++i) {
        if (!(alphas[i] > alphas[i - 1])) throw PreconditionError("alphas must increase");
    }
    if (alphas.empty()) return out;

    auto solve_one = [&](double alpha, double radius) {
        FamilyMember m;
        try {
            m.solution = picard_solve(params, a_radial, g, dual, alpha, radius, tol, opt);
            if (m.solution.status != RadialStatus::converged) {
                m.error = "finite blow-up detected near r = " +
                          std::to_string(m.solution.gamma_alpha_estimate.value_or(0));
            } else {
                m.bound = blowup_lower_bound(m.solution, a_radial, dual, g, params);
                if (!(m.bound->M > 0)) m.error = "lower-bound constant M is not positive";
            }
        } catch (const Error& e) {
            m.error = e.what();
        }
        return m;
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < alphas.size(); i = next++) {
            out.members[i] = solve_one(alphas[i], r_max);
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads, alphas.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t i = 1; i < alphas.size(); ++i) {
        const auto& lo = out.members[i - 1].solution;
        const auto& hi = out.members[i].solution;
        const std::size_t n = std::min(lo.w.size(), hi.w.size());
        for (std::size_t j = 0; j < n; ++j) {
            if (lo.w[j] > hi.w[j] + 1e-9 * (1 + std::abs(hi.w[j]))) {
                out.ordered = false;
                out.ordering_violations.emplace_back(alphas[i], lo.radii[j]);
                break;
            }
        }
    }

    // Threshold: bisect between 0 and the smallest successful α.
    auto& th = out.threshold;
    std::optional<std::size_t> first_ok;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        th.probe_alphas.push_back(alphas[i]);
        const bool ok = out.members[i].error.empty();
        th.probe_ok.push_back(ok);
        if (ok && !first_ok) first_ok = i;
    }
    if (!first_ok) {
        th.calA = HUGE_VAL;
        return out;
    }
    th.A1 = out.members[*first_ok].bound->A1;
    th.A2 = out.members[*first_ok].bound->A2;
    const double radius = threshold_r_max > 0 ? threshold_r_max : r_max;
    double lo = *first_ok > 0 ? alphas[*first_ok - 1] : 0.0;
    double hi = alphas[*first_ok];
    while (hi - lo > th.resolution) {
        const double mid = 0.5 * (lo + hi);
        const bool ok = solve_one(mid, radius).error.empty();
        th.probe_alphas.push_back(mid);
        th.probe_ok.push_back(ok);
        if (ok) hi = mid; else lo = mid;
    }
    th.calA = hi;
    return out;
}

}  // namespace qlb
