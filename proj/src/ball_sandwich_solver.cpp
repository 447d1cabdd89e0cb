#include "qlb/ball_sandwich_solver.hpp"

#include "qlb/errors.hpp"
#include "qlb/quadrature.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qlb {

double interpolate_profile(const RadialSolution& s, double r) {
    const auto& R = s.radii;
    const std::size_t n = R.size();
    if (n < 4) throw PreconditionError("profile too short to interpolate");
    if (r < 0 || r > R.back() * (1 + 1e-12)) {
        throw PreconditionError("radius " + std::to_string(r) + " outside the solved range");
    }
    std::size_t cell = static_cast<std::size_t>(std::upper_bound(R.begin(), R.end(), r) - R.begin());
    cell = cell == 0 ? 0 : cell - 1;
    if (cell >= n - 1) cell = n - 2;
    const std::size_t j0 = cell == 0 ? 0 : std::min(cell - 1, n - 4);
    double v = 0;
    for (std::size_t m = 0; m < 4; ++m) {
        double L = 1;
        for (std::size_t k = 0; k < 4; ++k) {
            if (k != m) L *= (r - R[j0 + k]) / (R[j0 + m] - R[j0 + k]);
        }
        v += L * s.w[j0 + m];
    }
    return v;
}

BracketingPair build_bracketing_pair(const ProblemParams& params, const Potential& a,
                                     const Nonlinearity& g, const DualTransform& dual,
                                     double alpha, double epsilon, double tol, double r_max,
                                     std::optional<double> hbar, std::optional<double> beta,
                                     const RadialOptions& opt) {
    if (!(epsilon > 0)) throw PreconditionError("epsilon > 0 required");
    BracketingPair pair;
    auto& rep = pair.report;
    rep.alpha = alpha;
    rep.epsilon = epsilon;
    rep.r_max = r_max;
    if (hbar) {
        rep.hbar = *hbar;
        rep.hbar_note = "oscillation budget supplied by the caller";
    } else {
        const auto v = compute_Hbar(a, g, params);
        if (v.verdict != Verdict::holds || !v.hbar_value || !std::isfinite(*v.hbar_value)) {
            throw HypothesisError("oscillation budget H is not finite: " + v.note);
        }
        rep.hbar = *v.hbar_value;
        rep.hbar_note = v.note;
    }
    rep.beta = alpha + epsilon + rep.hbar;
    if (beta) {
        rep.beta = *beta;
        rep.beta_overridden = true;
    }

    const RadialFunction upper = [a](double r) { return a.radialize(r).upper; };
    const RadialFunction lower = [a](double r) { return a.radialize(r).lower; };
    pair.w_alpha = picard_solve(params, upper, g, dual, alpha, r_max, tol, opt);
    pair.w_beta = picard_solve(params, lower, g, dual, rep.beta, r_max, tol, opt);
    rep.u_alpha_centre = dual.f(alpha);
    rep.u_beta_centre = dual.f(rep.beta);

    const auto& wa = pair.w_alpha;
    const auto& wb = pair.w_beta;
    const std::size_t n = std::min(wa.w.size(), wb.w.size());
    rep.min_gap = HUGE_VAL;
    for (std::size_t i = 0; i < n; ++i) {
        const double gap = wb.w[i] - wa.w[i];
        rep.min_gap = std::min(rep.min_gap, gap);
        if (gap <= 0) {
            if (rep.ordering_violations.empty()) rep.S_beta_estimate = wa.radii[i];
            rep.ordering_violations.push_back(wa.radii[i]);
        }
    }
    return pair;
}

GrowthBound calG_growth_bound(const RadialSolution& w_alpha, const Potential& a,
                              const Nonlinearity& g, const ProblemParams& params) {
    const CalGInverter inverse(g, params);
    const CumulativeIntegral mass([a](double t) { return a.radialize(t).upper; }, 0.0, 1e-12);
    const double beta = params.radial_exponent();
    GrowthBound out;
    out.radii = w_alpha.radii;
    out.majorant.resize(out.radii.size(), 0.0);
    std::optional<std::size_t> cross;
    for (std::size_t i = 1; i < out.radii.size(); ++i) {
        const double r = out.radii[i];
        const double y = r * std::pow(mass(r), beta);
        out.majorant[i] = y > 0 ? inverse(y) : 0.0;
        const bool below = w_alpha.w[i] <= out.majorant[i];
        if (!cross && below) cross = i;
        if (cross && !below) {
            std::ostringstream msg;
            msg << "w_alpha exceeds the calG majorant at r = " << r << " beyond the crossover r = "
                << out.radii[*cross];
            throw IntegrityError(msg.str());
        }
    }
    if (!cross) throw IntegrityError("w_alpha stays above the calG majorant on the whole range");
    out.crossover_radius = out.radii[*cross];
    out.holds = true;
    return out;
}

ForcingTable::ForcingTable(const Nonlinearity& g, const DualTransform& dual, double w_lo,
                           double w_hi, std::size_t points)
    : g_(&g), dual_(&dual) {
    if (!(w_lo > 0) || !(w_hi > w_lo) || points < 8) {
        throw PreconditionError("forcing table needs 0 < w_lo < w_hi and >= 8 points");
    }
    log_lo_ = std::log(w_lo);
    step_ = (std::log(w_hi) - log_lo_) / static_cast<double>(points - 1);
    w_.resize(points);
    h_.resize(points);
    for (std::size_t j = 0; j < points; ++j) {
        w_[j] = std::exp(log_lo_ + step_ * static_cast<double>(j));
        const double u = dual.f(w_[j]);
        h_[j] = g(u) * dual.f_prime_at_value(u);
    }
    std::vector<double> slopes(points - 1);
    for (std::size_t j = 0; j + 1 < points; ++j) {
        slopes[j] = std::max(0.0, (h_[j + 1] - h_[j]) / (w_[j + 1] - w_[j]));
    }
    slope_max_.push_back(std::move(slopes));
    for (std::size_t len = 2; len <= slope_max_[0].size(); len *= 2) {
        const auto& prev = slope_max_.back();
        std::vector<double> level(prev.size() - len / 2);
        for (std::size_t j = 0; j < level.size(); ++j) level[j] = std::max(prev[j], prev[j + len / 2]);
        slope_max_.push_back(std::move(level));
    }
}

double ForcingTable::operator()(double w) const {
    const std::size_t n = w_.size();
    if (!(w >= w_.front()) || !(w <= w_.back())) {
        const double u = dual_->f(w);
        return (*g_)(u) * dual_->f_prime_at_value(u);
    }
    const double x = (std::log(w) - log_lo_) / step_;
    const auto j = static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(n - 2)));
    const std::size_t j0 = j == 0 ? 0 : std::min(j - 1, n - 4);
    double v = 0;
    for (std::size_t m = 0; m < 4; ++m) {
        double L = 1;
        for (std::size_t k = 0; k < 4; ++k) {
            if (k != m) {
                L *= (x - static_cast<double>(j0 + k)) / static_cast<double>(
                         static_cast<long>(m) - static_cast<long>(k));
            }
        }
        v += L * h_[j0 + m];
    }
    return v;
}

double ForcingTable::max_slope(double lo, double hi) const {
    const std::size_t segs = slope_max_[0].size();
    auto seg = [&](double w) {
        const double x = (std::log(std::max(w, w_.front())) - log_lo_) / step_;
        return static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, static_cast<double>(segs - 1)));
    };
    std::size_t a = seg(lo), b = seg(std::min(hi, w_.back()));
    if (b < a) std::swap(a, b);
    const std::size_t len = b - a + 1;
    std::size_t level = 0;
    while ((std::size_t{2} << level) <= len) ++level;
    const auto& t = slope_max_[level];
    return std::max(t[a], t[b + 1 - (std::size_t{1} << level)]);
}

double ForcingTable::max_descent(double lo, double hi) const {
    double d = 0;
    for (std::size_t j = 0; j + 1 < w_.size(); ++j) {
        if (w_[j + 1] < lo || w_[j] > hi) continue;
        d = std::max(d, (h_[j] - h_[j + 1]) / (w_[j + 1] - w_[j]));
    }
    return d;
}

double BallSolution::value_at(double px, double py) const {
    const int m = half_width;
    const int side = 2 * m + 1;
    auto node = [&](int i, int j) {
        if (i < -m || i > m || j < -m || j > m) return boundary_value;
        const long k = grid_index[static_cast<std::size_t>((i + m) * side + (j + m))];
        return k < 0 ? boundary_value : w_n[static_cast<std::size_t>(k)];
    };
    auto snap = [](double v) {
        const double r = std::round(v);
        return std::abs(v - r) < 1e-9 ? r : v;
    };
    const double gx = snap(px / mesh_h), gy = snap(py / mesh_h);
    const int i0 = static_cast<int>(std::floor(gx)), j0 = static_cast<int>(std::floor(gy));
    const double fx = gx - i0, fy = gy - j0;
    double v = (1 - fx) * (1 - fy) * node(i0, j0);
    if (fx > 0) v += fx * (1 - fy) * node(i0 + 1, j0);
    if (fy > 0) v += (1 - fx) * fy * node(i0, j0 + 1);
    if (fx > 0 && fy > 0) v += fx * fy * node(i0 + 1, j0 + 1);
    return v;
}

namespace {

// One interior node's four neighbours: interior index (or -1 for the
// boundary) and the distance to it along the grid line.
struct Stencil {
    std::array<long, 4> nb{};      // +x, -x, +y, -y
    std::array<double, 4> dist{};
};

struct BallMesh {
    double R{0}, h{0};
    int m{0};
    std::vector<long> index;
    std::vector<double> x, y;
    std::vector<Stencil> stencils;
};

BallMesh build_mesh(double R, double h) {
    BallMesh mesh;
    mesh.R = R;
    mesh.h = h;
    mesh.m = static_cast<int>(std::floor(R / h + 1e-9));
    const int m = mesh.m, side = 2 * m + 1;
    mesh.index.assign(static_cast<std::size_t>(side) * side, -1);
    const double R2 = R * R * (1 - 1e-12);
    for (int i = -m; i <= m; ++i) {
        for (int j = -m; j <= m; ++j) {
            const double x = i * h, y = j * h;
            if (x * x + y * y < R2) {
                mesh.index[static_cast<std::size_t>((i + m) * side + (j + m))] =
                    static_cast<long>(mesh.x.size());
                mesh.x.push_back(x);
                mesh.y.push_back(y);
            }
        }
    }
    auto at = [&](int i, int j) -> long {
        if (i < -m || i > m || j < -m || j > m) return -1;
        return mesh.index[static_cast<std::size_t>((i + m) * side + (j + m))];
    };
    mesh.stencils.resize(mesh.x.size());
    for (int i = -m; i <= m; ++i) {
        for (int j = -m; j <= m; ++j) {
            const long k = at(i, j);
            if (k < 0) continue;
            const double x = i * h, y = j * h;
            const double cx = std::sqrt(std::max(R * R - y * y, 0.0));
            const double cy = std::sqrt(std::max(R * R - x * x, 0.0));
            Stencil s;
            const std::array<long, 4> nb = {at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1)};
            const std::array<double, 4> edge = {cx - x, cx + x, cy - y, cy + y};
            for (int d = 0; d < 4; ++d) {
                s.nb[d] = nb[d];
                s.dist[d] = nb[d] >= 0 ? h : std::min(h, std::max(edge[d], 1e-14 * h));
            }
            mesh.stencils[static_cast<std::size_t>(k)] = s;
        }
    }
    return mesh;
}

// Edge diffusivities κ = max(|∇w|^{p-2}, floor) per node and direction; 1 for p = 2.
// The gradient is taken at the edge midpoint: the difference along the edge and
// the mean of the two nodal central differences across it, so both ends of an
// interior edge see the same κ.
std::vector<std::array<double, 4>> diffusivities(const BallMesh& mesh, const std::vector<double>& w,
                                                 double boundary, double p, double floor) {
    std::vector<std::array<double, 4>> kappa(w.size(), {1.0, 1.0, 1.0, 1.0});
    if (p == 2) return kappa;
    auto val = [&](long k) { return k < 0 ? boundary : w[static_cast<std::size_t>(k)]; };
    std::vector<std::array<double, 2>> grad(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto& s = mesh.stencils[k];
        grad[k] = {(val(s.nb[0]) - val(s.nb[1])) / (s.dist[0] + s.dist[1]),
                   (val(s.nb[2]) - val(s.nb[3])) / (s.dist[2] + s.dist[3])};
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto& s = mesh.stencils[k];
        for (int d = 0; d < 4; ++d) {
            const double along = (val(s.nb[d]) - w[k]) / s.dist[d];
            const int axis = d < 2 ? 1 : 0;
            double across = grad[k][axis];
            if (s.nb[d] >= 0) across = 0.5 * (across + grad[static_cast<std::size_t>(s.nb[d])][axis]);
            const double g2 = along * along + across * across;
            kappa[k][d] = std::max(std::pow(g2, 0.5 * (p - 2)), floor);
        }
    }
    return kappa;
}

// Discrete Δ_p w at every interior node with the given diffusivities.
std::vector<double> apply_operator(const BallMesh& mesh, const std::vector<double>& w,
                                   double boundary, const std::vector<std::array<double, 4>>& kappa) {
    std::vector<double> out(w.size());
    auto val = [&](long k) { return k < 0 ? boundary : w[static_cast<std::size_t>(k)]; };
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto& s = mesh.stencils[k];
        double sum = 0;
        for (int axis = 0; axis < 2; ++axis) {
            const int dp = 2 * axis, dm = dp + 1;
            const double width = 0.5 * (s.dist[dp] + s.dist[dm]);
            const double fp = kappa[k][dp] * (val(s.nb[dp]) - w[k]) / s.dist[dp];
            const double fm = kappa[k][dm] * (w[k] - val(s.nb[dm])) / s.dist[dm];
            sum += (fp - fm) / width;
        }
        out[k] = sum;
    }
    return out;
}

}  // namespace

BallSolution dirichlet_monotone_solve(const ProblemParams& params, const Potential& a,
                                      const Nonlinearity& g, const DualTransform& dual, int n,
                                      const RadialSolution& sub, const RadialSolution& super,
                                      double mesh_h, double tol, const BallOptions& opt) {
    if (params.dim() != 2) throw PreconditionError("the ball solver works in dimension N = 2");
    if (n < 1) throw PreconditionError("ball radius index n >= 1 required");
    if (!(mesh_h > 0) || mesh_h > n / 4.0) throw PreconditionError("mesh_h must be in (0, n/4]");
    if (!(tol > 0)) throw PreconditionError("tol > 0 required");
    const double R = n;
    const double p = params.p();
    if (sub.radii.empty() || super.radii.empty() || sub.radii.back() < R || super.radii.back() < R) {
        throw PreconditionError("sub and super profiles must cover the ball radius");
    }

    const BallMesh mesh = build_mesh(R, mesh_h);
    BallSolution out;
    out.n = n;
    out.radius = R;
    out.mesh_h = mesh_h;
    out.half_width = mesh.m;
    out.x = mesh.x;
    out.y = mesh.y;
    out.grid_index = mesh.index;
    out.boundary_value = interpolate_profile(sub, R);
    const std::size_t count = mesh.x.size();
    const double b = out.boundary_value;

    out.sub_values.resize(count);
    out.super_values.resize(count);
    std::vector<double> a_node(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double r = std::hypot(mesh.x[k], mesh.y[k]);
        out.sub_values[k] = interpolate_profile(sub, r);
        out.super_values[k] = interpolate_profile(super, r);
        a_node[k] = a.at_point(mesh.x[k], mesh.y[k]);
    }
    const double w_lo = 0.5 * std::min(sub.w.front(), *std::min_element(out.sub_values.begin(),
                                                                          out.sub_values.end()));
    const double w_hi = 2.0 * std::max({interpolate_profile(super, R), b,
                                        *std::max_element(out.super_values.begin(),
                                                          out.super_values.end())});
    const ForcingTable h(g, dual, w_lo, w_hi, opt.table_points);

    // Consistency of the interpolated profiles as discrete sub/supersolutions.
    const double super_boundary = interpolate_profile(super, R);
    const auto k_sub = diffusivities(mesh, out.sub_values, b, p, opt.diffusivity_floor);
    const auto k_sup = diffusivities(mesh, out.super_values, super_boundary, p, opt.diffusivity_floor);
    const auto lap_sub = apply_operator(mesh, out.sub_values, b, k_sub);
    const auto lap_sup = apply_operator(mesh, out.super_values, super_boundary, k_sup);
    const RadialFunction upper = [&a](double r) { return a.radialize(r).upper; };
    double tau_sub = 0, tau_sup = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double r = std::hypot(mesh.x[k], mesh.y[k]);
        out.consistency_error = std::max(
            out.consistency_error, std::abs(lap_sub[k] - upper(r) * h(out.sub_values[k])));
        tau_sub = std::max(tau_sub, a_node[k] * h(out.sub_values[k]) - lap_sub[k]);
        tau_sup = std::max(tau_sup, lap_sup[k] - a_node[k] * h(out.super_values[k]));
    }
    // For p = 2 the start w_α - τ(R² - |x|²)/4 is an exact discrete
    // subsolution (quadratics are differenced exactly, also in the
    // Shortley–Weller rows); τ is enlarged to absorb where h decreases.
    const double a_max = *std::max_element(a_node.begin(), a_node.end());
    const double descent = a_max * h.max_descent(w_lo, w_hi) * R * R / 4;
    bool exact_start = p == 2;
    if (exact_start && descent < 0.5) {
        tau_sub /= 1 - descent;
    } else if (exact_start) {
        exact_start = false;
        out.diagnostic = "forcing decreases too fast for an exact discrete subsolution start";
    }
    out.bracket_slack = std::max(tau_sub, tau_sup) * R * R / 4 + tol * (1 + w_hi);

    std::vector<double> lambda(count);
    for (std::size_t k = 0; k < count; ++k) {
        lambda[k] = 1.05 * a_node[k] *
                    h.max_slope(out.sub_values[k] - out.bracket_slack,
                                out.super_values[k] + out.bracket_slack);
    }

    using SpMat = Eigen::SparseMatrix<double>;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    Eigen::VectorXd boundary_rhs(static_cast<Eigen::Index>(count));
    auto assemble = [&](const std::vector<std::array<double, 4>>& kappa) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * count);
        boundary_rhs.setZero();
        for (std::size_t k = 0; k < count; ++k) {
            const auto& s = mesh.stencils[k];
            double diag = lambda[k];
            for (int axis = 0; axis < 2; ++axis) {
                const int dp = 2 * axis, dm = dp + 1;
                const double width = 0.5 * (s.dist[dp] + s.dist[dm]);
                for (int d : {dp, dm}) {
                    const double c = kappa[k][d] / (s.dist[d] * width);
                    diag += c;
                    if (s.nb[d] >= 0) {
                        trip.emplace_back(static_cast<int>(k), static_cast<int>(s.nb[d]), -c);
                    } else {
                        boundary_rhs[static_cast<Eigen::Index>(k)] += c * b;
                    }
                }
            }
            trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
        }
        SpMat A(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
        A.setFromTriplets(trip.begin(), trip.end());
        lu.compute(A);
        if (lu.info() != Eigen::Success) {
            throw NonConvergenceError("sparse LU factorization failed: " + lu.lastErrorMessage(),
                                      {});
        }
    };

    std::vector<double> w = out.sub_values;
    if (exact_start) {
        for (std::size_t k = 0; k < count; ++k) {
            w[k] -= tau_sub * (R * R - mesh.x[k] * mesh.x[k] - mesh.y[k] * mesh.y[k]) / 4;
        }
    }
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(count));
    // With κ frozen at |∇w_k|^{p-2} the gradient error is multiplied by -(p-2)
    // per sweep; relaxing by 1/(p-1) cancels that to first order.
    const double theta = 1.0 / (p - 1.0);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        if (it == 1 || p != 2) assemble(diffusivities(mesh, w, b, p, opt.diffusivity_floor));
        for (std::size_t k = 0; k < count; ++k) {
            rhs[static_cast<Eigen::Index>(k)] =
                lambda[k] * w[k] - a_node[k] * h(w[k]) + boundary_rhs[static_cast<Eigen::Index>(k)];
        }
        const Eigen::VectorXd next = lu.solve(rhs);
        if (lu.info() != Eigen::Success) throw NonConvergenceError("sparse LU solve failed", {});

        double update = 0;
        std::size_t escaped = 0, descended = 0;
        for (std::size_t k = 0; k < count; ++k) {
            const double v = w[k] + theta * (next[static_cast<Eigen::Index>(k)] - w[k]);
            if (!std::isfinite(v)) throw NonConvergenceError("non-finite iterate", out.update_history);
            if (v < out.sub_values[k] - out.bracket_slack ||
                v > out.super_values[k] + out.bracket_slack) {
                ++escaped;
            }
            if (v < w[k] - 1e-12 * (1 + std::abs(w[k]))) ++descended;
            update = std::max(update, std::abs(v - w[k]) / (1 + std::abs(v)));
            w[k] = v;
        }
        out.update_history.push_back(update);
        out.iterations = it;
        // Ascent is exact from a discrete subsolution; for p > 2 only once the lag has settled.
        if (exact_start || it > 3) out.ascent_violations += descended;
        if (escaped > 0) {
            out.bracket_violations += escaped;
            std::ostringstream msg;
            msg << escaped << " nodes left the bracket at sweep " << it
                << " (mesh too coarse or hypotheses violated)";
            out.diagnostic = msg.str();
            break;
        }
        if (update < tol) {
            out.converged = true;
            break;
        }
    }
    out.w_n = std::move(w);
    out.sandwich_ok = out.converged && out.bracket_violations == 0;
    if (!out.converged && out.diagnostic.empty()) {
        out.diagnostic = "monotone iteration did not reach tol in max_iter sweeps";
    }
    return out;
}

LimitReport extract_limit(std::vector<const BallSolution*> solutions,
                          const std::vector<std::pair<double, double>>& probes, double tol) {
    if (solutions.size() < 3) throw PreconditionError("extract_limit needs at least 3 ball solutions");
    std::sort(solutions.begin(), solutions.end(),
              [](const BallSolution* l, const BallSolution* r) { return l->radius < r->radius; });
    LimitReport rep;
    rep.probes = probes;
    for (const auto* s : solutions) rep.radii.push_back(s->radius);
    rep.stabilized = true;
    for (const auto& [px, py] : probes) {
        std::vector<double> vals, diffs;
        for (const auto* s : solutions) {
            if (std::hypot(px, py) >= s->radius) {
                throw PreconditionError("probe point outside the smallest ball");
            }
            vals.push_back(s->value_at(px, py));
        }
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            diffs.push_back(std::abs(vals[k + 1] - vals[k]));
            if (k > 0 && diffs[k] > diffs[k - 1] + 1e-15) rep.decreasing = false;
        }
        rep.last_difference = std::max(rep.last_difference, diffs.back());
        if (diffs.back() > tol) rep.stabilized = false;
        rep.values.push_back(std::move(vals));
        rep.differences.push_back(std::move(diffs));
    }
    return rep;
}

}  // namespace qlb
