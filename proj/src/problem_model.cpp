#include "qlb/problem_model.hpp"

#include "qlb/errors.hpp"
#include "qlb/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace qlb {

// ---------------------------------------------------------------------------
// Nonlinearity

Nonlinearity Nonlinearity::power(double lambda, double q) {
    if (!(lambda > 0) || !std::isfinite(lambda)) throw DataError("power g: lambda > 0 required");
    if (!(q >= 0) || !std::isfinite(q)) throw DataError("power g: q >= 0 required");
    Nonlinearity g;
    g.kind_ = NonlinearityKind::power;
    g.lambda_ = lambda;
    g.q_ = q;
    return g;
}

Nonlinearity Nonlinearity::power_log(double lambda, double q) {
    if (!(lambda > 0) || !std::isfinite(lambda)) throw DataError("power_log g: lambda > 0 required");
    if (!(q >= 0) || !std::isfinite(q)) throw DataError("power_log g: q >= 0 required");
    Nonlinearity g;
    g.kind_ = NonlinearityKind::power_log;
    g.lambda_ = lambda;
    g.q_ = q;
    g.build_cache();
    return g;
}

Nonlinearity Nonlinearity::tabulated(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size()) throw DataError("tabulated g: column lengths differ");
    if (xs.size() < 2) throw DataError("tabulated g: at least two samples required");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
            throw DataError("tabulated g: non-finite sample at row " + std::to_string(i));
        }
        if (ys[i] < 0) throw DataError("tabulated g: negative value at row " + std::to_string(i));
        if (i > 0 && !(xs[i] > xs[i - 1])) {
            throw DataError("tabulated g: abscissae must be strictly increasing (row " +
                            std::to_string(i) + ")");
        }
        if (i > 0 && ys[i] < ys[i - 1]) {
            throw DataError("tabulated g: g must be nondecreasing (row " + std::to_string(i) + ")");
        }
    }
    if (xs.front() < 0) throw DataError("tabulated g: abscissae must be >= 0");
    if (xs.front() == 0 && ys.front() != 0) throw DataError("tabulated g: g(0) = 0 required");
    if (xs.front() > 0) {
        xs.insert(xs.begin(), 0.0);
        ys.insert(ys.begin(), 0.0);
    }

    Nonlinearity g;
    g.kind_ = NonlinearityKind::tabulated;
    const std::size_t n = xs.size();
    // Fritsch–Carlson slopes.
    std::vector<double> secant(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) secant[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    std::vector<double> m(n);
    m[0] = secant[0];
    m[n - 1] = secant[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (secant[i - 1] * secant[i] <= 0) {
            m[i] = 0;
        } else {
            const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
            const double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
            m[i] = (w1 + w2) / (w1 / secant[i - 1] + w2 / secant[i]);
        }
    }
    const double y1 = ys[n - 2], y2 = ys[n - 1];
    g.tail_exponent_ = (y1 > 0 && y2 > y1) ? std::log(y2 / y1) / std::log(xs[n - 1] / xs[n - 2])
                                           : 0.0;
    g.xs_ = std::move(xs);
    g.ys_ = std::move(ys);
    g.slopes_ = std::move(m);
    g.build_cache();
    return g;
}

Nonlinearity& Nonlinearity::set_delta(double delta) {
    if (!std::isfinite(delta)) throw DataError("delta must be finite");
    delta_ = delta;
    return *this;
}

void Nonlinearity::build_cache() {
    auto self = *this;  // the integrand must not depend on the cache it feeds
    self.cache_.reset();
    cache_ = std::make_shared<CumulativeIntegral>([self](double s) { return self(s); }, 0.0,
                                                  1e-13, 2.0);
}

double Nonlinearity::interpolate(double s) const {
    const std::size_t n = xs_.size();
    if (s >= xs_[n - 1]) return ys_[n - 1] * std::pow(s / xs_[n - 1], tail_exponent_);
    const auto i = static_cast<std::size_t>(
        std::upper_bound(xs_.begin(), xs_.end(), s) - xs_.begin() - 1);
    const double h = xs_[i + 1] - xs_[i];
    const double t = (s - xs_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * ys_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] +
           (-2 * t3 + 3 * t2) * ys_[i + 1] + (t3 - t2) * h * slopes_[i + 1];
}

double Nonlinearity::operator()(double s) const {
    if (!(s > 0)) return 0.0;
    switch (kind_) {
        case NonlinearityKind::power:
            return lambda_ * std::pow(s, q_);
        case NonlinearityKind::power_log:
            return lambda_ * std::pow(s, q_) * std::log1p(s);
        case NonlinearityKind::tabulated:
            return interpolate(s);
    }
    return 0.0;
}

double Nonlinearity::antiderivative(double t, double tol) const {
    if (!(t > 0)) return 0.0;
    if (kind_ == NonlinearityKind::power) return lambda_ * std::pow(t, q_ + 1) / (q_ + 1);
    (void)tol;
    return (*cache_)(t);
}

std::pair<std::vector<double>, std::vector<double>> read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open samples file '" + path + "'");
    std::vector<double> xs, ys;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double x, y;
        if (!(fields >> x >> y)) {
            if (xs.empty() && row == 1) continue;  // header
            throw DataError(path + ":" + std::to_string(row) + ": expected two numeric columns");
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    return {xs, ys};
}

double antiderivative_G(const Nonlinearity& g, double t, double tol) {
    if (t < 0) throw PreconditionError("antiderivative_G needs t >= 0");
    return g.antiderivative(t, tol);
}

// ---------------------------------------------------------------------------
// 𝒢 and its inverse

double calG(const Nonlinearity& g, const ProblemParams& params, double t) {
    if (!(t > 0)) throw PreconditionError("calG needs t > 0");
    const double gt = g(t);
    if (!(gt > 0)) throw SingularValueError("calG undefined where g(t) = 0 (t = " +
                                            std::to_string(t) + ")");
    return 0.5 * t * std::pow(gt, -params.radial_exponent());
}

CalGScreen screen_calG(const Nonlinearity& g, const ProblemParams& params, double t0,
                       double t_max) {
    CalGScreen s;
    s.t0 = t0;
    s.t_max = t_max;
    const double pm1 = params.p() - 1.0;
    if (g.is_pure_power()) {
        const double q = g.exponent();
        if (std::abs(q - pm1) <= 1e-14 * std::max(1.0, pm1)) {
            s.constant = true;
            s.diagnostic = "calG is constant (q = p-1); not invertible";
        } else if (q > pm1) {
            s.diagnostic = "calG is decreasing (q > p-1); not invertible";
        } else {
            s.increasing = true;
        }
        return s;
    }
    const auto grid = log_grid(t0, t_max, 721);
    double prev = -HUGE_VAL;
    s.increasing = true;
    for (double t : grid) {
        double v;
        try {
            v = calG(g, params, t);
        } catch (const SingularValueError&) {
            s.increasing = false;
            s.diagnostic = "g vanishes at t = " + std::to_string(t);
            return s;
        }
        if (!(v > prev)) {
            s.increasing = false;
            s.diagnostic = "calG not increasing near t = " + std::to_string(t);
            return s;
        }
        prev = v;
    }
    // Below t0 non-monotonicity is tolerated but reported.
    double below = -HUGE_VAL;
    for (double t : log_grid(t0 * 1e-6, t0, 61)) {
        const double gt = g(t);
        if (!(gt > 0)) continue;
        const double v = 0.5 * t * std::pow(gt, -params.radial_exponent());
        if (!(v > below)) s.small_t_warning = true;
        below = v;
    }
    if (s.small_t_warning) s.diagnostic = "calG not monotone below t0";
    return s;
}

CalGInverter::CalGInverter(const Nonlinearity& g, const ProblemParams& params)
    : g_(&g), params_(params), screen_(screen_calG(g, params)) {
    if (!screen_.increasing) throw InvertibilityError(screen_.diagnostic);
    if (g.is_pure_power()) {
        const double pm1 = params.p() - 1.0;
        closed_scale_ = 2.0 * std::pow(g.lambda(), 1.0 / pm1);
        closed_power_ = pm1 / (pm1 - g.exponent());
    }
}

double CalGInverter::operator()(double y, double tol) const {
    if (!(y > 0) || !std::isfinite(y)) throw PreconditionError("calG_inverse needs finite y > 0");
    if (g_->is_pure_power()) return std::pow(closed_scale_ * y, closed_power_);

    auto G = [&](double t) { return calG(*g_, params_, t); };
    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (G(hi) < y) {
        hi *= 2;
        if (++guard > 2000 || !std::isfinite(hi)) {
            throw InvertibilityError("calG does not reach y = " + std::to_string(y));
        }
    }
    guard = 0;
    while (G(lo) > y) {
        lo /= 2;
        if (++guard > 2000 || lo == 0) {
            throw InvertibilityError("calG does not go below y = " + std::to_string(y));
        }
    }
    for (int iter = 0; iter < 300; ++iter) {
        const double mid = std::sqrt(lo * hi);
        const double v = G(mid);
        if (std::abs(v - y) <= tol * y) return mid;
        if (v < y) lo = mid; else hi = mid;
        if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
    }
    return std::sqrt(lo * hi);
}

double calG_inverse(const Nonlinearity& g, const ProblemParams& params, double y, double tol) {
    if (!(y > 0) || !std::isfinite(y)) throw PreconditionError("calG_inverse needs finite y > 0");
    return CalGInverter(g, params)(y, tol);
}

// ---------------------------------------------------------------------------
// Potential

double DecayProfile::operator()(double r) const {
    return c1 == 0 ? c0 : c0 + c1 * std::pow(1.0 + r, -decay);
}

namespace {

void require_dim(int dim) {
    if (dim < 1) throw DomainError("potential dimension N >= 1 required");
}

// Extremes of cos(kθ) over the angular range, by sampling with doubling.
std::pair<double, double> angular_extrema(const std::function<double(double)>& c, double span,
                                          bool closed, int samples) {
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (int n = std::max(samples, 2);; n *= 2) {
        double nlo = HUGE_VAL, nhi = -HUGE_VAL;
        const int count = closed ? n + 1 : n;
        for (int i = 0; i < count; ++i) {
            const double v = c(span * i / n);
            nlo = std::min(nlo, v);
            nhi = std::max(nhi, v);
        }
        const bool settled = std::abs(nlo - lo) < 1e-9 && std::abs(nhi - hi) < 1e-9;
        lo = nlo;
        hi = nhi;
        if (settled || n >= (1 << 20)) break;
    }
    return {lo, hi};
}

}  // namespace

double Potential::angle_span() const {
    return dim_ == 2 ? 2.0 * std::numbers::pi : std::numbers::pi;
}

Potential Potential::radial(DecayProfile base, int dim) {
    require_dim(dim);
    Potential a;
    a.kind_ = PotentialKind::radial_profile;
    a.dim_ = dim;
    a.base_params_ = base;
    a.base_ = base;
    return a;
}

Potential Potential::radial(std::function<double(double)> base, int dim) {
    require_dim(dim);
    Potential a;
    a.kind_ = PotentialKind::radial_profile;
    a.dim_ = dim;
    a.base_ = std::move(base);
    return a;
}

Potential Potential::separable(DecayProfile base, DecayProfile amplitude, int frequency, int dim,
                               int angular_samples) {
    require_dim(dim);
    if (angular_samples < 2) throw DataError("angular sample count must be >= 2");
    Potential a;
    a.kind_ = PotentialKind::radial_times_angular;
    a.dim_ = dim;
    a.samples_ = angular_samples;
    a.base_params_ = base;
    a.amp_params_ = amplitude;
    a.frequency_ = frequency;
    a.base_ = base;
    const double k = frequency;
    if (dim == 1) {
        // The "sphere" is {-r, r}: θ ∈ {0, π}.
        const double c0 = 1.0, c1 = std::cos(k * std::numbers::pi);
        a.ang_min_ = std::min(c0, c1);
        a.ang_max_ = std::max(c0, c1);
    } else {
        auto [lo, hi] = angular_extrema([k](double t) { return std::cos(k * t); }, a.angle_span(),
                                        dim != 2, angular_samples);
        a.ang_min_ = lo;
        a.ang_max_ = hi;
    }
    return a;
}

Potential Potential::sampled(std::function<double(double, double)> fn, int dim,
                             int angular_samples) {
    require_dim(dim);
    if (angular_samples < 2) throw DataError("angular sample count must be >= 2");
    Potential a;
    a.kind_ = PotentialKind::general_sampled;
    a.dim_ = dim;
    a.samples_ = angular_samples;
    a.general_ = std::move(fn);
    a.base_ = [g = a.general_](double r) { return g(r, 0.0); };
    return a;
}

double Potential::operator()(double r, double theta) const {
    if (r <= 0) return base_(0.0);
    switch (kind_) {
        case PotentialKind::radial_profile:
            return base_(r);
        case PotentialKind::radial_times_angular:
            return base_(r) + amp_params_(r) * std::cos(frequency_ * theta);
        case PotentialKind::general_sampled:
            return general_(r, theta);
    }
    return 0.0;
}

double Potential::at_point(double x, double y) const {
    return (*this)(std::hypot(x, y), std::atan2(y, x));
}

Radialized Potential::sample_sphere(double r) const {
    if (dim_ == 1) {
        const double a0 = general_(r, 0.0), a1 = general_(r, std::numbers::pi);
        return {std::min(a0, a1), std::max(a0, a1), std::abs(a0 - a1)};
    }
    const double span = angle_span();
    const bool closed = dim_ != 2;
    auto [lo, hi] = angular_extrema([&](double t) { return general_(r, t); }, span, closed,
                                    samples_);
    return {lo, hi, hi - lo};
}

Radialized Potential::radialize(double r) const {
    if (r < 0) throw PreconditionError("radialize needs r >= 0");
    if (kind_ == PotentialKind::radial_profile || r == 0) {
        const double v = base_(r);
        return {v, v, 0.0};
    }
    if (kind_ == PotentialKind::radial_times_angular) {
        const double b = base_(r), m = amp_params_(r);
        const double u1 = m * ang_max_, u2 = m * ang_min_;
        const double lo = b + std::min(u1, u2), hi = b + std::max(u1, u2);
        return {lo, hi, std::max(u1, u2) - std::min(u1, u2)};
    }
    return sample_sphere(r);
}

void Potential::validate(const std::vector<double>& radii) const {
    for (double r : radii) {
        const auto rad = radialize(r);
        if (!std::isfinite(rad.lower) || !std::isfinite(rad.upper)) {
            throw DataError("potential is not finite at r = " + std::to_string(r));
        }
        if (rad.lower < 0) {
            throw DataError("potential is negative at r = " + std::to_string(r));
        }
    }
}

Radialized radialize(const Potential& a, double r) { return a.radialize(r); }

}  // namespace qlb
