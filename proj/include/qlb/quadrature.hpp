#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <queue>
#include <vector>

namespace qlb {

template <typename Scalar>
struct QuadratureResult {
    Scalar value{0};
    Scalar error{0};
    std::size_t evaluations{0};
    bool converged{true};
};

namespace detail {

// Kronrod 15-point abscissae on [-1, 1] (non-negative half) and weights; the
// odd-indexed abscissae carry the embedded 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar>
struct Panel {
    Scalar a, b, value, error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

template <typename Scalar, typename F>
Panel<Scalar> kronrod15(F&& f, Scalar a, Scalar b) {
    const Scalar center = (a + b) / 2;
    const Scalar half = (b - a) / 2;
    const Scalar fc = f(center);
    Scalar kronrod = fc * Scalar(kKronrodWeights[7]);
    Scalar gauss = fc * Scalar(kGaussWeights[3]);
    for (int j = 0; j < 7; ++j) {
        const Scalar dx = half * Scalar(kKronrodNodes[j]);
        const Scalar sum = f(center - dx) + f(center + dx);
        kronrod += Scalar(kKronrodWeights[j]) * sum;
        if (j % 2 == 1) gauss += Scalar(kGaussWeights[j / 2]) * sum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Adaptive Gauss–Kronrod (7/15) quadrature of f over [a, b].
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below max(abs_tol, rel_tol * |I|). Panels are kept in a
/// max-heap, so the work concentrates at endpoint cusps such as z^k, k < 1.
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate(F&& f, Scalar a, Scalar b, Scalar abs_tol,
                                   Scalar rel_tol = Scalar(1e-14),
                                   std::size_t max_panels = 4000) {
    QuadratureResult<Scalar> out;
    if (a == b) return out;
    const Scalar sign = b < a ? Scalar(-1) : Scalar(1);
    if (b < a) std::swap(a, b);

    std::priority_queue<detail::Panel<Scalar>> heap;
    heap.push(detail::kronrod15(f, a, b));
    out.evaluations = 15;
    Scalar total = heap.top().value;
    Scalar error = heap.top().error;
    const Scalar tiny = std::numeric_limits<Scalar>::epsilon() * 64;

    while (error > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (heap.size() >= max_panels) {
            out.converged = false;
            break;
        }
        const auto worst = heap.top();
        const Scalar mid = (worst.a + worst.b) / 2;
        if (worst.b - worst.a <= tiny * std::max(std::abs(worst.a), std::abs(worst.b))) {
            out.converged = false;
            break;
        }
        heap.pop();
        const auto left = detail::kronrod15(f, worst.a, mid);
        const auto right = detail::kronrod15(f, mid, worst.b);
        out.evaluations += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum from the panels to shed the drift of the running updates.
    total = 0;
    error = 0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    out.value = sign * total;
    out.error = error;
    return out;
}

/// ∫_a^b f over a geometric range using the substitution s = exp(x).
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate_log(F&& f, Scalar a, Scalar b, Scalar abs_tol,
                                       Scalar rel_tol = Scalar(1e-14)) {
    using std::exp;
    using std::log;
    auto g = [&](Scalar x) {
        const Scalar s = exp(x);
        return f(s) * s;
    };
    return integrate(g, log(a), log(b), abs_tol, rel_tol);
}

/// 8-point Gauss–Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kLegendre8Nodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kLegendre8Weights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// x ↦ ∫_origin^x f for x >= origin, cached on the fixed knot lattice
/// origin + growth^j (j >= -40).
///
/// Knot values are filled in order from the lattice start, so every result is
/// independent of the order of earlier calls. Thread-safe.
class CumulativeIntegral {
public:
    CumulativeIntegral(std::function<double(double)> f, double origin, double abs_tol,
                       double growth = 2.0)
        : f_(std::move(f)), origin_(origin), tol_(abs_tol), growth_(growth),
          first_(std::pow(growth, -40.0)) {}

    double operator()(double x) const {
        if (x <= origin_) return 0.0;
        const double offset = x - origin_;
        if (offset < first_) return integrate<double>(f_, origin_, x, tol_, 1e-13).value;
        const auto j = static_cast<std::size_t>(
            std::floor(std::log(offset / first_) / std::log(growth_)));
        double knot, base;
        {
            std::lock_guard lock(mutex_);
            fill_to(j);
            std::size_t i = std::min(j, values_.size() - 1);
            while (i > 0 && knot_at(i) > x) --i;  // guards rounding in the log
            knot = knot_at(i);
            base = values_[i];
            if (knot > x) return integrate<double>(f_, origin_, x, tol_, 1e-13).value;
        }
        return base + integrate<double>(f_, knot, x, tol_, 1e-13).value;
    }

    std::size_t knot_count() const {
        std::lock_guard lock(mutex_);
        return values_.size();
    }

private:
    double knot_at(std::size_t i) const {
        return origin_ + first_ * std::pow(growth_, static_cast<double>(i));
    }
    void fill_to(std::size_t j) const {
        if (values_.empty()) {
            values_.push_back(integrate<double>(f_, origin_, knot_at(0), tol_, 1e-13).value);
        }
        while (values_.size() <= j) {
            const std::size_t i = values_.size();
            values_.push_back(values_.back() +
                              integrate<double>(f_, knot_at(i - 1), knot_at(i), tol_, 1e-13).value);
        }
    }

    std::function<double(double)> f_;
    double origin_;
    double tol_;
    double growth_;
    double first_;
    mutable std::mutex mutex_;
    mutable std::vector<double> values_;
};

}  // namespace qlb
