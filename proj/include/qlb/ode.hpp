#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace qlb {

enum class OdeStatus { ok, stopped, step_collapse, max_steps };

template <typename Scalar>
struct OdeOptions {
    Scalar rtol{1e-10};
    Scalar atol{1e-12};
    Scalar initial_step{0};  // 0 picks a step from the output spacing
    Scalar min_step_rel{1e-14};
    std::size_t max_steps{5'000'000};
};

template <typename Scalar, int Dim>
struct OdeTrajectory {
    using State = Eigen::Matrix<Scalar, Dim, 1>;
    std::vector<State> states;  // one per reached output time
    OdeStatus status{OdeStatus::ok};
    Scalar t_end{0};            // last time reached
    State y_end;
    std::size_t accepted{0};
    std::size_t rejected{0};
};

/// Dormand–Prince 5(4) integrator with classic step-size control.
///
/// Steps are clipped so that every entry of `outputs` (increasing, >= t0) is
/// hit exactly. `stop(t, y)` is polled after each accepted step; returning
/// true ends the run with status `stopped`.
template <typename Scalar, int Dim, typename Rhs, typename Stop>
OdeTrajectory<Scalar, Dim> dormand_prince(Rhs&& rhs, Scalar t0,
                                          const Eigen::Matrix<Scalar, Dim, 1>& y0,
                                          std::span<const Scalar> outputs,
                                          const OdeOptions<Scalar>& opt, Stop&& stop) {
    using State = Eigen::Matrix<Scalar, Dim, 1>;
    constexpr Scalar a21 = Scalar(1) / 5;
    constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
    constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
    constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187,
                     a53 = Scalar(64448) / 6561, a54 = Scalar(-212) / 729;
    constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33,
                     a63 = Scalar(46732) / 5247, a64 = Scalar(49) / 176,
                     a65 = Scalar(-5103) / 18656;
    constexpr Scalar b1 = Scalar(35) / 384, b3 = Scalar(500) / 1113, b4 = Scalar(125) / 192,
                     b5 = Scalar(-2187) / 6784, b6 = Scalar(11) / 84;
    constexpr Scalar e1 = Scalar(71) / 57600, e3 = Scalar(-71) / 16695,
                     e4 = Scalar(71) / 1920, e5 = Scalar(-17253) / 339200,
                     e6 = Scalar(22) / 525, e7 = Scalar(-1) / 40;

    OdeTrajectory<Scalar, Dim> out;
    out.states.reserve(outputs.size());
    Scalar t = t0;
    State y = y0;
    State k1 = rhs(t, y);

    std::size_t next = 0;
    while (next < outputs.size() && outputs[next] <= t) {
        out.states.push_back(y);
        ++next;
    }
    Scalar h = opt.initial_step;
    if (h <= 0 && next < outputs.size()) h = (outputs[next] - t) / 8;

    std::size_t steps = 0;
    while (next < outputs.size()) {
        if (++steps > opt.max_steps) {
            out.status = OdeStatus::max_steps;
            break;
        }
        const Scalar target = outputs[next];
        bool hits = false;
        if (t + h >= target) {
            h = target - t;
            hits = true;
        }
        const State k2 = rhs(t + h / 5, y + h * (a21 * k1));
        const State k3 = rhs(t + 3 * h / 10, y + h * (a31 * k1 + a32 * k2));
        const State k4 = rhs(t + 4 * h / 5, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const State k5 = rhs(t + 8 * h / 9, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const State k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const State y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const State k7 = rhs(t + h, y_new);
        const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        Scalar norm = 0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const Scalar scale = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            norm += (err[i] / scale) * (err[i] / scale);
        }
        norm = std::sqrt(norm / Scalar(y.size()));
        if (!std::isfinite(norm)) norm = Scalar(1e10);

        if (norm <= 1) {
            t = hits ? target : t + h;
            y = y_new;
            k1 = k7;
            ++out.accepted;
            if (hits) {
                out.states.push_back(y);
                ++next;
            }
            if (stop(t, y)) {
                out.status = OdeStatus::stopped;
                break;
            }
        } else {
            ++out.rejected;
        }
        const Scalar factor = norm == 0 ? Scalar(5)
                                        : std::clamp(Scalar(0.9) * std::pow(norm, Scalar(-0.2)),
                                                     Scalar(0.2), Scalar(5));
        h *= factor;
        if (h <= opt.min_step_rel * std::max(std::abs(t), Scalar(1))) {
            out.status = OdeStatus::step_collapse;
            break;
        }
    }
    out.t_end = t;
    out.y_end = y;
    return out;
}

}  // namespace qlb
