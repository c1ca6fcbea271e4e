// Adaptive Dormand-Prince 5(4) integration with continuous (dense) output,
// after Hairer, Norsett & Wanner. Dense output supports the event queries
// (section hits, conjugate points, graph returns) used throughout.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "geolab/errors.hpp"

namespace geolab {

template <int N>
using OdeState = std::array<double, N>;

/// One accepted step with the quartic interpolant coefficients.
template <int N>
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;  // signed
    OdeState<N> r1{}, r2{}, r3{}, r4{}, r5{};

    /// State at t0 + theta*h, theta in [0,1].
    OdeState<N> eval(double theta) const {
        OdeState<N> y;
        const double th1 = 1.0 - theta;
        for (int i = 0; i < N; ++i)
            y[i] = r1[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
        return y;
    }

    /// Time derivative of the interpolant at t0 + theta*h.
    OdeState<N> eval_derivative(double theta) const {
        OdeState<N> dy;
        const double a = 1.0 - 2.0 * theta;
        const double b = theta * (2.0 - 3.0 * theta);
        const double c = 2.0 * theta * (1.0 - theta) * (1.0 - 2.0 * theta);
        for (int i = 0; i < N; ++i)
            dy[i] = (r2[i] + a * r3[i] + b * r4[i] + c * r5[i]) / h;
        return dy;
    }

    double t_end() const { return t0 + h; }
};

/// Piecewise interpolant over an integration run.
template <int N>
class Trajectory {
  public:
    void clear() { steps_.clear(); }
    void push(const DenseStep<N>& s) { steps_.push_back(s); }
    bool empty() const { return steps_.empty(); }
    std::size_t size() const { return steps_.size(); }
    const DenseStep<N>& step(std::size_t i) const { return steps_[i]; }
    double t_begin() const { return steps_.front().t0; }
    double t_end() const { return steps_.back().t_end(); }

    /// Interpolated state at time t (clamped to the covered range).
    OdeState<N> at(double t) const {
        const DenseStep<N>& s = locate(t);
        const double theta = s.h != 0.0 ? (t - s.t0) / s.h : 0.0;
        return s.eval(std::clamp(theta, 0.0, 1.0));
    }

    OdeState<N> derivative_at(double t) const {
        const DenseStep<N>& s = locate(t);
        const double theta = s.h != 0.0 ? (t - s.t0) / s.h : 0.0;
        return s.eval_derivative(std::clamp(theta, 0.0, 1.0));
    }

    OdeState<N> back_state() const {
        return steps_.back().eval(1.0);
    }

  private:
    const DenseStep<N>& locate(double t) const {
        const bool fwd = steps_.back().h > 0.0;
        std::size_t lo = 0, hi = steps_.size();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            const double tm = steps_[mid].t0;
            if (fwd ? (t >= tm) : (t <= tm))
                lo = mid;
            else
                hi = mid;
        }
        return steps_[lo];
    }

    std::vector<DenseStep<N>> steps_;
};

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;  // 0 = pick from rhs scale
    std::size_t max_steps = 100000000;
};

/// Integrate dy/dt = f(t,y) from t0 to t1 (t1 < t0 integrates backward).
/// `on_step` is called after each accepted step; returning false stops the
/// run early. Throws StepFailureError when the controller underflows.
template <int N, class F, class StepCb>
void integrate(F&& f, OdeState<N> y0, double t0, double t1, const OdeOptions& opt, StepCb&& on_step) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    // dense-output weights
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;

    if (t1 == t0) return;
    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);

    OdeState<N> y = y0;
    OdeState<N> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    double t = t0;
    f(t, y, k1);

    auto err_norm = [&](const OdeState<N>& e, const OdeState<N>& ya, const OdeState<N>& yb) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) {
            const double sc = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            const double q = e[i] / sc;
            s += q * q;
        }
        return std::sqrt(s / N);
    };

    double h = opt.initial_step;
    if (h == 0.0) {
        double fn = 0.0, yn = 0.0;
        for (int i = 0; i < N; ++i) {
            fn = std::max(fn, std::abs(k1[i]));
            yn = std::max(yn, std::abs(y[i]));
        }
        h = 1e-2 * (yn + 1.0) / (fn + 1e-6);
        h = std::min({h, span, opt.max_step});
        h = std::max(h, 1e-10 * span);
    }
    h = std::min(std::abs(h), opt.max_step) * dir;

    std::size_t nsteps = 0;
    bool last = false;
    while (true) {
        if ((t - t1) * dir >= 0.0) break;
        if (++nsteps > opt.max_steps)
            throw StepFailureError("integrate: step budget exhausted");
        if (std::abs(h) > opt.max_step) h = opt.max_step * dir;
        if ((t + h - t1) * dir > 0.0) {
            h = t1 - t;
            last = true;
        } else {
            last = false;
        }
        if (std::abs(h) < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw StepFailureError("integrate: step size underflow at t=" + std::to_string(t));

        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, ytmp, k2);
        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, ytmp, k3);
        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, ytmp, k4);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * h, ytmp, k5);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(t + h, ytmp, k6);
        for (int i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        f(t + h, ynew, k7);

        OdeState<N> errv;
        for (int i = 0; i < N; ++i)
            errv[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double err = err_norm(errv, y, ynew);
        bool finite = std::isfinite(err);
        for (int i = 0; i < N && finite; ++i) finite = std::isfinite(ynew[i]);
        if (!finite) err = 10.0;

        if (err <= 1.0) {
            DenseStep<N> ds;
            ds.t0 = t;
            ds.h = h;
            for (int i = 0; i < N; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                ds.r1[i] = y[i];
                ds.r2[i] = ydiff;
                ds.r3[i] = bspl;
                ds.r4[i] = ydiff - h * k7[i] - bspl;
                ds.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                                d7 * k7[i]);
            }
            t += h;
            y = ynew;
            k1 = k7;
            if (!on_step(ds)) return;
            if (last) return;
            const double fac = std::clamp(0.9 * std::pow(err + 1e-300, -0.2), 0.2, 5.0);
            h *= fac;
        } else {
            const double fac = std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
            h *= fac;
        }
    }
}

/// Convenience wrapper storing the whole run.
template <int N, class F>
Trajectory<N> integrate_dense(F&& f, const OdeState<N>& y0, double t0, double t1,
                              const OdeOptions& opt) {
    Trajectory<N> traj;
    integrate<N>(std::forward<F>(f), y0, t0, t1, opt, [&](const DenseStep<N>& s) {
        traj.push(s);
        return true;
    });
    return traj;
}

/// Refine a sign change of g over [ta,tb] within one dense step by bisection.
/// Returns the root time; g(ta) and g(tb) must have opposite signs.
template <class G>
double bisect_root(G&& g, double ta, double tb, double tol_t) {
    double fa = g(ta);
    double fb = g(tb);
    if (fa == 0.0) return ta;
    if (fb == 0.0) return tb;
    for (int it = 0; it < 200 && std::abs(tb - ta) > tol_t; ++it) {
        const double tm = 0.5 * (ta + tb);
        const double fm = g(tm);
        if (fm == 0.0) return tm;
        if ((fa < 0.0) == (fm < 0.0)) {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
            fb = fm;
        }
    }
    return 0.5 * (ta + tb);
}

}  // namespace geolab
