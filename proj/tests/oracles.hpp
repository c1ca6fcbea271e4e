// Independent oracles used to freeze expected values: a fixed-grid classical
// RK4 integrator, adaptive Simpson quadrature, and closed forms. These stay
// deliberately separate from the library's adaptive machinery.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Classical fixed-grid RK4 for small systems.
template <int N>
std::array<double, N> rk4(const std::function<void(double, const std::array<double, N>&,
                                                   std::array<double, N>&)>& f,
                          std::array<double, N> y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    std::array<double, N> k1, k2, k3, k4, tmp;
    double t = t0;
    for (int s = 0; s < steps; ++s) {
        f(t, y, k1);
        for (int i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        f(t + 0.5 * h, tmp, k2);
        for (int i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        f(t + 0.5 * h, tmp, k3);
        for (int i = 0; i < N; ++i) tmp[i] = y[i] + h * k3[i];
        f(t + h, tmp, k4);
        for (int i = 0; i < N; ++i) y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        t += h;
    }
    return y;
}

/// Step-halved RK4: refine until two grids agree to `tol`.
template <int N>
std::array<double, N> rk4_refined(const std::function<void(double, const std::array<double, N>&,
                                                           std::array<double, N>&)>& f,
                                  const std::array<double, N>& y0, double t0, double t1,
                                  double tol) {
    int steps = 2000;
    std::array<double, N> prev = rk4<N>(f, y0, t0, t1, steps);
    for (int it = 0; it < 12; ++it) {
        steps *= 2;
        std::array<double, N> next = rk4<N>(f, y0, t0, t1, steps);
        double d = 0;
        for (int i = 0; i < N; ++i) d = std::max(d, std::abs(next[i] - prev[i]));
        if (d < tol) return next;
        prev = next;
    }
    return prev;
}

inline double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m), right = simpson(f, m, b);
    if (depth > 40 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, left, tol / 2, depth + 1) +
           adaptive_simpson_rec(f, m, b, right, tol / 2, depth + 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-13) {
    return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 0);
}

/// Perimeter of the plane ellipse with semi-axes (A, C) by adaptive
/// quadrature of the arclength integrand.
inline double ellipse_perimeter(double A, double C) {
    auto f = [&](double t) {
        const double st = std::sin(t), ct = std::cos(t);
        return std::sqrt(A * A * st * st + C * C * ct * ct);
    };
    return adaptive_simpson(f, 0.0, 2.0 * M_PI);
}

/// Clairaut constant sqrt(G(u)) * cos(angle to the v-direction) on a
/// surface of revolution with metric E(u) du^2 + G(u) dv^2.
inline double clairaut(double E, double G, double dv) {
    // unit tangent (du,dv): component along v-direction is sqrt(G)*dv
    (void)E;
    return G * dv;  // = sqrt(G) * cos(theta_v) for unit speed
}

}  // namespace oracle
