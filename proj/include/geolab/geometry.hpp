// Surface metrics in a single chart: first fundamental form, Christoffel
// symbols, Gaussian curvature, area quadrature, and the preset families
// used by the experiments.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "geolab/errors.hpp"

namespace geolab {

struct Vec2 {
    double x = 0.0, y = 0.0;
    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double cross2(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double dot2(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

struct FirstForm {
    double E = 1.0, F = 0.0, G = 1.0;
    double det() const { return E * G - F * F; }
};

/// First partials of (E, F, G): order { Eu, Ev, Fu, Fv, Gu, Gv }.
using FirstPartials = std::array<double, 6>;
/// Second partials needed by the Brioschi formula: { Evv, Guu, Fuv }.
using SecondPartials = std::array<double, 3>;

/// Christoffel symbols, lower indices symmetric: uuu = Gamma^u_{uu} etc.
struct Christoffel {
    double uuu, vuu;  // Gamma^u_{uu}, Gamma^v_{uu}
    double uuv, vuv;  // Gamma^u_{uv}, Gamma^v_{uv}
    double uvv, vvv;  // Gamma^u_{vv}, Gamma^v_{vv}
};

struct ChartDomain {
    double u0 = 0.0, u1 = 1.0, v0 = 0.0, v1 = 1.0;
    double period_u() const { return u1 - u0; }
    double period_v() const { return v1 - v0; }
};

/// A surface metric on a rectangular chart, periodic per coordinate.
///
/// Field evaluation is defined for all real (u,v): periodic coordinates are
/// wrapped before evaluating, non-periodic ones are passed through so that
/// the geodesic flow can probe past a chart edge (the strict accessors below
/// enforce the domain instead). All presets supply analytic first partials;
/// finite differences with step h = eps^(1/3) * max(1,|x|) are the fallback.
class ParametricMetric {
  public:
    ChartDomain domain;
    bool periodic_u = false;
    bool periodic_v = false;
    std::string label;

    std::function<FirstForm(double, double)> value;
    std::function<FirstPartials(double, double)> first;        // optional
    std::function<SecondPartials(double, double)> second;      // optional
    std::function<double(double, double)> curvature_analytic;  // optional

    /// Wrap a chart point into the fundamental domain (periodic coords only).
    Vec2 wrap(Vec2 p) const {
        if (periodic_u) p.x = domain.u0 + positive_mod(p.x - domain.u0, domain.period_u());
        if (periodic_v) p.y = domain.v0 + positive_mod(p.y - domain.v0, domain.period_v());
        return p;
    }

    /// Wrapped coordinate difference a-b, shortest representative.
    Vec2 wrapped_diff(const Vec2& a, const Vec2& b) const {
        Vec2 d = a - b;
        if (periodic_u) d.x = signed_mod(d.x, domain.period_u());
        if (periodic_v) d.y = signed_mod(d.y, domain.period_v());
        return d;
    }

    bool in_domain(const Vec2& p) const {
        if (!periodic_u && (p.x < domain.u0 - kDomainSlack || p.x > domain.u1 + kDomainSlack))
            return false;
        if (!periodic_v && (p.y < domain.v0 - kDomainSlack || p.y > domain.v1 + kDomainSlack))
            return false;
        return true;
    }

    /// First fundamental form at p; throws OutOfDomainError for points
    /// outside a non-periodic coordinate range.
    FirstForm at(const Vec2& p) const {
        if (!in_domain(p))
            throw OutOfDomainError(label + ": point (" + std::to_string(p.x) + "," +
                                   std::to_string(p.y) + ") outside chart");
        return at_raw(p);
    }

    /// Unchecked evaluation (periodic wrap only). Used by the flow.
    FirstForm at_raw(const Vec2& p) const {
        const Vec2 q = wrap(p);
        return value(q.x, q.y);
    }

    FirstPartials first_partials(const Vec2& p) const {
        const Vec2 q = wrap(p);
        if (first) return first(q.x, q.y);
        FirstPartials d;
        const double hu = fd_step(q.x), hv = fd_step(q.y);
        const FirstForm up = value(q.x + hu, q.y), um = value(q.x - hu, q.y);
        const FirstForm vp = value(q.x, q.y + hv), vm = value(q.x, q.y - hv);
        d[0] = (up.E - um.E) / (2 * hu);
        d[1] = (vp.E - vm.E) / (2 * hv);
        d[2] = (up.F - um.F) / (2 * hu);
        d[3] = (vp.F - vm.F) / (2 * hv);
        d[4] = (up.G - um.G) / (2 * hu);
        d[5] = (vp.G - vm.G) / (2 * hv);
        return d;
    }

    Christoffel christoffel(const Vec2& p) const {
        if (!in_domain(p))
            throw OutOfDomainError(label + ": christoffel outside chart");
        return christoffel_raw(p);
    }

    Christoffel christoffel_raw(const Vec2& p) const {
        const FirstForm g = at_raw(p);
        const FirstPartials d = first_partials(p);
        return christoffel_from(g, d);
    }

    static Christoffel christoffel_from(const FirstForm& g, const FirstPartials& d) {
        const double Eu = d[0], Ev = d[1], Fu = d[2], Fv = d[3], Gu = d[4], Gv = d[5];
        const double w2 = 2.0 * g.det();
        Christoffel c;
        c.uuu = (g.G * Eu - 2 * g.F * Fu + g.F * Ev) / w2;
        c.vuu = (2 * g.E * Fu - g.E * Ev - g.F * Eu) / w2;
        c.uuv = (g.G * Ev - g.F * Gu) / w2;
        c.vuv = (g.E * Gu - g.F * Ev) / w2;
        c.uvv = (2 * g.G * Fv - g.G * Gu - g.F * Gv) / w2;
        c.vvv = (g.E * Gv - 2 * g.F * Fv + g.F * Gu) / w2;
        return c;
    }

    /// Gaussian curvature. Analytic when the preset provides it, otherwise
    /// Brioschi on analytic partials, otherwise Brioschi on finite
    /// differences.
    double gauss_curvature(const Vec2& p) const {
        if (!in_domain(p))
            throw OutOfDomainError(label + ": curvature outside chart");
        return gauss_curvature_raw(p);
    }

    double gauss_curvature_raw(const Vec2& p) const {
        const Vec2 q = wrap(p);
        if (curvature_analytic) return curvature_analytic(q.x, q.y);
        return brioschi(q);
    }

    /// Brioschi curvature; uses analytic partials when available, else FD.
    double brioschi(const Vec2& p) const {
        const Vec2 q = wrap(p);
        const FirstForm g = value(q.x, q.y);
        FirstPartials d;
        SecondPartials s;
        if (first && second) {
            d = first(q.x, q.y);
            s = second(q.x, q.y);
        } else {
            const double h1u = fd_step(q.x), h1v = fd_step(q.y);
            {
                const FirstForm up = value(q.x + h1u, q.y), um = value(q.x - h1u, q.y);
                const FirstForm vp = value(q.x, q.y + h1v), vm = value(q.x, q.y - h1v);
                d[0] = (up.E - um.E) / (2 * h1u);
                d[1] = (vp.E - vm.E) / (2 * h1v);
                d[2] = (up.F - um.F) / (2 * h1u);
                d[3] = (vp.F - vm.F) / (2 * h1v);
                d[4] = (up.G - um.G) / (2 * h1u);
                d[5] = (vp.G - vm.G) / (2 * h1v);
            }
            // second differences, Richardson-extrapolated (h and h/2)
            auto second_at = [&](double hu, double hv) {
                SecondPartials out;
                const FirstForm up = value(q.x + hu, q.y), um = value(q.x - hu, q.y);
                const FirstForm vp = value(q.x, q.y + hv), vm = value(q.x, q.y - hv);
                out[0] = (vp.E - 2 * g.E + vm.E) / (hv * hv);
                out[1] = (up.G - 2 * g.G + um.G) / (hu * hu);
                const FirstForm pp = value(q.x + hu, q.y + hv), pm = value(q.x + hu, q.y - hv);
                const FirstForm mp = value(q.x - hu, q.y + hv), mm = value(q.x - hu, q.y - hv);
                out[2] = (pp.F - pm.F - mp.F + mm.F) / (4 * hu * hv);
                return out;
            };
            const double hu = fd2_step(q.x), hv = fd2_step(q.y);
            const SecondPartials s1 = second_at(hu, hv);
            const SecondPartials s2 = second_at(0.5 * hu, 0.5 * hv);
            for (int i = 0; i < 3; ++i) s[i] = (4.0 * s2[i] - s1[i]) / 3.0;
        }
        return brioschi_from(g, d, s);
    }

    static double brioschi_from(const FirstForm& g, const FirstPartials& d,
                                const SecondPartials& s) {
        const double Eu = d[0], Ev = d[1], Fu = d[2], Fv = d[3], Gu = d[4], Gv = d[5];
        const double Evv = s[0], Guu = s[1], Fuv = s[2];
        auto det3 = [](double a11, double a12, double a13, double a21, double a22, double a23,
                       double a31, double a32, double a33) {
            return a11 * (a22 * a33 - a23 * a32) - a12 * (a21 * a33 - a23 * a31) +
                   a13 * (a21 * a32 - a22 * a31);
        };
        const double m1 = det3(-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
                               Fv - 0.5 * Gu, g.E, g.F,
                               0.5 * Gv, g.F, g.G);
        const double m2 = det3(0.0, 0.5 * Ev, 0.5 * Gu,
                               0.5 * Ev, g.E, g.F,
                               0.5 * Gu, g.F, g.G);
        const double w2 = g.det();
        return (m1 - m2) / (w2 * w2);
    }

    // ---- metric algebra helpers ----

    double inner(const Vec2& p, const Vec2& a, const Vec2& b) const {
        const FirstForm g = at_raw(p);
        return g.E * a.x * b.x + g.F * (a.x * b.y + a.y * b.x) + g.G * a.y * b.y;
    }

    double speed(const Vec2& p, const Vec2& w) const { return std::sqrt(inner(p, w, w)); }

    /// Rotation by +pi/2 in the oriented metric: J w.
    Vec2 rotate90(const Vec2& p, const Vec2& w) const {
        const FirstForm g = at_raw(p);
        const double W = std::sqrt(g.det());
        return {(-g.F * w.x - g.G * w.y) / W, (g.E * w.x + g.F * w.y) / W};
    }

    /// Unit vector at p with angle `angle` from the (normalized) u-direction
    /// in the orthonormal frame (e1, e2) = (X_u/|X_u|, J e1).
    Vec2 unit_from_angle(const Vec2& p, double angle) const {
        const FirstForm g = at_raw(p);
        const Vec2 e1{1.0 / std::sqrt(g.E), 0.0};
        const Vec2 e2 = rotate90(p, e1);
        return std::cos(angle) * e1 + std::sin(angle) * e2;
    }

    double angle_of(const Vec2& p, const Vec2& w) const {
        const FirstForm g = at_raw(p);
        const Vec2 e1{1.0 / std::sqrt(g.E), 0.0};
        const Vec2 e2 = rotate90(p, e1);
        return std::atan2(inner(p, w, e2), inner(p, w, e1));
    }

    /// Integrate f * dA over the chart. `n` quadrature nodes per direction:
    /// midpoint rule on periodic directions, composite Gauss-Legendre else.
    double area_integral(const std::function<double(double, double)>& f, int n = 256) const;

    static double positive_mod(double x, double p) {
        double m = std::fmod(x, p);
        if (m < 0) m += p;
        return m;
    }
    static double signed_mod(double x, double p) {
        double m = std::fmod(x + 0.5 * p, p);
        if (m < 0) m += p;
        return m - 0.5 * p;
    }
    static double fd_step(double x) {
        return 6.055454452393343e-06 * std::max(1.0, std::abs(x));  // eps^(1/3)
    }
    static double fd2_step(double x) {
        return 7.4e-04 * std::max(1.0, std::abs(x));  // ~eps^(1/5), for Richardson pairs
    }

    static constexpr double kDomainSlack = 1e-12;
};

// ---- presets ----

struct BumpMode {
    int m = 1, n = 2;
};

ParametricMetric make_flat_torus();
ParametricMetric make_round_sphere(double radius);
ParametricMetric make_torus_of_revolution(double R, double r);
ParametricMetric make_perturbed_torus(double R, double r, double eps, BumpMode mode);
/// Chart x = (a sin u cos v, b cos u, c sin u sin v); the hyperbolic middle
/// principal ellipse (axes a and c) is the circle u = pi/2.
ParametricMetric make_triaxial_ellipsoid(double a, double b, double c);
ParametricMetric make_perturbed_ellipsoid(double a, double b, double c, double eps, BumpMode mode);
/// Abstract surface of revolution du^2 + h(u)^2 dv^2 on (0,pi) x [0,2pi).
/// h must be positive on the interior; used to build synthetic waist tests.
ParametricMetric make_surface_of_revolution(std::function<double(double)> h,
                                            std::function<double(double)> hp,
                                            std::function<double(double)> hpp,
                                            const std::string& label);

}  // namespace geolab
