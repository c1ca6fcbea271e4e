#include "geolab/geometry.hpp"

#include <vector>

namespace geolab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// 4-point Gauss-Legendre nodes/weights on [-1,1].
constexpr double kGlx[4] = {-0.861136311594052575, -0.339981043584856265, 0.339981043584856265,
                            0.861136311594052575};
constexpr double kGlw[4] = {0.347854845137453857, 0.652145154862546143, 0.652145154862546143,
                            0.347854845137453857};

std::vector<std::pair<double, double>> quad_nodes(double lo, double hi, bool periodic, int n) {
    std::vector<std::pair<double, double>> nodes;
    if (periodic) {
        const double h = (hi - lo) / n;
        nodes.reserve(n);
        for (int i = 0; i < n; ++i) nodes.emplace_back(lo + (i + 0.5) * h, h);
    } else {
        const int cells = std::max(1, n / 4);
        const double h = (hi - lo) / cells;
        nodes.reserve(4 * cells);
        for (int c = 0; c < cells; ++c) {
            const double mid = lo + (c + 0.5) * h;
            for (int k = 0; k < 4; ++k)
                nodes.emplace_back(mid + 0.5 * h * kGlx[k], 0.5 * h * kGlw[k]);
        }
    }
    return nodes;
}
}  // namespace

double ParametricMetric::area_integral(const std::function<double(double, double)>& f,
                                       int n) const {
    const auto nu = quad_nodes(domain.u0, domain.u1, periodic_u, n);
    const auto nv = quad_nodes(domain.v0, domain.v1, periodic_v, n);
    double total = 0.0;
    for (const auto& [u, wu] : nu) {
        double row = 0.0;
        for (const auto& [v, wv] : nv) {
            const FirstForm g = value(u, v);
            row += wv * f(u, v) * std::sqrt(std::max(0.0, g.det()));
        }
        total += wu * row;
    }
    return total;
}

ParametricMetric make_flat_torus() {
    ParametricMetric m;
    m.domain = {0.0, 1.0, 0.0, 1.0};
    m.periodic_u = m.periodic_v = true;
    m.label = "flat-torus";
    m.value = [](double, double) { return FirstForm{1.0, 0.0, 1.0}; };
    m.first = [](double, double) { return FirstPartials{0, 0, 0, 0, 0, 0}; };
    m.second = [](double, double) { return SecondPartials{0, 0, 0}; };
    m.curvature_analytic = [](double, double) { return 0.0; };
    return m;
}

ParametricMetric make_round_sphere(double radius) {
    if (radius <= 0) throw ConfigError("RoundSphere: radius must be positive");
    ParametricMetric m;
    m.domain = {0.0, M_PI, 0.0, kTwoPi};
    m.periodic_u = false;
    m.periodic_v = true;
    m.label = "sphere";
    const double r2 = radius * radius;
    m.value = [r2](double u, double) {
        const double s = std::sin(u);
        return FirstForm{r2, 0.0, r2 * s * s};
    };
    m.first = [r2](double u, double) {
        return FirstPartials{0, 0, 0, 0, r2 * std::sin(2 * u), 0};
    };
    m.second = [r2](double u, double) {
        return SecondPartials{0.0, 2 * r2 * std::cos(2 * u), 0.0};
    };
    m.curvature_analytic = [r2](double, double) { return 1.0 / r2; };
    return m;
}

ParametricMetric make_torus_of_revolution(double R, double r) {
    if (!(R > r && r > 0)) throw ConfigError("TorusOfRevolution requires R > r > 0");
    ParametricMetric m;
    m.domain = {0.0, kTwoPi, 0.0, kTwoPi};
    m.periodic_u = m.periodic_v = true;
    m.label = "torus";
    m.value = [R, r](double u, double) {
        const double g = R + r * std::cos(u);
        return FirstForm{r * r, 0.0, g * g};
    };
    m.first = [R, r](double u, double) {
        const double g = R + r * std::cos(u);
        return FirstPartials{0, 0, 0, 0, -2.0 * r * std::sin(u) * g, 0};
    };
    m.second = [R, r](double u, double) {
        const double g = R + r * std::cos(u);
        const double guu = -2.0 * r * std::cos(u) * g + 2.0 * r * r * std::sin(u) * std::sin(u);
        return SecondPartials{0.0, guu, 0.0};
    };
    m.curvature_analytic = [R, r](double u, double) {
        return std::cos(u) / (r * (R + r * std::cos(u)));
    };
    return m;
}

ParametricMetric make_perturbed_torus(double R, double r, double eps, BumpMode mode) {
    if (!(R > r && r > 0)) throw ConfigError("PerturbedTorus requires R > r > 0");
    if (std::abs(eps) >= 1.0) throw ConfigError("PerturbedTorus: |eps| must be < 1");
    ParametricMetric m;
    m.domain = {0.0, kTwoPi, 0.0, kTwoPi};
    m.periodic_u = m.periodic_v = true;
    m.label = "perturbed-torus";
    const int mm = mode.m, nn = mode.n;
    auto bump = [eps, mm, nn](double u, double v) {
        return 1.0 + eps * std::cos(mm * u) * std::cos(nn * v);
    };
    m.value = [R, r, bump](double u, double v) {
        const double g = R + r * std::cos(u);
        const double f = bump(u, v);
        return FirstForm{r * r * f, 0.0, g * g * f};
    };
    m.first = [R, r, eps, mm, nn, bump](double u, double v) {
        const double g0 = R + r * std::cos(u);
        const double g0u = -r * std::sin(u);
        const double f = bump(u, v);
        const double fu = -eps * mm * std::sin(mm * u) * std::cos(nn * v);
        const double fv = -eps * nn * std::cos(mm * u) * std::sin(nn * v);
        return FirstPartials{r * r * fu, r * r * fv, 0, 0,
                             2 * g0 * g0u * f + g0 * g0 * fu, g0 * g0 * fv};
    };
    m.second = [R, r, eps, mm, nn, bump](double u, double v) {
        const double g0 = R + r * std::cos(u);
        const double g0u = -r * std::sin(u);
        const double g0uu = -r * std::cos(u);
        const double f = bump(u, v);
        const double fu = -eps * mm * std::sin(mm * u) * std::cos(nn * v);
        const double fvv = -eps * nn * nn * std::cos(mm * u) * std::cos(nn * v);
        const double fuu = -eps * mm * mm * std::cos(mm * u) * std::cos(nn * v);
        const double evv = r * r * fvv;
        const double guu = (2 * g0u * g0u + 2 * g0 * g0uu) * f + 4 * g0 * g0u * fu + g0 * g0 * fuu;
        return SecondPartials{evv, guu, 0.0};
    };
    // analytic route = Brioschi assembled from the closed-form partials
    return m;
}

ParametricMetric make_triaxial_ellipsoid(double a, double b, double c) {
    if (!(a > b && b > c && c > 0))
        throw ConfigError("TriaxialEllipsoid requires a > b > c > 0");
    ParametricMetric m;
    m.domain = {0.0, M_PI, 0.0, kTwoPi};
    m.periodic_u = false;
    m.periodic_v = true;
    m.label = "ellipsoid";
    const double a2 = a * a, b2 = b * b, c2 = c * c;
    m.value = [a2, b2, c2](double u, double v) {
        const double su = std::sin(u), cu = std::cos(u);
        const double sv = std::sin(v), cv = std::cos(v);
        FirstForm g;
        g.E = a2 * cu * cu * cv * cv + b2 * su * su + c2 * cu * cu * sv * sv;
        g.F = (c2 - a2) * su * cu * sv * cv;
        g.G = su * su * (a2 * sv * sv + c2 * cv * cv);
        return g;
    };
    m.first = [a2, b2, c2](double u, double v) {
        const double su = std::sin(u), cu = std::cos(u);
        const double sv = std::sin(v), cv = std::cos(v);
        const double s2u = std::sin(2 * u), c2u = std::cos(2 * u);
        const double s2v = std::sin(2 * v), c2v = std::cos(2 * v);
        FirstPartials d;
        d[0] = s2u * (b2 - a2 * cv * cv - c2 * sv * sv);         // Eu
        d[1] = s2v * cu * cu * (c2 - a2);                        // Ev
        d[2] = 0.5 * (c2 - a2) * c2u * s2v;                      // Fu
        d[3] = 0.5 * (c2 - a2) * s2u * c2v;                      // Fv
        d[4] = s2u * (a2 * sv * sv + c2 * cv * cv);              // Gu
        d[5] = su * su * (a2 - c2) * s2v;                        // Gv
        return d;
    };
    m.second = [a2, b2, c2](double u, double v) {
        const double cu = std::cos(u);
        const double sv = std::sin(v), cv = std::cos(v);
        const double c2u = std::cos(2 * u), c2v = std::cos(2 * v);
        SecondPartials s;
        s[0] = 2 * c2v * cu * cu * (c2 - a2);                    // Evv
        s[1] = 2 * c2u * (a2 * sv * sv + c2 * cv * cv);          // Guu
        s[2] = (c2 - a2) * c2u * c2v;                            // Fuv
        return s;
    };
    m.curvature_analytic = [a, b, c](double u, double v) {
        const double x = a * std::sin(u) * std::cos(v);
        const double y = b * std::cos(u);
        const double z = c * std::sin(u) * std::sin(v);
        const double a2 = a * a, b2 = b * b, c2 = c * c;
        const double p2 = x * x / (a2 * a2) + y * y / (b2 * b2) + z * z / (c2 * c2);
        return 1.0 / (a2 * b2 * c2 * p2 * p2);
    };
    return m;
}

ParametricMetric make_perturbed_ellipsoid(double a, double b, double c, double eps,
                                          BumpMode mode) {
    ParametricMetric base = make_triaxial_ellipsoid(a, b, c);
    if (std::abs(eps) >= 1.0) throw ConfigError("PerturbedEllipsoid: |eps| must be < 1");
    ParametricMetric m;
    m.domain = base.domain;
    m.periodic_u = base.periodic_u;
    m.periodic_v = base.periodic_v;
    m.label = "perturbed-ellipsoid";
    const int mm = mode.m, nn = mode.n;
    auto bval = base.value;
    auto bfirst = base.first;
    auto bsecond = base.second;
    auto f0 = [eps, mm, nn](double u, double v) {
        return 1.0 + eps * std::cos(mm * u) * std::cos(nn * v);
    };
    m.value = [bval, f0](double u, double v) {
        FirstForm g = bval(u, v);
        const double f = f0(u, v);
        g.E *= f;
        g.G *= f;
        return g;
    };
    m.first = [bval, bfirst, eps, mm, nn, f0](double u, double v) {
        const FirstForm g = bval(u, v);
        FirstPartials d = bfirst(u, v);
        const double f = f0(u, v);
        const double fu = -eps * mm * std::sin(mm * u) * std::cos(nn * v);
        const double fv = -eps * nn * std::cos(mm * u) * std::sin(nn * v);
        FirstPartials out;
        out[0] = d[0] * f + g.E * fu;
        out[1] = d[1] * f + g.E * fv;
        out[2] = d[2];
        out[3] = d[3];
        out[4] = d[4] * f + g.G * fu;
        out[5] = d[5] * f + g.G * fv;
        return out;
    };
    m.second = [bval, bfirst, bsecond, eps, mm, nn, f0](double u, double v) {
        const FirstForm g = bval(u, v);
        const FirstPartials d = bfirst(u, v);
        const SecondPartials s = bsecond(u, v);
        const double f = f0(u, v);
        const double fu = -eps * mm * std::sin(mm * u) * std::cos(nn * v);
        const double fv = -eps * nn * std::cos(mm * u) * std::sin(nn * v);
        const double fuu = -eps * mm * mm * std::cos(mm * u) * std::cos(nn * v);
        const double fvv = -eps * nn * nn * std::cos(mm * u) * std::cos(nn * v);
        SecondPartials out;
        out[0] = s[0] * f + 2 * d[1] * fv + g.E * fvv;  // (E f)_vv
        out[1] = s[1] * f + 2 * d[4] * fu + g.G * fuu;  // (G f)_uu
        out[2] = s[2];                                  // F unchanged
        return out;
    };
    return m;
}

ParametricMetric make_surface_of_revolution(std::function<double(double)> h,
                                            std::function<double(double)> hp,
                                            std::function<double(double)> hpp,
                                            const std::string& label) {
    ParametricMetric m;
    m.domain = {0.0, M_PI, 0.0, kTwoPi};
    m.periodic_u = false;
    m.periodic_v = true;
    m.label = label;
    m.value = [h](double u, double) {
        const double hh = h(u);
        return FirstForm{1.0, 0.0, hh * hh};
    };
    m.first = [h, hp](double u, double) {
        return FirstPartials{0, 0, 0, 0, 2.0 * h(u) * hp(u), 0};
    };
    m.second = [h, hp, hpp](double u, double) {
        return SecondPartials{0.0, 2.0 * (hp(u) * hp(u) + h(u) * hpp(u)), 0.0};
    };
    m.curvature_analytic = [h, hpp](double u, double) { return -hpp(u) / h(u); };
    return m;
}

}  // namespace geolab
