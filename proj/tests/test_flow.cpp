#include "doctest.h"

#include <cmath>

#include "geolab/flow.hpp"
#include "oracles.hpp"

using namespace geolab;

namespace {
const double kTwoPi = 2.0 * M_PI;
}

TEST_CASE("great circle on the unit sphere returns after 2 pi") {
    auto sph = make_round_sphere(1.0);
    const UnitTangentState s0 = state_from_angle(sph, {M_PI / 2, 0.0}, M_PI / 2);  // along v
    FlowOptions fo;
    fo.tol = 1e-12;
    auto tr = integrate_geodesic(sph, s0, kTwoPi, fo);
    const UnitTangentState se = tr.state_at(kTwoPi);
    CHECK(phase_distance(sph, s0, se) < 1e-7);
}

TEST_CASE("flat torus straight line wraps back") {
    auto flat = make_flat_torus();
    const UnitTangentState s0{{0.0, 0.0}, {1.0, 0.0}};
    auto tr = integrate_geodesic(flat, s0, 1.0);
    const UnitTangentState se = tr.state_at(1.0);
    CHECK(phase_distance(flat, s0, se) < 1e-12);
}

TEST_CASE("middle principal ellipse closes with period = ellipse perimeter") {
    auto ell = make_triaxial_ellipsoid(1.5, 1.2, 1.0);
    const double per = oracle::ellipse_perimeter(1.5, 1.0);
    const Vec2 q{M_PI / 2, 0.0};
    const double G = ell.at(q).G;
    const UnitTangentState s0{q, {0.0, 1.0 / std::sqrt(G)}};
    FlowOptions fo;
    fo.tol = 1e-12;
    auto tr = integrate_geodesic(ell, s0, per, fo);
    CHECK(phase_distance(ell, s0, tr.state_at(per)) < 1e-7);
}

TEST_CASE("unit-speed drift below 1e-8 over T=100 at tol 1e-10") {
    FlowOptions fo;
    fo.tol = 1e-10;
    {
        auto tor = make_torus_of_revolution(2.0, 1.0);
        const UnitTangentState s0 = state_from_angle(tor, {1.0, 0.5}, 0.7);
        auto tr = integrate_geodesic(tor, s0, 100.0, fo);
        CHECK(tr.unit_speed_drift(tor) < 1e-8);
    }
    {
        auto ell = make_triaxial_ellipsoid(1.5, 1.2, 1.0);
        const UnitTangentState s0 = state_from_angle(ell, {1.1, 0.3}, 0.4);
        auto tr = integrate_geodesic(ell, s0, 100.0, fo);
        CHECK(tr.unit_speed_drift(ell) < 1e-8);
    }
}

TEST_CASE("time reversal returns the start") {
    auto pt = make_perturbed_torus(2.0, 1.0, 0.05, {1, 2});
    const UnitTangentState s0 = state_from_angle(pt, {2.0, 1.0}, 1.1);
    FlowOptions fo;
    fo.tol = 1e-10;
    auto fwd = integrate_geodesic(pt, s0, 50.0, fo);
    const UnitTangentState mid = fwd.state_at(50.0);
    OdeState<4> y{mid.q.x, mid.q.y, mid.w.x, mid.w.y};
    auto rhs = [&](double, const OdeState<4>& yy, OdeState<4>& dy) {
        const Christoffel c = pt.christoffel_raw({yy[0], yy[1]});
        dy[0] = yy[2];
        dy[1] = yy[3];
        dy[2] = -(c.uuu * yy[2] * yy[2] + 2 * c.uuv * yy[2] * yy[3] + c.uvv * yy[3] * yy[3]);
        dy[3] = -(c.vuu * yy[2] * yy[2] + 2 * c.vuv * yy[2] * yy[3] + c.vvv * yy[3] * yy[3]);
    };
    OdeOptions oo;
    oo.rtol = 1e-10;
    oo.atol = 1e-12;
    Trajectory<4> back = integrate_dense<4>(rhs, y, 50.0, 0.0, oo);
    const OdeState<4> y0 = back.at(0.0);
    const UnitTangentState s1{{y0[0], y0[1]}, {y0[2], y0[3]}};
    CHECK(phase_distance(pt, s0, s1) < 1e-7);
}

TEST_CASE("StepFailure at the sphere pole") {
    auto sph = make_round_sphere(1.0);
    // aim straight at the pole along a meridian
    const UnitTangentState s0{{0.5, 0.0}, {-1.0, 0.0}};
    CHECK_THROWS_AS(integrate_geodesic(sph, s0, 2.0), StepFailureError);
}

TEST_CASE("contact frame: closed-form Jacobi fields") {
    FlowOptions fo;
    fo.tol = 1e-12;
    {
        // K = 1: J = sin t
        auto sph = make_round_sphere(1.0);
        const UnitTangentState s0 = state_from_angle(sph, {M_PI / 2, 0.0}, M_PI / 2);
        auto tr = evolve_contact_frame(sph, s0, {0.0, 1.0}, 4.0, fo);
        for (double t : {0.5, 1.5, 3.0, 4.0})
            CHECK(std::abs(tr.jacobi_at(t).x - std::sin(t)) < 1e-7);
    }
    {
        // K = 0: J = t
        auto flat = make_flat_torus();
        const UnitTangentState s0{{0.1, 0.2}, {0.6, 0.8}};
        auto tr = evolve_contact_frame(flat, s0, {0.0, 1.0}, 3.0, fo);
        CHECK(std::abs(tr.jacobi_at(2.5).x - 2.5) < 1e-9);
    }
    {
        // inner equator of Torus(2,1): K = -1, J = cosh t
        auto tor = make_torus_of_revolution(2.0, 1.0);
        const UnitTangentState s0{{M_PI, 0.0}, {0.0, 1.0}};
        auto tr = evolve_contact_frame(tor, s0, {1.0, 0.0}, 3.0, fo);
        for (double t : {1.0, 2.0, 3.0})
            CHECK(std::abs(tr.jacobi_at(t).x - std::cosh(t)) < 1e-6);
    }
}

TEST_CASE("Wronskian of two Jacobi solutions is constant") {
    auto ell = make_triaxial_ellipsoid(1.5, 1.2, 1.0);
    const UnitTangentState s0 = state_from_angle(ell, {1.0, 1.0}, 0.3);
    FlowOptions fo;
    fo.tol = 1e-12;
    auto a = evolve_contact_frame(ell, s0, {1.0, 0.0}, 20.0, fo);
    auto b = evolve_contact_frame(ell, s0, {0.0, 1.0}, 20.0, fo);
    for (double t = 0.0; t <= 20.0; t += 0.5) {
        const Vec2 ja = a.jacobi_at(t), jb = b.jacobi_at(t);
        const double w = ja.x * jb.y - ja.y * jb.x;
        CHECK(std::abs(w - 1.0) < 1e-8);
    }
}

TEST_CASE("monodromy: sphere degenerate, torus equators hyperbolic/elliptic") {
    {
        auto sph = make_round_sphere(1.0);
        OrbitCandidate cand{state_from_angle(sph, {M_PI / 2, 0.0}, M_PI / 2), kTwoPi};
        auto [M, fl] = monodromy_and_floquet(sph, cand, 1e-6);
        CHECK(std::abs(M.det() - 1.0) < 1e-8);
        CHECK(fl.type == FloquetType::Degenerate);
    }
    {
        auto tor = make_torus_of_revolution(2.0, 1.0);
        OrbitCandidate cand{{{M_PI, 0.0}, {0.0, 1.0}}, kTwoPi};
        auto [M, fl] = monodromy_and_floquet(tor, cand, 1e-8);
        CHECK(std::abs(M.det() - 1.0) < 1e-8);
        CHECK(fl.type == FloquetType::PositiveHyperbolic);
        // oracle: constant-coefficient Jacobi equation over one period
        CHECK(std::abs(M.trace() - 2.0 * std::cosh(kTwoPi)) < 1e-4 * std::cosh(kTwoPi));
        CHECK(std::abs(fl.mult_large.real() - std::exp(kTwoPi)) < 1e-4 * std::exp(kTwoPi));
        CHECK(std::abs(fl.mult_small.real() - std::exp(-kTwoPi)) < 1e-4 * std::exp(-kTwoPi));
        CHECK(std::abs(fl.mult_large.real() * fl.mult_small.real() - 1.0) < 1e-8);
        // eigen-directions of [[cosh, sinh],[sinh, cosh]] are (1,1) and (1,-1)
        CHECK(std::abs(std::abs(fl.dir_unstable.x) - std::abs(fl.dir_unstable.y)) < 1e-6);
        CHECK(std::abs(std::abs(fl.dir_stable.x) - std::abs(fl.dir_stable.y)) < 1e-6);
        CHECK(fl.dir_unstable.x * fl.dir_unstable.y > 0);
        CHECK(fl.dir_stable.x * fl.dir_stable.y < 0);
    }
    {
        // outer equator: length 6 pi, J'' + J/3 = 0, trace 2 cos(2 pi sqrt 3)
        auto tor = make_torus_of_revolution(2.0, 1.0);
        const double G = tor.at({0.0, 0.0}).G;
        OrbitCandidate cand{{{0.0, 0.0}, {0.0, 1.0 / std::sqrt(G)}}, 6.0 * M_PI};
        auto [M, fl] = monodromy_and_floquet(tor, cand, 1e-8);
        CHECK(fl.type == FloquetType::Elliptic);
        CHECK(std::abs(M.trace() - 2.0 * std::cos(kTwoPi * std::sqrt(3.0))) < 1e-7);
    }
}

TEST_CASE("monodromy rejects non-closed candidates") {
    auto tor = make_torus_of_revolution(2.0, 1.0);
    OrbitCandidate cand{{{M_PI, 0.0}, {0.0, 1.0}}, 6.0};  // wrong period
    CHECK_THROWS_AS(monodromy_and_floquet(tor, cand, 1e-8), NotClosedError);
}

TEST_CASE("conjugate points: sphere at pi, inner equator none, outer at pi sqrt 3") {
    {
        auto sph = make_round_sphere(1.0);
        const UnitTangentState s0 = state_from_angle(sph, {M_PI / 2, 0.0}, M_PI / 2);
        auto z = find_conjugate_points(sph, s0, 4.0, 1e-12);
        REQUIRE(z.size() == 1);
        CHECK(std::abs(z[0] - M_PI) < 1e-6);
    }
    {
        auto tor = make_torus_of_revolution(2.0, 1.0);
        const UnitTangentState s0{{M_PI, 0.0}, {0.0, 1.0}};
        auto z = find_conjugate_points(tor, s0, 20.0, 1e-12);
        CHECK(z.empty());
    }
    {
        auto tor = make_torus_of_revolution(2.0, 1.0);
        const double G = tor.at({0.0, 0.0}).G;
        const UnitTangentState s0{{0.0, 0.0}, {0.0, 1.0 / std::sqrt(G)}};
        auto z = find_conjugate_points(tor, s0, 10.0, 1e-12);
        REQUIRE(!z.empty());
        CHECK(std::abs(z[0] - M_PI * std::sqrt(3.0)) < 1e-7);
    }
}

TEST_CASE("Riccati consistency and the flowed vertical") {
    // W = J/Jdot obeys W' = K W^2 + 1; residual measured by finite
    // differences of the integrated dense output
    auto tor = make_torus_of_revolution(2.0, 1.0);
    const UnitTangentState s0 = state_from_angle(tor, {1.3, 0.4}, 0.9);
    FlowOptions fo;
    fo.tol = 1e-12;
    auto tr = evolve_contact_frame(tor, s0, {0.0, 1.0}, 2.0, fo);
    const double h = 1e-4;
    for (double t : {0.3, 0.8, 1.4, 1.9}) {
        const Vec2 jm = tr.jacobi_at(t - h), j0 = tr.jacobi_at(t), jp = tr.jacobi_at(t + h);
        REQUIRE(std::abs(j0.y) > 1e-3);
        const double W = j0.x / j0.y;
        const double Wdot = (jp.x / jp.y - jm.x / jm.y) / (2 * h);
        const UnitTangentState st = tr.base_at(t);
        const double K = tor.gauss_curvature_raw(st.q);
        CHECK(std::abs(Wdot - (K * W * W + 1.0)) < 1e-6);
    }
    // flowed vertical: W(0)=0 has Wdot(0)=1 within 1e-8 (static vertical: 0)
    const double hs = 1e-5;
    auto tr2 = evolve_contact_frame(tor, s0, {0.0, 1.0}, 10 * hs, fo);
    const Vec2 j = tr2.jacobi_at(hs);
    const double K0 = tor.gauss_curvature_raw(s0.q);
    const double slope = (j.x / j.y) / hs;
    // remove the known O(h^2) term K h^2 / 3 before comparing
    CHECK(std::abs(slope - 1.0 - K0 * hs * hs / 3.0) < 1e-8);
}

TEST_CASE("angular slope: constant-lambda closed form and fixed directions") {
    // tan beta(t) = exp(-2 lambda t) tan beta(0)
    const double lam = 0.8, b0 = 0.6, T = 2.0;
    auto tr = evolve_angular_slope([&](double) { return lam; }, b0, 0.0, T, 1e-13);
    for (double t : {0.5, 1.0, 2.0}) {
        const double expect = std::atan(std::exp(-2 * lam * t) * std::tan(b0));
        CHECK(std::abs(tr.beta_at(t) - expect) < 1e-8);
    }
    // beta in {0, pi/2} are fixed
    auto trf = evolve_angular_slope([&](double) { return lam; }, 0.0, 0.0, 5.0, 1e-13);
    CHECK(std::abs(trf.beta_at(5.0)) < 1e-12);
    auto trg = evolve_angular_slope([&](double) { return lam; }, M_PI / 2, 0.0, 5.0, 1e-13);
    CHECK(std::abs(trg.beta_at(5.0) - M_PI / 2) < 1e-10);
}

TEST_CASE("angular slope: periodic lambda against fixed-grid RK4 oracle") {
    auto lam = [](double t) { return 1.0 + 0.5 * std::sin(2 * M_PI * t); };
    const double b0 = M_PI / 4, T = 3.0;
    std::function<void(double, const std::array<double, 1>&, std::array<double, 1>&)> rhs =
        [&](double t, const std::array<double, 1>& y, std::array<double, 1>& dy) {
            dy[0] = -lam(t) * std::sin(2 * y[0]);
        };
    const auto yo = oracle::rk4_refined<1>(rhs, {b0}, 0.0, T, 1e-10);
    auto tr = evolve_angular_slope(lam, b0, 0.0, T, 1e-13);
    CHECK(std::abs(tr.beta_at(T) - yo[0]) < 1e-7);
}

TEST_CASE("projective flow converges to the unstable direction") {
    // Torus(2,1) inner equator, 10 periods: any line off E^s converges to E^u
    auto tor = make_torus_of_revolution(2.0, 1.0);
    OrbitCandidate cand{{{M_PI, 0.0}, {0.0, 1.0}}, kTwoPi};
    auto [M, fl] = monodromy_and_floquet(tor, cand, 1e-8);
    Vec2 w{0.0, 1.0};  // vertical, not the stable direction
    for (int k = 0; k < 10; ++k) w = M.apply(w);
    const double ang = std::atan2(std::abs(cross2(w, fl.dir_unstable)),
                                  std::abs(dot2(w, fl.dir_unstable)));
    CHECK(ang < 1e-4);
}

TEST_CASE("adapted frame: lambda_t constant on the inner equator") {
    auto tor = make_torus_of_revolution(2.0, 1.0);
    OrbitCandidate cand{{{M_PI, 0.0}, {0.0, 1.0}}, kTwoPi};
    auto [M, fl] = monodromy_and_floquet(tor, cand, 1e-8);
    (void)M;
    AdaptedFrame frame(tor, cand, fl);
    for (double t : {0.0, 1.0, 3.0, 6.0}) CHECK(std::abs(frame.lambda(t) - 1.0) < 1e-6);
    CHECK(std::abs(frame.Lambda(kTwoPi) - kTwoPi) < 1e-6);
    // vertical sits at constant angle, bounded away from both eigendirections
    for (double t : {0.0, 2.0, 5.0}) {
        CHECK(frame.vertical_unstable_angle(t) > 1e-4);
        CHECK(frame.vertical_stable_angle(t) > 1e-4);
        CHECK(std::abs(frame.vertical_angle(t) - frame.vertical_angle(0.0)) < 1e-6);
    }
}
