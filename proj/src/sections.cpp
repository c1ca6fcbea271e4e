#include "geolab/sections.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace geolab {

const char* boundary_label_name(BoundaryLabel l) {
    switch (l) {
        case BoundaryLabel::Rotating: return "rotating";
        case BoundaryLabel::NonRotating: return "non-rotating";
        case BoundaryLabel::Degenerate: return "degenerate";
    }
    return "?";
}

UnitTangentState SectionPatch::lift(double t, double alpha) const {
    const ParametricMetric& m = geom->metric();
    const double L = geom->length();
    const double s = side > 0 ? t : ParametricMetric::positive_mod(L - t, L);
    const Vec2 q = geom->point_at(s);
    const Vec2 tan = geom->tangent_at(s);
    const Vec2 nor = m.rotate90(q, tan);
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    Vec2 v;
    if (side > 0)
        v = ca * tan + sa * nor;
    else
        v = (-ca) * tan + (-sa) * nor;
    return {q, v};
}

std::pair<double, double> SectionPatch::coords_from(double s, const UnitTangentState& z) const {
    const ParametricMetric& m = geom->metric();
    const double L = geom->length();
    const Vec2 q = geom->point_at(s);
    const Vec2 tan = geom->tangent_at(s);
    const Vec2 nor = m.rotate90(q, tan);
    const double a = m.inner(q, z.w, tan);
    const double b = m.inner(q, z.w, nor);
    if (side > 0) return {s, std::atan2(b, a)};
    return {ParametricMetric::positive_mod(L - s, L), std::atan2(-b, -a)};
}

SectionPatch build_birkhoff_annulus(const ParametricMetric& m,
                                    std::shared_ptr<const ClosedGeodesic> g, int side,
                                    std::shared_ptr<const CurveGeometry> shared_geom) {
    SectionPatch p;
    p.base = g;
    p.side = side;
    p.geom = shared_geom ? shared_geom : std::make_shared<CurveGeometry>(m, *g, 1024);
    // the base curve must be simple for the annulus interior to embed
    {
        ClosedCurve poly;
        poly.winding = g->winding;
        const int n = 256;
        poly.closure_offset = {g->winding.q * (m.periodic_u ? m.domain.period_u() : 0.0),
                               g->winding.p * (m.periodic_v ? m.domain.period_v() : 0.0)};
        Vec2 prev = p.geom->point_at(0.0);
        Vec2 lift = prev;
        for (int i = 0; i < n; ++i) {
            Vec2 q = p.geom->point_at(g->length() * i / n);
            if (i > 0) lift = lift + m.wrapped_diff(q, prev);
            prev = q;
            poly.pts.push_back(lift);
        }
        if (!poly.is_simple(m))
            throw NotSimpleError("build_birkhoff_annulus: base geodesic is not simple");
    }
    // interior transversality on a sample grid: the normal velocity of the
    // lifted vector equals sin(alpha) and must be nonzero away from the edges
    for (int i = 0; i < 16; ++i) {
        for (int j = 1; j < 8; ++j) {
            const double t = g->length() * i / 16;
            const double alpha = M_PI * j / 8;
            const UnitTangentState z = p.lift(t, alpha);
            const double s = side > 0 ? t : ParametricMetric::positive_mod(g->length() - t,
                                                                           g->length());
            const Vec2 q = p.geom->point_at(s);
            const Vec2 nor = m.rotate90(q, p.geom->tangent_at(s));
            const double ns = std::abs(m.inner(q, z.w, nor));
            if (ns < 1e-12)
                throw GeolabError("build_birkhoff_annulus: interior transversality failed");
        }
    }
    p.label_forward = BoundaryLabel::Rotating;
    p.label_backward = BoundaryLabel::Rotating;
    if (g->floquet.type == FloquetType::Degenerate) {
        p.label_forward = p.label_backward = BoundaryLabel::Degenerate;
    } else if (g->conjugate_point_free && g->floquet.hyperbolic()) {
        // a waist's own annulus boundary is non-rotating unless a crossing
        // curve makes nearby returns bounded; system assembly refines this
        p.label_forward = p.label_backward = BoundaryLabel::NonRotating;
    }
    p.name = m.label + ":" + (side > 0 ? "A+" : "A-");
    return p;
}

std::vector<const ClosedGeodesic*> SectionSystem::k_fix() const {
    std::vector<const ClosedGeodesic*> out;
    for (const auto& b : boundary_orbits)
        if (b.label == BoundaryLabel::NonRotating) out.push_back(b.geodesic.get());
    return out;
}

// ---- first hit ----

namespace {

struct CurveEntry {
    const CurveGeometry* geom = nullptr;
    int patch_plus = -1;
    int patch_minus = -1;
};

std::vector<CurveEntry> collect_curves(const SectionSystem& sys) {
    // key on the underlying orbit: the two annuli of one geodesic must act
    // as one event curve with both crossing signs
    std::vector<CurveEntry> out;
    std::map<const ClosedGeodesic*, std::size_t> index;
    for (std::size_t i = 0; i < sys.patches.size(); ++i) {
        const SectionPatch& p = sys.patches[i];
        auto it = index.find(p.base.get());
        if (it == index.end()) {
            index[p.base.get()] = out.size();
            out.push_back({p.geom.get(), -1, -1});
            it = index.find(p.base.get());
        }
        if (p.side > 0)
            out[it->second].patch_plus = static_cast<int>(i);
        else
            out[it->second].patch_minus = static_cast<int>(i);
    }
    return out;
}

constexpr double kTube = 0.35;       // engage offset tracking inside this distance
constexpr double kArmOffset = 1e-6;  // must leave the curve before re-hitting

}  // namespace

FirstHitResult first_hit(const SectionSystem& sys, const UnitTangentState& z, int direction,
                         const HitOptions& opt) {
    const ParametricMetric& m = *sys.metric;
    FirstHitResult res;
    const auto curves = collect_curves(sys);
    const int nc = static_cast<int>(curves.size());

    // boundary-orbit input: on a curve and tangent to it
    for (int c = 0; c < nc; ++c) {
        const auto nr = curves[c].geom->nearest(m.wrap(z.q));
        if (nr.dist < 1e-9) {
            const Vec2 q = curves[c].geom->point_at(nr.s);
            const Vec2 nor = m.rotate90(q, curves[c].geom->tangent_at(nr.s));
            if (std::abs(m.inner(q, z.w, nor)) < 1e-9) {
                res.status = HitStatus::BoundaryOrbitInput;
                return res;
            }
        }
    }

    std::vector<double> hint(nc, -1.0);
    std::vector<bool> armed(nc, false);
    std::vector<double> last_root(nc, -1e300);

    FlowOptions fo;
    fo.tol = opt.flow_tol;
    fo.max_step = 0.2;
    const double T = direction >= 0 ? opt.t_max : -opt.t_max;

    struct Candidate {
        double t = 1e300;
        int curve = -1;
        double s = 0;
        UnitTangentState state;
        double normal_speed = 0;
    };

    bool done = false;
    flow_geodesic(m, z, T, fo, [&](const DenseStep<4>& st) {
        Candidate best;
        for (int c = 0; c < nc; ++c) {
            const CurveGeometry& geo = *curves[c].geom;
            // cheap reject: the whole step stays far from the curve's band
            const OdeState<4> y0 = st.eval(0.0);
            if (geo.band_distance({y0[0], y0[1]}) > kTube + 1.2 * std::abs(st.h)) continue;

            constexpr int kSub = 6;
            double tp = st.t0;
            bool have_prev = false;
            double gp = 0;
            for (int k = 0; k <= kSub; ++k) {
                const double th = static_cast<double>(k) / kSub;
                const double tc = st.t0 + th * st.h;
                const OdeState<4> yc = st.eval(th);
                const auto nr = geo.nearest(m.wrap({yc[0], yc[1]}), hint[c]);
                hint[c] = nr.s;
                if (nr.dist > kTube) {
                    have_prev = false;
                    if (nr.dist > kArmOffset) armed[c] = true;
                    continue;
                }
                const double gc = nr.offset;
                if (!armed[c] && std::abs(gc) > kArmOffset) armed[c] = true;
                if (have_prev && armed[c] && ((gp < 0 && gc >= 0) || (gp > 0 && gc <= 0))) {
                    double shint = nr.s;
                    auto offset_at = [&](double t) {
                        const OdeState<4> yy = st.eval((t - st.t0) / st.h);
                        const auto mr = geo.nearest(m.wrap({yy[0], yy[1]}), shint);
                        shint = mr.s;
                        return mr.offset;
                    };
                    const double troot = bisect_root(offset_at, tp, tc, 1e-13);
                    if (std::abs(troot - last_root[c]) > 1e-9) {
                        last_root[c] = troot;
                        const OdeState<4> yr = st.eval((troot - st.t0) / st.h);
                        const UnitTangentState zs{{yr[0], yr[1]}, {yr[2], yr[3]}};
                        const auto nrr = geo.nearest(m.wrap(zs.q), shint);
                        const Vec2 q = geo.point_at(nrr.s);
                        const Vec2 nor = m.rotate90(q, geo.tangent_at(nrr.s));
                        const double ns = m.inner(q, zs.w, nor);
                        if (std::abs(ns) < opt.graze_floor) {
                            ++res.grazes_skipped;  // boundary-proximate graze: logged
                        } else if (std::abs(troot) < std::abs(best.t)) {
                            best.t = troot;
                            best.curve = c;
                            best.s = nrr.s;
                            best.state = zs;
                            best.normal_speed = ns;
                        }
                    }
                }
                tp = tc;
                gp = gc;
                have_prev = true;
            }
        }
        if (best.curve >= 0) {
            const CurveEntry& ce = curves[best.curve];
            const int patch = best.normal_speed > 0 ? ce.patch_plus : ce.patch_minus;
            if (patch >= 0) {
                const SectionPatch& p = sys.patches[patch];
                auto [t, alpha] = p.coords_from(best.s, best.state);
                res.status = HitStatus::Hit;
                res.event.patch = patch;
                res.event.t = t;
                res.event.alpha = alpha;
                res.event.flight = std::abs(best.t);
                res.event.crossing_sign = best.normal_speed > 0 ? +1 : -1;
                res.event.state = best.state;
                done = true;
                return false;
            }
            // crossing a curve whose other-side annulus is not part of the
            // system: not a hit; keep flying
        }
        return true;
    });
    if (!done) res.status = HitStatus::Timeout;
    return res;
}

ReturnResult return_map(const SectionSystem& sys, int patch, double t, double alpha,
                        const HitOptions& opt, bool with_jacobian) {
    ReturnResult rr;
    const SectionPatch& p = sys.patches[patch];
    auto shoot = [&](double tt, double ca) -> FirstHitResult {
        const double aa = std::acos(std::clamp(ca, -1.0, 1.0));
        return first_hit(sys, p.lift(tt, aa), +1, opt);
    };
    const double ca0 = std::cos(alpha);
    FirstHitResult base = shoot(t, ca0);
    rr.status = base.status;
    if (base.status != HitStatus::Hit) return rr;
    rr.event = base.event;
    if (!with_jacobian) return rr;

    const double dt = 1e-6 * std::max(1.0, p.length());
    const double dc = 1e-6;
    auto coords = [&](const FirstHitResult& h) {
        return std::pair<double, double>(h.event.t, std::cos(h.event.alpha));
    };
    FirstHitResult hp = shoot(t + dt, ca0), hm = shoot(t - dt, ca0);
    FirstHitResult vp = shoot(t, ca0 + dc), vm = shoot(t, ca0 - dc);
    if (hp.status == HitStatus::Hit && hm.status == HitStatus::Hit &&
        vp.status == HitStatus::Hit && vm.status == HitStatus::Hit &&
        hp.event.patch == base.event.patch && hm.event.patch == base.event.patch &&
        vp.event.patch == base.event.patch && vm.event.patch == base.event.patch) {
        const double L = sys.patches[base.event.patch].length();
        auto wrapd = [&](double a, double b) {
            return ParametricMetric::signed_mod(a - b, L);
        };
        auto [tp1, cp1] = coords(hp);
        auto [tm1, cm1] = coords(hm);
        auto [tp2, cp2] = coords(vp);
        auto [tm2, cm2] = coords(vm);
        rr.jac[0][0] = wrapd(tp1, tm1) / (2 * dt);
        rr.jac[1][0] = (cp1 - cm1) / (2 * dt);
        rr.jac[0][1] = wrapd(tp2, tm2) / (2 * dc);
        rr.jac[1][1] = (cp2 - cm2) / (2 * dc);
        rr.jac_valid = true;
    }
    return rr;
}

// ---- boundary map ----

namespace {

/// Crossing times of a scalar signal with zero over (0, T], bisection-refined.
std::vector<double> signal_zeros(const std::function<double(double)>& f, double T, int samples) {
    std::vector<double> zeros;
    double tp = 0.0, fp = f(0.0);
    for (int i = 1; i <= samples; ++i) {
        const double tc = T * i / samples;
        const double fc = f(tc);
        if ((fp < 0 && fc >= 0) || (fp > 0 && fc <= 0)) {
            const double r = bisect_root(f, tp, tc, 1e-12 * T);
            if (zeros.empty() || r - zeros.back() > 1e-9 * T) zeros.push_back(r);
        }
        tp = tc;
        fp = fc;
    }
    // a zero exactly at T duplicates the one at 0 of the next period
    while (!zeros.empty() && zeros.back() > T - 1e-9 * T) zeros.pop_back();
    return zeros;
}

struct GraphReturn {
    bool found = false;
    double t = 0;
};

/// First return of the projective flow orbit from (t0, theta(t0)) to the
/// graph of theta (angles mod pi; theta_lift must be a continuous lift).
GraphReturn graph_return(const std::function<double(double)>& lambda,
                         const std::function<double(double)>& theta_lift, double t0,
                         double t_budget, double max_step, double tol) {
    GraphReturn gr;
    auto rhs = [&](double t, const OdeState<1>& y, OdeState<1>& dy) {
        dy[0] = -lambda(t) * std::sin(2.0 * y[0]);
    };
    OdeOptions oo;
    oo.rtol = tol;
    oo.atol = tol * 1e-2;
    oo.max_step = max_step;
    bool armed = false;
    double t_hit = 0;
    bool hit = false;
    integrate<1>(rhs, {theta_lift(t0)}, t0, t0 + t_budget, oo, [&](const DenseStep<1>& st) {
        constexpr int kSub = 8;
        double tp = st.t0;
        double ep = std::sin(st.eval(0.0)[0] - theta_lift(st.t0));
        for (int k = 1; k <= kSub; ++k) {
            const double th = static_cast<double>(k) / kSub;
            const double tc = st.t0 + th * st.h;
            const double ec = std::sin(st.eval(th)[0] - theta_lift(tc));
            if (!armed && std::abs(ec) > 1e-5) armed = true;
            if (armed && ((ep < 0 && ec >= 0) || (ep > 0 && ec <= 0))) {
                t_hit = bisect_root(
                    [&](double t) {
                        return std::sin(st.eval((t - st.t0) / st.h)[0] - theta_lift(t));
                    },
                    tp, tc, 1e-12);
                hit = true;
                return false;
            }
            tp = tc;
            ep = ec;
        }
        return true;
    });
    gr.found = hit;
    gr.t = t_hit;
    return gr;
}

/// Core of the boundary analysis once lambda(t) and a continuous lift of
/// theta-bar over one period are known (both period-P with
/// theta_lift(t+P) = theta_lift(t) + winding * pi).
BoundaryMapData analyze_boundary(const std::function<double(double)>& lambda,
                                 const std::function<double(double)>& theta_period,
                                 double P, double Lambda_T, const BoundaryMapOptions& opt) {
    BoundaryMapData out;
    out.period = P;
    out.Lambda_T = Lambda_T;
    out.attractor_multiplier = std::exp(-2.0 * Lambda_T);
    out.repellor_multiplier = std::exp(+2.0 * Lambda_T);

    // continuous lift of theta over one period and its winding in pi units
    const int ns = opt.samples;
    std::vector<double> lift(ns + 1);
    lift[0] = theta_period(0.0);
    for (int i = 1; i <= ns; ++i) {
        const double raw = theta_period(P * i / ns);
        double prev = lift[i - 1];
        double x = raw + M_PI * std::round((prev - raw) / M_PI);
        lift[i] = x;
    }
    const int winding = static_cast<int>(std::round((lift[ns] - lift[0]) / M_PI));
    auto theta_lift2 = [&, winding](double t) {
        const double k = std::floor(t / P);
        const double tm = t - k * P;
        const double x = tm / P * ns;
        const int i = std::min(ns - 1, static_cast<int>(x));
        const double f = x - i;
        return lift[i] + f * (lift[i + 1] - lift[i]) + M_PI * winding * k;
    };

    const std::function<double(double)> lam_p = [lambda, P](double t) {
        return lambda(t - P * std::floor(t / P));
    };

    for (int i = 0; i <= ns; ++i) {
        const double t = P * i / ns;
        out.theta_bar.emplace_back(t, ParametricMetric::positive_mod(lift[i], M_PI));
        out.lambda_profile.emplace_back(t, lam_p(t));
    }

    // a run of vanishing margins means the graph rides a flow line: tangent,
    // not transversal; isolated zero crossings of the margin are fine
    {
        int run = 0;
        for (int i = 1; i < ns; ++i) {
            const double t = P * i / ns;
            const double th = lift[i];
            const double dth = (lift[i + 1] - lift[i - 1]) / (2.0 * P / ns);
            const double margin = -lam_p(t) * std::sin(2.0 * th) - dth;
            run = (std::abs(margin) < 1e-4) ? run + 1 : 0;
            if (run >= 8)
                throw TransversalityFailedError(
                    "boundary_map: theta-bar graph tangent to the projective flow near t=" +
                    std::to_string(t));
        }
    }

    // crossings with the invariant directions: E^u at 0 mod pi, E^s at pi/2
    auto su = [&](double t) { return std::sin(theta_lift2(t)); };
    auto sc = [&](double t) { return std::cos(theta_lift2(t)); };
    const std::vector<double> cross_u = signal_zeros(su, P, 4 * ns);
    const std::vector<double> cross_s = signal_zeros(sc, P, 4 * ns);
    out.crossings_unstable = static_cast<int>(cross_u.size());
    out.crossings_stable = static_cast<int>(cross_s.size());
    out.rotating = !cross_u.empty() || !cross_s.empty();

    struct Cross {
        double t;
        char dir;
    };
    std::vector<Cross> all;
    for (double t : cross_u) all.push_back({t, 'u'});
    for (double t : cross_s) all.push_back({t, 's'});
    std::sort(all.begin(), all.end(), [](const Cross& a, const Cross& b) { return a.t < b.t; });

    // b(t) samples over one period where the graph return exists
    const double budget = opt.b_return_budget * P;
    for (int i = 0; i < 64; ++i) {
        const double t0 = P * i / 64;
        const GraphReturn gr =
            graph_return(lam_p, theta_lift2, t0, budget, P / 20.0, opt.flow_tol);
        if (gr.found) out.b_samples.emplace_back(t0, gr.t);
    }

    // periodic points at the crossings; multiplier over one full period is
    // exp(-/+ 2 Lambda_T), measured by chaining b across the cycle when the
    // returns are computable
    for (const Cross& c : all) {
        BoundaryPeriodicPoint pp;
        pp.t = c.t;
        pp.direction = c.dir;
        pp.kind = (c.dir == 'u') ? 'a' : 'r';
        pp.multiplier = (c.dir == 'u') ? out.attractor_multiplier : out.repellor_multiplier;
        out.periodic_points.push_back(pp);
    }
    return out;
}

}  // namespace

BoundaryMapData boundary_map(const ParametricMetric& m, const ClosedGeodesic& g,
                             const BoundaryMapOptions& opt) {
    if (!g.floquet.hyperbolic()) {
        // elliptic (or degenerate) boundary: the extension has no periodic
        // points when the multipliers are not roots of unity
        BoundaryMapData out;
        out.period = g.orbit.period;
        out.rotating = true;
        out.Lambda_T = 0.0;
        out.attractor_multiplier = out.repellor_multiplier = 1.0;
        return out;
    }
    AdaptedFrame frame(m, g.orbit, g.floquet, opt.flow_tol);
    const double P = g.orbit.period;
    auto lambda = [&frame, P](double t) {
        return frame.lambda(std::clamp(t, 0.0, P));
    };
    auto theta = [&frame, P](double t) { return frame.vertical_angle(std::clamp(t, 0.0, P)); };
    BoundaryMapData out = analyze_boundary(lambda, theta, P, frame.Lambda(P), opt);
    return out;
}

BoundaryMapData boundary_map_synthetic(const std::function<double(double)>& lambda,
                                       const std::function<double(double)>& theta_bar,
                                       double period, const BoundaryMapOptions& opt) {
    double Lambda_T = 0.0;
    {
        // trapezoid on a fine grid; lambda profiles are smooth and periodic
        const int n = 4096;
        for (int i = 0; i < n; ++i) {
            const double a = period * i / n, b = period * (i + 1) / n;
            Lambda_T += 0.5 * (lambda(a) + lambda(b)) * (b - a);
        }
    }
    return analyze_boundary(lambda, theta_bar, period, Lambda_T, opt);
}

// ---- transversality ----

TransversalityReport check_transversality(const ParametricMetric& m, const ClosedGeodesic& g,
                                          int samples) {
    // Birkhoff annulus: theta-bar is the vertical, which sits at pi/2 in the
    // (J, Jdot) frame; the naive margin -lambda sin(2 theta) - theta_t
    // vanishes identically and the Riccati refinement W'(0) = 1 decides.
    TransversalityReport rep;
    rep.margin = 0.0;
    rep.marginal = true;
    FlowOptions fo;
    fo.tol = 1e-12;
    GeodesicTrajectory orbit = integrate_geodesic(m, g.orbit.z0, g.orbit.period, fo);
    const double h = 1e-5;
    double min_slope = 1e300;
    for (int i = 0; i < samples; ++i) {
        const double t = g.orbit.period * i / samples;
        const UnitTangentState s = orbit.state_at(t);
        auto tr = evolve_contact_frame(m, s, {0.0, 1.0}, 4 * h, fo);
        const Vec2 j = tr.jacobi_at(h);
        const double slope = (j.x / j.y) / h;
        min_slope = std::min(min_slope, slope);
        rep.margin_samples.emplace_back(t, 0.0);
    }
    rep.min_flowed_vertical_slope = min_slope;
    rep.riccati_decides = min_slope > 0.0;
    return rep;
}

TransversalityReport check_transversality_synthetic(
    const std::function<double(double)>& lambda, const std::function<double(double)>& theta_bar,
    double period, int samples) {
    TransversalityReport rep;
    double worst = 1e300;
    const double h = 1e-6 * period;
    for (int i = 0; i < samples; ++i) {
        const double t = period * i / samples;
        const double dth = (theta_bar(t + h) - theta_bar(t - h)) / (2 * h);
        const double mg = -lambda(t) * std::sin(2.0 * theta_bar(t)) - dth;
        rep.margin_samples.emplace_back(t, mg);
        worst = std::min(worst, mg);
    }
    rep.margin = worst;
    rep.marginal = std::abs(worst) < 1e-7;
    rep.min_flowed_vertical_slope = 1.0;  // not applicable; kept harmless
    return rep;
}

// ---- system construction ----

namespace {

void add_annuli(SectionSystem& sys, const ParametricMetric& m,
                std::shared_ptr<const ClosedGeodesic> g, BoundaryLabel label,
                const std::string& name) {
    std::shared_ptr<const CurveGeometry> geom;
    for (int side : {+1, -1}) {
        SectionPatch p = build_birkhoff_annulus(m, g, side, geom);
        geom = p.geom;
        p.name = name + (side > 0 ? "+" : "-");
        p.label_forward = label;
        p.label_backward = label;
        sys.patches.push_back(std::move(p));
    }
    for (int dir : {+1, -1}) {
        SectionSystem::BoundaryOrbit bo;
        bo.geodesic = g;
        bo.direction = dir;
        bo.label = label;
        sys.boundary_orbits.push_back(bo);
    }
}

/// Transversal intersection count of two closed geodesics (sampled curves).
int intersection_count(const ParametricMetric& m, const CurveGeometry& a,
                       const CurveGeometry& b) {
    const int n = 512;
    int count = 0;
    double prev_off = 0;
    bool have = false;
    double hint = -1;
    for (int i = 0; i <= n; ++i) {
        const double s = a.length() * i / n;
        const Vec2 q = m.wrap(a.point_at(s));
        const auto nr = b.nearest(q, hint);
        hint = nr.s;
        if (nr.dist > 0.5) {
            have = false;
            continue;
        }
        if (have && ((prev_off < 0 && nr.offset >= 0) || (prev_off > 0 && nr.offset <= 0)))
            ++count;
        prev_off = nr.offset;
        have = true;
    }
    return count;
}

double best_parallel_seed(const ParametricMetric& m, int samples = 128) {
    double best_u = m.domain.u0, best_len = 1e300;
    for (int i = 0; i < samples; ++i) {
        const double u = m.domain.u0 + m.domain.period_u() * (i + 0.5) / samples;
        const double L = parallel_circle(m, u, 64).length(m);
        if (L < best_len) {
            best_len = L;
            best_u = u;
        }
    }
    return best_u;
}

}  // namespace

SectionSystem build_complete_system(const ParametricMetric& m, int genus,
                                    const SystemOptions& opt) {
    SectionSystem sys;
    sys.metric = &m;
    if (genus == 0) {
        // two Birkhoff annuli of a minimax simple closed geodesic
        const double margin = 0.12 * (m.domain.u1 - m.domain.u0);
        auto fam = parallel_sweep(m, m.domain.u0 + margin, m.domain.u1 - margin, 25, 96);
        auto mm = std::make_shared<ClosedGeodesic>(find_minimax(m, fam, opt.minimax));
        add_annuli(sys, m, mm, BoundaryLabel::Rotating, m.label + ":minimax");

        // decompose the two disks; interior waists contribute K_fix annuli,
        // separating geodesics rotating ones
        const double u_mm = m.wrap(mm->orbit.z0.q).x;
        for (int side = 0; side < 2; ++side) {
            const double lo = side == 0 ? m.domain.u0 : u_mm;
            const double hi = side == 0 ? u_mm : m.domain.u1;
            Region disk = band_region_u(m, lo, hi, m.label + (side == 0 ? ":disk0" : ":disk1"));
            DecomposeOptions dopt = opt.decompose;
            auto dec = decompose_region(m, disk, dopt);
            if (!dec.complete)
                sys.notes.push_back("decomposition of " + disk.name + " incomplete");
            for (const auto& piece : dec.pieces) {
                if (piece.waist) {
                    auto w = std::make_shared<ClosedGeodesic>(*piece.waist);
                    add_annuli(sys, m, w, BoundaryLabel::NonRotating, m.label + ":waist");
                }
                if (piece.separating) {
                    auto h = std::make_shared<ClosedGeodesic>(*piece.separating);
                    add_annuli(sys, m, h, BoundaryLabel::Rotating, m.label + ":separating");
                }
            }
        }
    } else if (genus == 1) {
        // chain of region-constrained minimizers (1,0),(0,1),(1,0),(0,1);
        // coinciding or degenerate slots are flagged and dropped
        std::vector<std::shared_ptr<const ClosedGeodesic>> chain(4);
        std::vector<std::string> chain_names = {"g1", "g2", "g3", "g4"};
        WaistOptions wo = opt.waist;

        auto try_waist = [&](const ClosedCurve& seed,
                             const Region* region) -> std::shared_ptr<const ClosedGeodesic> {
            WaistOptions w = wo;
            w.shorten.region = region;
            try {
                return std::make_shared<ClosedGeodesic>(find_waist(m, seed, w));
            } catch (const GeolabError& e) {
                sys.notes.push_back(std::string("waist slot failed: ") + e.what());
                return nullptr;
            }
        };

        const double u1 = best_parallel_seed(m);
        chain[0] = try_waist(parallel_circle(m, u1, 128), nullptr);
        chain[1] = try_waist(meridian_circle(m, 0.3, 128), nullptr);
        if (chain[0]) {
            // second (1,0) slot constrained away from the first
            const double uw = m.wrap(chain[0]->orbit.z0.q).x;
            Region comp = band_region_u(m, uw + 0.15, uw + m.domain.period_u() - 0.15,
                                        m.label + ":complement-u");
            chain[2] = try_waist(
                parallel_circle(m, uw + 0.5 * m.domain.period_u(), 128), &comp);
        }
        if (chain[1]) {
            const double vw = m.wrap(chain[1]->orbit.z0.q).y;
            chain[3] = try_waist(meridian_circle(m, vw + 0.5 * m.domain.period_v(), 128),
                                 nullptr);
        }
        // drop coinciding minimizers (the torus chain pinches: flagged)
        for (int i = 0; i < 4; ++i) {
            if (!chain[i]) continue;
            for (int j = 0; j < i; ++j) {
                if (!chain[j]) continue;
                CurveGeometry gi(m, *chain[i], 256);
                CurveGeometry gj(m, *chain[j], 256);
                double farthest = 0.0;  // coincidence = close along the whole loop
                for (int k = 0; k < 64; ++k) {
                    const UnitTangentState s = gi.state_at(gi.length() * k / 64);
                    farthest = std::max(farthest, gj.nearest(m.wrap(s.q)).dist);
                }
                if (farthest < 1e-3 && std::abs(chain[i]->length() - chain[j]->length()) < 1e-4) {
                    sys.notes.push_back("minimizers " + chain_names[i] + " and " +
                                        chain_names[j] + " coincide; slot dropped");
                    chain[i] = nullptr;
                    break;
                }
            }
        }
        // degeneracy gate: the construction theorem assumes nondegenerate
        // waists; degenerate members are kept as sections but flagged, since
        // their absorbing role for trapped sets is void
        for (int i = 0; i < 4; ++i) {
            if (chain[i] && chain[i]->floquet.type == FloquetType::Degenerate)
                sys.notes.push_back("degenerate waist in slot " + chain_names[i] +
                                    "; construction hypothesis violated, annuli kept");
        }
        // verify the chain intersection pattern on the surviving curves
        {
            std::vector<CurveGeometry> geoms;
            std::vector<int> idx;
            for (int i = 0; i < 4; ++i)
                if (chain[i]) {
                    geoms.emplace_back(m, *chain[i], 256);
                    idx.push_back(i);
                }
            bool ok = idx.size() == 4;
            if (ok) {
                for (std::size_t a = 0; a < idx.size() && ok; ++a)
                    for (std::size_t b = a + 1; b < idx.size() && ok; ++b) {
                        const int want =
                            (std::abs(idx[a] - idx[b]) == 1 || std::abs(idx[a] - idx[b]) == 3)
                                ? 1
                                : 0;
                        if (intersection_count(m, geoms[a], geoms[b]) != want) ok = false;
                    }
            }
            if (!ok)
                sys.notes.push_back(
                    "arrangement failed: chain intersection pattern not achieved");
        }
        int kept = 0;
        for (int i = 0; i < 4; ++i)
            if (chain[i]) ++kept;
        if (kept == 0) throw ArrangementFailedError("build_complete_system: no certified curves");
        for (int i = 0; i < 4; ++i) {
            if (!chain[i]) continue;
            // rotating iff conjugate points or crossed by another chain curve
            bool crossed = false;
            for (int j = 0; j < 4; ++j)
                if (j != i && chain[j] &&
                    intersection_count(m, CurveGeometry(m, *chain[i], 256),
                                       CurveGeometry(m, *chain[j], 256)) > 0)
                    crossed = true;
            BoundaryLabel label = BoundaryLabel::NonRotating;
            if (!chain[i]->conjugate_point_free || crossed)
                label = BoundaryLabel::Rotating;
            else if (chain[i]->floquet.type == FloquetType::Degenerate)
                label = BoundaryLabel::Degenerate;
            add_annuli(sys, m, chain[i], label, m.label + ":" + chain_names[i]);
        }
    } else {
        throw ConfigError("build_complete_system: genus must be 0 or 1");
    }

    if (opt.coverage_seeds > 0) {
        ProbeStatistics st =
            trapped_set_probe(sys, opt.coverage_seeds, opt.coverage_time, opt.rng_seed);
        sys.notes.push_back("coverage: " + std::to_string(st.hit_both) + "/" +
                            std::to_string(st.seeds) + " two-sided hits");
    }
    sys.ell = measure_rotation_bound(sys);
    return sys;
}

ProbeStatistics trapped_set_probe(const SectionSystem& sys, int n_seeds, double t_probe,
                                  std::uint64_t rng_seed, double flow_tol) {
    const ParametricMetric& m = *sys.metric;
    ProbeStatistics st;
    st.seeds = n_seeds;
    Rng rng(rng_seed);
    HitOptions ho;
    ho.t_max = t_probe;
    ho.flow_tol = flow_tol;
    const auto kfix = sys.k_fix();
    std::vector<CurveGeometry> kfix_geom;
    for (const ClosedGeodesic* g : kfix) kfix_geom.emplace_back(m, *g, 512);

    for (int i = 0; i < n_seeds; ++i) {
        // metric-volume sampling: area density on the base, uniform angle
        Vec2 q;
        double dens_cap = 16.0;
        for (int tries = 0; tries < 4000; ++tries) {
            q = {rng.uniform(m.domain.u0, m.domain.u1),
                 rng.uniform(m.domain.v0, m.domain.v1)};
            const FirstForm g = m.value(q.x, q.y);
            const double dens = std::sqrt(std::max(0.0, g.det()));
            if (rng.uniform() * dens_cap < dens) break;
        }
        const UnitTangentState z = state_from_angle(m, q, rng.uniform(0.0, 2 * M_PI));
        bool both = true;
        for (int dir : {+1, -1}) {
            FirstHitResult r;
            try {
                r = first_hit(sys, z, dir, ho);
            } catch (const StepFailureError&) {
                r.status = HitStatus::Timeout;  // chart exit counts as unobserved
            }
            if (r.status == HitStatus::Hit) {
                st.max_hit_time = std::max(st.max_hit_time, r.event.flight);
            } else {
                both = false;
                if (dir > 0)
                    ++st.timeout_forward;
                else
                    ++st.timeout_backward;
                // proximity of the late trace to W^{s,u}(K_fix): phase
                // distance of omega-limit samples to the waist orbits
                double best = std::numeric_limits<double>::infinity();
                if (!kfix.empty()) {
                    try {
                        FlowOptions fo;
                        fo.tol = flow_tol;
                        auto tr = integrate_geodesic(m, z, dir * t_probe, fo);
                        for (int k = 0; k < 16; ++k) {
                            const double t =
                                dir * t_probe * (0.7 + 0.3 * k / 15.0);
                            const UnitTangentState s = tr.state_at(t);
                            for (std::size_t w = 0; w < kfix.size(); ++w) {
                                const auto nr = kfix_geom[w].nearest(m.wrap(s.q));
                                const UnitTangentState on = kfix_geom[w].state_at(nr.s);
                                const Vec2 dq = m.wrapped_diff(s.q, on.q);
                                // compare against both orientations of the orbit
                                const double d2a =
                                    dq.norm() * dq.norm() +
                                    (s.w - on.w).norm() * (s.w - on.w).norm();
                                const Vec2 wneg{-on.w.x, -on.w.y};
                                const double d2b = dq.norm() * dq.norm() +
                                                   (s.w - wneg).norm() * (s.w - wneg).norm();
                                best = std::min({best, std::sqrt(d2a), std::sqrt(d2b)});
                            }
                        }
                    } catch (const StepFailureError&) {
                    }
                }
                st.timeouts.push_back({z, dir, best});
            }
        }
        if (both) ++st.hit_both;
    }
    return st;
}

double measure_rotation_bound(const SectionSystem& sys, int tube_samples, double tube_radius,
                              double t_cap) {
    const ParametricMetric& m = *sys.metric;
    HitOptions ho;
    ho.t_max = t_cap;
    ho.flow_tol = 1e-9;
    double ell = 0.0;
    for (const auto& bo : sys.boundary_orbits) {
        if (bo.label != BoundaryLabel::Rotating) continue;
        CurveGeometry geom(m, *bo.geodesic, 512);
        for (int i = 0; i < tube_samples; ++i) {
            const double s = geom.length() * i / tube_samples;
            const UnitTangentState on = geom.state_at(s);
            const Vec2 w = bo.direction > 0 ? on.w : Vec2{-on.w.x, -on.w.y};
            // tilt slightly off the orbit into both annuli sides
            for (double da : {tube_radius, -tube_radius}) {
                const double ang = m.angle_of(on.q, w) + da;
                const UnitTangentState z = state_from_angle(m, on.q, ang);
                for (int dir : {+1, -1}) {
                    FirstHitResult r;
                    try {
                        r = first_hit(sys, z, dir, ho);
                    } catch (const StepFailureError&) {
                        continue;
                    }
                    if (r.status == HitStatus::Hit) ell = std::max(ell, r.event.flight);
                }
            }
        }
    }
    return ell;
}

}  // namespace geolab
