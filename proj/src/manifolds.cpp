#include "geolab/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace geolab {

namespace {

struct MapResult {
    bool ok = false;
    double s = 0, ae = 0;  // extended fiber-torus coords (s wrapped, ae in (-pi, pi])
};

/// Extended chart on the fiber torus over one curve: ae in (0, pi) is the
/// interior of the side +1 annulus, ae in (-pi, 0) the side -1 annulus, and
/// ae = 0 / pi are the boundary orbits. Growth and intersections run here so
/// that branches may cross between the two annuli of a pair.
struct PairChart {
    const SectionSystem* sys = nullptr;
    int plus = -1, minus = -1;
    double L = 0;

    static PairChart make(const SectionSystem& sys, int patch) {
        PairChart c;
        c.sys = &sys;
        const SectionPatch& p = sys.patches[patch];
        c.L = p.length();
        for (std::size_t i = 0; i < sys.patches.size(); ++i) {
            if (sys.patches[i].base.get() != p.base.get()) continue;
            if (sys.patches[i].side > 0)
                c.plus = static_cast<int>(i);
            else
                c.minus = static_cast<int>(i);
        }
        if (c.plus < 0) throw GeolabError("PairChart: missing side +1 patch");
        return c;
    }

    UnitTangentState lift(double s, double ae) const {
        s = ParametricMetric::positive_mod(s, L);
        ae = std::remainder(ae, 2.0 * M_PI);
        if (ae >= 0.0) return sys->patches[plus].lift(s, ae);
        if (minus < 0) throw GeolabError("PairChart: side -1 patch absent");
        return sys->patches[minus].lift(ParametricMetric::positive_mod(L - s, L), ae + M_PI);
    }

    bool owns(int patch) const { return patch == plus || patch == minus; }

    std::pair<double, double> from_hit(const HitEvent& ev) const {
        if (ev.patch == plus) return {ev.t, ev.alpha};
        return {ParametricMetric::positive_mod(L - ev.t, L), ev.alpha - M_PI};
    }
};

/// One application of the return map (or its inverse) in extended coords.
MapResult apply_map(const PairChart& ch, double s, double ae, int direction,
                    const HitOptions& opt) {
    MapResult r;
    const double am = std::abs(std::remainder(ae, M_PI));
    if (am < 1e-12) return r;  // on a boundary orbit
    FirstHitResult h;
    try {
        h = first_hit(*ch.sys, ch.lift(s, ae), direction, opt);
    } catch (const StepFailureError&) {
        return r;
    }
    if (h.status != HitStatus::Hit || !ch.owns(h.event.patch)) return r;
    if (h.event.patch != ch.plus && ch.minus < 0) return r;
    const auto [rs, rae] = ch.from_hit(h.event);
    r.ok = true;
    r.s = rs;
    r.ae = rae;
    return r;
}

double wrap_t(double t, double L) { return ParametricMetric::positive_mod(t, L); }

/// lift `x` next to the reference lifted value, modulo `period`
double lift_near_p(double x, double ref, double period) {
    return ref + ParametricMetric::signed_mod(x - ref, period);
}
double lift_near(double t, double ref, double L) { return lift_near_p(t, ref, L); }

/// Exact-source branch evaluator: level-k points are k-fold images of seed
/// line points, memoized per (level, sigma). Interpolation never enters the
/// source of a flight, so refinement survives the exponential stretching
/// near separatrix re-approaches.
struct BranchGrower {
    PairChart chart;
    int direction;       // +1 forward (u), -1 backward (s)
    int steps_per_map;   // 2 for negative-hyperbolic parents
    Vec2 seed_a, seed_b; // fundamental segment in (s, ae), sigma in [0,1]
    HitOptions hit;
    std::vector<std::map<double, MapResult>> cache;

    MapResult seed_point(double sigma) const {
        MapResult r;
        r.ok = true;
        r.s = seed_a.x + sigma * (seed_b.x - seed_a.x);
        r.ae = seed_a.y + sigma * (seed_b.y - seed_a.y);
        return r;
    }

    MapResult at(int level, double sigma) {
        if (level == 0) return seed_point(sigma);
        if (static_cast<int>(cache.size()) <= level) cache.resize(level + 1);
        auto it = cache[level].find(sigma);
        if (it != cache[level].end()) return it->second;
        const MapResult below = at(level - 1, sigma);
        MapResult r;
        if (below.ok) {
            double cs = below.s, ca = below.ae;
            bool ok = true;
            for (int k = 0; k < steps_per_map && ok; ++k) {
                const MapResult s = apply_map(chart, cs, ca, direction, hit);
                ok = s.ok;
                cs = s.s;
                ca = s.ae;
            }
            if (ok) {
                r.ok = true;
                r.s = cs;
                r.ae = ca;
            }
        }
        cache[level][sigma] = r;
        return r;
    }
};

BranchGrower make_grower(const SectionSystem& sys, int patch, const LocalFrame& frame,
                         char stability, int sign, const HitOptions& hit) {
    BranchGrower gr;
    gr.chart = PairChart::make(sys, patch);
    gr.direction = stability == 'u' ? +1 : -1;
    const double mu = stability == 'u' ? frame.mu_u : frame.mu_s;
    gr.hit = hit;

    const LocalFrame::Seed* seed = nullptr;
    for (const auto& s : frame.seeds)
        if (s.stability == stability && s.sign == sign) seed = &s;
    if (!seed) throw GeolabError("grow_branch: no matching seed");

    double stretch;
    if (frame.interior) {
        gr.steps_per_map = (mu < 0) ? 2 : 1;
        stretch = std::pow(std::abs(stability == 'u' ? mu : 1.0 / mu), gr.steps_per_map);
        const Vec2 e = stability == 'u' ? frame.dir_u : frame.dir_s;
        const double d0 = std::hypot(seed->t - frame.t0, seed->alpha - frame.alpha0);
        gr.seed_a = {frame.t0 + sign * d0 * e.x, frame.alpha0 + sign * d0 * e.y};
        gr.seed_b = {frame.t0 + sign * d0 * stretch * e.x,
                     frame.alpha0 + sign * d0 * stretch * e.y};
    } else {
        // boundary branch: the arc lives in the fiber over one crossing; a
        // full period (all same-direction crossings) returns to it
        gr.steps_per_map =
            stability == 'u' ? frame.boundary_steps_u : frame.boundary_steps_s;
        stretch = std::abs(stability == 'u' ? mu : 1.0 / mu);
        gr.seed_a = {seed->t, seed->alpha};
        gr.seed_b = {seed->t, seed->alpha * stretch};
    }
    return gr;
}

}  // namespace

LocalFrame local_eigenframe(const SectionSystem& sys, int patch, const ClosedGeodesic& g,
                            const FrameOptions& opt) {
    const SectionPatch& p = sys.patches[patch];
    const double L = p.length();
    LocalFrame fr;

    if (!g.floquet.hyperbolic())
        throw NonHyperbolicError("local_eigenframe: parent orbit is not hyperbolic");

    const PairChart chart = PairChart::make(sys, patch);

    // does gamma cross this patch pair's interior?
    FirstHitResult cross;
    try {
        HitOptions ho = opt.hit;
        ho.t_max = 2.0 * g.orbit.period + 1.0;
        cross = first_hit(sys, g.orbit.z0, +1, ho);
    } catch (const StepFailureError&) {
        cross.status = HitStatus::Timeout;
    }

    if (cross.status == HitStatus::Hit && chart.owns(cross.event.patch)) {
        // interior crossing: fixed point of the return map (one crossing per
        // period on our systems)
        fr.interior = true;
        const auto [s0, ae0] = chart.from_hit(cross.event);
        fr.t0 = s0;
        fr.alpha0 = ae0;
        if (std::abs(std::sin(fr.alpha0)) < 1e-6)
            throw NonTransversalIntersectionError(
                "local_eigenframe: orbit tangent to the patch");
        const double dt = 1e-7 * L, da = 1e-7;
        auto f = [&](double t, double a) {
            MapResult r = apply_map(chart, t, a, +1, opt.hit);
            if (!r.ok) throw NotClosedError("local_eigenframe: return map undefined");
            return std::pair<double, double>(lift_near(r.s, fr.t0, L),
                                             lift_near_p(r.ae, fr.alpha0, 2.0 * M_PI));
        };
        const auto [tp, ap] = f(fr.t0 + dt, fr.alpha0);
        const auto [tm, am] = f(fr.t0 - dt, fr.alpha0);
        const auto [tq, aq] = f(fr.t0, fr.alpha0 + da);
        const auto [tr_, ar] = f(fr.t0, fr.alpha0 - da);
        fr.jac[0][0] = (tp - tm) / (2 * dt);
        fr.jac[1][0] = (ap - am) / (2 * dt);
        fr.jac[0][1] = (tq - tr_) / (2 * da);
        fr.jac[1][1] = (aq - ar) / (2 * da);
        const double tr = fr.jac[0][0] + fr.jac[1][1];
        const double det = fr.jac[0][0] * fr.jac[1][1] - fr.jac[0][1] * fr.jac[1][0];
        const double disc = tr * tr - 4 * det;
        if (disc <= 0 || std::abs(tr) < 2.0 - opt.nonhyperbolic_margin)
            throw NonHyperbolicError("local_eigenframe: return map not hyperbolic");
        const double rt = std::sqrt(disc);
        const double mu1 = (tr > 0) ? 0.5 * (tr + rt) : 0.5 * (tr - rt);
        const double mu2 = det / mu1;
        fr.mu_u = std::abs(mu1) >= std::abs(mu2) ? mu1 : mu2;
        fr.mu_s = std::abs(mu1) >= std::abs(mu2) ? mu2 : mu1;
        auto eigvec = [&](double mu) {
            const Vec2 v1{fr.jac[0][1], mu - fr.jac[0][0]};
            const Vec2 v2{mu - fr.jac[1][1], fr.jac[1][0]};
            Vec2 v = (v1.norm() >= v2.norm()) ? v1 : v2;
            return v * (1.0 / v.norm());
        };
        fr.dir_u = eigvec(fr.mu_u);
        fr.dir_s = eigvec(fr.mu_s);
        const double delta = opt.delta_seed_scale * L;
        for (int sgn : {+1, -1})
            fr.seeds.push_back({fr.t0 + sgn * delta * fr.dir_u.x,
                                fr.alpha0 + sgn * delta * fr.dir_u.y, 'u', sgn});
        for (int sgn : {+1, -1})
            fr.seeds.push_back({fr.t0 + sgn * delta * fr.dir_s.x,
                                fr.alpha0 + sgn * delta * fr.dir_s.y, 's', sgn});
        return fr;
    }

    if (cross.status == HitStatus::BoundaryOrbitInput || p.base.get() == &g) {
        // boundary orbit: the branch germs attach at the E^u / E^s crossings
        // of the vertical (the boundary-map periodic points); each branch
        // enters the fiber torus through one signed side of the crossing
        fr.interior = false;
        BoundaryMapData bd = boundary_map(*sys.metric, g);
        std::vector<double> tu, ts;
        for (const auto& pp : bd.periodic_points)
            (pp.direction == 'u' ? tu : ts).push_back(pp.t);
        if (tu.empty()) tu.push_back(0.0);
        if (ts.empty()) ts.push_back(0.0);
        const double delta = opt.delta_seed_scale * L;
        fr.mu_u = std::exp(bd.Lambda_T);
        fr.mu_s = std::exp(-bd.Lambda_T);
        fr.boundary_steps_u = std::max(1, bd.crossings_unstable);
        fr.boundary_steps_s = std::max(1, bd.crossings_stable);
        fr.dir_u = {0.0, 1.0};
        fr.dir_s = {0.0, 1.0};
        fr.seeds.push_back({tu[0], +delta, 'u', +1});
        fr.seeds.push_back({tu[0], -delta, 'u', -1});
        fr.seeds.push_back({ts[0], +delta, 's', +1});
        fr.seeds.push_back({ts[0], -delta, 's', -1});
        return fr;
    }

    throw NonTransversalIntersectionError(
        "local_eigenframe: orbit does not meet the patch interior");
}

ManifoldBranch grow_branch(const SectionSystem& sys, int patch, const LocalFrame& frame,
                           char stability, int sign, const BranchOptions& opt) {
    const SectionPatch& p = sys.patches[patch];
    const double L = p.length();
    ManifoldBranch br;
    br.patch = patch;
    br.stability = stability;
    br.sign = sign;
    br.delta_max = opt.delta_max;
    br.phi_max = opt.phi_max;
    const double mu = stability == 'u' ? frame.mu_u : frame.mu_s;
    br.seed_mu = mu;

    BranchGrower gr = make_grower(sys, patch, frame, stability, sign, opt.hit);
    br.branch_period = gr.steps_per_map;
    constexpr double kSigmaFloor = 1e-14;
    constexpr double kJumpCap = 1.0;  // give up past this unresolvable gap
    const double reenter_tol = 1e-3 * L;

    auto push_point = [&](int level, double sigma, const MapResult& r) {
        BranchPoint bp;
        bp.level = level;
        bp.src_t = sigma;  // sigma rides in src_t; src_alpha unused
        bp.src_alpha = 0;
        if (br.pts.empty()) {
            bp.t = r.s;
            bp.alpha = r.ae;
        } else {
            bp.t = lift_near(r.s, br.pts.back().t, L);
            bp.alpha = lift_near_p(r.ae, br.pts.back().alpha, 2.0 * M_PI);
            const double seg = std::hypot(bp.t - br.pts.back().t,
                                          bp.alpha - br.pts.back().alpha);
            if (seg < 3e-4) return true;  // decimation floor: keep segments
                                          // long enough for stable tangents
            br.arclength += seg;
        }
        br.pts.push_back(bp);
        if (frame.interior && br.arclength > 1.0) {
            const double dfix = std::hypot(
                ParametricMetric::signed_mod(bp.t - frame.t0, L),
                ParametricMetric::signed_mod(bp.alpha - frame.alpha0, 2.0 * M_PI));
            if (dfix < reenter_tol) return false;  // closed up at the saddle
        }
        return br.arclength < opt.budget_arclength &&
               static_cast<int>(br.pts.size()) < opt.max_points;
    };

    // level 0: the seed segment itself
    for (int i = 0; i <= 12; ++i) {
        const double sigma = static_cast<double>(i) / 12.0;
        if (!push_point(0, sigma, gr.seed_point(sigma))) return br;
    }

    for (int level = 1; level < opt.max_levels; ++level) {
        // adaptive march over sigma in [0,1]: halve the step while the image
        // segment is longer than delta_max, drop the branch at unresolvable
        // stretches
        MapResult prev = gr.at(level, 0.0);
        if (!prev.ok) {
            ++br.exits;
            return br;
        }
        double prev_t = br.pts.empty() ? prev.s : lift_near(prev.s, br.pts.back().t, L);
        double prev_a = br.pts.empty() ? prev.ae
                                       : lift_near_p(prev.ae, br.pts.back().alpha, 2.0 * M_PI);
        if (!push_point(level, 0.0, prev)) return br;
        double step = 1.0 / 24.0;
        double sigma = 0.0;
        while (sigma < 1.0) {
            const double cand = std::min(1.0, sigma + step);
            MapResult cur = gr.at(level, cand);
            bool accept = false;
            if (cur.ok) {
                const double ct = lift_near(cur.s, prev_t, L);
                const double ca = lift_near_p(cur.ae, prev_a, 2.0 * M_PI);
                const double seg = std::hypot(ct - prev_t, ca - prev_a);
                if (seg <= opt.delta_max) {
                    accept = true;
                } else if (cand - sigma <= kSigmaFloor) {
                    if (seg > kJumpCap) return br;  // resolution exhausted
                    accept = true;
                }
            } else if (cand - sigma <= kSigmaFloor) {
                // the map is undefined arbitrarily close ahead: stop here
                ++br.exits;
                return br;
            }
            if (accept) {
                if (!push_point(level, cand, cur)) return br;
                prev = cur;
                prev_t = br.pts.back().t;
                prev_a = br.pts.back().alpha;
                sigma = cand;
                step = std::min(0.25, step * 1.9);
            } else {
                step *= 0.5;
            }
        }
    }
    return br;
}

namespace {

struct SegHit {
    bool ok = false;
    double s = 0, u = 0;  // parameters on the two segments
    double t = 0, alpha = 0;
    double angle = 0;
};

SegHit segment_cross(double a1t, double a1a, double a2t, double a2a, double b1t, double b1a,
                     double b2t, double b2a, double L) {
    SegHit h;
    // bring segment b next to segment a on the (t, alpha) torus
    const double amid = 0.5 * (a1t + a2t);
    const double bmid = 0.5 * (b1t + b2t);
    const double shift = ParametricMetric::signed_mod(bmid - amid, L) - (bmid - amid);
    b1t += shift;
    b2t += shift;
    const double amida = 0.5 * (a1a + a2a);
    const double bmida = 0.5 * (b1a + b2a);
    const double shifta =
        ParametricMetric::signed_mod(bmida - amida, 2.0 * M_PI) - (bmida - amida);
    b1a += shifta;
    b2a += shifta;
    const double d1t = a2t - a1t, d1a = a2a - a1a;
    const double d2t = b2t - b1t, d2a = b2a - b1a;
    const double den = d1t * d2a - d1a * d2t;
    if (std::abs(den) < 1e-18) return h;
    const double rt = b1t - a1t, ra = b1a - a1a;
    const double s = (rt * d2a - ra * d2t) / den;
    const double u = (rt * d1a - ra * d1t) / den;
    if (s < 0 || s > 1 || u < 0 || u > 1) return h;
    h.ok = true;
    h.s = s;
    h.u = u;
    h.t = a1t + s * d1t;
    h.alpha = a1a + s * d1a;
    const double ang = std::atan2(std::abs(den), d1t * d2t + d1a * d2a);
    h.angle = std::min(ang, M_PI - ang);
    return h;
}

SegHit cross_points(const BranchPoint& a1, const BranchPoint& a2, const BranchPoint& b1,
                    const BranchPoint& b2, double L) {
    return segment_cross(a1.t, a1.alpha, a2.t, a2.alpha, b1.t, b1.alpha, b2.t, b2.alpha, L);
}

}  // namespace

IntersectionSet find_intersections(const SectionSystem& sys, const ManifoldBranch& bu,
                                   const ManifoldBranch& bs, const IntersectOptions& opt) {
    IntersectionSet out;
    if (bu.patch != bs.patch)
        throw GeolabError("find_intersections: branches on different patches");
    const double L = sys.patches[bu.patch].length();

    // whole-polyline overlap: the branches coincide as sets (a connection),
    // so there is nothing to intersect
    if (!bu.pts.empty() && !bs.pts.empty()) {
        const double pab = branch_proximity(bu, bs, L);
        const double pba = branch_proximity(bs, bu, L);
        if (std::min(pab, pba) < 1e-6) {
            out.connection_candidates = 1;
            return out;
        }
    }

    // walk `ds` along a polyline from a point inside segment `seg`; returns
    // the end point and the distance actually covered (ends clamp)
    struct Walked {
        double t, a, covered;
    };
    auto walk = [&](const ManifoldBranch& br, std::size_t seg, double par, double ds) {
        double t = br.pts[seg].t + par * (br.pts[seg + 1].t - br.pts[seg].t);
        double a = br.pts[seg].alpha + par * (br.pts[seg + 1].alpha - br.pts[seg].alpha);
        const int dir = ds >= 0 ? +1 : -1;
        double left = std::abs(ds);
        std::size_t i = seg;
        while (left > 0) {
            const std::size_t j = dir > 0 ? i + 1 : i;
            if ((dir > 0 && j >= br.pts.size()) || (dir < 0 && i == 0)) break;
            const double et = dir > 0 ? br.pts[j].t : br.pts[i - 1].t;
            const double ea = dir > 0 ? br.pts[j].alpha : br.pts[i - 1].alpha;
            const double d = std::hypot(et - t, ea - a);
            if (d >= left) {
                t += (et - t) * left / d;
                a += (ea - a) * left / d;
                left = 0;
                break;
            }
            t = et;
            a = ea;
            left -= d;
            if (dir > 0)
                ++i;
            else
                --i;
        }
        return Walked{t, a, std::abs(ds) - left};
    };
    auto dist_to_branch = [&](double t, double a, const ManifoldBranch& br) {
        ManifoldBranch probe;
        BranchPoint bp;
        bp.t = t;
        bp.alpha = a;
        probe.pts.push_back(bp);
        return branch_proximity(probe, br, L);
    };
    // a genuine transversal crossing separates linearly along the branch; a
    // connection stays glued at the chord-sag level. The probe distance is
    // long enough that sag (~delta_max^2 * curvature) cannot mimic a real
    // angle above the tangency floor.
    auto is_connection = [&](std::size_t i, double s, std::size_t j, double u) {
        const double probe_ds = 0.1;
        const double glue = 3e-5;
        double worst = 0.0;
        int usable_a = 0, usable_b = 0;
        for (double ds : {probe_ds, -probe_ds}) {
            const Walked w = walk(bu, i, s, ds);
            if (w.covered < 0.8 * probe_ds) continue;
            ++usable_a;
            worst = std::max(worst, dist_to_branch(w.t, w.a, bs));
        }
        for (double ds : {probe_ds, -probe_ds}) {
            const Walked w = walk(bs, j, u, ds);
            if (w.covered < 0.8 * probe_ds) continue;
            ++usable_b;
            worst = std::max(worst, dist_to_branch(w.t, w.a, bu));
        }
        // crossings at a branch end cannot be told apart from the budget
        // artifact that created them: treat as unresolved
        if (usable_a == 0 || usable_b == 0) return true;
        return worst < glue;
    };

    // refinement by re-flying exact seed-line sources: sigma bisection on
    // whichever segment is longer, true-map evaluations throughout
    std::map<const ManifoldBranch*, BranchGrower> growers;
    auto eval = [&](const ManifoldBranch& br, int level, double sigma, double ref_t,
                    MapResult& out_r) -> bool {
        // reconstruct the grower lazily; branch points remember their seed
        // segment through the stored level-0 sigmas
        auto it = growers.find(&br);
        if (it == growers.end()) {
            BranchGrower gr;
            gr.chart = PairChart::make(sys, br.patch);
            gr.direction = br.stability == 'u' ? +1 : -1;
            gr.steps_per_map = br.branch_period == 2 ? 2 : 1;
            gr.hit = opt.hit;
            // seed segment endpoints are the sigma = 0 / 1 level-0 points
            const BranchPoint* s0 = nullptr;
            const BranchPoint* s1 = nullptr;
            for (const auto& bp : br.pts)
                if (bp.level == 0) {
                    if (!s0 || bp.src_t < s0->src_t) s0 = &bp;
                    if (!s1 || bp.src_t > s1->src_t) s1 = &bp;
                }
            if (!s0 || !s1 || s0 == s1) return false;
            gr.seed_a = {s0->t - (s0->src_t) * (s1->t - s0->t) / (s1->src_t - s0->src_t),
                         s0->alpha -
                             (s0->src_t) * (s1->alpha - s0->alpha) / (s1->src_t - s0->src_t)};
            gr.seed_b = {gr.seed_a.x + (s1->t - s0->t) / (s1->src_t - s0->src_t),
                         gr.seed_a.y + (s1->alpha - s0->alpha) / (s1->src_t - s0->src_t)};
            it = growers.emplace(&br, std::move(gr)).first;
        }
        MapResult r = it->second.at(level, sigma);
        if (!r.ok) return false;
        out_r = r;
        out_r.s = lift_near(r.s, ref_t, L);
        return true;
    };

    auto refine_pair = [&](std::size_t i, std::size_t j, SegHit h) -> SegHit {
        BranchPoint a1 = bu.pts[i], a2 = bu.pts[i + 1];
        BranchPoint b1 = bs.pts[j], b2 = bs.pts[j + 1];
        for (int it = 0; it < 60; ++it) {
            const double la = std::hypot(a2.t - a1.t, a2.alpha - a1.alpha);
            const double lb = std::hypot(b2.t - b1.t, b2.alpha - b1.alpha);
            if (std::max(la, lb) < opt.refine_tol) break;
            const bool refine_a = la >= lb;
            BranchPoint& x1 = refine_a ? a1 : b1;
            BranchPoint& x2 = refine_a ? a2 : b2;
            const ManifoldBranch& br = refine_a ? bu : bs;
            if (x1.level != x2.level || std::abs(x2.src_t - x1.src_t) < 1e-15) break;
            const double sm = 0.5 * (x1.src_t + x2.src_t);
            MapResult r;
            if (!eval(br, x1.level, sm, x1.t, r)) break;
            BranchPoint mid;
            mid.t = r.s;
            mid.alpha = lift_near_p(r.ae, 0.5 * (x1.alpha + x2.alpha), 2.0 * M_PI);
            mid.level = x1.level;
            mid.src_t = sm;
            const double par = refine_a ? h.s : h.u;
            if (par < 0.5)
                x2 = mid;
            else
                x1 = mid;
            SegHit h2 = cross_points(a1, a2, b1, b2, L);
            if (!h2.ok) break;
            h = h2;
        }
        return h;
    };

    for (std::size_t i = 0; i + 1 < bu.pts.size(); ++i) {
        if (bu.pts[i].level == 0 || bu.pts[i + 1].level == 0) continue;  // seed stub
        for (std::size_t j = 0; j + 1 < bs.pts.size(); ++j) {
            if (bs.pts[j].level == 0 || bs.pts[j + 1].level == 0) continue;
            SegHit h = cross_points(bu.pts[i], bu.pts[i + 1], bs.pts[j], bs.pts[j + 1], L);
            if (!h.ok) continue;
            // angles below ~1e-4 sit under the polyline tangent noise floor
            // and cannot be certified transversal
            if (h.angle < std::max(kAngleFloor, 1e-4) || is_connection(i, h.s, j, h.u)) {
                ++out.connection_candidates;
                continue;
            }
            SegHit r = refine_pair(i, j, h);
            if (!r.ok) r = h;
            if (r.angle < std::max(kAngleFloor, 1e-4)) {
                ++out.connection_candidates;
                continue;
            }
            // too close to a boundary circle: the chart degenerates and the
            // polylines carry corner-scale curvature there
            if (std::abs(std::remainder(r.alpha, M_PI)) < 5e-3) continue;
            HomoclinicPoint hp;
            hp.t = wrap_t(r.t, L);
            hp.alpha = r.alpha;
            hp.angle = r.angle;
            hp.transversal = r.angle > kAngleFloor;
            out.points.push_back(hp);
        }
    }
    // deduplicate refined points that came from adjacent segment pairs
    std::sort(out.points.begin(), out.points.end(),
              [](const HomoclinicPoint& a, const HomoclinicPoint& b) {
                  return a.t < b.t || (a.t == b.t && a.alpha < b.alpha);
              });
    std::vector<HomoclinicPoint> dedup;
    for (const auto& hp : out.points) {
        bool dup = false;
        for (const auto& q : dedup)
            if (std::abs(ParametricMetric::signed_mod(q.t - hp.t, L)) < 1e-6 &&
                std::abs(q.alpha - hp.alpha) < 1e-6)
                dup = true;
        if (!dup) dedup.push_back(hp);
    }
    out.points = std::move(dedup);
    return out;
}

double branch_proximity(const ManifoldBranch& a, const ManifoldBranch& b, double period_t) {
    if (a.pts.empty() || b.pts.empty()) return std::numeric_limits<double>::infinity();
    double worst = 0;
    for (std::size_t i = 0; i < a.pts.size(); ++i) {
        const double at = a.pts[i].t, aa = a.pts[i].alpha;
        double best = 1e300;
        for (std::size_t j = 0; j + 1 < b.pts.size(); ++j) {
            double b1t = b.pts[j].t, b2t = b.pts[j + 1].t;
            double b1a = b.pts[j].alpha, b2a = b.pts[j + 1].alpha;
            const double shift =
                ParametricMetric::signed_mod(0.5 * (b1t + b2t) - at, period_t) -
                (0.5 * (b1t + b2t) - at);
            b1t += shift;
            b2t += shift;
            const double shifta =
                ParametricMetric::signed_mod(0.5 * (b1a + b2a) - aa, 2.0 * M_PI) -
                (0.5 * (b1a + b2a) - aa);
            b1a += shifta;
            b2a += shifta;
            const double dt = b2t - b1t, da = b2a - b1a;
            const double ss = dt * dt + da * da;
            double tau = 0;
            if (ss > 0)
                tau = std::clamp(((at - b1t) * dt + (aa - b1a) * da) / ss, 0.0, 1.0);
            const double px = b1t + tau * dt - at;
            const double py = b1a + tau * da - aa;
            best = std::min(best, std::hypot(px, py));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

SeparatrixReport separatrix_report(const SectionSystem& sys, int patch,
                                   const ClosedGeodesic& g, const ReportOptions& opt) {
    SeparatrixReport rep;
    LocalFrame fr = local_eigenframe(sys, patch, g, opt.frame);
    const char stab[4] = {'u', 'u', 's', 's'};
    const int sgn[4] = {+1, -1, +1, -1};
    for (int i = 0; i < 4; ++i)
        rep.branches[i] = grow_branch(sys, patch, fr, stab[i], sgn[i], opt.branch);

    rep.min_angle = std::numeric_limits<double>::infinity();
    const double L = sys.patches[patch].length();
    CurveGeometry orbit_geom(*sys.metric, g, 256);
    for (int iu = 0; iu < 2; ++iu) {
        for (int is = 2; is < 4; ++is) {
            IntersectionSet set =
                find_intersections(sys, rep.branches[iu], rep.branches[is], opt.intersect);
            rep.connection_candidates += set.connection_candidates;
            for (auto hp : set.points) {
                hp.u_branch = iu;
                hp.s_branch = is;
                // exclude crossings at the saddle itself
                if (fr.interior) {
                    const double dt = ParametricMetric::signed_mod(hp.t - fr.t0, L);
                    const double da =
                        ParametricMetric::signed_mod(hp.alpha - fr.alpha0, 2.0 * M_PI);
                    if (std::hypot(dt, da) < opt.intersect.min_fixed_point_distance)
                        continue;
                }
                if (opt.validate_convergence) {
                    // a refined point carries ~1e-8 manifold error which the
                    // hyperbolicity re-amplifies; check the approach inside
                    // the shadowing window rather than at a far horizon
                    const PairChart vchart = PairChart::make(sys, patch);
                    const UnitTangentState z = vchart.lift(wrap_t(hp.t, L), hp.alpha);
                    const ParametricMetric& m = *sys.metric;
                    auto dist_to_orbit = [&](const UnitTangentState& s) {
                        const auto nr = orbit_geom.nearest(m.wrap(s.q));
                        const UnitTangentState on = orbit_geom.state_at(nr.s);
                        const Vec2 dq = m.wrapped_diff(s.q, on.q);
                        const Vec2 dv = s.w - on.w;
                        const Vec2 dvn = s.w + on.w;
                        return std::sqrt(dq.x * dq.x + dq.y * dq.y +
                                         std::min(dv.x * dv.x + dv.y * dv.y,
                                                  dvn.x * dvn.x + dvn.y * dvn.y));
                    };
                    // the flown point tracks the true homoclinic while the
                    // manifold error (~1e-8) re-amplifies; require a close
                    // approach at some checkpoint inside that window
                    bool ok = true;
                    try {
                        FlowOptions fo;
                        fo.tol = 1e-10;
                        const double T = g.orbit.period;
                        auto fwd = integrate_geodesic(m, z, 4.0 * T, fo);
                        auto bwd = integrate_geodesic(m, z, -4.0 * T, fo);
                        double bf = 1e300, bb = 1e300;
                        for (int k = 1; k <= 4; ++k) {
                            bf = std::min(bf, dist_to_orbit(fwd.state_at(k * T)));
                            bb = std::min(bb, dist_to_orbit(bwd.state_at(-k * T)));
                        }
                        ok = bf < 0.05 && bb < 0.05;
                    } catch (const StepFailureError&) {
                        ok = false;
                    }
                    hp.converges = ok;
                } else {
                    hp.converges = true;
                }
                rep.points.push_back(hp);
                if (hp.transversal && hp.converges) {
                    ++rep.counts[iu];
                    ++rep.counts[is];
                    rep.min_angle = std::min(rep.min_angle, hp.angle);
                }
            }
        }
    }
    // closure-proximity proxy: exclude the seed stubs and the saddle germ,
    // where the four branches trivially separate along their eigenlines
    auto filtered = [&](const ManifoldBranch& b) {
        ManifoldBranch f = b;
        f.pts.clear();
        for (const auto& bp : b.pts) {
            if (bp.level == 0) continue;
            if (fr.interior) {
                const double dt = ParametricMetric::signed_mod(bp.t - fr.t0, L);
                const double da =
                    ParametricMetric::signed_mod(bp.alpha - fr.alpha0, 2.0 * M_PI);
                if (std::hypot(dt, da) < 0.02) continue;
            } else if (std::abs(std::remainder(bp.alpha, M_PI)) < 0.02) {
                continue;
            }
            f.pts.push_back(bp);
        }
        return f;
    };
    std::array<ManifoldBranch, 4> trimmed;
    for (int i = 0; i < 4; ++i) trimmed[i] = filtered(rep.branches[i]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            rep.proximity[i][j] =
                i == j ? 0.0 : branch_proximity(trimmed[i], rep.branches[j], L);
    // closure proxy: one-sided distance to the union of the two
    // opposite-stability branches (pointwise minimum over the pair)
    for (int i = 0; i < 4; ++i) {
        const ManifoldBranch& oa = rep.branches[i < 2 ? 2 : 0];
        const ManifoldBranch& ob = rep.branches[i < 2 ? 3 : 1];
        double worst = 0.0;
        for (const auto& bp : trimmed[i].pts) {
            ManifoldBranch probe;
            probe.pts = {bp};
            worst = std::max(worst, std::min(branch_proximity(probe, oa, L),
                                             branch_proximity(probe, ob, L)));
        }
        rep.closure_proxy[i] = trimmed[i].pts.empty() ? 0.0 : worst;
    }
    return rep;
}

std::vector<double> lambda_lemma_proxy(const SectionSystem& sys, int patch,
                                       const LocalFrame& frame, const HomoclinicPoint& h,
                                       int k_max, const BranchOptions& opt) {
    // accumulation form of the lambda-lemma: the union of the first k images
    // of a short arc through the homoclinic point blankets the local
    // unstable branch; the one-sided Hausdorff distance from the local piece
    // into that union is non-increasing and must become small
    const double L = sys.patches[patch].length();
    const double arc_len = 5e-4 * L;
    ManifoldBranch local_u;
    {
        BranchOptions bo = opt;
        bo.budget_arclength = 1.0;
        bo.max_levels = 6;
        local_u = grow_branch(sys, patch, frame, 'u', +1, bo);
        ManifoldBranch other = grow_branch(sys, patch, frame, 'u', -1, bo);
        // keep points inside a box around the saddle, away from the stub
        ManifoldBranch keep;
        auto take = [&](const ManifoldBranch& b) {
            for (const auto& bp : b.pts) {
                if (bp.level == 0) continue;
                const double dt = ParametricMetric::signed_mod(bp.t - frame.t0, L);
                const double da =
                    ParametricMetric::signed_mod(bp.alpha - frame.alpha0, 2.0 * M_PI);
                if (std::hypot(dt, da) < 0.5) keep.pts.push_back(bp);
            }
        };
        take(local_u);
        take(other);
        local_u = keep;
    }

    const int npts = 41;
    std::vector<BranchPoint> arc(npts);
    for (int i = 0; i < npts; ++i) {
        const double s = (i - (npts - 1) / 2.0) / ((npts - 1) / 2.0);
        arc[i].t = h.t + s * arc_len * frame.dir_u.x;
        arc[i].alpha = h.alpha + s * arc_len * frame.dir_u.y;
    }
    const PairChart chart = PairChart::make(sys, patch);
    std::vector<ManifoldBranch> images;
    std::vector<double> dists;
    for (int k = 1; k <= k_max; ++k) {
        std::vector<BranchPoint> next;
        for (const auto& bp : arc) {
            MapResult r = apply_map(chart, wrap_t(bp.t, L), bp.alpha, +1, opt.hit);
            if (!r.ok) continue;
            BranchPoint nb;
            nb.t = next.empty() ? r.s : lift_near(r.s, next.back().t, L);
            nb.alpha = next.empty() ? r.ae : lift_near_p(r.ae, next.back().alpha, 2.0 * M_PI);
            next.push_back(nb);
        }
        arc = next;
        ManifoldBranch image;
        image.pts = std::move(next);
        images.push_back(std::move(image));
        double worst = 0.0;
        for (const auto& bp : local_u.pts) {
            ManifoldBranch probe;
            probe.pts = {bp};
            double best = std::numeric_limits<double>::infinity();
            for (const auto& im : images)
                best = std::min(best, branch_proximity(probe, im, L));
            worst = std::max(worst, best);
        }
        dists.push_back(local_u.pts.empty() ? 0.0 : worst);
        if (arc.empty()) break;
    }
    return dists;
}

}  // namespace geolab
