#include "geolab/curves.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace geolab {

namespace {

constexpr double kGl3x[3] = {-0.774596669241483377, 0.0, 0.774596669241483377};
constexpr double kGl3w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

double segment_length(const ParametricMetric& m, const Vec2& p, const Vec2& q) {
    const Vec2 d = q - p;
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double s = 0.5 + 0.5 * kGl3x[k];
        const Vec2 x = p + s * d;
        acc += 0.5 * kGl3w[k] * m.speed(x, d);
    }
    return acc;
}

/// Geodesic midpoint of two nearby points, third-order accurate:
/// (p+q)/2 + Gamma(d,d)/8 with d = q - p, evaluated at the chord midpoint.
Vec2 geodesic_midpoint(const ParametricMetric& m, const Vec2& p, const Vec2& q) {
    const Vec2 d = q - p;
    const Vec2 mid = 0.5 * (p + q);
    const Christoffel c = m.christoffel_raw(mid);
    const double gu = c.uuu * d.x * d.x + 2 * c.uuv * d.x * d.y + c.uvv * d.y * d.y;
    const double gv = c.vuu * d.x * d.x + 2 * c.vuv * d.x * d.y + c.vvv * d.y * d.y;
    return mid + Vec2{gu / 8.0, gv / 8.0};
}

bool segments_intersect(const Vec2& a1, const Vec2& a2, const Vec2& b1, const Vec2& b2) {
    const Vec2 da = a2 - a1, db = b2 - b1;
    const double den = cross2(da, db);
    if (std::abs(den) < 1e-15) return false;
    const Vec2 d = b1 - a1;
    const double s = cross2(d, db) / den;
    const double t = cross2(d, da) / den;
    const double e = 1e-12;
    return s > e && s < 1 - e && t > e && t < 1 - e;
}

}  // namespace

double ClosedCurve::length(const ParametricMetric& m) const {
    double L = 0.0;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) L += segment_length(m, vertex(i), vertex(i + 1));
    return L;
}

double ClosedCurve::diameter() const {
    // lifted bounding-box diagonal; collapse detection only needs a proxy
    double ulo = pts[0].x, uhi = pts[0].x, vlo = pts[0].y, vhi = pts[0].y;
    for (const Vec2& p : pts) {
        ulo = std::min(ulo, p.x);
        uhi = std::max(uhi, p.x);
        vlo = std::min(vlo, p.y);
        vhi = std::max(vhi, p.y);
    }
    return std::hypot(uhi - ulo, vhi - vlo);
}

bool ClosedCurve::is_simple(const ParametricMetric& m) const {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a1 = vertex(i), a2 = vertex(i + 1);
        const Vec2 amid = 0.5 * (a1 + a2);
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;  // adjacent around the seam
            Vec2 b1 = vertex(j), b2 = vertex(j + 1);
            // bring segment j to the lattice copy nearest segment i
            const Vec2 bmid = 0.5 * (b1 + b2);
            const Vec2 shift = m.wrapped_diff(bmid, amid) - (bmid - amid);
            b1 = b1 + shift;
            b2 = b2 + shift;
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

ClosedCurve seed_loop(const ParametricMetric& m, WindingPair cls, Vec2 anchor, int n) {
    ClosedCurve c;
    c.winding = cls;
    c.closure_offset = {cls.q * (m.periodic_u ? m.domain.period_u() : 0.0),
                        cls.p * (m.periodic_v ? m.domain.period_v() : 0.0)};
    c.pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double s = static_cast<double>(i) / n;
        c.pts.push_back(anchor + s * c.closure_offset);
    }
    return c;
}

ClosedCurve parallel_circle(const ParametricMetric& m, double u, int n) {
    return seed_loop(m, WindingPair{1, 0}, {u, m.domain.v0}, n);
}

ClosedCurve meridian_circle(const ParametricMetric& m, double v, int n) {
    return seed_loop(m, WindingPair{0, 1}, {m.domain.u0, v}, n);
}

ClosedCurve small_circle(const ParametricMetric& m, Vec2 center, double rad, int n) {
    (void)m;
    ClosedCurve c;
    c.winding = WindingPair{0, 0};
    c.closure_offset = {0, 0};
    c.pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * M_PI * i / n;
        c.pts.push_back(center + Vec2{rad * std::cos(a), rad * std::sin(a)});
    }
    return c;
}

Region band_region_u(const ParametricMetric& m, double u_lo, double u_hi,
                     const std::string& name) {
    Region r;
    r.name = name;
    r.is_band_u = true;
    r.u_lo = u_lo;
    r.u_hi = u_hi;
    const ParametricMetric* mp = &m;
    if (m.periodic_u) {
        // bands may straddle the chart seam
        const double width = u_hi - u_lo;
        const double period = m.domain.period_u();
        r.inside = [mp, u_lo, width, period](const Vec2& p) {
            const double x = ParametricMetric::positive_mod(p.x - u_lo, period);
            return x > 0 && x < width;
        };
    } else {
        r.inside = [mp, u_lo, u_hi](const Vec2& p) {
            const Vec2 q = mp->wrap(p);
            return q.x > u_lo && q.x < u_hi;
        };
    }
    return r;
}

// ---- shortening ----

namespace {

ClosedCurve resample_uniform(const ParametricMetric& m, const ClosedCurve& c) {
    const std::size_t n = c.pts.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        cum[i + 1] = cum[i] + segment_length(m, c.vertex(i), c.vertex(i + 1));
    const double L = cum[n];
    ClosedCurve out = c;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double target = L * i / n;
        while (k + 1 < n && cum[k + 1] < target) ++k;
        const double seg = cum[k + 1] - cum[k];
        const double s = seg > 0 ? (target - cum[k]) / seg : 0.0;
        out.pts[i] = c.vertex(k) + s * (c.vertex(k + 1) - c.vertex(k));
    }
    return out;
}

}  // namespace

ShortenResult shorten_curve(const ParametricMetric& m, const ClosedCurve& c,
                            const ShortenOptions& opt) {
    if (!c.is_simple(m)) throw LostSimplicityError("shorten_curve: seed is not simple");
    ShortenResult res;
    res.curve = c;
    double L = res.curve.length(m);
    res.lengths.push_back(L);

    for (int step = 0; step < opt.max_steps; ++step) {
        ClosedCurve cand = res.curve;
        const std::size_t n = cand.pts.size();
        for (int parity = 0; parity < 2; ++parity) {
            for (std::size_t i = parity; i < n; i += 2) {
                const Vec2 prev = (i == 0) ? cand.vertex(n - 1) - cand.closure_offset
                                           : cand.pts[i - 1];
                const Vec2 next = cand.vertex(i + 1);
                Vec2 mid = geodesic_midpoint(m, prev, next);
                if (opt.region && !opt.region->inside(m.wrap(mid))) continue;
                cand.pts[i] = mid;
            }
        }
        if (opt.resample_every > 0 && (step + 1) % opt.resample_every == 0) {
            ClosedCurve rs = resample_uniform(m, cand);
            if (rs.length(m) <= cand.length(m)) cand = rs;
        }
        const double Lnew = cand.length(m);
        if (Lnew > L) {  // stationary to discretization accuracy
            res.status = ShortenStatus::Converged;
            return res;
        }
        res.curve = cand;
        res.lengths.push_back(Lnew);
        const double drop = L - Lnew;
        L = Lnew;

        if (res.curve.winding.contractible() && res.curve.diameter() < opt.collapse_diameter) {
            res.status = ShortenStatus::Collapsed;
            return res;
        }
        if ((step + 1) % 16 == 0 && !res.curve.is_simple(m))
            throw LostSimplicityError("shorten_curve: self-intersection (resolution?)");
        if (drop < opt.stop_tol) {
            res.status = ShortenStatus::Converged;
            return res;
        }
    }
    res.status = ShortenStatus::MaxSteps;
    return res;
}

// ---- curve geometry ----

CurveGeometry::CurveGeometry(const ParametricMetric& m, const ClosedGeodesic& g, int n) {
    build(m, g.orbit, n);
}

CurveGeometry::CurveGeometry(const ParametricMetric& m, const OrbitCandidate& orbit, int n) {
    build(m, orbit, n);
}

void CurveGeometry::build(const ParametricMetric& m, const OrbitCandidate& orbit, int n) {
    m_ = &m;
    L_ = orbit.period;
    FlowOptions fo;
    fo.tol = 1e-12;
    GeodesicTrajectory tr = integrate_geodesic(m, orbit.z0, orbit.period, fo);
    s_.resize(n);
    p_.resize(n);
    tn_.resize(n);
    for (int i = 0; i < n; ++i) {
        const double s = L_ * i / n;
        const UnitTangentState st = tr.state_at(s);
        s_[i] = s;
        p_[i] = m.wrap(st.q);
        tn_[i] = st.w;
    }
    const UnitTangentState end = tr.state_at(L_);
    closes_ = phase_distance(m, end, orbit.z0) < 1e-6;
    u_min_ = u_max_ = p_[0].x;
    v_min_ = v_max_ = p_[0].y;
    for (const Vec2& q : p_) {
        u_min_ = std::min(u_min_, q.x);
        u_max_ = std::max(u_max_, q.x);
        v_min_ = std::min(v_min_, q.y);
        v_max_ = std::max(v_max_, q.y);
    }
    band_valid_ = true;
}

namespace {
// Catmull-Rom weights for parameter f in [0,1]
inline void catmull_rom(double f, double w[4]) {
    const double f2 = f * f, f3 = f2 * f;
    w[0] = -0.5 * f3 + f2 - 0.5 * f;
    w[1] = 1.5 * f3 - 2.5 * f2 + 1.0;
    w[2] = -1.5 * f3 + 2.0 * f2 + 0.5 * f;
    w[3] = 0.5 * f3 - 0.5 * f2;
}
}  // namespace

Vec2 CurveGeometry::point_at(double s) const {
    const int n = static_cast<int>(p_.size());
    double sm = ParametricMetric::positive_mod(s, L_);
    const double x = sm / L_ * n;
    int i = std::min(n - 1, static_cast<int>(x));
    const double f = x - i;
    // unwrap the 4-point stencil around p_[i]
    const Vec2 base = p_[i];
    Vec2 st[4];
    for (int k = -1; k <= 2; ++k) {
        const Vec2 q = p_[((i + k) % n + n) % n];
        st[k + 1] = base + m_->wrapped_diff(q, base);
    }
    double w[4];
    catmull_rom(f, w);
    Vec2 out{0, 0};
    for (int k = 0; k < 4; ++k) out = out + w[k] * st[k];
    return m_->wrap(out);
}

Vec2 CurveGeometry::tangent_at(double s) const {
    const int n = static_cast<int>(p_.size());
    double sm = ParametricMetric::positive_mod(s, L_);
    const double x = sm / L_ * n;
    int i = std::min(n - 1, static_cast<int>(x));
    const double f = x - i;
    double w[4];
    catmull_rom(f, w);
    Vec2 t{0, 0};
    for (int k = -1; k <= 2; ++k) t = t + w[k + 1] * tn_[((i + k) % n + n) % n];
    const Vec2 q = point_at(s);
    const double sp = m_->speed(q, t);
    return t * (1.0 / sp);
}

CurveGeometry::Near CurveGeometry::nearest(const Vec2& q, double s_hint) const {
    const int n = static_cast<int>(p_.size());
    int best = 0;
    if (s_hint >= 0) {
        int i = static_cast<int>(ParametricMetric::positive_mod(s_hint, L_) / L_ * n) % n;
        // local descent around the hint
        auto d2 = [&](int k) {
            const Vec2 d = m_->wrapped_diff(q, p_[(k % n + n) % n]);
            return d.x * d.x + d.y * d.y;
        };
        double di = d2(i);
        for (int it = 0; it < n; ++it) {
            const double dl = d2(i - 1), dr = d2(i + 1);
            if (dl < di && dl <= dr) {
                i = (i - 1 + n) % n;
                di = dl;
            } else if (dr < di) {
                i = (i + 1) % n;
                di = dr;
            } else {
                break;
            }
        }
        best = i;
    } else {
        double bd = 1e300;
        for (int i = 0; i < n; ++i) {
            const Vec2 d = m_->wrapped_diff(q, p_[i]);
            const double dd = d.x * d.x + d.y * d.y;
            if (dd < bd) {
                bd = dd;
                best = i;
            }
        }
    }
    Near out;
    double bestd = 1e300;
    for (int off = -1; off <= 0; ++off) {
        const int i = (best + off + n) % n;
        const Vec2 a = p_[i];
        const Vec2 seg = m_->wrapped_diff(p_[(i + 1) % n], a);
        const Vec2 d = m_->wrapped_diff(q, a);
        const double ss = seg.x * seg.x + seg.y * seg.y;
        const double tau = ss > 0 ? std::clamp(dot2(d, seg) / ss, 0.0, 1.0) : 0.0;
        const Vec2 offv = d - tau * seg;
        const double dist = offv.norm();
        if (dist < bestd) {
            bestd = dist;
            out.s = s_[i] + tau * (L_ / n);
        }
    }
    // polish the foot point on the interpolated curve (chart-orthogonal
    // projection; time coordinates need better than polyline accuracy)
    double s = out.s;
    for (int it = 0; it < 3; ++it) {
        const Vec2 pc = point_at(s);
        const Vec2 tc = tangent_at(s);
        const Vec2 d = m_->wrapped_diff(q, pc);
        const double tnorm = tc.norm();
        s += dot2(d, tc) / (tnorm * tnorm);
    }
    s = ParametricMetric::positive_mod(s, L_);
    const Vec2 pc = point_at(s);
    const Vec2 tc = tangent_at(s);
    const Vec2 offv = m_->wrapped_diff(q, pc);
    out.s = s;
    out.foot = pc;
    out.dist = offv.norm();
    out.offset = (cross2(tc, offv) >= 0 ? 1.0 : -1.0) * out.dist;
    return out;
}

double CurveGeometry::band_distance(const Vec2& qin) const {
    if (!band_valid_) return 0.0;
    const Vec2 q = m_->wrap(qin);
    auto axis_dist = [&](double x, double lo, double hi, double period, bool periodic) {
        const double span = hi - lo;
        if (periodic && span > 0.9 * period) return 0.0;
        const double c = 0.5 * (lo + hi), w = 0.5 * span;
        double d = x - c;
        if (periodic) d = ParametricMetric::signed_mod(d, period);
        return std::max(0.0, std::abs(d) - w);
    };
    const double du = axis_dist(q.x, u_min_, u_max_, m_->domain.period_u(), m_->periodic_u);
    const double dv = axis_dist(q.y, v_min_, v_max_, m_->domain.period_v(), m_->periodic_v);
    return std::max(du, dv);
}

// ---- closed-geodesic polishing ----

namespace {

/// Gaussian elimination with partial pivoting; near-singular pivots are
/// inflated so that degenerate orbit families (rotational meridians) still
/// converge onto one member.
std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b, int n) {
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(A[i * n + k]) > std::abs(A[piv * n + k])) piv = i;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A[k * n + j], A[piv * n + j]);
            std::swap(b[k], b[piv]);
        }
        if (std::abs(A[k * n + k]) < 1e-12) A[k * n + k] += (A[k * n + k] >= 0 ? 1e-12 : -1e-12);
        for (int i = k + 1; i < n; ++i) {
            const double f = A[i * n + k] / A[k * n + k];
            if (f == 0.0) continue;
            for (int j = k; j < n; ++j) A[i * n + j] -= f * A[k * n + j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= A[i * n + j] * x[j];
        x[i] = s / A[i * n + i];
    }
    return x;
}

struct ShootNode {
    double u, v, phi;  // chart point + direction angle in the orthonormal frame
};

/// Multiple-shooting Newton on the closure defect. Nodes are phase points
/// along the loop; each segment is flown T/M and matched to the next node.
/// One coordinate of node 0 is frozen as the phase condition.
struct MultipleShooting {
    const ParametricMetric& m;
    std::vector<ShootNode> nodes;
    double T;
    double flow_tol;

    UnitTangentState node_state(const ShootNode& nd) const {
        return state_from_angle(m, {nd.u, nd.v}, nd.phi);
    }

    ShootNode fly(const ShootNode& nd, double tau) const {
        FlowOptions fo;
        fo.tol = flow_tol;
        auto tr = integrate_geodesic(m, node_state(nd), tau, fo);
        const UnitTangentState e = tr.state_at(tau);
        return {e.q.x, e.q.y, m.angle_of(e.q, e.w)};
    }

    // wrapped residual between a flown endpoint and the next node
    std::array<double, 3> gap(const ShootNode& end, const ShootNode& next) const {
        std::array<double, 3> r;
        r[0] = m.periodic_u ? ParametricMetric::signed_mod(end.u - next.u, m.domain.period_u())
                            : end.u - next.u;
        r[1] = m.periodic_v ? ParametricMetric::signed_mod(end.v - next.v, m.domain.period_v())
                            : end.v - next.v;
        r[2] = std::remainder(end.phi - next.phi, 2.0 * M_PI);
        return r;
    }

    /// Solve; returns the final residual norm.
    double run(int max_iter, double tol) {
        const int M = static_cast<int>(nodes.size());
        // phase condition: freeze the faster-moving chart coordinate of node 0
        const UnitTangentState s0 = node_state(nodes[0]);
        const int frozen = (std::abs(s0.w.y) >= std::abs(s0.w.x)) ? 1 : 0;

        const int nunk = 3 * M;  // (3M - 1) node coords + T
        auto pack_index = [&](int node, int comp) {
            // comp: 0=u,1=v,2=phi; the frozen coord of node 0 is skipped
            int idx = 3 * node + comp;
            const int skip = frozen;  // position of the frozen unknown
            if (idx == skip) return -1;
            return idx > skip ? idx - 1 : idx;
        };
        double err = 1e300;
        for (int it = 0; it < max_iter; ++it) {
            const double tau = T / M;
            std::vector<ShootNode> ends(M);
            for (int i = 0; i < M; ++i) ends[i] = fly(nodes[i], tau);
            std::vector<double> r(3 * M);
            for (int i = 0; i < M; ++i) {
                const auto g = gap(ends[i], nodes[(i + 1) % M]);
                r[3 * i + 0] = g[0];
                r[3 * i + 1] = g[1];
                r[3 * i + 2] = g[2];
            }
            err = 0;
            for (double x : r) err = std::max(err, std::abs(x));
            if (err < tol) return err;

            std::vector<double> J(9 * M * M, 0.0);
            auto set = [&](int row, int col, double val) {
                if (col >= 0) J[row * nunk + col] += val;
            };
            // columns for node unknowns
            for (int i = 0; i < M; ++i) {
                for (int comp = 0; comp < 3; ++comp) {
                    const int col = pack_index(i, comp);
                    // effect through the flow on rows 3i..3i+2
                    if (col >= 0) {
                        const double d = comp == 2 ? 1e-7 : 1e-7;
                        ShootNode pert = nodes[i];
                        if (comp == 0) pert.u += d;
                        if (comp == 1) pert.v += d;
                        if (comp == 2) pert.phi += d;
                        const ShootNode pe = fly(pert, tau);
                        set(3 * i + 0, col, (pe.u - ends[i].u) / d);
                        set(3 * i + 1, col, (pe.v - ends[i].v) / d);
                        set(3 * i + 2, col,
                            std::remainder(pe.phi - ends[i].phi, 2.0 * M_PI) / d);
                    }
                    // linear effect as the subtracted target on rows of segment i-1
                    const int prev = (i + M - 1) % M;
                    set(3 * prev + comp, col, -1.0);
                }
            }
            // T column: dr_i/dT = (1/M) * d(flow)/dtau at the endpoint
            const int tcol = nunk - 1;
            for (int i = 0; i < M; ++i) {
                const UnitTangentState es = node_state(ends[i]);
                const Christoffel c = m.christoffel_raw(es.q);
                const double du = es.w.x, dv = es.w.y;
                const double ddu = -(c.uuu * du * du + 2 * c.uuv * du * dv + c.uvv * dv * dv);
                const double ddv = -(c.vuu * du * du + 2 * c.vuv * du * dv + c.vvv * dv * dv);
                // dphi/dt along the orbit, from the frame rotation
                const double dphi = [&] {
                    const double h = 1e-6;
                    const ShootNode ahead = fly(ends[i], h);
                    return std::remainder(ahead.phi - ends[i].phi, 2.0 * M_PI) / h;
                }();
                J[(3 * i + 0) * nunk + tcol] = du / M;
                J[(3 * i + 1) * nunk + tcol] = dv / M;
                J[(3 * i + 2) * nunk + tcol] = dphi / M;
                (void)ddu;
                (void)ddv;
            }
            std::vector<double> rhs(3 * M);
            for (int i = 0; i < 3 * M; ++i) rhs[i] = -r[i];
            const std::vector<double> dx = solve_dense(J, rhs, nunk);
            // apply with a trust cap
            double nrm = 0;
            for (double x : dx) nrm = std::max(nrm, std::abs(x));
            const double scale = nrm > 0.25 ? 0.25 / nrm : 1.0;
            for (int i = 0; i < M; ++i) {
                for (int comp = 0; comp < 3; ++comp) {
                    const int col = pack_index(i, comp);
                    if (col < 0) continue;
                    const double step = scale * dx[col];
                    if (comp == 0) nodes[i].u += step;
                    if (comp == 1) nodes[i].v += step;
                    if (comp == 2) nodes[i].phi += step;
                }
            }
            T += scale * dx[tcol];
            if (T <= 0) throw NotClosedError("polish: period collapsed during Newton");
        }
        return err;
    }
};

ClosedGeodesic certify(const ParametricMetric& m, const OrbitCandidate& orbit,
                       const WaistOptions& opt) {
    ClosedGeodesic g;
    g.orbit = orbit;
    {
        FlowOptions fo;
        fo.tol = opt.flow_tol;
        auto tr = integrate_geodesic(m, orbit.z0, orbit.period, fo);
        g.closure_error = phase_distance(m, tr.state_at(orbit.period), orbit.z0);
    }
    auto [mono, fl] = monodromy_and_floquet(m, g.orbit, opt.closure_tol, opt.flow_tol);
    g.mono = mono;
    g.floquet = fl;
    g.conjugate_times = find_conjugate_points(m, g.orbit.z0, g.orbit.period, opt.flow_tol);
    while (!g.conjugate_times.empty() && g.conjugate_times.back() > g.orbit.period - 1e-7)
        g.conjugate_times.pop_back();
    g.conjugate_point_free = g.conjugate_times.empty();
    g.waist_certificate = g.conjugate_point_free &&
                          (fl.type == FloquetType::PositiveHyperbolic ||
                           fl.type == FloquetType::Degenerate);
    return g;
}

ClosedGeodesic polish_from_nodes(const ParametricMetric& m, std::vector<ShootNode> nodes,
                                 double T_guess, const WaistOptions& opt) {
    MultipleShooting ms{m, std::move(nodes), T_guess, opt.flow_tol};
    const double err = ms.run(opt.newton_max_iter, opt.newton_tol);
    if (!(err < 1e-7))
        throw NotClosedError("polish: multiple shooting stalled, residual " +
                             std::to_string(err));
    OrbitCandidate orbit{ms.node_state(ms.nodes[0]), ms.T};
    return certify(m, orbit, opt);
}

}  // namespace

ClosedGeodesic polish_closed_geodesic(const ParametricMetric& m, const UnitTangentState& z0in,
                                      double period_guess, const WaistOptions& opt) {
    const UnitTangentState z0 = make_unit(m, m.wrap(z0in.q), z0in.w);
    const int M = 12;
    FlowOptions fo;
    fo.tol = opt.flow_tol;
    auto tr = integrate_geodesic(m, z0, period_guess, fo);
    std::vector<ShootNode> nodes;
    nodes.reserve(M);
    for (int i = 0; i < M; ++i) {
        const UnitTangentState s = tr.state_at(period_guess * i / M);
        nodes.push_back({s.q.x, s.q.y, m.angle_of(s.q, s.w)});
    }
    return polish_from_nodes(m, std::move(nodes), period_guess, opt);
}

ClosedGeodesic polish_closed_geodesic(const ParametricMetric& m, const ClosedCurve& seed,
                                      const WaistOptions& opt) {
    // nodes straight from the polyline: each is locally accurate, so the
    // shooting segments stay short even for strongly hyperbolic orbits
    const std::size_t n = seed.pts.size();
    const int M = 12;
    std::vector<ShootNode> nodes;
    nodes.reserve(M);
    for (int k = 0; k < M; ++k) {
        const std::size_t i = (k * n) / M;
        const Vec2 p = seed.pts[i];
        const Vec2 dir = seed.vertex(i + 1) - (i == 0 ? seed.vertex(n - 1) - seed.closure_offset
                                                      : seed.pts[i - 1]);
        const UnitTangentState s = make_unit(m, p, dir);
        nodes.push_back({s.q.x, s.q.y, m.angle_of(s.q, s.w)});
    }
    ClosedGeodesic g = polish_from_nodes(m, std::move(nodes), seed.length(m), opt);
    g.winding = seed.winding;
    return g;
}

ClosedGeodesic find_waist(const ParametricMetric& m, const ClosedCurve& seed,
                          const WaistOptions& opt) {
    ShortenResult sr = shorten_curve(m, seed, opt.shorten);
    if (sr.status == ShortenStatus::Collapsed)
        throw CollapsedError("find_waist: seed loop collapsed (contractible?)");
    ClosedGeodesic g = polish_closed_geodesic(m, sr.curve, opt);
    if (!g.conjugate_point_free)
        throw NotCertifiedError("find_waist: conjugate points found; not a waist");
    if (!g.waist_certificate)
        throw NotCertifiedError(std::string("find_waist: Floquet type ") +
                                floquet_type_name(g.floquet.type) + " excludes a waist");
    return g;
}

// ---- minimax ----

std::vector<ClosedCurve> parallel_sweep(const ParametricMetric& m, double u_a, double u_b, int k,
                                        int n) {
    std::vector<ClosedCurve> fam;
    fam.reserve(k);
    for (int i = 0; i < k; ++i) {
        const double u = u_a + (u_b - u_a) * (i + 0.5) / k;
        fam.push_back(parallel_circle(m, u, n));
    }
    return fam;
}

ClosedGeodesic find_minimax(const ParametricMetric& m, const std::vector<ClosedCurve>& family,
                            const MinimaxOptions& opt) {
    std::vector<ClosedCurve> fam = family;
    std::vector<bool> alive(fam.size(), true);
    ShortenOptions so = opt.polish.shorten;
    so.max_steps = opt.shorten_steps_per_round;
    so.stop_tol = 0.0;

    double max0 = 0.0;  // initial sweep level bounds the minimax up to sampling slack
    for (const auto& c : fam) max0 = std::max(max0, c.length(m));

    double prev_max = std::numeric_limits<double>::infinity();
    int stable_rounds = 0;
    std::size_t argmax = 0;
    for (int round = 0; round < opt.rounds; ++round) {
        double mx = -1;
        for (std::size_t i = 0; i < fam.size(); ++i) {
            if (!alive[i]) continue;
            try {
                ShortenResult sr = shorten_curve(m, fam[i], so);
                fam[i] = sr.curve;
                if (sr.status == ShortenStatus::Collapsed) alive[i] = false;
            } catch (const LostSimplicityError&) {
                alive[i] = false;
            }
            if (alive[i]) {
                const double L = fam[i].length(m);
                if (L > mx) {
                    mx = L;
                    argmax = i;
                }
            }
        }
        if (mx < 0) throw SweepoutStuckError("find_minimax: the whole family collapsed");
        // the maximizing member rides the pass; try to land it on the
        // nearby geodesic before the family drifts off
        const bool stabilized = std::abs(prev_max - mx) < opt.level_tol && ++stable_rounds >= 5;
        if (stabilized || round == 1 || (round > 0 && round % 10 == 0)) {
            try {
                ClosedGeodesic g = polish_closed_geodesic(m, fam[argmax], opt.polish);
                if (!g.conjugate_point_free && g.length() <= max0 * (1.0 + 1e-3)) return g;
            } catch (const GeolabError&) {
                // fall through; keep sweeping
            }
            if (stabilized)
                throw NotCertifiedError(
                    "find_minimax: stabilized level did not certify conjugate points");
        }
        if (std::abs(prev_max - mx) >= opt.level_tol) stable_rounds = 0;
        prev_max = mx;
    }
    throw SweepoutStuckError("find_minimax: level did not stabilize");
}

// ---- region decomposition ----

double band_area(const ParametricMetric& m, double u_lo, double u_hi, int n) {
    // quadrature on the sub-band; reuse the chart rule with an indicator
    const double full_lo = m.domain.u0, full_hi = m.domain.u1;
    (void)full_lo;
    (void)full_hi;
    double total = 0.0;
    const int cells = std::max(1, n / 4);
    static const double glx[4] = {-0.861136311594052575, -0.339981043584856265,
                                  0.339981043584856265, 0.861136311594052575};
    static const double glw[4] = {0.347854845137453857, 0.652145154862546143,
                                  0.652145154862546143, 0.347854845137453857};
    const double h = (u_hi - u_lo) / cells;
    const double Pv = m.domain.period_v();
    const int nv = 128;
    for (int c = 0; c < cells; ++c) {
        const double mid = u_lo + (c + 0.5) * h;
        for (int k = 0; k < 4; ++k) {
            const double u = mid + 0.5 * h * glx[k];
            double row = 0.0;
            for (int j = 0; j < nv; ++j) {
                const double v = m.domain.v0 + (j + 0.5) * Pv / nv;
                const FirstForm g = m.value(u, v);
                row += std::sqrt(std::max(0.0, g.det())) * (Pv / nv);
            }
            total += 0.5 * h * glw[k] * row;
        }
    }
    return total;
}

namespace {

struct ProbeOutcome {
    int trapped = 0;
    std::vector<UnitTangentState> trapped_seeds;
};

/// Sample phase points over the band and flow both ways until the base
/// leaves the region or probe_time elapses.
ProbeOutcome probe_band(const ParametricMetric& m, const Region& region, double u_lo,
                        double u_hi, const std::vector<const ClosedGeodesic*>& skip_waists,
                        const DecomposeOptions& opt) {
    ProbeOutcome out;
    Rng rng(opt.rng_seed);
    FlowOptions fo;
    fo.tol = opt.flow_tol;
    fo.max_step = 0.25;
    for (int s = 0; s < opt.probe_seeds; ++s) {
        // area-weighted rejection sampling in the band
        Vec2 q;
        for (int tries = 0; tries < 1000; ++tries) {
            q = {rng.uniform(u_lo, u_hi), rng.uniform(m.domain.v0, m.domain.v1)};
            const FirstForm g = m.value(q.x, q.y);
            const double dens = std::sqrt(std::max(0.0, g.det()));
            if (rng.uniform() * 4.0 * std::max(1.0, dens) < dens && region.inside(q)) break;
        }
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        const UnitTangentState z = state_from_angle(m, q, ang);
        bool escaped = false;
        for (double dir : {1.0, -1.0}) {
            bool left = false;
            try {
                flow_geodesic(m, z, dir * opt.probe_time, fo, [&](const DenseStep<4>& st) {
                    const OdeState<4> y = st.eval(1.0);
                    if (!region.inside(m.wrap({y[0], y[1]}))) {
                        left = true;
                        return false;
                    }
                    return true;
                });
            } catch (const StepFailureError&) {
                left = true;  // ran into a chart singularity: treat as exit
            }
            if (left) {
                escaped = true;
                break;
            }
        }
        if (!escaped) {
            // bi-infinitely trapped; skip if shadowing a known waist orbit
            bool near_waist = false;
            for (const ClosedGeodesic* wgeo : skip_waists) {
                CurveGeometry geom(m, *wgeo, 256);
                const auto nr = geom.nearest(m.wrap(z.q));
                if (nr.dist < 5e-2) near_waist = true;
            }
            if (!near_waist) {
                ++out.trapped;
                out.trapped_seeds.push_back(z);
            }
        }
    }
    return out;
}

}  // namespace

RegionDecomposition decompose_region(const ParametricMetric& m, const Region& region,
                                     const DecomposeOptions& opt) {
    RegionDecomposition dec;
    dec.region_name = region.name;
    if (!region.is_band_u) {
        // generic regions: probe only (no band bookkeeping to split along)
        ProbeOutcome po = probe_band(m, region, m.domain.u0, m.domain.u1, {}, opt);
        dec.trapped_seeds_found = po.trapped;
        RegionDecomposition::Piece piece;
        piece.kind = RegionDecomposition::Piece::Kind::Bowl;
        dec.pieces.push_back(piece);
        dec.complete = (po.trapped == 0);
        return dec;
    }

    // band disk: [pole_side, cur_hi]; the pole end is the closed cap side
    const bool pole_at_lo = region.u_lo <= m.domain.u0 + 1e-9;
    double cap_end = pole_at_lo ? region.u_lo : region.u_hi;
    double cur = pole_at_lo ? region.u_hi : region.u_lo;
    std::vector<ClosedGeodesic> waists;

    for (int piece_count = 0; piece_count < opt.max_pieces; ++piece_count) {
        const double lo = pole_at_lo ? cap_end : cur;
        const double hi = pole_at_lo ? cur : cap_end;
        Region bowl = band_region_u(m, lo, hi, region.name + "-bowl");
        std::vector<const ClosedGeodesic*> skip;
        for (const auto& wgeo : waists) skip.push_back(&wgeo);
        ProbeOutcome po = probe_band(m, bowl, lo + 1e-6, hi - 1e-6, skip, opt);
        dec.trapped_seeds_found += po.trapped;
        if (po.trapped == 0) {
            RegionDecomposition::Piece piece;
            piece.kind = RegionDecomposition::Piece::Kind::Bowl;
            piece.u_lo = lo;
            piece.u_hi = hi;
            dec.pieces.push_back(piece);
            dec.complete = true;
            return dec;
        }
        // residual invariant set: extract a waist seeded near the trapped
        // evidence; librating islands around elliptic parallels make some
        // seeds collapse or land on non-waists, so try representatives
        std::vector<double> cand_u;
        for (const auto& z : po.trapped_seeds) cand_u.push_back(m.wrap(z.q).x);
        std::sort(cand_u.begin(), cand_u.end());
        std::vector<double> reps;
        for (std::size_t i = 0; i < cand_u.size(); i += std::max<std::size_t>(1, cand_u.size() / 8))
            reps.push_back(cand_u[i]);
        WaistOptions wo = opt.waist;
        Region constraint = band_region_u(m, lo + 1e-4, hi - 1e-4, region.name + "-constraint");
        wo.shorten.region = &constraint;
        bool got = false;
        ClosedGeodesic w;
        for (double useed : reps) {
            try {
                ClosedGeodesic cand = find_waist(m, parallel_circle(m, useed, 128), wo);
                const double cu = m.wrap(cand.orbit.z0.q).x;
                if (cu > lo + 1e-6 && cu < hi - 1e-6) {
                    w = cand;
                    got = true;
                    break;
                }
            } catch (const GeolabError&) {
                continue;
            }
        }
        if (!got) break;  // residual evidence but no extractable waist
        const double w_u = m.wrap(w.orbit.z0.q).x;

        // separating minimax between the waist and the pole cap
        MinimaxOptions mo = opt.minimax;
        std::vector<ClosedCurve> fam =
            pole_at_lo ? parallel_sweep(m, cap_end + 0.05 * (w_u - cap_end), w_u - 1e-3,
                                        mo.family_size)
                       : parallel_sweep(m, w_u + 1e-3, cap_end - 0.05 * (cap_end - w_u),
                                        mo.family_size);
        ClosedGeodesic h = find_minimax(m, fam, mo);
        const double h_u = m.wrap(h.orbit.z0.q).x;

        RegionDecomposition::Piece corset;
        corset.kind = RegionDecomposition::Piece::Kind::Corset;
        corset.u_lo = pole_at_lo ? h_u : lo;
        corset.u_hi = pole_at_lo ? hi : h_u;
        corset.waist = w;
        corset.separating = h;
        dec.pieces.push_back(corset);
        waists.push_back(w);
        cur = h_u;
    }
    dec.complete = false;  // BudgetExhausted: partial decomposition
    return dec;
}

}  // namespace geolab
