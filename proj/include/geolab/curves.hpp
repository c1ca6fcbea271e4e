// Closed curves and closed geodesics: discrete Birkhoff shortening in a
// homotopy class, waist certification, minimax sweepouts, and the
// corset/bowl decomposition of disk regions.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geolab/flow.hpp"
#include "geolab/rng.hpp"

namespace geolab {

/// Free homotopy class on the torus charts: p = windings in v (around the
/// axis), q = windings in u (around the tube). Class (1,0) is the parallel
/// family, (0,1) the meridian family. (0,0) marks contractible loops
/// (sphere/ellipsoid charts carry only this marker).
struct WindingPair {
    int p = 0;  // v-windings
    int q = 0;  // u-windings
    bool contractible() const { return p == 0 && q == 0; }
    bool operator==(const WindingPair& o) const { return p == o.p && q == o.q; }
};

/// Ordered loop samples as a continuous lift; segment i joins pts[i] to
/// pts[i+1], and pts[n] is pts[0] + closure_offset.
struct ClosedCurve {
    std::vector<Vec2> pts;
    Vec2 closure_offset{0, 0};
    WindingPair winding;

    std::size_t size() const { return pts.size(); }
    Vec2 vertex(std::size_t i) const {  // i may be in [0, 2n)
        const std::size_t n = pts.size();
        return (i < n) ? pts[i] : pts[i - n] + closure_offset;
    }
    /// chart-metric arclength (3-point Gauss per straight chart segment)
    double length(const ParametricMetric& m) const;
    /// max pairwise distance of the lifted samples
    double diameter() const;
    /// segment-pair sweep; wrapped representatives compared locally
    bool is_simple(const ParametricMetric& m) const;
};

/// Chart-straight seed loop for a homotopy class through `anchor`.
ClosedCurve seed_loop(const ParametricMetric& m, WindingPair cls, Vec2 anchor, int n = 128);
/// Coordinate-circle seed u = const (class (1,0) on tori) or v = const.
ClosedCurve parallel_circle(const ParametricMetric& m, double u, int n = 128);
ClosedCurve meridian_circle(const ParametricMetric& m, double v, int n = 128);
/// Latitude-style circle of chart radius `rad` around a point (contractible).
ClosedCurve small_circle(const ParametricMetric& m, Vec2 center, double rad, int n = 96);

/// A region of the chart used to constrain shortening and probe orbits.
struct Region {
    std::function<bool(const Vec2&)> inside;  // takes wrapped chart points
    std::string name;
    // optional band structure [u_lo, u_hi] for decomposition bookkeeping
    bool is_band_u = false;
    double u_lo = 0, u_hi = 0;
};

Region band_region_u(const ParametricMetric& m, double u_lo, double u_hi,
                     const std::string& name);

struct ShortenOptions {
    int max_steps = 2000;
    double stop_tol = 1e-12;       // terminate when per-step decrease is below
    double collapse_diameter = 1e-2;
    const Region* region = nullptr;  // constrained shortening (weak convexity)
    int resample_every = 8;
};

enum class ShortenStatus { Converged, Collapsed, MaxSteps };

struct ShortenResult {
    ClosedCurve curve;
    ShortenStatus status = ShortenStatus::Converged;
    std::vector<double> lengths;  // length after every accepted step
};

/// Discrete Birkhoff shortening: vertices replaced by local geodesic
/// midpoints of their neighbours, alternating parity. Length never
/// increases across reported steps. Throws LostSimplicityError.
ShortenResult shorten_curve(const ParametricMetric& m, const ClosedCurve& c,
                            const ShortenOptions& opt = {});

/// Certified periodic orbit of the geodesic flow.
struct ClosedGeodesic {
    OrbitCandidate orbit;       // phase point + period (= length, unit speed)
    double closure_error = 0;
    Monodromy mono;
    FloquetData floquet;
    bool conjugate_point_free = false;
    bool waist_certificate = false;
    WindingPair winding;
    std::vector<double> conjugate_times;

    double length() const { return orbit.period; }
};

/// Dense samples of a closed geodesic for section geometry.
class CurveGeometry {
  public:
    CurveGeometry() = default;
    CurveGeometry(const ParametricMetric& m, const ClosedGeodesic& g, int n = 1024);
    /// Build directly from a phase point + period (used before certification).
    CurveGeometry(const ParametricMetric& m, const OrbitCandidate& orbit, int n = 1024);

    double length() const { return L_; }
    const ParametricMetric& metric() const { return *m_; }
    Vec2 point_at(double s) const;
    Vec2 tangent_at(double s) const;  // unit (metric) chart components
    UnitTangentState state_at(double s) const { return {point_at(s), tangent_at(s)}; }

    struct Near {
        double s = 0;        // arclength of the foot point
        double offset = 0;   // signed chart offset (sign = side of J*tangent)
        double dist = 0;     // |chart displacement|
        Vec2 foot{0, 0};
    };
    /// Nearest curve point to q (wrapped). s_hint < 0 does a global scan.
    Near nearest(const Vec2& q, double s_hint = -1.0) const;

    /// Fast reject helper: wrapped distance from q to the sample bounding
    /// band, 0 when inside.
    double band_distance(const Vec2& q) const;

    bool closes_up() const { return closes_; }
    const std::vector<Vec2>& samples() const { return p_; }

  private:
    void build(const ParametricMetric& m, const OrbitCandidate& orbit, int n);
    const ParametricMetric* m_ = nullptr;
    std::vector<double> s_;
    std::vector<Vec2> p_;    // wrapped chart points
    std::vector<Vec2> tn_;   // unit tangents
    double L_ = 0;
    bool closes_ = true;
    double u_min_ = 0, u_max_ = 0, v_min_ = 0, v_max_ = 0;  // of wrapped samples
    bool band_valid_ = false;
};

struct WaistOptions {
    ShortenOptions shorten;
    double closure_tol = 1e-8;
    double newton_tol = 1e-11;
    int newton_max_iter = 30;
    double flow_tol = 1e-12;
};

/// Shorten to stationarity, polish with a phase-space Newton shooting
/// correction, certify Floquet type and absence of conjugate points.
/// Throws CollapsedError / NotCertifiedError.
ClosedGeodesic find_waist(const ParametricMetric& m, const ClosedCurve& seed,
                          const WaistOptions& opt = {});

/// Newton-polish a near-closed loop into a certified periodic orbit without
/// any minimality requirement.
ClosedGeodesic polish_closed_geodesic(const ParametricMetric& m, const ClosedCurve& seed,
                                      const WaistOptions& opt = {});
ClosedGeodesic polish_closed_geodesic(const ParametricMetric& m, const UnitTangentState& z0,
                                      double period_guess, const WaistOptions& opt = {});

struct MinimaxOptions {
    int family_size = 33;
    int rounds = 400;
    int shorten_steps_per_round = 2;
    double level_tol = 1e-7;
    WaistOptions polish;
};

/// Birkhoff minimax over a one-parameter sweepout: every member is
/// shortened, the running maximum is tracked until it stabilizes, and the
/// argmax loop is polished into a closed geodesic. The result is certified
/// to carry conjugate points. Throws SweepoutStuckError.
ClosedGeodesic find_minimax(const ParametricMetric& m, const std::vector<ClosedCurve>& family,
                            const MinimaxOptions& opt = {});

/// Sweepout family of parallel circles u in [u_a, u_b].
std::vector<ClosedCurve> parallel_sweep(const ParametricMetric& m, double u_a, double u_b, int k,
                                        int n = 128);

struct DecomposeOptions {
    int probe_seeds = 200;
    double probe_time = 120.0;
    double flow_tol = 1e-8;
    int max_pieces = 8;
    std::uint64_t rng_seed = 1;
    WaistOptions waist;
    MinimaxOptions minimax;
};

struct RegionDecomposition {
    struct Piece {
        enum class Kind { Corset, Bowl } kind = Kind::Bowl;
        double u_lo = 0, u_hi = 0;  // band bounds in the chart
        std::optional<ClosedGeodesic> waist;       // corsets only
        std::optional<ClosedGeodesic> separating;  // boundary created by the split
    };
    std::vector<Piece> pieces;
    bool complete = true;  // false: BudgetExhausted, partial result
    std::string region_name;
    int trapped_seeds_found = 0;
};

/// Iterate the corset/bowl split on a u-band disk region until the trapped
/// probe comes back empty. Regions without band structure are probed only.
RegionDecomposition decompose_region(const ParametricMetric& m, const Region& region,
                                     const DecomposeOptions& opt = {});

/// Area of a u-band via quadrature (used by the tiling check).
double band_area(const ParametricMetric& m, double u_lo, double u_hi, int n = 256);

}  // namespace geolab
