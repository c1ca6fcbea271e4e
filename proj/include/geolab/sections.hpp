// Birkhoff annuli and complete systems of surfaces of section: first-hit and
// return maps with dense-output event detection, the boundary extension of
// the return map along rotating orbits, transversality reports, and the
// trapped-set probe.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geolab/curves.hpp"
#include "geolab/rng.hpp"

namespace geolab {

enum class BoundaryLabel { Rotating, NonRotating, Degenerate };

const char* boundary_label_name(BoundaryLabel l);

/// One Birkhoff annulus A(+g') or A(-g') of a simple closed geodesic.
/// Coordinates: t = arclength along the (side-oriented) curve mod L,
/// alpha in [0, pi] = angle from the oriented tangent toward the inward
/// normal. alpha = 0 and alpha = pi are the two boundary orbits.
struct SectionPatch {
    std::shared_ptr<const ClosedGeodesic> base;
    std::shared_ptr<const CurveGeometry> geom;
    int side = +1;  // +1: vectors with <v, J g'> >= 0; -1: the opposite half
    BoundaryLabel label_forward = BoundaryLabel::Rotating;   // orbit +g'
    BoundaryLabel label_backward = BoundaryLabel::Rotating;  // orbit -g'
    std::string name;

    double length() const { return geom->length(); }
    /// Lift patch coordinates to a unit tangent state.
    UnitTangentState lift(double t, double alpha) const;
    /// Inverse of lift for a state based on the curve (s = arclength of the
    /// base point along the +orientation).
    std::pair<double, double> coords_from(double s, const UnitTangentState& z) const;
};

SectionPatch build_birkhoff_annulus(const ParametricMetric& m,
                                    std::shared_ptr<const ClosedGeodesic> g, int side,
                                    std::shared_ptr<const CurveGeometry> shared_geom = nullptr);

struct SectionSystem {
    const ParametricMetric* metric = nullptr;
    std::vector<SectionPatch> patches;
    // one entry per distinct boundary orbit (curve, direction sign)
    struct BoundaryOrbit {
        std::shared_ptr<const ClosedGeodesic> geodesic;
        int direction = +1;  // +1: g', -1: -g'
        BoundaryLabel label = BoundaryLabel::Rotating;
    };
    std::vector<BoundaryOrbit> boundary_orbits;
    double ell = 0.0;  // measured two-sided return bound near K_rot
    std::vector<std::string> notes;  // construction flags (degeneracies etc.)

    std::vector<const ClosedGeodesic*> k_fix() const;
};

struct HitEvent {
    int patch = -1;
    double t = 0.0;      // arclength coordinate on the patch
    double alpha = 0.0;  // angle coordinate
    double flight = 0.0; // |tau|: time flown to the hit
    int crossing_sign = +1;   // sign of the transversal (normal) speed
    bool grazing = false;     // |normal speed| below the graze floor
    UnitTangentState state;   // phase point at the hit
};

enum class HitStatus { Hit, Timeout, BoundaryOrbitInput };

struct FirstHitResult {
    HitStatus status = HitStatus::Timeout;
    HitEvent event;
    int grazes_skipped = 0;
};

struct HitOptions {
    double t_max = 200.0;
    double flow_tol = 1e-10;
    double graze_floor = 1e-8;  // transversal-speed floor
};

/// Earliest transversal crossing of any patch of the system, flowing
/// forward (direction=+1) or backward (direction=-1).
FirstHitResult first_hit(const SectionSystem& sys, const UnitTangentState& z, int direction,
                         const HitOptions& opt = {});

struct ReturnResult {
    HitStatus status = HitStatus::Timeout;
    HitEvent event;
    double jac[2][2] = {{1, 0}, {0, 1}};  // d(t', cos a') / d(t, cos a)
    bool jac_valid = false;
};

/// Return map of the system in patch coordinates, with an optional
/// finite-difference Jacobian in (t, cos alpha).
ReturnResult return_map(const SectionSystem& sys, int patch, double t, double alpha,
                        const HitOptions& opt = {}, bool with_jacobian = false);

// ---- boundary extension of the return map ----

struct BoundaryPeriodicPoint {
    double t = 0.0;            // time along the orbit (period-normalized units)
    char direction = 'u';      // 'u': theta-bar crosses E^u; 's': crosses E^s
    char kind = 'a';           // 'a' attractor | 'r' repellor
    double multiplier = 1.0;   // |b'| over one full period of the orbit
};

struct BoundaryMapData {
    double period = 0.0;
    double Lambda_T = 0.0;  // integral of lambda_t over one period
    bool rotating = false;  // theta-bar graph crosses the invariant directions
    std::vector<std::pair<double, double>> theta_bar;        // (t, angle) samples
    std::vector<std::pair<double, double>> lambda_profile;   // (t, lambda_t)
    std::vector<std::pair<double, double>> b_samples;        // (t, b(t)) where defined
    std::vector<BoundaryPeriodicPoint> periodic_points;
    // projective period-return multipliers of the invariant directions
    double attractor_multiplier = 0.0;  // e^{-2 Lambda_T} at E^u
    double repellor_multiplier = 0.0;   // e^{+2 Lambda_T} at E^s
    int crossings_unstable = 0;
    int crossings_stable = 0;
};

struct BoundaryMapOptions {
    int samples = 512;
    double flow_tol = 1e-12;
    double b_return_budget = 12.0;  // periods to search for a graph return
};

/// Boundary extension of the return map along a hyperbolic boundary orbit of
/// a Birkhoff annulus: the limit-angle curve theta-bar is the vertical
/// direction, the projective flow runs in the adapted frame, and b(t) is the
/// first return of graph points to the graph. Periodic points of b sit at
/// the crossings of theta-bar with E^u (attractors) and E^s (repellors).
BoundaryMapData boundary_map(const ParametricMetric& m, const ClosedGeodesic& g,
                             const BoundaryMapOptions& opt = {});

/// Same analysis for a synthetic profile: lambda_t and theta-bar given
/// directly over one period (period-1 conventions).
BoundaryMapData boundary_map_synthetic(const std::function<double(double)>& lambda,
                                       const std::function<double(double)>& theta_bar,
                                       double period, const BoundaryMapOptions& opt = {});

struct TransversalityReport {
    double margin = 0.0;      // min over t of (-lambda_t sin 2theta - theta_t)
    bool marginal = false;    // |margin| below tolerance
    bool riccati_decides = false;  // marginal case settled by W'(0) = 1 > 0
    double min_flowed_vertical_slope = 0.0;  // min over samples of W(h)/h
    std::vector<std::pair<double, double>> margin_samples;  // (t, margin(t))
};

/// Margin of the rotation inequality along a boundary orbit. For Birkhoff
/// annuli theta-bar is the vertical (angle pi/2 in the (J, Jdot) frame), the
/// naive margin vanishes identically, and the Riccati refinement W'(0)=1
/// decides.
TransversalityReport check_transversality(const ParametricMetric& m, const ClosedGeodesic& g,
                                          int samples = 256);
/// Synthetic variant with theta-bar and lambda given in the adapted frame.
TransversalityReport check_transversality_synthetic(
    const std::function<double(double)>& lambda, const std::function<double(double)>& theta_bar,
    double period, int samples = 512);

// ---- system construction and probes ----

struct SystemOptions {
    WaistOptions waist;
    MinimaxOptions minimax;
    DecomposeOptions decompose;
    HitOptions hit;
    int coverage_seeds = 0;       // 0: skip the probe during construction
    double coverage_time = 200.0;
    std::uint64_t rng_seed = 1;
};

/// Complete system of surfaces of section, genus 0 construction: the two
/// Birkhoff annuli of a minimax geodesic plus the annuli produced by the
/// disk decompositions. Genus 1: the chain of region-constrained minimizers
/// with their annuli kept unglued; degenerate slots are flagged in `notes`
/// and the system falls back to the certified curves.
SectionSystem build_complete_system(const ParametricMetric& m, int genus,
                                    const SystemOptions& opt = {});

struct ProbeStatistics {
    int seeds = 0;
    int hit_both = 0;
    int timeout_forward = 0;
    int timeout_backward = 0;
    double max_hit_time = 0.0;
    struct TimeoutSeed {
        UnitTangentState z;
        int direction;
        double wsu_distance;  // late-time trace distance to the K_fix orbits
    };
    std::vector<TimeoutSeed> timeouts;
};

/// Fraction of phase-space-volume samples hitting the system both ways
/// within T; every timeout seed is tested for proximity to W^{s,u}(K_fix).
ProbeStatistics trapped_set_probe(const SectionSystem& sys, int n_seeds, double t_probe,
                                  std::uint64_t rng_seed = 1, double flow_tol = 1e-8);

/// Measured two-sided return bound near the rotating boundary orbits.
double measure_rotation_bound(const SectionSystem& sys, int tube_samples = 64,
                              double tube_radius = 1e-3, double t_cap = 100.0);

}  // namespace geolab
