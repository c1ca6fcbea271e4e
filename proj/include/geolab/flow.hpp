// Geodesic flow on the unit tangent bundle, the linearized (Jacobi) flow on
// the contact plane, monodromy/Floquet data of closed orbits, conjugate
// points, and the projective angle dynamics  beta' = -lambda_t sin(2 beta).
#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "geolab/geometry.hpp"
#include "geolab/ode.hpp"

namespace geolab {

struct UnitTangentState {
    Vec2 q;  // chart point
    Vec2 w;  // tangent components (du, dv)
};

/// Normalize w to unit metric speed at q.
UnitTangentState make_unit(const ParametricMetric& m, Vec2 q, Vec2 w);
/// Unit tangent state from a direction angle in the orthonormal chart frame.
UnitTangentState state_from_angle(const ParametricMetric& m, Vec2 q, double angle);

/// Phase-space distance with periodic wrapping on the base point.
double phase_distance(const ParametricMetric& m, const UnitTangentState& a,
                      const UnitTangentState& b);

struct FlowOptions {
    double tol = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    bool renormalize = false;  // re-unitize velocity after each step
};

/// Dense geodesic trajectory; state layout (u, v, du, dv).
class GeodesicTrajectory {
  public:
    Trajectory<4> traj;
    bool renormalized = false;

    UnitTangentState state_at(double t) const {
        const OdeState<4> y = traj.at(t);
        return {{y[0], y[1]}, {y[2], y[3]}};
    }
    double t_begin() const { return traj.t_begin(); }
    double t_end() const { return traj.t_end(); }

    /// max |g(w,w) - 1| over n samples.
    double unit_speed_drift(const ParametricMetric& m, int n = 1000) const;
};

GeodesicTrajectory integrate_geodesic(const ParametricMetric& m, const UnitTangentState& s0,
                                      double T, const FlowOptions& opt = {});

/// Streaming integration: on_step(DenseStep<4>) -> bool (false stops).
void flow_geodesic(const ParametricMetric& m, const UnitTangentState& s0, double T,
                   const FlowOptions& opt,
                   const std::function<bool(const DenseStep<4>&)>& on_step);

/// Contact frame trajectory; state layout (u, v, du, dv, J, Jdot). The pair
/// (J, Jdot) is an orthogonal Jacobi field in the parallel normal frame.
class ContactTrajectory {
  public:
    Trajectory<6> traj;
    UnitTangentState base_at(double t) const {
        const OdeState<6> y = traj.at(t);
        return {{y[0], y[1]}, {y[2], y[3]}};
    }
    Vec2 jacobi_at(double t) const {
        const OdeState<6> y = traj.at(t);
        return {y[4], y[5]};
    }
};

ContactTrajectory evolve_contact_frame(const ParametricMetric& m, const UnitTangentState& s0,
                                       Vec2 jacobi0, double T, const FlowOptions& opt = {});

struct Monodromy {
    // period map on the contact plane in the (J, Jdot) basis
    double a = 1, b = 0, c = 0, d = 1;
    double period = 0;
    double trace() const { return a + d; }
    double det() const { return a * d - b * c; }
    Vec2 apply(const Vec2& w) const { return {a * w.x + b * w.y, c * w.x + d * w.y}; }
};

enum class FloquetType { PositiveHyperbolic, NegativeHyperbolic, Elliptic, Degenerate };

const char* floquet_type_name(FloquetType t);

struct FloquetData {
    std::complex<double> mult_large{1.0, 0.0};
    std::complex<double> mult_small{1.0, 0.0};
    FloquetType type = FloquetType::Degenerate;
    Vec2 dir_unstable{1, 0};  // (J, Jdot) eigen-directions, hyperbolic only
    Vec2 dir_stable{0, 1};
    double mean_expansion = 0.0;  // log|mult_large| / period
    bool hyperbolic() const {
        return type == FloquetType::PositiveHyperbolic || type == FloquetType::NegativeHyperbolic;
    }
};

/// Classification margin on |trace|-2 below which the type is reported as
/// degenerate rather than decided.
constexpr double kFloquetMargin = 1e-6;

struct OrbitCandidate {
    UnitTangentState z0;
    double period = 0;
};

/// Verify phase-space closure of the candidate, then integrate two Jacobi
/// basis solutions over one period. det = 1 is checked, never enforced.
std::pair<Monodromy, FloquetData> monodromy_and_floquet(const ParametricMetric& m,
                                                        const OrbitCandidate& cand,
                                                        double closure_tol = 1e-6,
                                                        double tol = 1e-12);

FloquetData classify_monodromy(const Monodromy& M);

/// Ordered zeros of J along the arc, J(0)=0, Jdot(0)=1, refined to ~1e-12.
std::vector<double> find_conjugate_points(const ParametricMetric& m, const UnitTangentState& s0,
                                          double arc_length, double tol = 1e-10);

// ---- projective angle flow (adapted frame) ----

/// Trajectory of (beta, Lambda, log zeta):
///   beta'    = -lambda(t) sin(2 beta)
///   Lambda'  =  lambda(t)
///   zeta'/zeta = lambda(t) cos(2 beta)
class AngularSlopeTrajectory {
  public:
    Trajectory<3> traj;
    double beta_at(double t) const { return traj.at(t)[0]; }
    double Lambda_at(double t) const { return traj.at(t)[1]; }
    double log_zeta_at(double t) const { return traj.at(t)[2]; }
};

AngularSlopeTrajectory evolve_angular_slope(const std::function<double(double)>& lambda,
                                            double beta0, double t0, double t1,
                                            double tol = 1e-12);

/// Adapted frame along a hyperbolic closed orbit: the flowed eigen-directions
/// of the contact plane, symplectically normalized so that the projective
/// dynamics is exactly beta' = -lambda(t) sin(2 beta).
class AdaptedFrame {
  public:
    AdaptedFrame(const ParametricMetric& m, const OrbitCandidate& orbit, const FloquetData& fl,
                 double tol = 1e-12);

    double period() const { return period_; }
    /// local expansion rate along E^u (d/dt log |w_u|)
    double lambda(double t) const;
    /// integral of lambda from 0 to t
    double Lambda(double t) const;
    /// flowed unstable/stable solutions in the (J, Jdot) plane
    Vec2 unstable_at(double t) const;
    Vec2 stable_at(double t) const;
    /// angle of a (J, Jdot)-plane line in the adapted basis, mod pi;
    /// 0 = unstable direction, pi/2 = stable direction
    double adapted_angle(double t, const Vec2& line) const;
    /// angle of the vertical subspace (J=0) in the adapted basis, mod pi
    double vertical_angle(double t) const { return adapted_angle(t, {0.0, 1.0}); }
    /// acute angle between the vertical and E^u / E^s at time t (eq. EEV test)
    double vertical_unstable_angle(double t) const;
    double vertical_stable_angle(double t) const;

  private:
    Trajectory<8> traj_;  // orbit + two Jacobi basis solutions
    double period_ = 0;
    Vec2 xi_u_, xi_s_;
    double w0_ = 1.0;  // symplectic area of (xi_u, xi_s)
};

/// Sampled trajectory row for delimited-text export.
struct FlowSample {
    double t, u, v, du, dv, J, Jdot;
};

std::vector<FlowSample> sample_contact_trajectory(const ContactTrajectory& tr, int n);

}  // namespace geolab
