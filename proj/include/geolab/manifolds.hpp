// Stable/unstable manifold branches of hyperbolic closed geodesics in
// section coordinates, and the detection of per-branch transversal
// homoclinic intersections.
#pragma once

#include <array>
#include <optional>
#include <vector>

#include "geolab/sections.hpp"

namespace geolab {

/// A point of a branch polyline; t is stored as a continuous lift (the patch
/// coordinate wraps mod L), src is the preimage patch point used for
/// refinement by re-flying the true map.
struct BranchPoint {
    double t = 0, alpha = 0;
    double src_t = 0, src_alpha = 0;
    int level = 0;
};

struct ManifoldBranch {
    int patch = 0;
    char stability = 'u';  // 'u' or 's'
    int sign = +1;         // seed side along the eigen-direction
    std::vector<BranchPoint> pts;
    double arclength = 0;
    double delta_max = 0, phi_max = 0;
    int exits = 0;          // growth flights lost to Timeout
    int branch_period = 1;  // 2 for negative-hyperbolic parent orbits
    double seed_mu = 0;     // return-map eigenvalue used for growth
};

/// Local data of a hyperbolic orbit on a patch: a fixed point of the
/// return map with its eigenframe, or boundary-saddle seeds.
struct LocalFrame {
    bool interior = false;
    double t0 = 0, alpha0 = 0;   // fixed point (interior case)
    Vec2 dir_u{1, 0}, dir_s{0, 1};  // eigen-directions in (t, alpha)
    double mu_u = 0, mu_s = 0;
    double jac[2][2] = {{0, 0}, {0, 0}};
    struct Seed {
        double t, alpha;
        char stability;
        int sign;
    };
    std::vector<Seed> seeds;  // 4 seeds: u+, u-, s+, s-
    // boundary case: returns per composed map = vertical crossings of the
    // eigen-direction per period (the branch arc lives at one crossing)
    int boundary_steps_u = 1;
    int boundary_steps_s = 1;
};

struct FrameOptions {
    double delta_seed_scale = 1e-6;  // of the patch length
    HitOptions hit;
    double nonhyperbolic_margin = 1e-6;
};

/// Eigenframe of the return map where gamma crosses the patch interior
/// transversally, or boundary-saddle seeds when gamma is the patch boundary
/// orbit. Throws NonHyperbolicError / NonTransversalIntersectionError.
LocalFrame local_eigenframe(const SectionSystem& sys, int patch, const ClosedGeodesic& g,
                            const FrameOptions& opt = {});

struct BranchOptions {
    double budget_arclength = 20.0;
    double delta_max = 0.02;
    double phi_max = 0.35;
    int max_points = 40000;
    int max_levels = 60;
    HitOptions hit;
};

/// Grow one branch by iterating the system return map (inverse map for
/// s-branches) on an adaptively refined polyline.
ManifoldBranch grow_branch(const SectionSystem& sys, int patch, const LocalFrame& frame,
                           char stability, int sign, const BranchOptions& opt = {});

struct HomoclinicPoint {
    double t = 0, alpha = 0;  // wrapped section coordinates
    int u_branch = 0, s_branch = 0;
    double angle = 0;         // crossing angle in the (t, alpha) chart
    bool transversal = false; // angle above the tangency floor
    bool converges = false;   // flown both ways approaches the parent orbit
};

constexpr double kAngleFloor = 1e-5;  // below: tangency candidate, flagged

struct IntersectOptions {
    double refine_tol = 1e-8;
    // crossings inside this ball around the saddle are unclassifiable at
    // polyline resolution (the eigenline germs dominate) and are dropped
    double min_fixed_point_distance = 0.1;
    HitOptions hit;
};

struct IntersectionSet {
    std::vector<HomoclinicPoint> points;
    int connection_candidates = 0;  // collinear overlaps, not intersections
};

/// All transversal crossings between an unstable and a stable branch,
/// refined by re-flying source midpoints of both polylines.
IntersectionSet find_intersections(const SectionSystem& sys, const ManifoldBranch& bu,
                                   const ManifoldBranch& bs, const IntersectOptions& opt = {});

struct SeparatrixReport {
    std::array<ManifoldBranch, 4> branches;  // u+, u-, s+, s-
    std::vector<HomoclinicPoint> points;
    std::array<int, 4> counts{0, 0, 0, 0};   // homoclinics per branch
    double min_angle = 0;
    int connection_candidates = 0;
    // pairwise one-sided Hausdorff distances between branch polylines
    double proximity[4][4] = {};
    // closure proxy: distance from each branch (seed stubs and saddle germ
    // removed) to the union of the opposite-stability branches
    std::array<double, 4> closure_proxy{0, 0, 0, 0};
};

struct ReportOptions {
    FrameOptions frame;
    BranchOptions branch;
    IntersectOptions intersect;
    bool validate_convergence = true;
};

/// Grow all four branches of gamma on the patch and cross every (u, s)
/// pair; the proximity matrix is the bounded-budget closure proxy.
SeparatrixReport separatrix_report(const SectionSystem& sys, int patch,
                                   const ClosedGeodesic& g, const ReportOptions& opt = {});

/// One-sided Hausdorff distance from the points of a to the polyline b, in
/// the (t mod L, alpha) chart.
double branch_proximity(const ManifoldBranch& a, const ManifoldBranch& b, double period_t);

/// lambda-lemma proxy: images of a short arc through a homoclinic point,
/// transversal to the stable branch, accumulate on the local unstable
/// branch; returns the one-sided Hausdorff distances for k = 1..k_max.
std::vector<double> lambda_lemma_proxy(const SectionSystem& sys, int patch,
                                       const LocalFrame& frame, const HomoclinicPoint& h,
                                       int k_max, const BranchOptions& opt = {});

}  // namespace geolab
