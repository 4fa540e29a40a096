#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>

#include "absd/core.hpp"
#include "absd/fields.hpp"
#include "absd/grid.hpp"
#include "absd/materials.hpp"

namespace absd {

// Per-wall boundary condition.  Impedance is the production condition; the
// reflecting variants exist so conservation and reversal checks have an
// exactly lossless reference.
enum class WallBc { Impedance, Pec, Pmc };

// Index = 2*axis + side.
using BcSpec = std::array<WallBc, 6>;

inline BcSpec all_walls(WallBc b) {
    return {b, b, b, b, b, b};
}

struct StepParams {
    double dt = 0.0;
    double newton_tol = 1e-13;
    int newton_max = 25;
    // fixed-point iteration of the time-centered wall trace
    double bc_tol = 1e-12;
    int bc_max_passes = 20;
};

struct NonConvergence : std::runtime_error {
    NonConvergence(const std::string& what, double when, const Vec3& where)
        : std::runtime_error(what), t(when), x(where) {}
    double t;
    Vec3 x;
};

struct NewtonStats {
    std::uint64_t solves = 0;
    std::uint64_t iterations = 0;
    int max_iterations = 0;
    std::uint64_t damped_steps = 0;

    void absorb(int iters, int halvings) {
        solves += 1;
        iterations += static_cast<std::uint64_t>(iters);
        if (iters > max_iterations) max_iterations = iters;
        damped_steps += static_cast<std::uint64_t>(halvings);
    }
};

// Ghost values of tangential H one half-cell outside each wall, stored with
// the wall axis collapsed.  plane[axis][side][slot] holds the component
// wall_tangents(axis)[slot] of H.
struct GhostLayers {
    std::array<std::array<std::array<Arr3D, 2>, 2>, 3> plane;
};

struct SimState {
    double t = 0.0;
    std::uint64_t step = 0;
    Stag3 E, D;  // edge layout, integer time levels
    Stag3 H, B;  // face layout, half-integer time levels
    std::deque<RingEntry> ring;  // trailing integer-time samples, newest last
    NewtonStats newton;
};

inline constexpr int kRingDepth = 5;

// curl of an edge field, landing on faces; needs no wall data.
Stag3 curl_e(const StaggeredGrid& g, const Stag3& E);

// curl of a face field, landing on edges; rows on a wall read one ghost
// value through `ghosts` (pass nullptr to treat ghosts as zero).
Stag3 curl_h(const StaggeredGrid& g, const Stag3& H, const GhostLayers* ghosts);

// Allocate zeroed ghost storage for every wall.
GhostLayers make_ghosts(const StaggeredGrid& g);

// Flux divergences: nodes for the edge layout (interior nodes only, wall
// nodes are zero-filled), cells for the face layout.
Arr3D div_edge_field(const StaggeredGrid& g, const Stag3& D);
Arr3D div_face_field(const StaggeredGrid& g, const Stag3& B);

// Largest stable step scaled by `safety`, from coefficient eigenvalue bounds
// sampled over the grid and the field ball of radius delta0.
double cfl_dt(const StaggeredGrid& g, const MaterialModel& model, double safety);

// Solve eval(x, xi) xi = rhs for xi by damped Newton; the Jacobian is the
// derived matrix.  Throws NonConvergence (tagged with `when`/`x`) on failure.
Vec3 invert_constitutive(const CoefLaw& law, const Vec3& x, const Vec3& rhs,
                         const Vec3& guess, double tol, int max_iter,
                         NewtonStats* stats = nullptr, double when = 0.0);

// Field-wide inversion.  Components are grouped into 3-vectors at their
// shared lower corner (edge layout: nodes; face layout: cells); groups on the
// upper walls gather the clamped neighbor for the missing slots but write
// only their own entries.
void invert_edge_field(const CoefLaw& law, const StaggeredGrid& g,
                       const Stag3& D, Stag3& E, const StepParams& p,
                       NewtonStats* stats, double when);
void invert_face_field(const CoefLaw& law, const StaggeredGrid& g,
                       const Stag3& B, Stag3& H, const StepParams& p,
                       NewtonStats* stats, double when);

// Forward constitutive application with the same grouping as the inverses.
Stag3 apply_edge_law(const CoefLaw& law, const StaggeredGrid& g, const Stag3& E);
Stag3 apply_face_law(const CoefLaw& law, const StaggeredGrid& g, const Stag3& H);

// The lower-corner grouping itself.  gather reads the 3-vector at node/cell
// (i,j,k), clamping the index for slots the group does not own (upper walls);
// scatter writes back only the owned entries.
struct GatherE {
    Vec3 v;
    bool own[3];
};
GatherE gather_edge(const StaggeredGrid& g, const Stag3& F, int i, int j, int k);
GatherE gather_face(const StaggeredGrid& g, const Stag3& F, int i, int j, int k);
void scatter_edge(Stag3& F, int i, int j, int k, const GatherE& o, const Vec3& v);
void scatter_face(Stag3& F, int i, int j, int k, const GatherE& o, const Vec3& v);

// One boundary quadrature point.  Points sit at the wall positions of the
// tangential E rows; each point owns the single component `comp` of
// w = E x nu (fed by the E row that lies exactly there), the other tangent
// `other` being reconstructed by transverse averaging.
struct WallPoint {
    int axis = 0, side = 0;  // wall id
    int comp = 0;            // owned w component / paired ghost-H component
    int other = 0;           // remaining tangent axis
    std::array<int, 3> m{0, 0, 0};  // lattice index (m[axis] unused)
    Vec3 x;                  // position on the wall
    Vec3 nu;                 // outward unit normal
    double weight = 0.0;     // transverse area, halved on the nodal-axis rim
};

void for_each_wall_point(const StaggeredGrid& g,
                         const std::function<void(const WallPoint&)>& fn);

// Tangential trace w = E x nu of an edge field at a wall point: the owned
// component is exact, the other one a 2x2 transverse average (clipped at
// wall edges).
Vec3 wall_trace_w(const StaggeredGrid& g, const Stag3& E, const WallPoint& pt);

// Build ghost layers for every wall.  Impedance walls set the face-averaged
// tangential H to -lambda(x, w) w with w the tangential E trace taken from
// `Ewall`; PMC mirrors with a sign flip, PEC copies the interior value.
GhostLayers apply_impedance_bc(const StaggeredGrid& g, const MaterialModel& model,
                               const BcSpec& bc, const Stag3& Ewall, const Stag3& H);

// Boundary dissipation functional of the wall trace of `Eval`: the sum over
// wall sample points of weight * (lambda(x,w) w) . w restricted to the owned
// component, the quadrature the ghost construction itself induces.
// Reflecting walls contribute zero.
double wall_dissipation(const StaggeredGrid& g, const MaterialModel& model,
                        const BcSpec& bc, const Stag3& Eval);

// Squared tangential wall trace sum_pts weight * |E x nu|^2 over the whole
// boundary in the same quadrature.
double wall_tangential_sq(const StaggeredGrid& g, const Stag3& Eval);

// Volume quadratures the discrete energy balance closes under: every entry
// carries a trapezoid factor of 1/2 per nodal index that touches a wall
// (edge fields are nodal transversally, face fields along their own axis).
double edge_weighted_dot(const StaggeredGrid& g, const Stag3& A, const Stag3& B);
double face_weighted_dot(const StaggeredGrid& g, const Stag3& A, const Stag3& B);

// Advance one leapfrog step of dt.  On entry the state holds (E^n, H^{n-1/2});
// on exit (E^{n+1}, H^{n+1/2}), with the ring extended by the finished level n.
void step(SimState& state, const StaggeredGrid& g, const MaterialModel& model,
          const BcSpec& bc, const StepParams& p);

// Append a ring entry for the current (final) time level without advancing
// the state; uses a scratch half-step of H.
void push_terminal_sample(SimState& state, const StaggeredGrid& g,
                          const MaterialModel& model, const StepParams& p);

// Prepare a state at t = 0 from constitutive-consistent initial fields.  E1
// is the first time derivative of E used for the second-order half-step
// offset of H (pass a zero field to drop that correction).
void init_state(SimState& state, const StaggeredGrid& g, const MaterialModel& model,
                const Stag3& E0, const Stag3& H0, const Stag3& D0, const Stag3& B0,
                const Stag3& E1, const StepParams& p);

}  // namespace absd
