#pragma once

#include <array>
#include <deque>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "absd/grid.hpp"
#include "absd/materials.hpp"
#include "absd/stepper.hpp"

namespace absd {

// Thrown when a requested time-derivative order needs more trailing levels
// than the ring buffer currently holds.
struct InsufficientHistory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backward-difference time derivative of order j (0..3) of the ring fields,
// evaluated at the entry `end_offset` levels before the newest one.  With
// `second_order` the stencil widths are j+2 (one-sided, second-order
// accurate); otherwise the minimal widths j+1 are used.  `electric` selects
// the E or the Hbar member.  Throws InsufficientHistory.
Stag3 ring_time_derivative(const std::deque<RingEntry>& ring, bool electric, int j,
                           int end_offset = 0, bool second_order = true);

// Sobolev-style diagnostic norm of a staggered field: the square root of the
// trapezoid-weighted L^2 quadrature plus, for each order m = 1..order, the
// per-axis pure difference seminorms (centered inside, one-sided at the
// ends).  Axes with fewer samples than the stencil width contribute zero.
double discrete_norm(const StaggeredGrid& g, const Stag3& f, bool edge_layout,
                     int order);

// Energy functional e_k: the max over 0 <= j <= k of the weighted half sums
// 1/2 (<eps_j dE_j, dE_j> + <mu_j dH_j, dH_j>) with eps_0 the constitutive
// law at the current field and eps_j its derived matrix for j >= 1, both
// evaluated groupwise; the j = 0 term is exactly the quantity the discrete
// energy balance conserves.  Throws InsufficientHistory.
double energy_e(const StaggeredGrid& g, const MaterialModel& model,
                const std::deque<RingEntry>& ring, int k);

// Dissipation functional d_k: the max over j <= k of the boundary quadrature
// sum w * (lambda(x, w0) w_j) . w_j restricted to the owned trace component,
// over the whole boundary; lambda is always evaluated at the order-zero
// trace.  Throws InsufficientHistory.
double dissipation_d(const StaggeredGrid& g, const MaterialModel& model,
                     const std::deque<RingEntry>& ring, int k);

// Norm functional z_k: the max over j <= k of
// |d_t^j E|_{H^{k-j}}^2 + |d_t^j H|_{H^{k-j}}^2.  Throws InsufficientHistory.
double z_norm(const StaggeredGrid& g, const std::deque<RingEntry>& ring, int k);

// Commutator fields of the time-differentiated system.  The first-order
// entries vanish identically and are not stored.  Boundary values are listed
// in for_each_wall_point traversal order.
struct CommutatorFields {
    Stag3 f2, f3;               // electric side, edge layout
    Stag3 g2, g3;               // magnetic side, face layout
    std::vector<Vec3> h2, h3;   // boundary side, wall-point order
};

// Needs history depth >= 4.  Throws InsufficientHistory.
CommutatorFields commutators(const StaggeredGrid& g, const MaterialModel& model,
                             const std::deque<RingEntry>& ring);

// Boundary-L2 norm of a wall-point-ordered field: sqrt(sum w |v|^2).
double boundary_field_norm(const StaggeredGrid& g, const std::vector<Vec3>& v);

struct DerivedResidual {
    double interior = 0.0;    // volume residual of d_t(eps_k d_t^k E) - curl d_t^k H
    double boundary = 0.0;    // trace residual of the derived impedance line
    double divergence = 0.0;  // charge norm of eps_k d_t^k E + f_k
};

// Residual norms of the k-times differentiated system (k = 1..3), formed
// with minimal-width backward differences so the required depth is k+2.
// The volume norm is restricted to curl rows that need no wall data.
// Throws InsufficientHistory.
DerivedResidual derived_system_residual(const StaggeredGrid& g,
                                        const MaterialModel& model,
                                        const std::deque<RingEntry>& ring, int k);

// Squared boundary trace norms: the normal component of an edge-layout flux
// density one half cell inside the wall, the normal component of a
// face-layout flux density on the wall, and the owned tangential trace
// components of each field family.
double normal_trace_sq_edge(const StaggeredGrid& g, const Stag3& D);
double normal_trace_sq_face(const StaggeredGrid& g, const Stag3& B);
double tangential_trace_sq_edge(const StaggeredGrid& g, const Stag3& E);
double tangential_trace_sq_face(const StaggeredGrid& g, const Stag3& H);

// One sample row of the emitted series.  Functionals above the clamped
// derivative order repeat the highest computable value, so the columns stay
// monotone in k during ring warm-up.
struct SeriesSample {
    double t = 0.0;
    std::array<double, 4> e{}, d{}, z{};
    double charge_e = 0.0, charge_h = 0.0;
    double trace_normal_d = 0.0, trace_normal_b = 0.0;
    double trace_tangential_e = 0.0, trace_tangential_h = 0.0;
    double bc_dissipation = 0.0;       // dissipation through the active walls
    double identity_residual = 0.0;    // cumulative energy identity defect
};

struct FunctionalSeries {
    std::vector<SeriesSample> samples;
};

// Assemble one sample from the ring (newest entry), clamping derivative
// orders to the available history.  The identity residual is left zero; the
// run loop accumulates it across samples.
SeriesSample sample_functionals(const StaggeredGrid& g, const MaterialModel& model,
                                const std::deque<RingEntry>& ring, int kmax);

// CSV round trip for the series (17 significant digits, fixed column set).
void write_series_csv(std::ostream& os, const FunctionalSeries& s);
FunctionalSeries read_series_csv(std::istream& is);

}  // namespace absd
