#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>

#include "absd/core.hpp"
#include "absd/fields.hpp"
#include "absd/grid.hpp"
#include "absd/materials.hpp"
#include "absd/stepper.hpp"

namespace absd {

struct ProjectionFailure : std::runtime_error {
    explicit ProjectionFailure(const std::string& what) : std::runtime_error(what) {}
};

// One weighted Helmholtz split w = field + grad(potential).
struct Projection {
    Stag3 field;      // weighted-solenoidal part, same layout as the input
    Arr3D potential;  // nodes for the edge layout, cells for the face layout
    int cg_iterations = 0;
};

// Split an edge-layout field against the weight alpha (symmetric positive
// definite everywhere): after the split, the weighted flux divergence
// vanishes at every node and the weighted normal flux vanishes on the
// boundary, both to the solver tolerance.  Diagonal weights act pointwise at
// the edge positions (7-point operator); matrices with off-diagonal entries
// act through cell-center averaging.  Throws ProjectionFailure if the
// conjugate-gradient solve does not converge.
Projection helmholtz_project_edge(const StaggeredGrid& g,
                                  const std::function<Mat3(const Vec3&)>& alpha,
                                  const Stag3& w, double rel_tol = 1e-11);

// Face-layout analogue with the potential at cell centers.  The normal trace
// (wall-face entries) is zeroed as part of the projection, so the returned
// field has exact zero normal trace; the reconstruction w = field + grad
// holds on interior faces only.
Projection helmholtz_project_face(const StaggeredGrid& g,
                                  const std::function<Mat3(const Vec3&)>& alpha,
                                  const Stag3& w, double rel_tol = 1e-11);

// L2 norms of the flux divergences (interior nodes / all cells).
double charge_edge_norm(const StaggeredGrid& g, const Stag3& D);
double charge_face_norm(const StaggeredGrid& g, const Stag3& B);

// Smooth compactly supported profile: 1 at r = 0, identically 0 for r >= 1.
double bump_profile(double r);

enum class InitialRecipe { Bump, CurlBump };

struct BumpParams {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 0.0;
    double amplitude = 0.0;
    Vec3 polarization{0.0, 0.0, 1.0};
};

// Admissible initial fields with their fluxes, charge-free in the discrete
// sense.  `sweeps` counts the projector sweeps spent on the electric side.
struct InitialData {
    Stag3 E, D;  // edge layout
    Stag3 H, B;  // face layout
    int sweeps = 0;
    double charge_e = 0.0;
    double charge_h = 0.0;
};

// Build initial fields from a polarized bump of the given support ball.
// CurlBump takes curls of a bump potential, which are charge-free for every
// material law without projection; Bump samples the rotational profile
// directly and removes the charge by repeated weighted projection (requires
// diagonal permittivity and permeability; other laws fall back to the curl
// construction).  Rejects support balls closer than two cells to the wall.
InitialData make_bump_data(const StaggeredGrid& g, const MaterialModel& model,
                           const BumpParams& p, InitialRecipe recipe);

// Time derivatives of the fields at t = 0 induced by the evolution
// equations, up to second order.
struct InitialJet {
    Stag3 E0, H0;
    Stag3 E1, H1;
    Stag3 E2, H2;
};

InitialJet initial_time_derivatives(const StaggeredGrid& g, const MaterialModel& model,
                                    const Stag3& E0, const Stag3& H0);

// Boundary L2 norms of the absorbing-condition defect at time-derivative
// orders 0, 1, 2, evaluated in the stepper's wall quadrature.  Magnetic
// traces are read from the first interior layer.
std::array<double, 3> compatibility_residual(const StaggeredGrid& g,
                                             const MaterialModel& model,
                                             const InitialJet& jet);

}  // namespace absd
