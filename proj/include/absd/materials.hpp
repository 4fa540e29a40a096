#pragma once

#include <array>
#include <optional>
#include <string>

#include "absd/core.hpp"
#include "absd/grid.hpp"

namespace absd {

// Scalar spatial modulation s(x) of a coefficient, with a closed-form
// gradient so directional derivatives never need differencing.
struct SpatialProfile {
    enum Shape { Constant, RadialQuadratic, RadialInverseQuadratic };

    Shape shape = Constant;
    Vec3 center;  // usually the grid reference point x0

    double value(const Vec3& x) const {
        switch (shape) {
            case Constant: return 1.0;
            case RadialQuadratic: {
                Vec3 m = x - center;
                return 1.0 + dot(m, m);
            }
            case RadialInverseQuadratic: {
                Vec3 m = x - center;
                return 1.0 / (1.0 + dot(m, m));
            }
        }
        return 1.0;
    }

    Vec3 grad(const Vec3& x) const {
        Vec3 m = x - center;
        switch (shape) {
            case Constant: return {0, 0, 0};
            case RadialQuadratic: return 2.0 * m;
            case RadialInverseQuadratic: {
                double q = 1.0 + dot(m, m);
                return (-2.0 / (q * q)) * m;
            }
        }
        return {0, 0, 0};
    }
};

// One constitutive coefficient (used for eps, mu and lambda alike):
//
//   linear : s(x) * M                                   (no field dependence)
//   kerr   : (a(x) + b(x) |xi|^2) I                     (isotropic)
//   poly2  : s(x) * (A + c1 |xi|^2 I + c2 xi xi^T)      (anisotropic, even
//                                                        degree-2 polynomial)
//
// All three have symmetric derived matrices; odd powers of xi are excluded
// because they would break that symmetry.
struct CoefLaw {
    enum Kind { Linear, Kerr, Poly2 };

    Kind kind = Linear;
    SpatialProfile profile;      // linear & poly2
    Mat3 M = Mat3::identity();   // linear: M, poly2: A
    SpatialProfile lin_profile;  // kerr a(x)
    SpatialProfile nl_profile;   // kerr b(x)
    double lin = 1.0;            // kerr a0
    double nl = 0.0;             // kerr b0
    double c1 = 0.0;             // poly2
    double c2 = 0.0;             // poly2

    bool field_dependent() const { return kind != Linear; }
    bool spatially_constant() const;

    Mat3 eval(const Vec3& x, const Vec3& xi) const;
    Mat3 dxi(const Vec3& x, const Vec3& xi, int l) const;        // d/dxi_l of eval
    Mat3 d2xi(const Vec3& x, const Vec3& xi, int l, int m) const;  // second xi derivative

    // Derived matrix: eval_d(x,xi) = eval(x,xi) + [ (dxi_j eval) xi ]_{columns j},
    // i.e. the Jacobian of xi -> eval(x,xi) xi.
    Mat3 eval_d(const Vec3& x, const Vec3& xi) const;
    Mat3 dxi_d(const Vec3& x, const Vec3& xi, int l) const;         // d/dxi_l of eval_d
    Mat3 d2xi_d(const Vec3& x, const Vec3& xi, int l, int m) const;  // second derivative

    Mat3 eval_at0(const Vec3& x) const { return eval(x, {0, 0, 0}); }
    // (m . grad_x) eval(x, 0) with m = x - x0, closed form
    Mat3 radial_derivative_at0(const Vec3& x, const Vec3& x0) const;
};

struct MaterialModel {
    CoefLaw eps;
    CoefLaw mu;
    CoefLaw lambda;
    double eta = 0.5;     // uniform positivity margin
    double delta0 = 1.0;  // field radius on which positivity is required

    // "linear" / "kerr" / "poly2" by the strongest nonlinearity present
    std::string kind_name() const;
};

// Throws if the model is structurally unusable: lambda must map tangent
// planes of the axis walls into themselves (diagonal matrix part), and the
// zero-field matrices must be symmetric.
void validate_model(const MaterialModel& model);

Mat3 eval_eps(const MaterialModel& m, const Vec3& x, const Vec3& xi);
Mat3 eval_eps_d(const MaterialModel& m, const Vec3& x, const Vec3& xi);
Mat3 eval_mu(const MaterialModel& m, const Vec3& x, const Vec3& xi);
Mat3 eval_mu_d(const MaterialModel& m, const Vec3& x, const Vec3& xi);
Mat3 eval_lambda(const MaterialModel& m, const Vec3& x, const Vec3& xi);
Mat3 eval_lambda_d(const MaterialModel& m, const Vec3& x, const Vec3& xi);

struct FamilyCheck {
    std::string family;  // e.g. "eps", "eps_d", "lambda(0)"
    double min_eig = 0.0;
    double threshold = 0.0;
    Vec3 witness_x;
    Vec3 witness_xi;
    bool pass = false;
};

struct PositivityReport {
    bool pass = false;
    std::array<FamilyCheck, 9> checks;  // eps0, mu0, lambda0, then the 6 ball families
};

// Verifies the zero-field bound (>= 2 eta) at sampled grid nodes / boundary
// face centers and the uniform bound (>= eta) for |xi| <= delta0.
PositivityReport check_positivity(const MaterialModel& model, const StaggeredGrid& grid);

struct NontrappingReport {
    bool pass = false;
    double eta_bar = 0.0;  // largest margin valid at every sampled point
    Vec3 witness_x;        // minimizing sample (failure witness when !pass)
    std::string family;    // "eps" or "mu"
};

// Checks eps(x,0) + (m . grad) eps(x,0) >= eta_bar * eps(x,0) (and the same
// for mu) over sampled nodes, m(x) = x - x0.  use_fd switches the spatial
// derivative to 4th-order central differences at h/2 (cross-check path).
NontrappingReport check_nontrapping(const MaterialModel& model, const StaggeredGrid& grid,
                                    bool use_fd = false);

struct EigBounds {
    double min_eig = 0.0;
    double max_eig = 0.0;
};

// Extreme eigenvalues of a coefficient (and optionally its derived matrix)
// over sampled x and |xi| <= delta0; used for the CFL bound and for window
// lengths of the trace diagnostics.
EigBounds coef_eig_bounds(const CoefLaw& law, const StaggeredGrid& grid, double delta0,
                          bool include_derived);

}  // namespace absd
