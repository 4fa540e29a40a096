#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "absd/core.hpp"
#include "absd/grid.hpp"
#include "absd/materials.hpp"

using namespace absd;

namespace {

CoefLaw kerr_law(double a, double b) {
    CoefLaw l;
    l.kind = CoefLaw::Kerr;
    l.lin = a;
    l.nl = b;
    return l;
}

CoefLaw poly2_law(const Mat3& A, double c1, double c2) {
    CoefLaw l;
    l.kind = CoefLaw::Poly2;
    l.M = A;
    l.c1 = c1;
    l.c2 = c2;
    return l;
}

CoefLaw linear_law(const Mat3& M) {
    CoefLaw l;
    l.kind = CoefLaw::Linear;
    l.M = M;
    return l;
}

// Jacobian of xi -> eval(x, xi) xi by central differences; the reference the
// derived-matrix code must reproduce.
Mat3 fd_jacobian(const CoefLaw& law, const Vec3& x, const Vec3& xi, double h) {
    Mat3 J;
    for (int j = 0; j < 3; ++j) {
        Vec3 xp = xi, xm = xi;
        xp[j] += h;
        xm[j] -= h;
        Vec3 col = (law.eval(x, xp) * xp - law.eval(x, xm) * xm) * (0.5 / h);
        for (int i = 0; i < 3; ++i) J(i, j) = col[i];
    }
    return J;
}

// two-level Richardson of the central difference: error drops from O(h^2) to O(h^4)
Mat3 fd_jacobian_rich(const CoefLaw& law, const Vec3& x, const Vec3& xi, double h) {
    Mat3 Jh = fd_jacobian(law, x, xi, h);
    Mat3 Jh2 = fd_jacobian(law, x, xi, 0.5 * h);
    return (Jh2 * 4.0 - Jh) * (1.0 / 3.0);
}

Mat3 fd_dxi_d(const CoefLaw& law, const Vec3& x, const Vec3& xi, int l, double h) {
    Vec3 xp = xi, xm = xi;
    xp[l] += h;
    xm[l] -= h;
    return (law.eval_d(x, xp) - law.eval_d(x, xm)) * (0.5 / h);
}

Mat3 fd_d2xi_d(const CoefLaw& law, const Vec3& x, const Vec3& xi, int l, int m, double h) {
    Vec3 xp = xi, xm = xi;
    xp[m] += h;
    xm[m] -= h;
    return (law.dxi_d(x, xp, l) - law.dxi_d(x, xm, l)) * (0.5 / h);
}

std::vector<CoefLaw> oracle_laws(const Vec3& center) {
    std::vector<CoefLaw> laws;

    laws.push_back(kerr_law(2.0, 1.0));

    CoefLaw k2 = kerr_law(2.0, 0.4);
    k2.lin_profile.shape = SpatialProfile::RadialInverseQuadratic;
    k2.lin_profile.center = center;
    k2.nl_profile.shape = SpatialProfile::RadialQuadratic;
    k2.nl_profile.center = center;
    laws.push_back(k2);

    Mat3 A = Mat3::diag(2.0, 3.0, 2.5);
    A(0, 1) = A(1, 0) = 0.3;
    CoefLaw p = poly2_law(A, 0.3, 0.2);
    p.profile.shape = SpatialProfile::RadialQuadratic;
    p.profile.center = center;
    laws.push_back(p);

    Mat3 M = Mat3::diag(1.5, 2.0, 1.0);
    M(1, 2) = M(2, 1) = 0.2;
    CoefLaw lin = linear_law(M);
    lin.profile.shape = SpatialProfile::RadialInverseQuadratic;
    lin.profile.center = center;
    laws.push_back(lin);

    return laws;
}

}  // namespace

TEST_CASE("kerr coefficient matches hand-computed values") {
    CoefLaw k = kerr_law(2.0, 1.0);
    Vec3 x{0.3, 0.4, 0.5};
    Vec3 e1{1, 0, 0};

    Mat3 eps = k.eval(x, e1);
    CHECK((eps - Mat3::scale(3.0)).max_abs() < 1e-15);

    // derived matrix (a + b|xi|^2) I + 2 b xi xi^T at xi = e1
    Mat3 epsd = k.eval_d(x, e1);
    CHECK((epsd - Mat3::diag(5.0, 3.0, 3.0)).max_abs() < 1e-15);

    Mat3 eps0 = k.eval(x, {0, 0, 0});
    CHECK((eps0 - Mat3::scale(2.0)).max_abs() < 1e-15);
    CHECK((k.eval_d(x, {0, 0, 0}) - Mat3::scale(2.0)).max_abs() < 1e-15);
}

TEST_CASE("poly2 derived matrix matches the closed form") {
    // eval(xi) xi = s (A xi + (c1 + c2) |xi|^2 xi), so the Jacobian is
    // s (A + (c1 + c2)(|xi|^2 I + 2 xi xi^T)).
    Mat3 A = Mat3::diag(2.0, 2.0, 2.0);
    CoefLaw p = poly2_law(A, 0.3, 0.2);
    Vec3 x{0.1, 0.2, 0.3};
    Vec3 e1{1, 0, 0};
    Mat3 d = p.eval_d(x, e1);
    CHECK((d - Mat3::diag(3.5, 2.5, 2.5)).max_abs() < 1e-15);
}

TEST_CASE("derived matrices equal the finite-difference jacobian of xi -> eval xi") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {4, 4, 4});
    Rng rng(101);
    for (const CoefLaw& law : oracle_laws(g.x0)) {
        for (int trial = 0; trial < 40; ++trial) {
            Vec3 x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
            Vec3 xi = rng.unit_vector() * rng.uniform(0.0, 1.0);
            Mat3 ref = fd_jacobian_rich(law, x, xi, 1e-3);
            Mat3 got = law.eval_d(x, xi);
            CHECK((got - ref).max_abs() < 1e-9);
            CHECK(got.asymmetry() < 1e-12);
        }
    }
}

TEST_CASE("central-difference jacobian converges at second order") {
    CoefLaw law = kerr_law(2.0, 0.7);
    Vec3 x{0.5, 0.5, 0.5};
    Vec3 xi{0.4, -0.3, 0.6};
    Mat3 exact = law.eval_d(x, xi);
    double e1 = (fd_jacobian(law, x, xi, 2e-2) - exact).max_abs();
    double e2 = (fd_jacobian(law, x, xi, 1e-2) - exact).max_abs();
    // for a degree-2 law the central difference of the cubic map has an
    // exactly h^2-proportional error term and nothing above it
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("first and second xi-derivatives of the derived matrix match differencing") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {4, 4, 4});
    Rng rng(202);
    for (const CoefLaw& law : oracle_laws(g.x0)) {
        for (int trial = 0; trial < 10; ++trial) {
            Vec3 x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
            Vec3 xi = rng.unit_vector() * rng.uniform(0.0, 1.0);
            for (int l = 0; l < 3; ++l) {
                Mat3 ref = fd_dxi_d(law, x, xi, l, 1e-4);
                CHECK((law.dxi_d(x, xi, l) - ref).max_abs() < 2e-7);
                for (int m = 0; m < 3; ++m) {
                    Mat3 ref2 = fd_d2xi_d(law, x, xi, l, m, 1e-4);
                    CHECK((law.d2xi_d(x, xi, l, m) - ref2).max_abs() < 2e-7);
                }
            }
        }
    }
}

TEST_CASE("model validation rejects unusable coefficients") {
    MaterialModel m;
    m.eps = kerr_law(2.0, 0.5);
    m.mu = linear_law(Mat3::identity());
    m.lambda = linear_law(Mat3::identity());
    CHECK_NOTHROW(validate_model(m));

    MaterialModel bad = m;
    Mat3 offdiag = Mat3::identity();
    offdiag(0, 1) = offdiag(1, 0) = 0.2;
    bad.lambda = linear_law(offdiag);
    CHECK_THROWS_WITH_AS(validate_model(bad),
                         doctest::Contains("lambda matrix must be diagonal"), std::runtime_error);

    MaterialModel asym = m;
    Mat3 nonsym = Mat3::identity();
    nonsym(0, 1) = 0.3;  // eps must be symmetric
    asym.eps = linear_law(nonsym);
    CHECK_THROWS_AS(validate_model(asym), std::runtime_error);

    MaterialModel badeta = m;
    badeta.eta = 0.0;
    CHECK_THROWS_AS(validate_model(badeta), std::runtime_error);
}

TEST_CASE("positivity scan passes a healthy kerr model") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {8, 8, 8});
    MaterialModel m;
    m.eps = kerr_law(2.0, 1.0);
    m.mu = linear_law(Mat3::identity());
    m.lambda = linear_law(Mat3::diag(1.0, 1.0, 1.0));
    m.eta = 0.5;
    m.delta0 = 1.0;

    PositivityReport rep = check_positivity(m, g);
    CHECK(rep.pass);
    for (const auto& c : rep.checks) {
        CHECK(c.pass);
        CHECK(c.min_eig >= c.threshold);
    }
    // zero-field eps eigenvalue is exactly 2, well above 2 eta = 1
    CHECK(rep.checks[0].min_eig == doctest::Approx(2.0));
}

TEST_CASE("positivity scan catches a defocusing kerr law on a too-large ball") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {8, 8, 8});
    MaterialModel m;
    m.eps = kerr_law(2.0, -1.0);
    m.mu = linear_law(Mat3::identity());
    m.lambda = linear_law(Mat3::identity());
    m.eta = 0.5;
    m.delta0 = 2.0;

    PositivityReport rep = check_positivity(m, g);
    CHECK_FALSE(rep.pass);
    // zero-field check still passes: eps(0) = 2 I
    CHECK(rep.checks[0].pass);
    // the ball scan of eps fails at the rim, eps = (2 - 4) I there
    CHECK_FALSE(rep.checks[3].pass);
    CHECK(rep.checks[3].min_eig == doctest::Approx(-2.0));
    CHECK(norm(rep.checks[3].witness_xi) == doctest::Approx(2.0));
    // the derived family fails even earlier (radial eigenvalue 2 - 3 |xi|^2)
    CHECK_FALSE(rep.checks[4].pass);
    CHECK(rep.checks[4].min_eig == doctest::Approx(-10.0));
}

TEST_CASE("nontrapping margin is exactly one for spatially constant laws") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {8, 8, 8});
    MaterialModel m;
    m.eps = kerr_law(2.0, 1.0);
    m.mu = linear_law(Mat3::diag(1.0, 2.0, 3.0));
    m.lambda = linear_law(Mat3::identity());

    NontrappingReport rep = check_nontrapping(m, g);
    CHECK(rep.pass);
    CHECK(rep.eta_bar == 1.0);
}

TEST_CASE("nontrapping holds for the growing radial profile") {
    // s = 1 + |m|^2 gives s + m . grad s = 1 + 3 |m|^2 >= s everywhere
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {8, 8, 8});
    MaterialModel m;
    m.eps = linear_law(Mat3::identity());
    m.eps.profile.shape = SpatialProfile::RadialQuadratic;
    m.eps.profile.center = g.x0;
    m.mu = linear_law(Mat3::identity());
    m.lambda = linear_law(Mat3::identity());

    NontrappingReport rep = check_nontrapping(m, g);
    CHECK(rep.pass);
    CHECK(rep.eta_bar == doctest::Approx(1.0));
}

TEST_CASE("nontrapping fails for the decaying profile beyond unit radius") {
    // s = (1 + |m|^2)^-1 gives s + m . grad s = (1 - |m|^2)/(1 + |m|^2)^2,
    // nonpositive once |x - x0| >= 1; the box is large enough to reach that.
    StaggeredGrid g = build_grid({3.0, 3.0, 3.0}, {12, 12, 12});
    MaterialModel m;
    m.eps = linear_law(Mat3::identity());
    m.eps.profile.shape = SpatialProfile::RadialInverseQuadratic;
    m.eps.profile.center = g.x0;
    m.mu = linear_law(Mat3::identity());
    m.lambda = linear_law(Mat3::identity());

    NontrappingReport rep = check_nontrapping(m, g);
    CHECK_FALSE(rep.pass);
    CHECK(rep.family == "eps");
    CHECK(norm(rep.witness_x - g.x0) > 1.0);
    // margin at the witness: (1 - r^2)/(1 + r^2) for r = corner radius
    double r2 = dot(rep.witness_x - g.x0, rep.witness_x - g.x0);
    CHECK(rep.eta_bar == doctest::Approx((1.0 - r2) / (1.0 + r2)));

    // cross-check: finite-difference spatial derivatives agree (corner
    // witnesses can tie, so compare radii rather than positions)
    NontrappingReport fd = check_nontrapping(m, g, true);
    CHECK(fd.eta_bar == doctest::Approx(rep.eta_bar).epsilon(1e-9));
    CHECK(norm(fd.witness_x - g.x0) == doctest::Approx(norm(rep.witness_x - g.x0)));
}

TEST_CASE("eigenvalue bounds bracket the coefficient family") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {8, 8, 8});

    EigBounds lin = coef_eig_bounds(linear_law(Mat3::diag(1.5, 2.0, 3.0)), g, 1.0, false);
    CHECK(lin.min_eig == doctest::Approx(1.5));
    CHECK(lin.max_eig == doctest::Approx(3.0));

    // kerr a=2, b=1 on |xi| <= 1: plain matrix in [2, 3], derived up to a + 3b = 5
    EigBounds k = coef_eig_bounds(kerr_law(2.0, 1.0), g, 1.0, false);
    CHECK(k.min_eig == doctest::Approx(2.0));
    CHECK(k.max_eig == doctest::Approx(3.0));
    EigBounds kd = coef_eig_bounds(kerr_law(2.0, 1.0), g, 1.0, true);
    CHECK(kd.min_eig == doctest::Approx(2.0));
    CHECK(kd.max_eig == doctest::Approx(5.0));
}
