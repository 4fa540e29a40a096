#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "absd/fields.hpp"
#include "absd/grid.hpp"
#include "absd/initdata.hpp"
#include "absd/materials.hpp"
#include "absd/stepper.hpp"

using namespace absd;

namespace {

MaterialModel unit_model() {
    MaterialModel m;
    m.eps.kind = CoefLaw::Linear;
    m.mu.kind = CoefLaw::Linear;
    m.lambda.kind = CoefLaw::Linear;
    return m;
}

CoefLaw kerr_law(double a, double b) {
    CoefLaw law;
    law.kind = CoefLaw::Kerr;
    law.lin = a;
    law.nl = b;
    return law;
}

Stag3 fill_edge(const StaggeredGrid& g, const std::function<Vec3(const Vec3&)>& f) {
    Stag3 F = make_e_field(g);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < F[c].n[0]; ++i)
            for (int j = 0; j < F[c].n[1]; ++j)
                for (int k = 0; k < F[c].n[2]; ++k)
                    F[c].at(i, j, k) = f(g.e_pos(c, i, j, k))[c];
    return F;
}

Stag3 fill_face(const StaggeredGrid& g, const std::function<Vec3(const Vec3&)>& f) {
    Stag3 F = make_h_field(g);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < F[c].n[0]; ++i)
            for (int j = 0; j < F[c].n[1]; ++j)
                for (int k = 0; k < F[c].n[2]; ++k)
                    F[c].at(i, j, k) = f(g.h_pos(c, i, j, k))[c];
    return F;
}

void fill_random(Stag3& F, Rng& rng, double amp) {
    for (int c = 0; c < 3; ++c)
        for (double& v : F[c].v) v = amp * rng.uniform(-1.0, 1.0);
}

double max_abs(const Stag3& F) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c)
        for (double v : F[c].v) m = std::max(m, std::abs(v));
    return m;
}

double max_abs(const Arr3D& a) {
    double m = 0.0;
    for (double v : a.v) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Stag3& A, const Stag3& B) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t q = 0; q < A[c].v.size(); ++q)
            m = std::max(m, std::abs(A[c].v[q] - B[c].v[q]));
    return m;
}

Mat3 identity_alpha(const Vec3&) {
    return Mat3::identity();
}

}  // namespace

TEST_CASE("nodal projector reproduces the closed forms") {
    StaggeredGrid g = build_grid({1.0, 1.2, 0.9}, {12, 10, 11});

    // constant vector: the potential is the linear function c.x, the
    // solenoidal part vanishes
    const Vec3 cvec{0.7, -0.3, 0.4};
    Stag3 w = fill_edge(g, [&](const Vec3&) { return cvec; });
    Projection p = helmholtz_project_edge(g, identity_alpha, w);
    CHECK(max_abs(p.field) < 1e-10);

    double base = 0.0;
    double worst = 0.0;
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const Vec3 x = g.node_pos(i, j, k);
                const double expect = dot(cvec, x);
                if (i == 0 && j == 0 && k == 0) base = p.potential.at(0, 0, 0) - expect;
                worst = std::max(worst,
                                 std::abs(p.potential.at(i, j, k) - expect - base));
            }
    CHECK(worst < 1e-8);

    // discrete pure gradient: nothing survives the projection
    Arr3D psi;
    psi.resize({g.cells[0] + 1, g.cells[1] + 1, g.cells[2] + 1});
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const Vec3 x = g.node_pos(i, j, k);
                psi.at(i, j, k) = std::sin(3.0 * x.x) * std::cos(2.0 * x.y) + x.z * x.z;
            }
    Stag3 grad = make_e_field(g);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < grad[c].n[0]; ++i)
            for (int j = 0; j < grad[c].n[1]; ++j)
                for (int k = 0; k < grad[c].n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    std::array<int, 3> J = I;
                    J[c] += 1;
                    grad[c].at(i, j, k) =
                        (psi.at(J[0], J[1], J[2]) - psi.at(I[0], I[1], I[2])) / g.h[c];
                }
    Projection pg = helmholtz_project_edge(g, identity_alpha, grad);
    CHECK(max_abs(pg.field) < 1e-10 * (1.0 + max_abs(grad)));

    // an exactly divergence-free field with zero boundary flux is a fixed
    // point
    MaterialModel lin = unit_model();
    BumpParams bp;
    bp.center = {0.5, 0.6, 0.45};
    bp.radius = 0.22;
    bp.amplitude = 0.8;
    bp.polarization = {0.3, -1.0, 0.5};
    InitialData data = make_bump_data(g, lin, bp, InitialRecipe::CurlBump);
    Projection pf = helmholtz_project_edge(g, identity_alpha, data.D);
    CHECK(max_abs_diff(pf.field, data.D) < 1e-10 * (1.0 + max_abs(data.D)));
}

TEST_CASE("projector is idempotent and weighted-orthogonal") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {10, 12, 9});
    auto alpha = [&](const Vec3& x) {
        const Vec3 m = x - g.x0;
        return (1.0 + dot(m, m)) * Mat3::diag(2.0, 3.0, 2.5);
    };
    Rng rng(2024);
    Stag3 w = make_e_field(g);
    fill_random(w, rng, 1.0);

    Projection p1 = helmholtz_project_edge(g, alpha, w);
    Projection p2 = helmholtz_project_edge(g, alpha, p1.field);
    CHECK(max_abs_diff(p2.field, p1.field) < 1e-10 * (1.0 + max_abs(p1.field)));

    // weighted inner product of the two parts of the split
    Stag3 gphi = w;
    stag_axpy(-1.0, p1.field, gphi);
    double dot_w = 0.0, nu = 0.0, ng = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < w[c].n[0]; ++i)
            for (int j = 0; j < w[c].n[1]; ++j)
                for (int k = 0; k < w[c].n[2]; ++k) {
                    const double a = alpha(g.e_pos(c, i, j, k))(c, c);
                    const double uu = a * p1.field[c].at(i, j, k);
                    const double gg = gphi[c].at(i, j, k);
                    dot_w += uu * gg;
                    nu += uu * uu;
                    ng += gg * gg;
                }
    CHECK(std::abs(dot_w) <= 1e-10 * std::sqrt(nu) * std::sqrt(ng));

    // unit weight: the solenoidal part has pointwise zero interior divergence
    Projection pu = helmholtz_project_edge(g, identity_alpha, w);
    Arr3D dv = div_edge_field(g, pu.field);
    CHECK(max_abs(dv) < 1e-9 * max_abs(w) / g.min_h());
}

TEST_CASE("full-matrix weights stay symmetric and idempotent") {
    StaggeredGrid g = build_grid({1.0, 0.8, 1.1}, {8, 9, 7});
    Mat3 A = Mat3::diag(2.0, 3.0, 2.5);
    A(0, 1) = A(1, 0) = 0.3;
    A(1, 2) = A(2, 1) = 0.2;
    auto alpha = [&](const Vec3&) { return A; };
    Rng rng(77);
    Stag3 w = make_e_field(g);
    fill_random(w, rng, 0.5);

    Projection p1 = helmholtz_project_edge(g, alpha, w);
    Projection p2 = helmholtz_project_edge(g, alpha, p1.field);
    CHECK(max_abs_diff(p2.field, p1.field) < 1e-9 * (1.0 + max_abs(p1.field)));

    // the split reconstructs the input
    Stag3 rec = p1.field;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < rec[c].n[0]; ++i)
            for (int j = 0; j < rec[c].n[1]; ++j)
                for (int k = 0; k < rec[c].n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    std::array<int, 3> J = I;
                    J[c] += 1;
                    rec[c].at(i, j, k) += (p1.potential.at(J[0], J[1], J[2]) -
                                           p1.potential.at(I[0], I[1], I[2])) /
                                          g.h[c];
                }
    CHECK(max_abs_diff(rec, w) < 1e-12 * (1.0 + max_abs(w)));
}

TEST_CASE("face projector removes cell charge and the normal trace") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.3}, {10, 9, 12});
    Rng rng(5150);
    Stag3 w = make_h_field(g);
    fill_random(w, rng, 1.0);

    Projection p = helmholtz_project_face(g, identity_alpha, w);
    Arr3D dv = div_face_field(g, p.field);
    CHECK(max_abs(dv) < 1e-9 * max_abs(w) / g.min_h());
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < p.field[c].n[0]; ++i)
            for (int j = 0; j < p.field[c].n[1]; ++j)
                for (int k = 0; k < p.field[c].n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    if (I[c] == 0 || I[c] == g.cells[c])
                        CHECK(p.field[c].at(i, j, k) == 0.0);
                }

    // a constant field is a pure gradient of a linear cell potential
    const Vec3 cvec{0.4, 1.1, -0.6};
    Stag3 cw = fill_face(g, [&](const Vec3&) { return cvec; });
    Projection pc = helmholtz_project_face(g, identity_alpha, cw);
    CHECK(max_abs(pc.field) < 1e-9);

    Projection p2 = helmholtz_project_face(g, identity_alpha, p.field);
    CHECK(max_abs_diff(p2.field, p.field) < 1e-10 * (1.0 + max_abs(p.field)));
}

TEST_CASE("curl construction is charge-free for nonlinear laws") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {14, 14, 14});
    MaterialModel m = unit_model();
    m.eps = kerr_law(2.0, 1.0);
    m.mu = kerr_law(1.0, 0.5);

    BumpParams p;
    p.center = {0.5, 0.5, 0.5};
    p.radius = 0.26;
    p.amplitude = 0.3;
    p.polarization = {0.3, -1.0, 0.2};
    InitialData data = make_bump_data(g, m, p, InitialRecipe::CurlBump);

    CHECK(data.charge_e < 1e-12);
    CHECK(data.charge_h < 1e-12);
    CHECK(max_abs(data.E) > 0.0);
    CHECK(max_abs_diff(data.D, apply_edge_law(m.eps, g, data.E)) < 3e-12);
    CHECK(max_abs_diff(data.B, apply_face_law(m.mu, g, data.H)) < 3e-12);

    BumpParams z = p;
    z.amplitude = 0.0;
    InitialData zero = make_bump_data(g, m, z, InitialRecipe::CurlBump);
    CHECK(max_abs(zero.E) == 0.0);
    CHECK(max_abs(zero.H) == 0.0);

    BumpParams bad = p;
    bad.center = {0.1, 0.5, 0.5};
    CHECK_THROWS_AS(make_bump_data(g, m, bad, InitialRecipe::CurlBump),
                    std::invalid_argument);
}

TEST_CASE("bump recipe drives the nonlinear charge to the gate in few sweeps") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});
    MaterialModel m = unit_model();
    m.eps = kerr_law(2.0, 1.0);
    m.mu = kerr_law(1.0, 0.5);

    BumpParams p;
    p.center = {0.5, 0.5, 0.5};
    p.radius = 0.3;
    p.amplitude = 0.1;
    p.polarization = {0.0, 0.3, 1.0};
    InitialData data = make_bump_data(g, m, p, InitialRecipe::Bump);

    CHECK(data.charge_e <= 1e-10);
    CHECK(data.charge_h <= 1e-10);
    CHECK(data.sweeps >= 1);
    CHECK(data.sweeps <= 8);
    CHECK(max_abs(data.E) > 0.0);

    // spatially varying diagonal linear law: the frozen weights are the
    // exact Jacobian, one sweep reaches the gate
    MaterialModel lin = unit_model();
    lin.eps.profile.shape = SpatialProfile::RadialQuadratic;
    lin.eps.profile.center = g.x0;
    lin.eps.M = Mat3::diag(2.0, 3.0, 2.5);
    InitialData ld = make_bump_data(g, lin, p, InitialRecipe::Bump);
    CHECK(ld.charge_e <= 1e-10);
    CHECK(ld.sweeps <= 2);
}

TEST_CASE("initial derivatives satisfy the defining group relations") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});
    MaterialModel m = unit_model();
    m.eps = kerr_law(2.0, 1.0);
    m.mu = kerr_law(1.0, 0.5);

    // zero data
    Stag3 ze = make_e_field(g), zh = make_h_field(g);
    InitialJet zjet = initial_time_derivatives(g, m, ze, zh);
    CHECK(max_abs(zjet.E1) == 0.0);
    CHECK(max_abs(zjet.H1) == 0.0);
    CHECK(max_abs(zjet.E2) == 0.0);
    CHECK(max_abs(zjet.H2) == 0.0);

    BumpParams p;
    p.center = {0.5, 0.5, 0.5};
    p.radius = 0.26;
    p.amplitude = 0.2;
    p.polarization = {0.4, 0.1, 1.0};
    InitialData data = make_bump_data(g, m, p, InitialRecipe::CurlBump);
    InitialJet jet = initial_time_derivatives(g, m, data.E, data.H);

    // identity coefficients collapse the first order to the bare curls
    MaterialModel lin = unit_model();
    InitialJet linjet = initial_time_derivatives(g, lin, data.E, data.H);
    GhostLayers gh = apply_impedance_bc(g, lin, all_walls(WallBc::Impedance),
                                        data.E, data.H);
    Stag3 cH0 = curl_h(g, data.H, &gh);
    CHECK(max_abs_diff(linjet.E1, cH0) < 1e-12 * (1.0 + max_abs(cH0)));
    Stag3 mcE0 = curl_e(g, data.E);
    for (int c = 0; c < 3; ++c)
        for (double& v : mcE0[c].v) v = -v;
    CHECK(max_abs_diff(linjet.H1, mcE0) < 1e-12 * (1.0 + max_abs(mcE0)));

    // grouped self-consistency for the nonlinear model: the derived matrix
    // applied to the first derivative recovers the curl on the owned slots
    GhostLayers gh0 = apply_impedance_bc(g, m, all_walls(WallBc::Impedance),
                                         data.E, data.H);
    Stag3 curl0 = curl_h(g, data.H, &gh0);
    double worst = 0.0;
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                GatherE rhs = gather_edge(g, curl0, i, j, k);
                GatherE s0 = gather_edge(g, data.E, i, j, k);
                GatherE s1 = gather_edge(g, jet.E1, i, j, k);
                Vec3 lhs = m.eps.eval_d(g.node_pos(i, j, k), s0.v) * s1.v;
                for (int c = 0; c < 3; ++c)
                    if (rhs.own[c]) worst = std::max(worst, std::abs(lhs[c] - rhs.v[c]));
            }
    CHECK(worst < 1e-12 * (1.0 + max_abs(curl0)));
}

TEST_CASE("initial derivatives match a refined single-step oracle") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});
    MaterialModel m = unit_model();
    m.eps = kerr_law(2.0, 1.0);
    m.mu = kerr_law(1.0, 0.5);

    BumpParams p;
    p.center = {0.5, 0.5, 0.5};
    p.radius = 0.28;
    p.amplitude = 0.25;
    p.polarization = {0.4, 0.1, 1.0};
    InitialData data = make_bump_data(g, m, p, InitialRecipe::CurlBump);
    InitialJet jet = initial_time_derivatives(g, m, data.E, data.H);

    auto defect = [&](double dt) {
        StepParams sp;
        sp.dt = dt;
        SimState s;
        init_state(s, g, m, data.E, data.H, data.D, data.B, jet.E1, sp);
        step(s, g, m, all_walls(WallBc::Impedance), sp);
        double worst = 0.0;
        for (int c = 0; c < 3; ++c)
            for (std::size_t q = 0; q < s.E[c].v.size(); ++q) {
                const double fd = (s.E[c].v[q] - data.E[c].v[q]) / dt;
                const double model2 = jet.E1[c].v[q] + 0.5 * dt * jet.E2[c].v[q];
                worst = std::max(worst, std::abs(fd - model2));
            }
        return worst;
    };
    const double r1 = defect(2e-3);
    const double r2 = defect(1e-3);
    CHECK(r1 / r2 > 3.0);
    CHECK(r1 / r2 < 5.0);
}

TEST_CASE("compatibility residuals vanish for interior data and report defects") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {16, 16, 16});
    MaterialModel m = unit_model();
    m.eps = kerr_law(2.0, 1.0);
    m.lambda = kerr_law(1.0, 0.5);

    // zero jet
    InitialJet zjet;
    zjet.E0 = zjet.E1 = zjet.E2 = make_e_field(g);
    zjet.H0 = zjet.H1 = zjet.H2 = make_h_field(g);
    auto zr = compatibility_residual(g, m, zjet);
    CHECK(zr[0] == 0.0);
    CHECK(zr[1] == 0.0);
    CHECK(zr[2] == 0.0);

    // well-separated interior support: every trace in the jet vanishes
    BumpParams p;
    p.center = {0.5, 0.5, 0.5};
    p.radius = 0.2;
    p.amplitude = 0.3;
    p.polarization = {0.2, -0.7, 1.0};
    InitialData data = make_bump_data(g, m, p, InitialRecipe::CurlBump);
    InitialJet jet = initial_time_derivatives(g, m, data.E, data.H);
    auto r = compatibility_residual(g, m, jet);
    CHECK(r[0] <= 1e-12);
    CHECK(r[1] <= 1e-12);
    CHECK(r[2] <= 1e-12);

    // inject a known tangential magnetic defect on one wall and read its
    // norm back through the order-0 residual
    InitialJet noisy = jet;
    double expect_sq = 0.0;
    bool toggle = false;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        if (pt.axis != 0 || pt.side != 0 || pt.comp != 1) return;
        if (pt.m[1] < 3 || pt.m[1] > g.cells[1] - 3) return;
        if (pt.m[2] < 3 || pt.m[2] > g.cells[2] - 3) return;
        std::array<int, 3> I = pt.m;
        I[0] = 0;
        const double delta = toggle ? 2e-3 : -1e-3;
        toggle = !toggle;
        noisy.H0[1].at(I[0], I[1], I[2]) += delta;
        expect_sq += pt.weight * delta * delta;
    });
    auto rn = compatibility_residual(g, m, noisy);
    CHECK(rn[0] == doctest::Approx(std::sqrt(expect_sq)).epsilon(1e-9));
    CHECK(rn[1] <= 1e-12);
}
