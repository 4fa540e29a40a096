#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <vector>

#include "absd/core.hpp"
#include "absd/grid.hpp"

using namespace absd;

TEST_CASE("solve3 recovers known solutions and rejects singular systems") {
    Mat3 A;
    A(0, 0) = 4;  A(0, 1) = 1;  A(0, 2) = 0;
    A(1, 0) = 1;  A(1, 1) = 3;  A(1, 2) = 1;
    A(2, 0) = 0;  A(2, 1) = 1;  A(2, 2) = 5;
    Vec3 x_ref{1.0, -2.0, 0.5};
    Vec3 b = A * x_ref;
    Vec3 x = solve3(A, b);
    CHECK(norm(x - x_ref) < 1e-14);

    Mat3 S;  // rank 2: third row = first + second
    S(0, 0) = 1; S(0, 1) = 2; S(0, 2) = 3;
    S(1, 0) = 4; S(1, 1) = 5; S(1, 2) = 6;
    S(2, 0) = 5; S(2, 1) = 7; S(2, 2) = 9;
    CHECK_THROWS(solve3(S, {1, 0, 0}));
}

TEST_CASE("cholesky3 accepts SPD and rejects indefinite matrices") {
    Mat3 A = Mat3::diag(2, 3, 4);
    A(0, 1) = A(1, 0) = 0.5;
    Mat3 L;
    REQUIRE(cholesky3(A, L));
    Mat3 R = matmul(L, L.transposed());
    CHECK((R - A).max_abs() < 1e-14);

    Mat3 B = Mat3::diag(1, -1, 1);
    CHECK_FALSE(cholesky3(B, L));
}

TEST_CASE("sym_eig3 diagonalizes symmetric matrices") {
    Mat3 D = Mat3::diag(3, 1, 2);
    std::array<double, 3> ev;
    Mat3 V;
    sym_eig3(D, ev, V);
    CHECK(ev[0] == doctest::Approx(1.0));
    CHECK(ev[1] == doctest::Approx(2.0));
    CHECK(ev[2] == doctest::Approx(3.0));

    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        Mat3 A;
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) A(i, j) = A(j, i) = rng.uniform(-2.0, 2.0);
        sym_eig3(A, ev, V);
        CHECK(ev[0] <= ev[1]);
        CHECK(ev[1] <= ev[2]);
        // A V = V diag(ev), column by column
        for (int j = 0; j < 3; ++j) {
            Vec3 vj{V(0, j), V(1, j), V(2, j)};
            CHECK(norm(vj) == doctest::Approx(1.0).epsilon(1e-12));
            Vec3 r = A * vj - ev[j] * vj;
            CHECK(norm(r) < 1e-12);
        }
    }
}

TEST_CASE("sym_sqrt3 squares back to the input") {
    Mat3 A = Mat3::diag(4, 1, 9);
    A(0, 2) = A(2, 0) = 1.0;
    Mat3 S = sym_sqrt3(A);
    CHECK((matmul(S, S) - A).max_abs() < 1e-12);
    CHECK(S.asymmetry() < 1e-13);
}

TEST_CASE("gen_min_eig3 handles non-identity metrics") {
    CHECK(gen_min_eig3(Mat3::diag(2, 3, 4), Mat3::identity()) == doctest::Approx(2.0));
    CHECK(gen_min_eig3(Mat3::diag(2, 3, 4), Mat3::diag(4, 1, 1)) == doctest::Approx(0.5));
    Mat3 B = Mat3::diag(2, 3, 4);
    B(0, 1) = B(1, 0) = 0.3;
    CHECK(gen_min_eig3(B, B) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK_THROWS(gen_min_eig3(Mat3::identity(), Mat3::diag(1, -1, 1)));
}

TEST_CASE("tree_sum matches sequential summation and is order-stable") {
    Rng rng(7);
    std::vector<double> v(1000);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    double ref = std::accumulate(v.begin(), v.end(), 0.0);
    double s1 = tree_sum(v);
    double s2 = tree_sum(v);
    CHECK(s1 == s2);  // bitwise repeatable
    CHECK(s1 == doctest::Approx(ref).epsilon(1e-12));
    CHECK(tree_sum(std::span<const double>(v.data(), 0)) == 0.0);
    CHECK(tree_sum(std::span<const double>(v.data(), 1)) == v[0]);
}

TEST_CASE("rng streams are deterministic and in range") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(5);
    for (int i = 0; i < 1000; ++i) {
        double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    Rng d(9);
    for (int i = 0; i < 100; ++i) CHECK(norm(d.unit_vector()) == doctest::Approx(1.0));
}

TEST_CASE("build_grid fills spacing and center defaults") {
    StaggeredGrid g = build_grid({1.0, 2.0, 3.0}, {4, 8, 12});
    CHECK(g.h[0] == doctest::Approx(0.25));
    CHECK(g.h[1] == doctest::Approx(0.25));
    CHECK(g.h[2] == doctest::Approx(0.25));
    CHECK(g.min_h() == doctest::Approx(0.25));
    CHECK(g.cell_volume() == doctest::Approx(0.015625));
    CHECK(g.diameter() == doctest::Approx(std::sqrt(14.0)));
    CHECK(g.x0.x == doctest::Approx(0.5));
    CHECK(g.x0.y == doctest::Approx(1.0));
    CHECK(g.x0.z == doctest::Approx(1.5));
}

TEST_CASE("build_grid rejects degenerate boxes and exterior reference points") {
    CHECK_THROWS(build_grid({0.0, 1.0, 1.0}, {4, 4, 4}));
    CHECK_THROWS(build_grid({1.0, 1.0, 1.0}, {3, 4, 4}));
    CHECK_THROWS(build_grid({1.0, 1.0, 1.0}, {4, 4, 4}, Vec3{1.5, 0.5, 0.5}));
    CHECK_THROWS(build_grid({1.0, 1.0, 1.0}, {4, 4, 4}, Vec3{0.0, 0.5, 0.5}));
}

TEST_CASE("staggered shapes follow the edge/face layout") {
    StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {4, 5, 6});
    CHECK(g.e_shape(0) == std::array<int, 3>{4, 6, 7});
    CHECK(g.e_shape(1) == std::array<int, 3>{5, 5, 7});
    CHECK(g.e_shape(2) == std::array<int, 3>{5, 6, 6});
    CHECK(g.h_shape(0) == std::array<int, 3>{5, 5, 6});
    CHECK(g.h_shape(1) == std::array<int, 3>{4, 6, 6});
    CHECK(g.h_shape(2) == std::array<int, 3>{4, 5, 7});
}

TEST_CASE("edge and face positions are offset half a cell along the right axes") {
    StaggeredGrid g = build_grid({2.0, 2.0, 2.0}, {4, 4, 4});
    Vec3 e0 = g.e_pos(0, 1, 2, 3);
    CHECK(e0.x == doctest::Approx(0.75));
    CHECK(e0.y == doctest::Approx(1.0));
    CHECK(e0.z == doctest::Approx(1.5));
    Vec3 h0 = g.h_pos(0, 1, 2, 3);
    CHECK(h0.x == doctest::Approx(0.5));
    CHECK(h0.y == doctest::Approx(1.25));
    CHECK(h0.z == doctest::Approx(1.75));
    Vec3 cc = g.cell_center(0, 0, 0);
    CHECK(cc.x == doctest::Approx(0.25));
}

TEST_CASE("boundary faces cover the box once with outward normals") {
    StaggeredGrid g = build_grid({1.0, 2.0, 3.0}, {8, 8, 8});
    auto faces = boundary_faces(g);
    CHECK(faces.size() == boundary_face_count(g));
    CHECK(faces.size() == 6u * 64u);

    double area = 0.0;
    for (const auto& f : faces) {
        area += f.area;
        CHECK(norm(f.normal) == doctest::Approx(1.0));
        // center lies on the wall plane
        double wall = f.side == 0 ? 0.0 : g.extent[f.axis];
        CHECK(f.center[f.axis] == doctest::Approx(wall));
        // outward: normal points away from the interior
        Vec3 inward = g.x0 - f.center;
        CHECK(dot(f.normal, inward) < 0.0);
        // tangential coordinates sit at face centers, strictly inside
        auto [ta, tb] = wall_tangents(f.axis);
        CHECK(f.center[ta] > 0.0);
        CHECK(f.center[ta] < g.extent[ta]);
        CHECK(f.center[tb] > 0.0);
        CHECK(f.center[tb] < g.extent[tb]);
    }
    CHECK(area == doctest::Approx(boundary_area(g)));
    CHECK(boundary_area(g) == doctest::Approx(2.0 * (1 * 2 + 1 * 3 + 2 * 3)));
}

TEST_CASE("wall_tangents cycles the axes") {
    CHECK(wall_tangents(0) == std::array<int, 2>{1, 2});
    CHECK(wall_tangents(1) == std::array<int, 2>{2, 0});
    CHECK(wall_tangents(2) == std::array<int, 2>{0, 1});
}

TEST_CASE("trace algebra: tangential projection and rotation identities") {
    Rng rng(31);
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
            Vec3 nu{0, 0, 0};
            nu[axis] = side == 0 ? -1.0 : 1.0;
            for (int trial = 0; trial < 10; ++trial) {
                Vec3 u = rng.unit_vector() * rng.uniform(0.1, 3.0);
                Vec3 ut = tangential_project(u, nu);
                CHECK(std::abs(dot(ut, nu)) < 1e-15);
                // nu x (u x nu) recovers the tangential part
                Vec3 r = cross(nu, cross_normal(u, nu));
                CHECK(norm(r - ut) < 1e-15);
                // |u|^2 splits into tangential and normal energy
                double lhs = dot(u, u);
                double rhs = dot(ut, ut) + dot(u, nu) * dot(u, nu);
                CHECK(lhs == doctest::Approx(rhs));
                // u x nu is tangential and has the tangential magnitude
                Vec3 w = cross_normal(u, nu);
                CHECK(std::abs(dot(w, nu)) < 1e-15);
                CHECK(norm(w) == doctest::Approx(norm(ut)));
            }
        }
    }
}
