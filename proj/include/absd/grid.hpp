#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "absd/core.hpp"

namespace absd {

// Axis-aligned box [0,L0]x[0,L1]x[0,L2] with a staggered (Yee) layout:
// E components sit on edge midpoints, H components on face centers.
//
// Index shapes per component (c, then the remaining two axes in order):
//   E_c : cells along axis c, nodes along the other two
//   H_c : nodes along axis c, cells along the other two
struct StaggeredGrid {
    std::array<double, 3> extent{};
    std::array<int, 3> cells{};
    std::array<double, 3> h{};
    Vec3 x0;  // reference interior point for radial material profiles

    double diameter() const {
        return std::sqrt(extent[0] * extent[0] + extent[1] * extent[1] + extent[2] * extent[2]);
    }
    double min_h() const { return std::min(h[0], std::min(h[1], h[2])); }
    double cell_volume() const { return h[0] * h[1] * h[2]; }

    // shape of the E_c array (component c of an edge-midpoint field)
    std::array<int, 3> e_shape(int c) const {
        std::array<int, 3> s = {cells[0] + 1, cells[1] + 1, cells[2] + 1};
        s[c] = cells[c];
        return s;
    }
    // shape of the H_c array (component c of a face-center field)
    std::array<int, 3> h_shape(int c) const {
        std::array<int, 3> s = {cells[0], cells[1], cells[2]};
        s[c] = cells[c] + 1;
        return s;
    }

    Vec3 e_pos(int c, int i, int j, int k) const {
        Vec3 p{i * h[0], j * h[1], k * h[2]};
        p[c] += 0.5 * h[c];
        return p;
    }
    Vec3 h_pos(int c, int i, int j, int k) const {
        Vec3 p{(i + 0.5) * h[0], (j + 0.5) * h[1], (k + 0.5) * h[2]};
        p[c] -= 0.5 * h[c];
        return p;
    }
    Vec3 cell_center(int i, int j, int k) const {
        return {(i + 0.5) * h[0], (j + 0.5) * h[1], (k + 0.5) * h[2]};
    }
    Vec3 node_pos(int i, int j, int k) const { return {i * h[0], j * h[1], k * h[2]}; }
};

// One face of the outer boundary.  axis/side identify the wall, (u, v) index
// the face within the wall; ta/tb are the two tangential axes in cyclic order.
struct BoundaryFace {
    short axis = 0;   // wall normal axis
    short side = 0;   // 0 = low wall, 1 = high wall
    int u = 0, v = 0; // face indices along ta, tb
    Vec3 center;
    Vec3 normal;      // outward unit normal
    double area = 0.0;
};

// tangential axes of a wall with normal along `axis`, cyclic order
inline std::array<int, 2> wall_tangents(int axis) {
    return {(axis + 1) % 3, (axis + 2) % 3};
}

StaggeredGrid build_grid(const std::array<double, 3>& extent, const std::array<int, 3>& cells);
StaggeredGrid build_grid(const std::array<double, 3>& extent, const std::array<int, 3>& cells,
                         const Vec3& x0);

std::vector<BoundaryFace> boundary_faces(const StaggeredGrid& g);
std::size_t boundary_face_count(const StaggeredGrid& g);
double boundary_area(const StaggeredGrid& g);

// u x nu
inline Vec3 cross_normal(const Vec3& u, const Vec3& nu) { return cross(u, nu); }

// nu x (u x nu) = u - (u . nu) nu, the tangential part of u
inline Vec3 tangential_project(const Vec3& u, const Vec3& nu) { return u - dot(u, nu) * nu; }

}  // namespace absd
