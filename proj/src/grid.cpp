#include "absd/grid.hpp"

#include <stdexcept>
#include <string>

namespace absd {

StaggeredGrid build_grid(const std::array<double, 3>& extent, const std::array<int, 3>& cells) {
    Vec3 center{0.5 * extent[0], 0.5 * extent[1], 0.5 * extent[2]};
    return build_grid(extent, cells, center);
}

StaggeredGrid build_grid(const std::array<double, 3>& extent, const std::array<int, 3>& cells,
                         const Vec3& x0) {
    for (int a = 0; a < 3; ++a) {
        if (!(extent[a] > 0.0))
            throw std::runtime_error("build_grid: extent must be positive along axis " +
                                     std::to_string(a));
        if (cells[a] < 4)
            throw std::runtime_error("build_grid: need at least 4 cells along axis " +
                                     std::to_string(a));
    }
    for (int a = 0; a < 3; ++a) {
        if (!(x0[a] > 0.0 && x0[a] < extent[a]))
            throw std::runtime_error("build_grid: x0 must lie strictly inside the box");
    }
    StaggeredGrid g;
    g.extent = extent;
    g.cells = cells;
    for (int a = 0; a < 3; ++a) g.h[a] = extent[a] / cells[a];
    g.x0 = x0;
    return g;
}

std::size_t boundary_face_count(const StaggeredGrid& g) {
    const auto& n = g.cells;
    return 2ull * (static_cast<std::size_t>(n[1]) * n[2] + static_cast<std::size_t>(n[0]) * n[2] +
                   static_cast<std::size_t>(n[0]) * n[1]);
}

double boundary_area(const StaggeredGrid& g) {
    const auto& L = g.extent;
    return 2.0 * (L[1] * L[2] + L[0] * L[2] + L[0] * L[1]);
}

std::vector<BoundaryFace> boundary_faces(const StaggeredGrid& g) {
    std::vector<BoundaryFace> out;
    out.reserve(boundary_face_count(g));
    for (int axis = 0; axis < 3; ++axis) {
        auto [ta, tb] = wall_tangents(axis);
        const double area = g.h[ta] * g.h[tb];
        for (int side = 0; side < 2; ++side) {
            const double wall = side == 0 ? 0.0 : g.extent[axis];
            Vec3 nu{0, 0, 0};
            nu[axis] = side == 0 ? -1.0 : 1.0;
            for (int u = 0; u < g.cells[ta]; ++u) {
                for (int v = 0; v < g.cells[tb]; ++v) {
                    BoundaryFace f;
                    f.axis = static_cast<short>(axis);
                    f.side = static_cast<short>(side);
                    f.u = u;
                    f.v = v;
                    f.center[axis] = wall;
                    f.center[ta] = (u + 0.5) * g.h[ta];
                    f.center[tb] = (v + 0.5) * g.h[tb];
                    f.normal = nu;
                    f.area = area;
                    out.push_back(f);
                }
            }
        }
    }
    return out;
}

}  // namespace absd
