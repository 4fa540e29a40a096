#include "absd/fields.hpp"

#include <cmath>

namespace absd {

Stag3 make_e_field(const StaggeredGrid& g) {
    Stag3 f;
    for (int c = 0; c < 3; ++c) f[c].resize(g.e_shape(c));
    return f;
}

Stag3 make_h_field(const StaggeredGrid& g) {
    Stag3 f;
    for (int c = 0; c < 3; ++c) f[c].resize(g.h_shape(c));
    return f;
}

FieldSet make_field_set(const StaggeredGrid& g) {
    FieldSet fs;
    fs.E = make_e_field(g);
    fs.H = make_h_field(g);
    return fs;
}

CellField3 collocate_e(const StaggeredGrid& g, const Stag3& E) {
    CellField3 out;
    out.resize(g.cells);
    const auto& n = g.cells;
    for (int c = 0; c < 3; ++c) {
        const Arr3D& a = E[c];
        // E_c has cell count along axis c and node counts along the other
        // two; a cell center averages the 4 surrounding edges.
        const int tb = (c + 1) % 3, tc = (c + 2) % 3;
        for (int i = 0; i < n[0]; ++i)
            for (int j = 0; j < n[1]; ++j)
                for (int k = 0; k < n[2]; ++k) {
                    std::array<int, 3> lo = {i, j, k};
                    std::array<int, 3> b1 = lo, b2 = lo, b12 = lo;
                    b1[tb] += 1;
                    b2[tc] += 1;
                    b12[tb] += 1;
                    b12[tc] += 1;
                    double s = a.at(lo[0], lo[1], lo[2]) + a.at(b1[0], b1[1], b1[2]) +
                               a.at(b2[0], b2[1], b2[2]) + a.at(b12[0], b12[1], b12[2]);
                    out.c[c][out.idx(i, j, k)] = 0.25 * s;
                }
    }
    return out;
}

CellField3 collocate_h(const StaggeredGrid& g, const Stag3& H) {
    CellField3 out;
    out.resize(g.cells);
    const auto& n = g.cells;
    for (int c = 0; c < 3; ++c) {
        const Arr3D& a = H[c];
        // H_c is node-indexed along axis c only: average the two faces.
        for (int i = 0; i < n[0]; ++i)
            for (int j = 0; j < n[1]; ++j)
                for (int k = 0; k < n[2]; ++k) {
                    std::array<int, 3> lo = {i, j, k};
                    std::array<int, 3> hi = lo;
                    hi[c] += 1;
                    out.c[c][out.idx(i, j, k)] =
                        0.5 * (a.at(lo[0], lo[1], lo[2]) + a.at(hi[0], hi[1], hi[2]));
                }
    }
    return out;
}

void stag_axpy(double a, const Stag3& x, Stag3& y) {
    for (int c = 0; c < 3; ++c) {
        const auto& xv = x[c].v;
        auto& yv = y[c].v;
        for (std::size_t i = 0; i < xv.size(); ++i) yv[i] += a * xv[i];
    }
}

bool all_finite(const Stag3& f) {
    for (int c = 0; c < 3; ++c)
        for (double x : f[c].v)
            if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace absd
