#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "absd/core.hpp"
#include "absd/grid.hpp"

namespace absd {

struct Arr3D {
    std::array<int, 3> n{0, 0, 0};
    std::vector<double> v;

    void resize(const std::array<int, 3>& shape) {
        n = shape;
        v.assign(static_cast<std::size_t>(n[0]) * n[1] * n[2], 0.0);
    }
    std::size_t idx(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n[1] + j) * n[2] + k;
    }
    double& at(int i, int j, int k) { return v[idx(i, j, k)]; }
    double at(int i, int j, int k) const { return v[idx(i, j, k)]; }
    std::size_t size() const { return v.size(); }
};

// Three staggered component arrays (either the E or the H layout).
struct Stag3 {
    std::array<Arr3D, 3> c;

    Arr3D& operator[](int i) { return c[i]; }
    const Arr3D& operator[](int i) const { return c[i]; }

    std::size_t total_size() const { return c[0].size() + c[1].size() + c[2].size(); }

    void fill(double x) {
        for (auto& a : c) std::fill(a.v.begin(), a.v.end(), x);
    }
};

Stag3 make_e_field(const StaggeredGrid& g);
Stag3 make_h_field(const StaggeredGrid& g);

struct FieldSet {
    Stag3 E;
    Stag3 H;
};

FieldSet make_field_set(const StaggeredGrid& g);

// Vector field sampled at cell centers, component-collocated.
struct CellField3 {
    std::array<int, 3> n{0, 0, 0};
    std::array<std::vector<double>, 3> c;

    void resize(const std::array<int, 3>& cells) {
        n = cells;
        for (auto& a : c) a.assign(static_cast<std::size_t>(n[0]) * n[1] * n[2], 0.0);
    }
    std::size_t idx(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n[1] + j) * n[2] + k;
    }
    Vec3 at(std::size_t id) const { return {c[0][id], c[1][id], c[2][id]}; }
    std::size_t cell_count() const { return c[0].size(); }
};

// Average staggered components onto cell centers (4-point for edge fields,
// 2-point for face fields).
CellField3 collocate_e(const StaggeredGrid& g, const Stag3& E);
CellField3 collocate_h(const StaggeredGrid& g, const Stag3& H);

// y += a * x, matching layouts assumed
void stag_axpy(double a, const Stag3& x, Stag3& y);

bool all_finite(const Stag3& f);

// One time-level retained for backward differences in time.  Hbar is the
// magnetic field averaged onto the integer time level of E.
struct RingEntry {
    double t = 0.0;
    Stag3 E;
    Stag3 Hbar;
};

}  // namespace absd
