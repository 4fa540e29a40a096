#include "absd/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace absd {

namespace {

inline std::array<int, 3> bump(std::array<int, 3> I, int axis, int d) {
    I[axis] += d;
    return I;
}

inline double at(const Arr3D& a, const std::array<int, 3>& I) {
    return a.at(I[0], I[1], I[2]);
}

inline double& at(Arr3D& a, const std::array<int, 3>& I) {
    return a.at(I[0], I[1], I[2]);
}

// ghost plane lookup for H component `comp` read one step outside wall
// (axis, side); I is the in-range part of the index (wall axis entry ignored)
inline double ghost_at(const GhostLayers* gh, int comp, int axis, int side,
                       std::array<int, 3> I) {
    if (gh == nullptr) return 0.0;
    const auto tang = wall_tangents(axis);
    const int slot = (comp == tang[0]) ? 0 : 1;
    I[axis] = 0;
    return at(gh->plane[axis][side][slot], I);
}

// one difference d(H_b)/d(axis) of the face field at an edge row index I
// (node index along `axis`), consulting the ghost layer outside the walls
inline double dh(const StaggeredGrid& g, const Stag3& H, const GhostLayers* gh, int b,
                 int axis, const std::array<int, 3>& I) {
    const int n = g.cells[axis];
    const int m = I[axis];
    double hi, lo;
    if (m == n)
        hi = ghost_at(gh, b, axis, 1, I);
    else
        hi = at(H[b], I);
    if (m == 0)
        lo = ghost_at(gh, b, axis, 0, bump(I, axis, -1));
    else
        lo = at(H[b], bump(I, axis, -1));
    return (hi - lo) / g.h[axis];
}

inline double curl_h_row(const StaggeredGrid& g, const Stag3& H, const GhostLayers* gh, int c,
                         const std::array<int, 3>& I) {
    const int c1 = (c + 1) % 3;
    const int c2 = (c + 2) % 3;
    return dh(g, H, gh, c2, c1, I) - dh(g, H, gh, c1, c2, I);
}

// edge row I of component c needs a ghost iff a transverse node index sits
// on a wall
inline bool on_wall_row(const StaggeredGrid& g, int c, const std::array<int, 3>& I) {
    const int c1 = (c + 1) % 3;
    const int c2 = (c + 2) % 3;
    return I[c1] == 0 || I[c1] == g.cells[c1] || I[c2] == 0 || I[c2] == g.cells[c2];
}

}  // namespace

GatherE gather_edge(const StaggeredGrid& g, const Stag3& F, int i, int j, int k) {
    GatherE r;
    const int i0 = std::min(i, g.cells[0] - 1);
    const int j0 = std::min(j, g.cells[1] - 1);
    const int k0 = std::min(k, g.cells[2] - 1);
    r.v = {F[0].at(i0, j, k), F[1].at(i, j0, k), F[2].at(i, j, k0)};
    r.own[0] = i < g.cells[0];
    r.own[1] = j < g.cells[1];
    r.own[2] = k < g.cells[2];
    return r;
}

GatherE gather_face(const StaggeredGrid& g, const Stag3& F, int i, int j, int k) {
    GatherE r;
    const int i0 = std::min(i, g.cells[0] - 1);
    const int j0 = std::min(j, g.cells[1] - 1);
    const int k0 = std::min(k, g.cells[2] - 1);
    r.v = {F[0].at(i, j0, k0), F[1].at(i0, j, k0), F[2].at(i0, j0, k)};
    r.own[0] = j < g.cells[1] && k < g.cells[2];
    r.own[1] = i < g.cells[0] && k < g.cells[2];
    r.own[2] = i < g.cells[0] && j < g.cells[1];
    return r;
}

void scatter_edge(Stag3& F, int i, int j, int k, const GatherE& o, const Vec3& v) {
    if (o.own[0]) F[0].at(i, j, k) = v.x;
    if (o.own[1]) F[1].at(i, j, k) = v.y;
    if (o.own[2]) F[2].at(i, j, k) = v.z;
}

void scatter_face(Stag3& F, int i, int j, int k, const GatherE& o, const Vec3& v) {
    if (o.own[0]) F[0].at(i, j, k) = v.x;
    if (o.own[1]) F[1].at(i, j, k) = v.y;
    if (o.own[2]) F[2].at(i, j, k) = v.z;
}

namespace {

using Gather = GatherE (*)(const StaggeredGrid&, const Stag3&, int, int, int);
using Scatter = void (*)(Stag3&, int, int, int, const GatherE&, const Vec3&);

// Newton restricted to the owned components of a group.  Groups on the upper
// walls own fewer than three entries; the missing slots of `xi` stay frozen
// at the neighbor values they were gathered from (final by the time the
// group is visited, sweeps run in ascending lexicographic order), so the
// solved entries are consistent with the forward law evaluated at the
// reassembled group vector.
Vec3 solve_masked(const CoefLaw& law, const Vec3& x, const Vec3& rhs, Vec3 xi,
                  const bool own[3], double tol, int max_iter, NewtonStats* stats,
                  double when) {
    Vec3 mrhs{own[0] ? rhs.x : 0.0, own[1] ? rhs.y : 0.0, own[2] ? rhs.z : 0.0};
    const double scale = 1.0 + norm(mrhs);
    auto residual = [&](const Vec3& v) {
        Vec3 F = law.eval(x, v) * v - rhs;
        for (int c = 0; c < 3; ++c)
            if (!own[c]) F[c] = 0.0;
        return F;
    };
    Vec3 F = residual(xi);
    double nf = norm(F);
    int it = 0;
    int halvings = 0;
    while (nf > tol * scale) {
        if (it >= max_iter)
            throw NonConvergence("constitutive inversion stalled", when, x);
        Mat3 J = law.eval_d(x, xi);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (!own[r] || !own[c]) J(r, c) = (r == c) ? 1.0 : 0.0;
        Vec3 dxi = solve3(J, -1.0 * F);
        double s = 1.0;
        Vec3 cand;
        Vec3 Fc;
        double nc;
        int tries = 0;
        for (;;) {
            cand = xi + s * dxi;
            Fc = residual(cand);
            nc = norm(Fc);
            if (nc < nf) break;
            if (++tries > 6)
                throw NonConvergence("constitutive inversion not descending", when, x);
            s *= 0.5;
            ++halvings;
        }
        xi = cand;
        F = Fc;
        nf = nc;
        ++it;
    }
    if (stats) stats->absorb(std::max(it, 1), halvings);
    return xi;
}

void invert_grouped(const CoefLaw& law, const StaggeredGrid& g, const Stag3& rhs, Stag3& out,
                    const StepParams& p, NewtonStats* stats, double when, Gather gather,
                    Scatter scatter) {
    const int nx = g.cells[0], ny = g.cells[1], nz = g.cells[2];
    if (!law.field_dependent() && law.spatially_constant()) {
        // one factorization serves every group
        const Mat3 M = law.eval_at0(g.x0);
        Mat3 Minv;
        for (int c = 0; c < 3; ++c) {
            Vec3 e{0, 0, 0};
            e[c] = 1.0;
            Vec3 col = solve3(M, e);
            for (int r = 0; r < 3; ++r) Minv(r, c) = col[r];
        }
        for (int i = 0; i <= nx; ++i)
            for (int j = 0; j <= ny; ++j)
                for (int k = 0; k <= nz; ++k) {
                    GatherE d = gather(g, rhs, i, j, k);
                    if (!d.own[0] && !d.own[1] && !d.own[2]) continue;
                    if (d.own[0] && d.own[1] && d.own[2]) {
                        scatter(out, i, j, k, d, Minv * d.v);
                        continue;
                    }
                    GatherE guess = gather(g, out, i, j, k);
                    Vec3 xi = solve_masked(law, g.node_pos(i, j, k), d.v, guess.v, d.own,
                                           p.newton_tol, p.newton_max, nullptr, when);
                    scatter(out, i, j, k, d, xi);
                }
        if (stats) {
            stats->solves += 1;
            stats->iterations += 1;
        }
        return;
    }
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j)
            for (int k = 0; k <= nz; ++k) {
                GatherE d = gather(g, rhs, i, j, k);
                if (!d.own[0] && !d.own[1] && !d.own[2]) continue;
                GatherE guess = gather(g, out, i, j, k);
                Vec3 x = g.node_pos(i, j, k);
                Vec3 xi = solve_masked(law, x, d.v, guess.v, d.own, p.newton_tol,
                                       p.newton_max, stats, when);
                scatter(out, i, j, k, d, xi);
            }
}

void apply_grouped(const CoefLaw& law, const StaggeredGrid& g, const Stag3& in, Stag3& out,
                   Gather gather, Scatter scatter) {
    const int nx = g.cells[0], ny = g.cells[1], nz = g.cells[2];
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j)
            for (int k = 0; k <= nz; ++k) {
                GatherE e = gather(g, in, i, j, k);
                if (!e.own[0] && !e.own[1] && !e.own[2]) continue;
                Vec3 x = g.node_pos(i, j, k);
                scatter(out, i, j, k, e, law.eval(x, e.v) * e.v);
            }
}

}  // namespace

GhostLayers make_ghosts(const StaggeredGrid& g) {
    GhostLayers gh;
    for (int a = 0; a < 3; ++a) {
        const auto tang = wall_tangents(a);
        for (int side = 0; side < 2; ++side)
            for (int slot = 0; slot < 2; ++slot) {
                auto dims = g.h_shape(tang[slot]);
                dims[a] = 1;
                gh.plane[a][side][slot].resize(dims);
            }
    }
    return gh;
}

Stag3 curl_e(const StaggeredGrid& g, const Stag3& E) {
    Stag3 out = make_h_field(g);
    for (int c = 0; c < 3; ++c) {
        const int c1 = (c + 1) % 3;
        const int c2 = (c + 2) % 3;
        Arr3D& o = out[c];
        for (int i = 0; i < o.n[0]; ++i)
            for (int j = 0; j < o.n[1]; ++j)
                for (int k = 0; k < o.n[2]; ++k) {
                    const std::array<int, 3> I{i, j, k};
                    const double d1 =
                        (at(E[c2], bump(I, c1, 1)) - at(E[c2], I)) / g.h[c1];
                    const double d2 =
                        (at(E[c1], bump(I, c2, 1)) - at(E[c1], I)) / g.h[c2];
                    o.at(i, j, k) = d1 - d2;
                }
    }
    return out;
}

Stag3 curl_h(const StaggeredGrid& g, const Stag3& H, const GhostLayers* ghosts) {
    Stag3 out = make_e_field(g);
    for (int c = 0; c < 3; ++c) {
        Arr3D& o = out[c];
        for (int i = 0; i < o.n[0]; ++i)
            for (int j = 0; j < o.n[1]; ++j)
                for (int k = 0; k < o.n[2]; ++k)
                    o.at(i, j, k) = curl_h_row(g, H, ghosts, c, {i, j, k});
    }
    return out;
}

Arr3D div_edge_field(const StaggeredGrid& g, const Stag3& D) {
    Arr3D out;
    out.resize({g.cells[0] + 1, g.cells[1] + 1, g.cells[2] + 1});
    for (int i = 1; i < g.cells[0]; ++i)
        for (int j = 1; j < g.cells[1]; ++j)
            for (int k = 1; k < g.cells[2]; ++k) {
                double s = (D[0].at(i, j, k) - D[0].at(i - 1, j, k)) / g.h[0] +
                           (D[1].at(i, j, k) - D[1].at(i, j - 1, k)) / g.h[1] +
                           (D[2].at(i, j, k) - D[2].at(i, j, k - 1)) / g.h[2];
                out.at(i, j, k) = s;
            }
    return out;
}

Arr3D div_face_field(const StaggeredGrid& g, const Stag3& B) {
    Arr3D out;
    out.resize(g.cells);
    for (int i = 0; i < g.cells[0]; ++i)
        for (int j = 0; j < g.cells[1]; ++j)
            for (int k = 0; k < g.cells[2]; ++k) {
                double s = (B[0].at(i + 1, j, k) - B[0].at(i, j, k)) / g.h[0] +
                           (B[1].at(i, j + 1, k) - B[1].at(i, j, k)) / g.h[1] +
                           (B[2].at(i, j, k + 1) - B[2].at(i, j, k)) / g.h[2];
                out.at(i, j, k) = s;
            }
    return out;
}

double cfl_dt(const StaggeredGrid& g, const MaterialModel& model, double safety) {
    EigBounds be = coef_eig_bounds(model.eps, g, model.delta0, true);
    EigBounds bm = coef_eig_bounds(model.mu, g, model.delta0, true);
    return safety * g.min_h() * std::sqrt(be.min_eig * bm.min_eig) / std::sqrt(3.0);
}

Vec3 invert_constitutive(const CoefLaw& law, const Vec3& x, const Vec3& rhs,
                         const Vec3& guess, double tol, int max_iter, NewtonStats* stats,
                         double when) {
    const double scale = 1.0 + norm(rhs);
    Vec3 xi = guess;
    Vec3 F = law.eval(x, xi) * xi - rhs;
    double nf = norm(F);
    int it = 0;
    int halvings = 0;
    while (nf > tol * scale) {
        if (it >= max_iter)
            throw NonConvergence("constitutive inversion stalled", when, x);
        Mat3 J = law.eval_d(x, xi);
        Vec3 dxi = solve3(J, -1.0 * F);
        double s = 1.0;
        Vec3 cand;
        Vec3 Fc;
        double nc;
        int tries = 0;
        for (;;) {
            cand = xi + s * dxi;
            Fc = law.eval(x, cand) * cand - rhs;
            nc = norm(Fc);
            if (nc < nf) break;
            if (++tries > 6)
                throw NonConvergence("constitutive inversion not descending", when, x);
            s *= 0.5;
            ++halvings;
        }
        xi = cand;
        F = Fc;
        nf = nc;
        ++it;
    }
    if (stats) stats->absorb(std::max(it, 1), halvings);
    return xi;
}

void invert_edge_field(const CoefLaw& law, const StaggeredGrid& g, const Stag3& D, Stag3& E,
                       const StepParams& p, NewtonStats* stats, double when) {
    invert_grouped(law, g, D, E, p, stats, when, gather_edge, scatter_edge);
}

void invert_face_field(const CoefLaw& law, const StaggeredGrid& g, const Stag3& B, Stag3& H,
                       const StepParams& p, NewtonStats* stats, double when) {
    invert_grouped(law, g, B, H, p, stats, when, gather_face, scatter_face);
}

Stag3 apply_edge_law(const CoefLaw& law, const StaggeredGrid& g, const Stag3& E) {
    Stag3 out = make_e_field(g);
    apply_grouped(law, g, E, out, gather_edge, scatter_edge);
    return out;
}

Stag3 apply_face_law(const CoefLaw& law, const StaggeredGrid& g, const Stag3& H) {
    Stag3 out = make_h_field(g);
    apply_grouped(law, g, H, out, gather_face, scatter_face);
    return out;
}

void for_each_wall_point(const StaggeredGrid& g,
                         const std::function<void(const WallPoint&)>& fn) {
    for (int a = 0; a < 3; ++a) {
        const auto tang = wall_tangents(a);
        for (int side = 0; side < 2; ++side)
            for (int slot = 0; slot < 2; ++slot) {
                WallPoint pt;
                pt.axis = a;
                pt.side = side;
                pt.comp = tang[slot];
                pt.other = tang[1 - slot];
                pt.nu = {0, 0, 0};
                pt.nu[a] = side == 0 ? -1.0 : 1.0;
                const double area = g.h[pt.comp] * g.h[pt.other];
                const int nc = g.cells[pt.comp];
                const int no = g.cells[pt.other];
                for (int mc = 0; mc <= nc; ++mc)
                    for (int mo = 0; mo < no; ++mo) {
                        // trapezoid factor along the nodal in-plane axis;
                        // pairs with the half-weighted edge rows of the
                        // energy quadrature so the discrete balance closes
                        pt.weight = (mc == 0 || mc == nc) ? 0.5 * area : area;
                        pt.m[pt.comp] = mc;
                        pt.m[pt.other] = mo;
                        pt.x[a] = side == 0 ? 0.0 : g.extent[a];
                        pt.x[pt.comp] = mc * g.h[pt.comp];
                        pt.x[pt.other] = (mo + 0.5) * g.h[pt.other];
                        fn(pt);
                    }
            }
    }
}

Vec3 wall_trace_w(const StaggeredGrid& g, const Stag3& E, const WallPoint& pt) {
    const int wallnode = pt.side == 0 ? 0 : g.cells[pt.axis];
    std::array<int, 3> I{};
    I[pt.axis] = wallnode;
    I[pt.comp] = pt.m[pt.comp];
    I[pt.other] = pt.m[pt.other];
    const double e_other = at(E[pt.other], I);

    // transverse average of the co-tangential row, clipped at wall edges
    const int lo = std::max(pt.m[pt.comp] - 1, 0);
    const int hi = std::min(pt.m[pt.comp], g.cells[pt.comp] - 1);
    double e_comp = 0.0;
    int cnt = 0;
    for (int mc = lo; mc <= hi; ++mc)
        for (int dmo = 0; dmo <= 1; ++dmo) {
            std::array<int, 3> J{};
            J[pt.axis] = wallnode;
            J[pt.comp] = mc;
            J[pt.other] = pt.m[pt.other] + dmo;
            e_comp += at(E[pt.comp], J);
            ++cnt;
        }
    e_comp /= cnt;

    Vec3 Ev{0, 0, 0};
    Ev[pt.comp] = e_comp;
    Ev[pt.other] = e_other;
    return cross(Ev, pt.nu);
}

GhostLayers apply_impedance_bc(const StaggeredGrid& g, const MaterialModel& model,
                               const BcSpec& bc, const Stag3& Ewall, const Stag3& H) {
    GhostLayers gh = make_ghosts(g);
    for_each_wall_point(g, [&](const WallPoint& pt) {
        const WallBc kind = bc[2 * pt.axis + pt.side];
        std::array<int, 3> I = pt.m;
        I[pt.axis] = pt.side == 0 ? 0 : g.cells[pt.axis] - 1;
        const double h_in = at(H[pt.comp], I);
        double gval;
        if (kind == WallBc::Pec) {
            gval = h_in;
        } else if (kind == WallBc::Pmc) {
            gval = -h_in;
        } else {
            Vec3 w = wall_trace_w(g, Ewall, pt);
            Vec3 h_req = -1.0 * (eval_lambda(model, pt.x, w) * w);
            gval = 2.0 * h_req[pt.comp] - h_in;
        }
        const auto tang = wall_tangents(pt.axis);
        const int slot = (pt.comp == tang[0]) ? 0 : 1;
        std::array<int, 3> P = pt.m;
        P[pt.axis] = 0;
        at(gh.plane[pt.axis][pt.side][slot], P) = gval;
    });
    return gh;
}

double wall_dissipation(const StaggeredGrid& g, const MaterialModel& model, const BcSpec& bc,
                        const Stag3& Eval) {
    double sum = 0.0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        if (bc[2 * pt.axis + pt.side] != WallBc::Impedance) return;
        Vec3 w = wall_trace_w(g, Eval, pt);
        Vec3 lw = eval_lambda(model, pt.x, w) * w;
        sum += pt.weight * lw[pt.comp] * w[pt.comp];
    });
    return sum;
}

double wall_tangential_sq(const StaggeredGrid& g, const Stag3& Eval) {
    double sum = 0.0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        Vec3 w = wall_trace_w(g, Eval, pt);
        sum += pt.weight * w[pt.comp] * w[pt.comp];
    });
    return sum;
}

double edge_weighted_dot(const StaggeredGrid& g, const Stag3& A, const Stag3& B) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Arr3D& a = A[c];
        const Arr3D& b = B[c];
        const int a1 = (c + 1) % 3, a2 = (c + 2) % 3;
        std::array<int, 3> I{};
        for (I[0] = 0; I[0] < a.n[0]; ++I[0])
            for (I[1] = 0; I[1] < a.n[1]; ++I[1])
                for (I[2] = 0; I[2] < a.n[2]; ++I[2]) {
                    double w = 1.0;
                    if (I[a1] == 0 || I[a1] == g.cells[a1]) w *= 0.5;
                    if (I[a2] == 0 || I[a2] == g.cells[a2]) w *= 0.5;
                    sum += w * at(a, I) * at(b, I);
                }
    }
    return g.cell_volume() * sum;
}

double face_weighted_dot(const StaggeredGrid& g, const Stag3& A, const Stag3& B) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Arr3D& a = A[c];
        const Arr3D& b = B[c];
        std::array<int, 3> I{};
        for (I[0] = 0; I[0] < a.n[0]; ++I[0])
            for (I[1] = 0; I[1] < a.n[1]; ++I[1])
                for (I[2] = 0; I[2] < a.n[2]; ++I[2]) {
                    const double w = (I[c] == 0 || I[c] == g.cells[c]) ? 0.5 : 1.0;
                    sum += w * at(a, I) * at(b, I);
                }
    }
    return g.cell_volume() * sum;
}

namespace {

// edge rows on a given wall for every tangential component; visits corner
// rows once per wall they lie on (updates there are idempotent)
template <typename Fn>
void for_each_wall_row(const StaggeredGrid& g, Fn&& fn) {
    for (int a = 0; a < 3; ++a)
        for (int side = 0; side < 2; ++side) {
            const int wallnode = side == 0 ? 0 : g.cells[a];
            for (int c = 0; c < 3; ++c) {
                if (c == a) continue;
                const auto sh = g.e_shape(c);
                std::array<int, 3> I{};
                I[a] = wallnode;
                const int b = 3 - a - c;  // remaining axis
                for (int u = 0; u < sh[c]; ++u)
                    for (int v = 0; v < sh[b]; ++v) {
                        I[c] = u;
                        I[b] = v;
                        fn(c, I);
                    }
            }
        }
}

void zero_pec_rows(const StaggeredGrid& g, const BcSpec& bc, Stag3& E, Stag3& D) {
    for (int a = 0; a < 3; ++a)
        for (int side = 0; side < 2; ++side) {
            if (bc[2 * a + side] != WallBc::Pec) continue;
            const int wallnode = side == 0 ? 0 : g.cells[a];
            for (int c = 0; c < 3; ++c) {
                if (c == a) continue;
                const auto sh = g.e_shape(c);
                const int b = 3 - a - c;
                std::array<int, 3> I{};
                I[a] = wallnode;
                for (int u = 0; u < sh[c]; ++u)
                    for (int v = 0; v < sh[b]; ++v) {
                        I[c] = u;
                        I[b] = v;
                        at(E[c], I) = 0.0;
                        at(D[c], I) = 0.0;
                    }
            }
        }
}

// shell groups: constitutive groups owning at least one wall row
template <typename Fn>
void for_each_shell_group(const StaggeredGrid& g, Fn&& fn) {
    const int nx = g.cells[0], ny = g.cells[1], nz = g.cells[2];
    for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j)
            for (int k = 0; k <= nz; ++k) {
                const bool shell = i == 0 || i == nx || j == 0 || j == ny || k == 0 || k == nz;
                if (shell) fn(i, j, k);
            }
}

void invert_shell(const CoefLaw& law, const StaggeredGrid& g, const Stag3& D, Stag3& E,
                  const StepParams& p, NewtonStats* stats, double when) {
    for_each_shell_group(g, [&](int i, int j, int k) {
        GatherE d = gather_edge(g, D, i, j, k);
        if (!d.own[0] && !d.own[1] && !d.own[2]) return;
        GatherE guess = gather_edge(g, E, i, j, k);
        Vec3 x = g.node_pos(i, j, k);
        Vec3 xi = solve_masked(law, x, d.v, guess.v, d.own, p.newton_tol, p.newton_max,
                               stats, when);
        scatter_edge(E, i, j, k, d, xi);
    });
}

Stag3 average(const Stag3& a, const Stag3& b) {
    Stag3 out = a;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < out[c].v.size(); ++i)
            out[c].v[i] = 0.5 * (a[c].v[i] + b[c].v[i]);
    return out;
}

}  // namespace

void step(SimState& state, const StaggeredGrid& g, const MaterialModel& model,
          const BcSpec& bc, const StepParams& p) {
    const double dt = p.dt;

    // magnetic half step: B -> B - dt curl E, then H from B
    Stag3 curlE = curl_e(g, state.E);
    stag_axpy(-dt, curlE, state.B);
    Stag3 Hnew = state.H;  // warm start
    invert_face_field(model.mu, g, state.B, Hnew, p, &state.newton, state.t + 0.5 * dt);

    // level n is complete: retain it
    RingEntry ent;
    ent.t = state.t;
    ent.E = state.E;
    ent.Hbar = average(state.H, Hnew);
    state.ring.push_back(std::move(ent));
    while (state.ring.size() > static_cast<std::size_t>(kRingDepth)) state.ring.pop_front();
    state.H = Hnew;

    const Stag3& En = state.ring.back().E;

    // electric step, interior rows (no wall data involved)
    for (int c = 0; c < 3; ++c) {
        Arr3D& Dc = state.D[c];
        for (int i = 0; i < Dc.n[0]; ++i)
            for (int j = 0; j < Dc.n[1]; ++j)
                for (int k = 0; k < Dc.n[2]; ++k) {
                    const std::array<int, 3> I{i, j, k};
                    if (on_wall_row(g, c, I)) continue;
                    Dc.at(i, j, k) += dt * curl_h_row(g, state.H, nullptr, c, I);
                }
    }
    {
        // interior groups (strictly inside along every axis)
        const int nx = g.cells[0], ny = g.cells[1], nz = g.cells[2];
        if (!model.eps.field_dependent() && model.eps.spatially_constant()) {
            const Mat3 M = model.eps.eval_at0(g.x0);
            Mat3 Minv;
            for (int c = 0; c < 3; ++c) {
                Vec3 e{0, 0, 0};
                e[c] = 1.0;
                Vec3 col = solve3(M, e);
                for (int r = 0; r < 3; ++r) Minv(r, c) = col[r];
            }
            for (int i = 1; i < nx; ++i)
                for (int j = 1; j < ny; ++j)
                    for (int k = 1; k < nz; ++k) {
                        GatherE d = gather_edge(g, state.D, i, j, k);
                        scatter_edge(state.E, i, j, k, d, Minv * d.v);
                    }
            state.newton.solves += 1;
            state.newton.iterations += 1;
        } else {
            for (int i = 1; i < nx; ++i)
                for (int j = 1; j < ny; ++j)
                    for (int k = 1; k < nz; ++k) {
                        GatherE d = gather_edge(g, state.D, i, j, k);
                        GatherE guess = gather_edge(g, state.E, i, j, k);
                        Vec3 x = g.node_pos(i, j, k);
                        Vec3 xi = invert_constitutive(model.eps, x, d.v, guess.v,
                                                      p.newton_tol, p.newton_max,
                                                      &state.newton, state.t + dt);
                        scatter_edge(state.E, i, j, k, d, xi);
                    }
        }
    }

    // wall rows: fixed-point iteration of the time-centered trace.  The ghost
    // construction reads only wall rows of Eeval, so only those are kept
    // centered between levels n and n+1.
    bool any_imp = false;
    for (WallBc b : bc) any_imp = any_imp || b == WallBc::Impedance;

    std::vector<double> d_old;
    d_old.reserve(1024);
    for_each_wall_row(g, [&](int c, const std::array<int, 3>& I) {
        d_old.push_back(at(state.D[c], I));
    });

    Stag3 Eeval = En;
    const int passes = any_imp ? p.bc_max_passes : 1;
    for (int pass = 0; pass < passes; ++pass) {
        GhostLayers gh = apply_impedance_bc(g, model, bc, Eeval, state.H);
        std::size_t slot = 0;
        for_each_wall_row(g, [&](int c, const std::array<int, 3>& I) {
            at(state.D[c], I) = d_old[slot++] + dt * curl_h_row(g, state.H, &gh, c, I);
        });
        invert_shell(model.eps, g, state.D, state.E, p, &state.newton, state.t + dt);
        if (!any_imp) break;
        double delta = 0.0;
        double scale = 0.0;
        for_each_wall_row(g, [&](int c, const std::array<int, 3>& I) {
            const double cen = 0.5 * (at(En[c], I) + at(state.E[c], I));
            delta = std::max(delta, std::abs(cen - at(Eeval[c], I)));
            scale = std::max(scale, std::abs(cen));
            at(Eeval[c], I) = cen;
        });
        if (delta <= p.bc_tol * (1.0 + scale)) break;
    }

    zero_pec_rows(g, bc, state.E, state.D);

    state.step += 1;
    state.t = dt * static_cast<double>(state.step);
}

void push_terminal_sample(SimState& state, const StaggeredGrid& g,
                          const MaterialModel& model, const StepParams& p) {
    Stag3 curlE = curl_e(g, state.E);
    Stag3 Bs = state.B;
    stag_axpy(-p.dt, curlE, Bs);
    Stag3 Hs = state.H;
    invert_face_field(model.mu, g, Bs, Hs, p, &state.newton, state.t + 0.5 * p.dt);
    RingEntry ent;
    ent.t = state.t;
    ent.E = state.E;
    ent.Hbar = average(state.H, Hs);
    state.ring.push_back(std::move(ent));
    while (state.ring.size() > static_cast<std::size_t>(kRingDepth)) state.ring.pop_front();
}

void init_state(SimState& state, const StaggeredGrid& g, const MaterialModel& model,
                const Stag3& E0, const Stag3& H0, const Stag3& D0, const Stag3& B0,
                const Stag3& E1, const StepParams& p) {
    state.t = 0.0;
    state.step = 0;
    state.newton = NewtonStats{};
    state.ring.clear();
    state.E = E0;
    state.D = D0;
    // offset B to t = -dt/2 through second order
    state.B = B0;
    Stag3 c0 = curl_e(g, E0);
    stag_axpy(0.5 * p.dt, c0, state.B);
    Stag3 c1 = curl_e(g, E1);
    stag_axpy(-0.125 * p.dt * p.dt, c1, state.B);
    state.H = H0;  // warm start
    invert_face_field(model.mu, g, state.B, state.H, p, &state.newton, 0.0);
}

}  // namespace absd
