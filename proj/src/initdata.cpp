#include "absd/initdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace absd {

namespace {

double sat(const Arr3D& a, const std::array<int, 3>& I) {
    return a.at(I[0], I[1], I[2]);
}

// forward difference of a nodal scalar along each axis, landing on edges
Stag3 grad_nodal(const StaggeredGrid& g, const Arr3D& phi) {
    Stag3 out = make_e_field(g);
    for (int c = 0; c < 3; ++c) {
        Arr3D& o = out[c];
        for (int i = 0; i < o.n[0]; ++i)
            for (int j = 0; j < o.n[1]; ++j)
                for (int k = 0; k < o.n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    std::array<int, 3> J = I;
                    J[c] += 1;
                    o.at(i, j, k) = (sat(phi, J) - sat(phi, I)) / g.h[c];
                }
    }
    return out;
}

// exact transpose of grad_nodal; the negative flux divergence with zero
// exterior flux, defined on every node
Arr3D grad_nodal_t(const StaggeredGrid& g, const Stag3& v) {
    Arr3D out;
    out.resize({g.cells[0] + 1, g.cells[1] + 1, g.cells[2] + 1});
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                std::array<int, 3> I{i, j, k};
                double s = 0.0;
                for (int c = 0; c < 3; ++c) {
                    if (I[c] > 0) {
                        std::array<int, 3> J = I;
                        J[c] -= 1;
                        s += sat(v[c], J) / g.h[c];
                    }
                    if (I[c] < g.cells[c]) s -= sat(v[c], I) / g.h[c];
                }
                out.at(i, j, k) = s;
            }
    return out;
}

// difference of a cell scalar across interior faces; wall faces get zero
Stag3 grad_cell(const StaggeredGrid& g, const Arr3D& phi) {
    Stag3 out = make_h_field(g);
    for (int c = 0; c < 3; ++c) {
        Arr3D& o = out[c];
        for (int i = 0; i < o.n[0]; ++i)
            for (int j = 0; j < o.n[1]; ++j)
                for (int k = 0; k < o.n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    if (I[c] == 0 || I[c] == g.cells[c]) continue;
                    std::array<int, 3> J = I;
                    J[c] -= 1;
                    o.at(i, j, k) = (sat(phi, I) - sat(phi, J)) / g.h[c];
                }
    }
    return out;
}

Arr3D grad_cell_t(const StaggeredGrid& g, const Stag3& v) {
    Arr3D out;
    out.resize(g.cells);
    for (int i = 0; i < g.cells[0]; ++i)
        for (int j = 0; j < g.cells[1]; ++j)
            for (int k = 0; k < g.cells[2]; ++k) {
                std::array<int, 3> I{i, j, k};
                double s = 0.0;
                for (int c = 0; c < 3; ++c) {
                    if (I[c] >= 1) s += sat(v[c], I) / g.h[c];
                    if (I[c] + 1 <= g.cells[c] - 1) {
                        std::array<int, 3> J = I;
                        J[c] += 1;
                        s -= sat(v[c], J) / g.h[c];
                    }
                }
                out.at(i, j, k) = s;
            }
    return out;
}

void zero_wall_faces(const StaggeredGrid& g, Stag3& H) {
    for (int c = 0; c < 3; ++c) {
        Arr3D& a = H[c];
        for (int i = 0; i < a.n[0]; ++i)
            for (int j = 0; j < a.n[1]; ++j)
                for (int k = 0; k < a.n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    if (I[c] == 0 || I[c] == g.cells[c]) a.at(i, j, k) = 0.0;
                }
    }
}

// The weight action M of one projection.  Diagonal entries always act
// pointwise at the staggered positions (the 7-point part, whose only kernel
// is the constants); off-diagonal entries act on cell-averaged components
// and are redistributed by the exact transpose of the averaging.
struct WeightOp {
    bool diagonal = true;
    bool edge_layout = true;
    Stag3 wdiag;
    std::vector<Mat3> acell;  // off-diagonal parts per cell

    Stag3 apply(const StaggeredGrid& g, const Stag3& v) const {
        Stag3 out = v;
        for (int c = 0; c < 3; ++c)
            for (std::size_t q = 0; q < out[c].v.size(); ++q)
                out[c].v[q] = wdiag[c].v[q] * v[c].v[q];
        if (diagonal) return out;

        const int nx = g.cells[0], ny = g.cells[1], nz = g.cells[2];
        Stag3 vin = v;
        if (!edge_layout) zero_wall_faces(g, vin);
        std::vector<Vec3> u(static_cast<std::size_t>(nx) * ny * nz);
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j)
                for (int k = 0; k < nz; ++k) {
                    Vec3 m{0, 0, 0};
                    for (int c = 0; c < 3; ++c) {
                        double s = 0.0;
                        if (edge_layout) {
                            std::array<int, 3> I{i, j, k};
                            const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
                            for (int d1 = 0; d1 <= 1; ++d1)
                                for (int d2 = 0; d2 <= 1; ++d2) {
                                    std::array<int, 3> J = I;
                                    J[c1] += d1;
                                    J[c2] += d2;
                                    s += sat(vin[c], J);
                                }
                            s *= 0.25;
                        } else {
                            std::array<int, 3> I{i, j, k};
                            std::array<int, 3> J = I;
                            J[c] += 1;
                            s = 0.5 * (sat(vin[c], I) + sat(vin[c], J));
                        }
                        m[c] = s;
                    }
                    const std::size_t id = (static_cast<std::size_t>(i) * ny + j) * nz + k;
                    u[id] = acell[id] * m;
                }
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j)
                for (int k = 0; k < nz; ++k) {
                    const std::size_t id = (static_cast<std::size_t>(i) * ny + j) * nz + k;
                    for (int c = 0; c < 3; ++c) {
                        if (edge_layout) {
                            const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
                            for (int d1 = 0; d1 <= 1; ++d1)
                                for (int d2 = 0; d2 <= 1; ++d2) {
                                    std::array<int, 3> J{i, j, k};
                                    J[c1] += d1;
                                    J[c2] += d2;
                                    out[c].at(J[0], J[1], J[2]) += 0.25 * u[id][c];
                                }
                        } else {
                            std::array<int, 3> J{i, j, k};
                            out[c].at(J[0], J[1], J[2]) += 0.5 * u[id][c];
                            J[c] += 1;
                            out[c].at(J[0], J[1], J[2]) += 0.5 * u[id][c];
                        }
                    }
                }
        if (!edge_layout) zero_wall_faces(g, out);
        return out;
    }
};

WeightOp build_weight_op(const StaggeredGrid& g,
                         const std::function<Mat3(const Vec3&)>& alpha, bool edge_layout) {
    WeightOp op;
    op.edge_layout = edge_layout;
    op.wdiag = edge_layout ? make_e_field(g) : make_h_field(g);
    double offdiag = 0.0;
    for (int c = 0; c < 3; ++c) {
        Arr3D& a = op.wdiag[c];
        for (int i = 0; i < a.n[0]; ++i)
            for (int j = 0; j < a.n[1]; ++j)
                for (int k = 0; k < a.n[2]; ++k) {
                    const Vec3 x = edge_layout ? g.e_pos(c, i, j, k) : g.h_pos(c, i, j, k);
                    Mat3 m = alpha(x);
                    for (int r = 0; r < 3; ++r)
                        for (int s = 0; s < 3; ++s)
                            if (r != s) offdiag = std::max(offdiag, std::abs(m(r, s)));
                    a.at(i, j, k) = m(c, c);
                }
    }
    if (offdiag < 1e-14) return op;
    op.diagonal = false;
    op.acell.resize(static_cast<std::size_t>(g.cells[0]) * g.cells[1] * g.cells[2]);
    for (int i = 0; i < g.cells[0]; ++i)
        for (int j = 0; j < g.cells[1]; ++j)
            for (int k = 0; k < g.cells[2]; ++k) {
                const std::size_t id =
                    (static_cast<std::size_t>(i) * g.cells[1] + j) * g.cells[2] + k;
                Mat3 m = alpha(g.cell_center(i, j, k));
                m(0, 0) = m(1, 1) = m(2, 2) = 0.0;
                op.acell[id] = m;
            }
    return op;
}

void subtract_mean(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    for (double& x : v) x -= m;
}

int cg_solve(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
             const std::vector<double>& b, std::vector<double>& x, double rel_tol) {
    const std::size_t n = b.size();
    x.assign(n, 0.0);
    double bb = 0.0;
    for (double v : b) bb += v * v;
    const double bnorm = std::sqrt(bb);
    if (bnorm == 0.0) return 0;
    const double gate = rel_tol * bnorm;

    std::vector<double> r = b;
    std::vector<double> p = b;
    std::vector<double> q(n, 0.0);
    double rr = bb;
    const int max_iter = 25000;
    for (int it = 1; it <= max_iter; ++it) {
        apply(p, q);
        double pq = 0.0;
        for (std::size_t m = 0; m < n; ++m) pq += p[m] * q[m];
        if (!(pq > 0.0))
            throw ProjectionFailure("projection operator lost positivity (degenerate weight)");
        const double a = rr / pq;
        for (std::size_t m = 0; m < n; ++m) {
            x[m] += a * p[m];
            r[m] -= a * q[m];
        }
        double rr_new = 0.0;
        for (double v : r) rr_new += v * v;
        if (std::sqrt(rr_new) <= gate) return it;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t m = 0; m < n; ++m) p[m] = r[m] + beta * p[m];
    }
    throw ProjectionFailure("projection solve did not converge within 25000 iterations");
}

Projection project_with_op(const StaggeredGrid& g, const WeightOp& op, const Stag3& w,
                           double rel_tol) {
    const bool edge = op.edge_layout;
    Stag3 mw = op.apply(g, w);
    Arr3D b = edge ? grad_nodal_t(g, mw) : grad_cell_t(g, mw);
    subtract_mean(b.v);

    Arr3D phi = b;
    auto apply_A = [&](const std::vector<double>& in, std::vector<double>& out) {
        Arr3D tmp = b;
        tmp.v = in;
        Stag3 gv = edge ? grad_nodal(g, tmp) : grad_cell(g, tmp);
        Stag3 mg = op.apply(g, gv);
        Arr3D res = edge ? grad_nodal_t(g, mg) : grad_cell_t(g, mg);
        out = res.v;
    };
    Projection result;
    result.cg_iterations = cg_solve(apply_A, b.v, phi.v, rel_tol);
    subtract_mean(phi.v);

    result.potential = phi;
    result.field = w;
    Stag3 gp = edge ? grad_nodal(g, phi) : grad_cell(g, phi);
    stag_axpy(-1.0, gp, result.field);
    if (!edge) zero_wall_faces(g, result.field);
    return result;
}

// diagonal weights consistent with the grouped constitutive application:
// entry (c, I) carries law(node I, gathered state)(c, c)
Stag3 grouped_diagonal_weights(const StaggeredGrid& g, const CoefLaw& law, const Stag3& state,
                               bool edge_layout) {
    Stag3 wd = edge_layout ? make_e_field(g) : make_h_field(g);
    for (int c = 0; c < 3; ++c) {
        Arr3D& a = wd[c];
        for (int i = 0; i < a.n[0]; ++i)
            for (int j = 0; j < a.n[1]; ++j)
                for (int k = 0; k < a.n[2]; ++k) {
                    const GatherE s = edge_layout ? gather_edge(g, state, i, j, k)
                                                  : gather_face(g, state, i, j, k);
                    a.at(i, j, k) = law.eval(g.node_pos(i, j, k), s.v)(c, c);
                }
    }
    return wd;
}

bool law_is_diagonal(const CoefLaw& law, const StaggeredGrid& g, double delta0) {
    const Vec3 ext{g.extent[0], g.extent[1], g.extent[2]};
    const Vec3 xs[3] = {g.x0, 0.37 * ext,
                        Vec3{0.81 * ext.x, 0.13 * ext.y, 0.58 * ext.z}};
    const Vec3 xis[3] = {{0.0, 0.0, 0.0},
                         0.5 * delta0 * Vec3{0.6, -0.64, 0.48},
                         0.9 * delta0 * Vec3{-0.2, 0.4, 0.6}};
    for (const Vec3& x : xs)
        for (const Vec3& xi : xis) {
            Mat3 m = law.eval(x, xi);
            for (int r = 0; r < 3; ++r)
                for (int s = 0; s < 3; ++s)
                    if (r != s && std::abs(m(r, s)) > 1e-13) return false;
        }
    return true;
}

// one quasi-Newton charge-removal pass: project the current flux divergence
// out of the field through the frozen grouped diagonal of the law
void charge_sweep(const StaggeredGrid& g, const CoefLaw& law, Stag3& field, const Arr3D& rhs,
                  bool edge_layout) {
    WeightOp op;
    op.edge_layout = edge_layout;
    op.wdiag = grouped_diagonal_weights(g, law, field, edge_layout);
    Arr3D b = rhs;
    subtract_mean(b.v);
    Arr3D phi = b;
    auto apply_A = [&](const std::vector<double>& in, std::vector<double>& out) {
        Arr3D tmp = b;
        tmp.v = in;
        Stag3 gv = edge_layout ? grad_nodal(g, tmp) : grad_cell(g, tmp);
        Stag3 mg = op.apply(g, gv);
        Arr3D res = edge_layout ? grad_nodal_t(g, mg) : grad_cell_t(g, mg);
        out = res.v;
    };
    cg_solve(apply_A, b.v, phi.v, 1e-11);
    Stag3 gp = edge_layout ? grad_nodal(g, phi) : grad_cell(g, phi);
    stag_axpy(-1.0, gp, field);
}

double l2_cell_weighted(const StaggeredGrid& g, const Arr3D& a) {
    double s = 0.0;
    for (double v : a.v) s += v * v;
    return std::sqrt(s * g.cell_volume());
}

// masked linear group solves of law_d(state0) * out = rhs; slots a group
// does not own stay frozen at the neighbor values already finished by the
// ascending sweep
void solve_derived_groups(const StaggeredGrid& g, const CoefLaw& law, const Stag3& state0,
                          const Stag3& rhs, Stag3& out, bool edge_layout) {
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const GatherE d = edge_layout ? gather_edge(g, rhs, i, j, k)
                                              : gather_face(g, rhs, i, j, k);
                if (!d.own[0] && !d.own[1] && !d.own[2]) continue;
                const GatherE s0 = edge_layout ? gather_edge(g, state0, i, j, k)
                                               : gather_face(g, state0, i, j, k);
                const GatherE f = edge_layout ? gather_edge(g, out, i, j, k)
                                              : gather_face(g, out, i, j, k);
                const Vec3 x = g.node_pos(i, j, k);
                Mat3 M = law.eval_d(x, s0.v);
                Vec3 r = d.v;
                for (int u = 0; u < 3; ++u) {
                    if (d.own[u]) continue;
                    for (int rw = 0; rw < 3; ++rw)
                        if (d.own[rw]) r[rw] -= M(rw, u) * f.v[u];
                    r[u] = 0.0;
                }
                for (int rw = 0; rw < 3; ++rw)
                    for (int cl = 0; cl < 3; ++cl)
                        if (!d.own[rw] || !d.own[cl]) M(rw, cl) = (rw == cl) ? 1.0 : 0.0;
                Vec3 y;
                try {
                    y = solve3(M, r);
                } catch (const std::runtime_error&) {
                    throw NonConvergence("derived matrix singular at initial fields", 0.0, x);
                }
                if (edge_layout)
                    scatter_edge(out, i, j, k, d, y);
                else
                    scatter_face(out, i, j, k, d, y);
            }
}

// per-group quadratic correction sum_l d_xi_l law_d(state0) * state1_l applied
// to state1, scattered to the owned slots
Stag3 derived_rate_correction(const StaggeredGrid& g, const CoefLaw& law, const Stag3& state0,
                              const Stag3& state1, bool edge_layout) {
    Stag3 out = edge_layout ? make_e_field(g) : make_h_field(g);
    if (!law.field_dependent()) return out;
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const GatherE s0 = edge_layout ? gather_edge(g, state0, i, j, k)
                                               : gather_face(g, state0, i, j, k);
                const GatherE s1 = edge_layout ? gather_edge(g, state1, i, j, k)
                                               : gather_face(g, state1, i, j, k);
                if (!s1.own[0] && !s1.own[1] && !s1.own[2]) continue;
                const Vec3 x = g.node_pos(i, j, k);
                Mat3 C = Mat3::zero();
                for (int l = 0; l < 3; ++l) C += law.dxi_d(x, s0.v, l) * s1.v[l];
                const Vec3 v = C * s1.v;
                if (edge_layout)
                    scatter_edge(out, i, j, k, s1, v);
                else
                    scatter_face(out, i, j, k, s1, v);
            }
    return out;
}

// ghosts for the curl of the first-derivative magnetic field: the impedance
// requirement differentiated in time, with the derived boundary matrix
// frozen at the order-zero trace
GhostLayers linearized_ghosts(const StaggeredGrid& g, const MaterialModel& model,
                              const Stag3& E0, const Stag3& E1, const Stag3& H1) {
    GhostLayers gh = make_ghosts(g);
    for_each_wall_point(g, [&](const WallPoint& pt) {
        std::array<int, 3> I = pt.m;
        I[pt.axis] = pt.side == 0 ? 0 : g.cells[pt.axis] - 1;
        const double h_in = sat(H1[pt.comp], I);
        const Vec3 w0 = wall_trace_w(g, E0, pt);
        const Vec3 w1 = wall_trace_w(g, E1, pt);
        const Vec3 h_req = -1.0 * (eval_lambda_d(model, pt.x, w0) * w1);
        const auto tang = wall_tangents(pt.axis);
        const int slot = (pt.comp == tang[0]) ? 0 : 1;
        std::array<int, 3> P = pt.m;
        P[pt.axis] = 0;
        gh.plane[pt.axis][pt.side][slot].at(P[0], P[1], P[2]) =
            2.0 * h_req[pt.comp] - h_in;
    });
    return gh;
}

}  // namespace

Projection helmholtz_project_edge(const StaggeredGrid& g,
                                  const std::function<Mat3(const Vec3&)>& alpha,
                                  const Stag3& w, double rel_tol) {
    return project_with_op(g, build_weight_op(g, alpha, true), w, rel_tol);
}

Projection helmholtz_project_face(const StaggeredGrid& g,
                                  const std::function<Mat3(const Vec3&)>& alpha,
                                  const Stag3& w, double rel_tol) {
    return project_with_op(g, build_weight_op(g, alpha, false), w, rel_tol);
}

double charge_edge_norm(const StaggeredGrid& g, const Stag3& D) {
    return l2_cell_weighted(g, div_edge_field(g, D));
}

double charge_face_norm(const StaggeredGrid& g, const Stag3& B) {
    return l2_cell_weighted(g, div_face_field(g, B));
}

double bump_profile(double r) {
    const double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r2));
}

InitialData make_bump_data(const StaggeredGrid& g, const MaterialModel& model,
                           const BumpParams& p, InitialRecipe recipe) {
    if (!(p.radius > 0.0)) throw std::invalid_argument("bump radius must be positive");
    for (int c = 0; c < 3; ++c) {
        const double margin = 2.0 * g.h[c];
        if (p.center[c] - p.radius < margin ||
            g.extent[c] - (p.center[c] + p.radius) < margin)
            throw std::invalid_argument(
                "bump support must keep a two-cell margin from the boundary");
    }

    InitialData out;
    out.E = make_e_field(g);
    out.D = make_e_field(g);
    out.H = make_h_field(g);
    out.B = make_h_field(g);
    if (p.amplitude == 0.0) return out;

    auto rotational = [&](const Vec3& x) {
        const Vec3 d = x - p.center;
        return p.amplitude * bump_profile(norm(d) / p.radius) * cross(p.polarization, d);
    };
    auto potential = [&](const Vec3& x) {
        const Vec3 d = x - p.center;
        return p.amplitude * bump_profile(norm(d) / p.radius) * p.polarization;
    };

    if (recipe == InitialRecipe::Bump &&
        (!law_is_diagonal(model.eps, g, model.delta0) ||
         !law_is_diagonal(model.mu, g, model.delta0)))
        recipe = InitialRecipe::CurlBump;

    StepParams sp;
    if (recipe == InitialRecipe::CurlBump) {
        Stag3 A = make_h_field(g);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < A[c].n[0]; ++i)
                for (int j = 0; j < A[c].n[1]; ++j)
                    for (int k = 0; k < A[c].n[2]; ++k)
                        A[c].at(i, j, k) = potential(g.h_pos(c, i, j, k))[c];
        out.D = curl_h(g, A, nullptr);
        invert_edge_field(model.eps, g, out.D, out.E, sp, nullptr, 0.0);

        Stag3 W = make_e_field(g);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < W[c].n[0]; ++i)
                for (int j = 0; j < W[c].n[1]; ++j)
                    for (int k = 0; k < W[c].n[2]; ++k)
                        W[c].at(i, j, k) = potential(g.e_pos(c, i, j, k))[c];
        out.B = curl_e(g, W);
        invert_face_field(model.mu, g, out.B, out.H, sp, nullptr, 0.0);
    } else {
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < out.E[c].n[0]; ++i)
                for (int j = 0; j < out.E[c].n[1]; ++j)
                    for (int k = 0; k < out.E[c].n[2]; ++k)
                        out.E[c].at(i, j, k) = rotational(g.e_pos(c, i, j, k))[c];
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < out.H[c].n[0]; ++i)
                for (int j = 0; j < out.H[c].n[1]; ++j)
                    for (int k = 0; k < out.H[c].n[2]; ++k)
                        out.H[c].at(i, j, k) = rotational(g.h_pos(c, i, j, k))[c];
        zero_wall_faces(g, out.H);

        const double gate = 1e-10;
        const int max_sweeps = 20;
        for (;;) {
            out.D = apply_edge_law(model.eps, g, out.E);
            if (charge_edge_norm(g, out.D) <= gate) break;
            if (out.sweeps >= max_sweeps)
                throw ProjectionFailure("charge removal stalled on the electric side");
            charge_sweep(g, model.eps, out.E, grad_nodal_t(g, out.D), true);
            ++out.sweeps;
        }
        for (int sweeps = 0;; ++sweeps) {
            out.B = apply_face_law(model.mu, g, out.H);
            if (charge_face_norm(g, out.B) <= gate) break;
            if (sweeps >= max_sweeps)
                throw ProjectionFailure("charge removal stalled on the magnetic side");
            charge_sweep(g, model.mu, out.H, grad_cell_t(g, out.B), false);
        }
    }
    out.charge_e = charge_edge_norm(g, out.D);
    out.charge_h = charge_face_norm(g, out.B);
    return out;
}

InitialJet initial_time_derivatives(const StaggeredGrid& g, const MaterialModel& model,
                                    const Stag3& E0, const Stag3& H0) {
    InitialJet jet;
    jet.E0 = E0;
    jet.H0 = H0;
    jet.E1 = make_e_field(g);
    jet.H1 = make_h_field(g);
    jet.E2 = make_e_field(g);
    jet.H2 = make_h_field(g);

    const GhostLayers ghost0 =
        apply_impedance_bc(g, model, all_walls(WallBc::Impedance), E0, H0);
    const Stag3 cH0 = curl_h(g, H0, &ghost0);
    solve_derived_groups(g, model.eps, E0, cH0, jet.E1, true);

    Stag3 mcE0 = curl_e(g, E0);
    for (int c = 0; c < 3; ++c)
        for (double& v : mcE0[c].v) v = -v;
    solve_derived_groups(g, model.mu, H0, mcE0, jet.H1, false);

    const GhostLayers ghost1 = linearized_ghosts(g, model, E0, jet.E1, jet.H1);
    Stag3 rhsE2 = curl_h(g, jet.H1, &ghost1);
    stag_axpy(-1.0, derived_rate_correction(g, model.eps, E0, jet.E1, true), rhsE2);
    solve_derived_groups(g, model.eps, E0, rhsE2, jet.E2, true);

    Stag3 rhsH2 = curl_e(g, jet.E1);
    stag_axpy(1.0, derived_rate_correction(g, model.mu, H0, jet.H1, false), rhsH2);
    for (int c = 0; c < 3; ++c)
        for (double& v : rhsH2[c].v) v = -v;
    solve_derived_groups(g, model.mu, H0, rhsH2, jet.H2, false);
    return jet;
}

std::array<double, 3> compatibility_residual(const StaggeredGrid& g,
                                             const MaterialModel& model,
                                             const InitialJet& jet) {
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    for_each_wall_point(g, [&](const WallPoint& pt) {
        std::array<int, 3> I = pt.m;
        I[pt.axis] = pt.side == 0 ? 0 : g.cells[pt.axis] - 1;
        const double h0 = sat(jet.H0[pt.comp], I);
        const double h1 = sat(jet.H1[pt.comp], I);
        const double h2 = sat(jet.H2[pt.comp], I);
        const Vec3 w0 = wall_trace_w(g, jet.E0, pt);
        const Vec3 w1 = wall_trace_w(g, jet.E1, pt);
        const Vec3 w2 = wall_trace_w(g, jet.E2, pt);

        const double r0 = h0 + (eval_lambda(model, pt.x, w0) * w0)[pt.comp];
        const double r1 = h1 + (eval_lambda_d(model, pt.x, w0) * w1)[pt.comp];
        Mat3 C = Mat3::zero();
        for (int l = 0; l < 3; ++l) C += model.lambda.dxi_d(pt.x, w0, l) * w1[l];
        const double r2 =
            h2 + (eval_lambda_d(model, pt.x, w0) * w2)[pt.comp] + (C * w1)[pt.comp];

        acc[0] += pt.weight * r0 * r0;
        acc[1] += pt.weight * r1 * r1;
        acc[2] += pt.weight * r2 * r2;
    });
    return {std::sqrt(acc[0]), std::sqrt(acc[1]), std::sqrt(acc[2])};
}

}  // namespace absd
