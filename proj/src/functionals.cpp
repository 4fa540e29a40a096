#include "absd/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "absd/fields.hpp"
#include "absd/initdata.hpp"

namespace absd {

namespace {

// Pure per-axis difference of order m along `axis`, centered where the
// stencil fits and one-sided at the ends; zero when the axis is too short.
Arr3D diff_axis(const Arr3D& A, int axis, int m, double h) {
    Arr3D out = A;
    const int n = A.n[axis];
    if (n < m + 1) {
        for (double& v : out.v) v = 0.0;
        return out;
    }
    for (int i = 0; i < A.n[0]; ++i)
        for (int j = 0; j < A.n[1]; ++j)
            for (int k = 0; k < A.n[2]; ++k) {
                std::array<int, 3> I{i, j, k};
                const int p = I[axis];
                auto at = [&](int pos) {
                    std::array<int, 3> J = I;
                    J[axis] = pos;
                    return A.at(J[0], J[1], J[2]);
                };
                double r = 0.0;
                if (m == 1) {
                    if (p == 0)
                        r = (at(1) - at(0)) / h;
                    else if (p == n - 1)
                        r = (at(n - 1) - at(n - 2)) / h;
                    else
                        r = (at(p + 1) - at(p - 1)) / (2.0 * h);
                } else if (m == 2) {
                    const int b = std::clamp(p, 1, n - 2);
                    r = (at(b + 1) - 2.0 * at(b) + at(b - 1)) / (h * h);
                } else {
                    if (p >= 2 && p <= n - 3)
                        r = (at(p + 2) - 2.0 * at(p + 1) + 2.0 * at(p - 1) - at(p - 2)) /
                            (2.0 * h * h * h);
                    else if (p < 2)
                        r = (at(3) - 3.0 * at(2) + 3.0 * at(1) - at(0)) / (h * h * h);
                    else
                        r = (at(n - 1) - 3.0 * at(n - 2) + 3.0 * at(n - 3) - at(n - 4)) /
                            (h * h * h);
                }
                out.at(i, j, k) = r;
            }
    return out;
}

// Groupwise product with the derived matrix frozen at `state0`.
Stag3 derived_weight_apply(const StaggeredGrid& g, const CoefLaw& law,
                           const Stag3& state0, const Stag3& v, bool edge_layout) {
    Stag3 out = edge_layout ? make_e_field(g) : make_h_field(g);
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const Vec3 x = g.node_pos(i, j, k);
                const GatherE s = edge_layout ? gather_edge(g, state0, i, j, k)
                                              : gather_face(g, state0, i, j, k);
                const GatherE w = edge_layout ? gather_edge(g, v, i, j, k)
                                              : gather_face(g, v, i, j, k);
                const Vec3 u = law.eval_d(x, s.v) * w.v;
                if (edge_layout)
                    scatter_edge(out, i, j, k, w, u);
                else
                    scatter_face(out, i, j, k, w, u);
            }
    return out;
}

// Volume commutator pair of one coefficient family: the fields
// (d_t law^d) a and, when requested, (d_t^2 law^d) a + 2 (d_t law^d) b with
// a, b the first and second time derivatives of the grouped state.
void commutator_pair(const StaggeredGrid& g, const CoefLaw& law, const Stag3& state0,
                     const Stag3& a, const Stag3* b, bool edge_layout, Stag3* out2,
                     Stag3* out3) {
    if (out2) *out2 = edge_layout ? make_e_field(g) : make_h_field(g);
    if (out3) *out3 = edge_layout ? make_e_field(g) : make_h_field(g);
    if (!law.field_dependent()) return;
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const Vec3 x = g.node_pos(i, j, k);
                const GatherE s = edge_layout ? gather_edge(g, state0, i, j, k)
                                              : gather_face(g, state0, i, j, k);
                const GatherE ga = edge_layout ? gather_edge(g, a, i, j, k)
                                               : gather_face(g, a, i, j, k);
                Mat3 M1a;
                for (int l = 0; l < 3; ++l) M1a += law.dxi_d(x, s.v, l) * ga.v[l];
                if (out2) {
                    const Vec3 f2 = M1a * ga.v;
                    if (edge_layout)
                        scatter_edge(*out2, i, j, k, ga, f2);
                    else
                        scatter_face(*out2, i, j, k, ga, f2);
                }
                if (out3) {
                    const GatherE gb = edge_layout ? gather_edge(g, *b, i, j, k)
                                                   : gather_face(g, *b, i, j, k);
                    Mat3 M1b, M2aa;
                    for (int l = 0; l < 3; ++l) {
                        M1b += law.dxi_d(x, s.v, l) * gb.v[l];
                        for (int m = 0; m < 3; ++m)
                            M2aa += law.d2xi_d(x, s.v, l, m) * (ga.v[l] * ga.v[m]);
                    }
                    const Vec3 f3 = (M1b + M2aa) * ga.v + 2.0 * (M1a * gb.v);
                    if (edge_layout)
                        scatter_edge(*out3, i, j, k, ga, f3);
                    else
                        scatter_face(*out3, i, j, k, ga, f3);
                }
            }
}

// Boundary commutator of order 2 or 3 at one wall point.
Vec3 boundary_commutator(const CoefLaw& lambda, const Vec3& x, const Vec3& w0,
                         const Vec3& w1, const Vec3& w2, int order) {
    if (!lambda.field_dependent()) return {0.0, 0.0, 0.0};
    Mat3 C1;
    for (int l = 0; l < 3; ++l) C1 += lambda.dxi_d(x, w0, l) * w1[l];
    if (order == 2) return C1 * w1;
    Mat3 C1b, C2;
    for (int l = 0; l < 3; ++l) {
        C1b += lambda.dxi_d(x, w0, l) * w2[l];
        for (int m = 0; m < 3; ++m) C2 += lambda.d2xi_d(x, w0, l, m) * (w1[l] * w1[m]);
    }
    return (C1b + C2) * w1 + 2.0 * (C1 * w2);
}

}  // namespace

Stag3 ring_time_derivative(const std::deque<RingEntry>& ring, bool electric, int j,
                           int end_offset, bool second_order) {
    if (j < 0 || j > 3) throw std::invalid_argument("time derivative order must be 0..3");
    const int width = (j == 0) ? 1 : (second_order ? j + 2 : j + 1);
    const int need = end_offset + width;
    if (static_cast<int>(ring.size()) < need)
        throw InsufficientHistory("time derivative of order " + std::to_string(j) +
                                  " needs " + std::to_string(need) +
                                  " trailing levels, ring holds " +
                                  std::to_string(ring.size()));
    const int newest = static_cast<int>(ring.size()) - 1 - end_offset;
    auto field = [&](int back) -> const Stag3& {
        const RingEntry& e = ring[static_cast<std::size_t>(newest - back)];
        return electric ? e.E : e.Hbar;
    };
    if (j == 0) return field(0);
    const double dt = ring[static_cast<std::size_t>(newest)].t -
                      ring[static_cast<std::size_t>(newest - 1)].t;
    std::array<double, 5> c{};
    if (second_order) {
        if (j == 1)
            c = {1.5, -2.0, 0.5, 0.0, 0.0};
        else if (j == 2)
            c = {2.0, -5.0, 4.0, -1.0, 0.0};
        else
            c = {2.5, -9.0, 12.0, -7.0, 1.5};
    } else {
        if (j == 1)
            c = {1.0, -1.0, 0.0, 0.0, 0.0};
        else if (j == 2)
            c = {1.0, -2.0, 1.0, 0.0, 0.0};
        else
            c = {1.0, -3.0, 3.0, -1.0, 0.0};
    }
    const double s = 1.0 / std::pow(dt, j);
    Stag3 out = field(0);
    for (int comp = 0; comp < 3; ++comp)
        for (double& v : out[comp].v) v *= c[0] * s;
    for (int m = 1; m < width; ++m) stag_axpy(c[static_cast<std::size_t>(m)] * s, field(m), out);
    return out;
}

double discrete_norm(const StaggeredGrid& g, const Stag3& f, bool edge_layout,
                     int order) {
    if (order < 0 || order > 3) throw std::invalid_argument("norm order must be 0..3");
    double acc = edge_layout ? edge_weighted_dot(g, f, f) : face_weighted_dot(g, f, f);
    for (int m = 1; m <= order; ++m)
        for (int a = 0; a < 3; ++a) {
            Stag3 d;
            for (int c = 0; c < 3; ++c) d[c] = diff_axis(f[c], a, m, g.h[a]);
            acc += edge_layout ? edge_weighted_dot(g, d, d) : face_weighted_dot(g, d, d);
        }
    return std::sqrt(std::max(0.0, acc));
}

double energy_e(const StaggeredGrid& g, const MaterialModel& model,
                const std::deque<RingEntry>& ring, int k) {
    if (k < 0 || k > 3) throw std::invalid_argument("energy order must be 0..3");
    double best = 0.0;
    for (int j = 0; j <= k; ++j) {
        const Stag3 vE = ring_time_derivative(ring, true, j);
        const Stag3 vH = ring_time_derivative(ring, false, j);
        double q;
        if (j == 0) {
            q = edge_weighted_dot(g, apply_edge_law(model.eps, g, vE), vE) +
                face_weighted_dot(g, apply_face_law(model.mu, g, vH), vH);
        } else {
            q = edge_weighted_dot(g, derived_weight_apply(g, model.eps, ring.back().E, vE, true),
                                  vE) +
                face_weighted_dot(
                    g, derived_weight_apply(g, model.mu, ring.back().Hbar, vH, false), vH);
        }
        best = std::max(best, 0.5 * q);
    }
    return best;
}

double dissipation_d(const StaggeredGrid& g, const MaterialModel& model,
                     const std::deque<RingEntry>& ring, int k) {
    if (k < 0 || k > 3) throw std::invalid_argument("dissipation order must be 0..3");
    std::vector<Stag3> dE;
    dE.reserve(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) dE.push_back(ring_time_derivative(ring, true, j));
    std::array<double, 4> acc{};
    for_each_wall_point(g, [&](const WallPoint& pt) {
        const Vec3 w0 = wall_trace_w(g, ring.back().E, pt);
        const Mat3 lam = eval_lambda(model, pt.x, w0);
        for (int j = 0; j <= k; ++j) {
            const Vec3 wj = wall_trace_w(g, dE[static_cast<std::size_t>(j)], pt);
            acc[static_cast<std::size_t>(j)] +=
                pt.weight * (lam * wj)[pt.comp] * wj[pt.comp];
        }
    });
    double best = 0.0;
    for (int j = 0; j <= k; ++j) best = std::max(best, acc[static_cast<std::size_t>(j)]);
    return best;
}

double z_norm(const StaggeredGrid& g, const std::deque<RingEntry>& ring, int k) {
    if (k < 0 || k > 3) throw std::invalid_argument("norm order must be 0..3");
    double best = 0.0;
    for (int j = 0; j <= k; ++j) {
        const Stag3 vE = ring_time_derivative(ring, true, j);
        const Stag3 vH = ring_time_derivative(ring, false, j);
        const double en = discrete_norm(g, vE, true, k - j);
        const double hn = discrete_norm(g, vH, false, k - j);
        best = std::max(best, en * en + hn * hn);
    }
    return best;
}

CommutatorFields commutators(const StaggeredGrid& g, const MaterialModel& model,
                             const std::deque<RingEntry>& ring) {
    const Stag3 E1 = ring_time_derivative(ring, true, 1);
    const Stag3 E2 = ring_time_derivative(ring, true, 2);
    const Stag3 H1 = ring_time_derivative(ring, false, 1);
    const Stag3 H2 = ring_time_derivative(ring, false, 2);
    CommutatorFields out;
    commutator_pair(g, model.eps, ring.back().E, E1, &E2, true, &out.f2, &out.f3);
    commutator_pair(g, model.mu, ring.back().Hbar, H1, &H2, false, &out.g2, &out.g3);
    for_each_wall_point(g, [&](const WallPoint& pt) {
        const Vec3 w0 = wall_trace_w(g, ring.back().E, pt);
        const Vec3 w1 = wall_trace_w(g, E1, pt);
        const Vec3 w2 = wall_trace_w(g, E2, pt);
        out.h2.push_back(boundary_commutator(model.lambda, pt.x, w0, w1, w2, 2));
        out.h3.push_back(boundary_commutator(model.lambda, pt.x, w0, w1, w2, 3));
    });
    return out;
}

double boundary_field_norm(const StaggeredGrid& g, const std::vector<Vec3>& v) {
    double acc = 0.0;
    std::size_t idx = 0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        if (idx < v.size()) acc += pt.weight * dot(v[idx], v[idx]);
        ++idx;
    });
    return std::sqrt(std::max(0.0, acc));
}

DerivedResidual derived_system_residual(const StaggeredGrid& g,
                                        const MaterialModel& model,
                                        const std::deque<RingEntry>& ring, int k) {
    if (k < 1 || k > 3) throw std::invalid_argument("derived system order must be 1..3");

    // eps_k d_t^k E + f_k at a given trailing offset, minimal-width stencils.
    auto flux_at = [&](int off) {
        const Stag3 dkE = ring_time_derivative(ring, true, k, off, false);
        const Stag3& E0 = ring[ring.size() - 1 - static_cast<std::size_t>(off)].E;
        Stag3 u = derived_weight_apply(g, model.eps, E0, dkE, true);
        if (k >= 2) {
            const Stag3 E1 = ring_time_derivative(ring, true, 1, off, false);
            Stag3 fk;
            if (k == 2) {
                commutator_pair(g, model.eps, E0, E1, nullptr, true, &fk, nullptr);
            } else {
                const Stag3 e2 = ring_time_derivative(ring, true, 2, off, false);
                commutator_pair(g, model.eps, E0, E1, &e2, true, nullptr, &fk);
            }
            stag_axpy(1.0, fk, u);
        }
        return u;
    };

    const Stag3 u0 = flux_at(0);
    const Stag3 u1 = flux_at(1);
    const double dt = ring.back().t - ring[ring.size() - 2].t;

    const Stag3 dkH0 = ring_time_derivative(ring, false, k, 0, false);
    const Stag3 dkH1 = ring_time_derivative(ring, false, k, 1, false);
    Stag3 havg = dkH0;
    for (int c = 0; c < 3; ++c)
        for (double& v : havg[c].v) v *= 0.5;
    stag_axpy(0.5, dkH1, havg);
    const Stag3 rhs = curl_h(g, havg, nullptr);

    // Volume residual over curl rows that read no wall data: both transverse
    // nodal indices strictly inside.
    double acc = 0.0;
    const double vol = g.cell_volume();
    for (int c = 0; c < 3; ++c) {
        const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
        const Arr3D& a0 = u0[c];
        for (int i = 0; i < a0.n[0]; ++i)
            for (int j = 0; j < a0.n[1]; ++j)
                for (int kk = 0; kk < a0.n[2]; ++kk) {
                    std::array<int, 3> I{i, j, kk};
                    if (I[c1] <= 0 || I[c1] >= g.cells[c1]) continue;
                    if (I[c2] <= 0 || I[c2] >= g.cells[c2]) continue;
                    const double r = (u0[c].at(i, j, kk) - u1[c].at(i, j, kk)) / dt -
                                     rhs[c].at(i, j, kk);
                    acc += vol * r * r;
                }
    }

    DerivedResidual out;
    out.interior = std::sqrt(acc);

    const Stag3 dkE0 = ring_time_derivative(ring, true, k, 0, false);
    const Stag3 E1min = k >= 2 ? ring_time_derivative(ring, true, 1, 0, false) : Stag3{};
    const Stag3 E2min = k >= 3 ? ring_time_derivative(ring, true, 2, 0, false) : Stag3{};
    double bacc = 0.0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        std::array<int, 3> I = pt.m;
        I[pt.axis] = pt.side ? g.cells[pt.axis] - 1 : 0;
        const double hk_trace = dkH0[pt.comp].at(I[0], I[1], I[2]);
        const Vec3 w0 = wall_trace_w(g, ring.back().E, pt);
        const Vec3 wk = wall_trace_w(g, dkE0, pt);
        double hcom = 0.0;
        if (k >= 2) {
            const Vec3 w1 = wall_trace_w(g, E1min, pt);
            const Vec3 w2 = k >= 3 ? wall_trace_w(g, E2min, pt) : Vec3{0.0, 0.0, 0.0};
            hcom = boundary_commutator(model.lambda, pt.x, w0, w1, w2, k)[pt.comp];
        }
        const double r =
            hk_trace + (eval_lambda_d(model, pt.x, w0) * wk)[pt.comp] + hcom;
        bacc += pt.weight * r * r;
    });
    out.boundary = std::sqrt(bacc);
    out.divergence = charge_edge_norm(g, u0);
    return out;
}

double normal_trace_sq_edge(const StaggeredGrid& g, const Stag3& D) {
    double acc = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const auto tt = wall_tangents(axis);
        const double area = g.h[tt[0]] * g.h[tt[1]];
        for (int side = 0; side < 2; ++side) {
            const int layer = side ? g.cells[axis] - 1 : 0;
            for (int p = 0; p <= g.cells[tt[0]]; ++p)
                for (int q = 0; q <= g.cells[tt[1]]; ++q) {
                    double wt = area;
                    if (p == 0 || p == g.cells[tt[0]]) wt *= 0.5;
                    if (q == 0 || q == g.cells[tt[1]]) wt *= 0.5;
                    std::array<int, 3> I;
                    I[axis] = layer;
                    I[tt[0]] = p;
                    I[tt[1]] = q;
                    const double v = D[axis].at(I[0], I[1], I[2]);
                    acc += wt * v * v;
                }
        }
    }
    return acc;
}

double normal_trace_sq_face(const StaggeredGrid& g, const Stag3& B) {
    double acc = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const auto tt = wall_tangents(axis);
        const double area = g.h[tt[0]] * g.h[tt[1]];
        for (int side = 0; side < 2; ++side) {
            const int layer = side ? g.cells[axis] : 0;
            for (int p = 0; p < g.cells[tt[0]]; ++p)
                for (int q = 0; q < g.cells[tt[1]]; ++q) {
                    std::array<int, 3> I;
                    I[axis] = layer;
                    I[tt[0]] = p;
                    I[tt[1]] = q;
                    const double v = B[axis].at(I[0], I[1], I[2]);
                    acc += area * v * v;
                }
        }
    }
    return acc;
}

double tangential_trace_sq_edge(const StaggeredGrid& g, const Stag3& E) {
    double acc = 0.0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        const Vec3 w = wall_trace_w(g, E, pt);
        acc += pt.weight * w[pt.comp] * w[pt.comp];
    });
    return acc;
}

double tangential_trace_sq_face(const StaggeredGrid& g, const Stag3& H) {
    double acc = 0.0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        std::array<int, 3> I = pt.m;
        I[pt.axis] = pt.side ? g.cells[pt.axis] - 1 : 0;
        const double v = H[pt.comp].at(I[0], I[1], I[2]);
        acc += pt.weight * v * v;
    });
    return acc;
}

SeriesSample sample_functionals(const StaggeredGrid& g, const MaterialModel& model,
                                const std::deque<RingEntry>& ring, int kmax) {
    if (ring.empty()) throw InsufficientHistory("cannot sample an empty ring");
    kmax = std::clamp(kmax, 0, 3);
    const int have = static_cast<int>(ring.size());
    const int keff = std::max(0, std::min(kmax, have - 2));

    SeriesSample out;
    out.t = ring.back().t;
    for (int k = 0; k <= 3; ++k) {
        const int kk = std::min(k, keff);
        if (k == 0 || kk == k) {
            out.e[static_cast<std::size_t>(k)] = energy_e(g, model, ring, kk);
            out.d[static_cast<std::size_t>(k)] = dissipation_d(g, model, ring, kk);
            out.z[static_cast<std::size_t>(k)] = z_norm(g, ring, kk);
        } else {
            out.e[static_cast<std::size_t>(k)] = out.e[static_cast<std::size_t>(kk)];
            out.d[static_cast<std::size_t>(k)] = out.d[static_cast<std::size_t>(kk)];
            out.z[static_cast<std::size_t>(k)] = out.z[static_cast<std::size_t>(kk)];
        }
    }

    const Stag3 D = apply_edge_law(model.eps, g, ring.back().E);
    const Stag3 B = apply_face_law(model.mu, g, ring.back().Hbar);
    out.charge_e = charge_edge_norm(g, D);
    out.charge_h = charge_face_norm(g, B);
    out.trace_normal_d = normal_trace_sq_edge(g, D);
    out.trace_normal_b = normal_trace_sq_face(g, B);
    out.trace_tangential_e = tangential_trace_sq_edge(g, ring.back().E);
    out.trace_tangential_h = tangential_trace_sq_face(g, ring.back().Hbar);
    return out;
}

namespace {
constexpr const char* kSeriesHeader =
    "t,e0,e1,e2,e3,d0,d1,d2,d3,z0,z1,z2,z3,charge_e,charge_h,trace_normal_d,"
    "trace_normal_b,trace_tangential_e,trace_tangential_h,bc_dissipation,"
    "energy_identity_residual";
constexpr int kSeriesColumns = 21;
}  // namespace

void write_series_csv(std::ostream& os, const FunctionalSeries& s) {
    os << kSeriesHeader << '\n';
    os << std::setprecision(17);
    for (const SeriesSample& r : s.samples) {
        os << r.t;
        for (int k = 0; k < 4; ++k) os << ',' << r.e[static_cast<std::size_t>(k)];
        for (int k = 0; k < 4; ++k) os << ',' << r.d[static_cast<std::size_t>(k)];
        for (int k = 0; k < 4; ++k) os << ',' << r.z[static_cast<std::size_t>(k)];
        os << ',' << r.charge_e << ',' << r.charge_h;
        os << ',' << r.trace_normal_d << ',' << r.trace_normal_b;
        os << ',' << r.trace_tangential_e << ',' << r.trace_tangential_h;
        os << ',' << r.bc_dissipation << ',' << r.identity_residual;
        os << '\n';
    }
}

FunctionalSeries read_series_csv(std::istream& is) {
    FunctionalSeries out;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty series file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != kSeriesHeader)
        throw std::runtime_error("unrecognized series header: " + line);
    while (std::getline(is, line)) {
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<double, kSeriesColumns> f{};
        std::stringstream ss(line);
        std::string cell;
        int n = 0;
        while (std::getline(ss, cell, ',')) {
            if (n >= kSeriesColumns)
                throw std::runtime_error("series row has too many columns");
            f[static_cast<std::size_t>(n++)] = std::stod(cell);
        }
        if (n != kSeriesColumns)
            throw std::runtime_error("series row has " + std::to_string(n) +
                                     " columns, expected " +
                                     std::to_string(kSeriesColumns));
        SeriesSample r;
        r.t = f[0];
        for (int k = 0; k < 4; ++k) {
            r.e[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(1 + k)];
            r.d[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(5 + k)];
            r.z[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(9 + k)];
        }
        r.charge_e = f[13];
        r.charge_h = f[14];
        r.trace_normal_d = f[15];
        r.trace_normal_b = f[16];
        r.trace_tangential_e = f[17];
        r.trace_tangential_h = f[18];
        r.bc_dissipation = f[19];
        r.identity_residual = f[20];
        out.samples.push_back(r);
    }
    return out;
}

}  // namespace absd
