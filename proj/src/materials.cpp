#include "absd/materials.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace absd {

bool CoefLaw::spatially_constant() const {
    switch (kind) {
        case Linear: return profile.shape == SpatialProfile::Constant;
        case Kerr:
            return lin_profile.shape == SpatialProfile::Constant &&
                   nl_profile.shape == SpatialProfile::Constant;
        case Poly2: return profile.shape == SpatialProfile::Constant;
    }
    return true;
}

Mat3 CoefLaw::eval(const Vec3& x, const Vec3& xi) const {
    switch (kind) {
        case Linear: return profile.value(x) * M;
        case Kerr: {
            double a = lin * lin_profile.value(x);
            double b = nl * nl_profile.value(x);
            return Mat3::scale(a + b * dot(xi, xi));
        }
        case Poly2: {
            Mat3 r = M + Mat3::scale(c1 * dot(xi, xi)) + c2 * Mat3::outer(xi, xi);
            return profile.value(x) * r;
        }
    }
    return Mat3::identity();
}

Mat3 CoefLaw::dxi(const Vec3& x, const Vec3& xi, int l) const {
    switch (kind) {
        case Linear: return Mat3::zero();
        case Kerr: {
            double b = nl * nl_profile.value(x);
            return Mat3::scale(2.0 * b * xi[l]);
        }
        case Poly2: {
            Vec3 el{0, 0, 0};
            el[l] = 1.0;
            Mat3 r = Mat3::scale(2.0 * c1 * xi[l]) +
                     c2 * (Mat3::outer(el, xi) + Mat3::outer(xi, el));
            return profile.value(x) * r;
        }
    }
    return Mat3::zero();
}

Mat3 CoefLaw::d2xi(const Vec3& x, const Vec3& xi, int l, int m) const {
    (void)xi;
    switch (kind) {
        case Linear: return Mat3::zero();
        case Kerr: {
            double b = nl * nl_profile.value(x);
            return l == m ? Mat3::scale(2.0 * b) : Mat3::zero();
        }
        case Poly2: {
            Vec3 el{0, 0, 0}, em{0, 0, 0};
            el[l] = 1.0;
            em[m] = 1.0;
            Mat3 r = c2 * (Mat3::outer(el, em) + Mat3::outer(em, el));
            if (l == m) r += Mat3::scale(2.0 * c1);
            return profile.value(x) * r;
        }
    }
    return Mat3::zero();
}

Mat3 CoefLaw::eval_d(const Vec3& x, const Vec3& xi) const {
    Mat3 r = eval(x, xi);
    if (!field_dependent()) return r;
    for (int j = 0; j < 3; ++j) {
        Vec3 col = dxi(x, xi, j) * xi;
        for (int i = 0; i < 3; ++i) r(i, j) += col[i];
    }
    return r;
}

Mat3 CoefLaw::dxi_d(const Vec3& x, const Vec3& xi, int l) const {
    // d/dxi_l [ eval_ij + sum_m (dxi_j eval)_im xi_m ]
    //   = (dxi_l eval)_ij + sum_m (d2xi_{l,j} eval)_im xi_m + (dxi_j eval)_il
    Mat3 r = dxi(x, xi, l);
    if (!field_dependent()) return r;
    for (int j = 0; j < 3; ++j) {
        Vec3 col = d2xi(x, xi, l, j) * xi;
        Mat3 dj = dxi(x, xi, j);
        for (int i = 0; i < 3; ++i) r(i, j) += col[i] + dj(i, l);
    }
    return r;
}

Mat3 CoefLaw::d2xi_d(const Vec3& x, const Vec3& xi, int l, int m) const {
    // third xi-derivatives vanish for degree-2 laws, so only the mixed
    // second-derivative terms survive:
    // d2_{m,l} eval_d_ij = (d2_{m,l} eval)_ij + (d2_{l,j} eval)_im + (d2_{m,j} eval)_il
    Mat3 r = d2xi(x, xi, l, m);
    if (!field_dependent()) return r;
    for (int j = 0; j < 3; ++j) {
        Mat3 dl = d2xi(x, xi, l, j);
        Mat3 dm = d2xi(x, xi, m, j);
        for (int i = 0; i < 3; ++i) r(i, j) += dl(i, m) + dm(i, l);
    }
    return r;
}

Mat3 CoefLaw::radial_derivative_at0(const Vec3& x, const Vec3& x0) const {
    Vec3 m = x - x0;
    switch (kind) {
        case Linear: return dot(m, profile.grad(x)) * M;
        case Kerr: return Mat3::scale(lin * dot(m, lin_profile.grad(x)));
        case Poly2: return dot(m, profile.grad(x)) * M;
    }
    return Mat3::zero();
}

std::string MaterialModel::kind_name() const {
    auto rank = [](const CoefLaw& l) { return l.kind == CoefLaw::Linear ? 0 : (l.kind == CoefLaw::Kerr ? 1 : 2); };
    int r = std::max(rank(eps), std::max(rank(mu), rank(lambda)));
    if (r == 2) return "polynomial-anisotropic";
    if (r == 1) return "kerr";
    return "linear-anisotropic";
}

void validate_model(const MaterialModel& model) {
    // lambda acts on tangential traces of the box walls; with axis-aligned
    // walls it preserves every tangent plane only if its matrix part is
    // diagonal.
    const CoefLaw& l = model.lambda;
    if (l.kind == CoefLaw::Linear || l.kind == CoefLaw::Poly2) {
        const Mat3& M = l.M;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j && M(i, j) != 0.0)
                    throw std::runtime_error(
                        "material: lambda matrix must be diagonal to preserve wall tangent planes");
    }
    for (const CoefLaw* law : {&model.eps, &model.mu, &model.lambda}) {
        Mat3 m0 = law->eval_at0({0, 0, 0});
        if (m0.asymmetry() > 1e-12 * (1.0 + m0.max_abs()))
            throw std::runtime_error("material: coefficient matrix must be symmetric");
    }
    if (!(model.eta > 0.0)) throw std::runtime_error("material: eta must be positive");
    if (!(model.delta0 > 0.0)) throw std::runtime_error("material: delta0 must be positive");
}

Mat3 eval_eps(const MaterialModel& m, const Vec3& x, const Vec3& xi) { return m.eps.eval(x, xi); }
Mat3 eval_eps_d(const MaterialModel& m, const Vec3& x, const Vec3& xi) { return m.eps.eval_d(x, xi); }
Mat3 eval_mu(const MaterialModel& m, const Vec3& x, const Vec3& xi) { return m.mu.eval(x, xi); }
Mat3 eval_mu_d(const MaterialModel& m, const Vec3& x, const Vec3& xi) { return m.mu.eval_d(x, xi); }
Mat3 eval_lambda(const MaterialModel& m, const Vec3& x, const Vec3& xi) { return m.lambda.eval(x, xi); }
Mat3 eval_lambda_d(const MaterialModel& m, const Vec3& x, const Vec3& xi) { return m.lambda.eval_d(x, xi); }

namespace {

// fixed direction set for the |xi| <= delta0 scan: axes, face diagonals and
// body diagonals (normalized)
std::vector<Vec3> sample_directions() {
    std::vector<Vec3> dirs;
    for (int a = 0; a < 3; ++a) {
        Vec3 e{0, 0, 0};
        e[a] = 1.0;
        dirs.push_back(e);
        dirs.push_back(-1.0 * e);
    }
    const double s = 1.0 / std::sqrt(2.0);
    dirs.push_back({s, s, 0});
    dirs.push_back({s, -s, 0});
    dirs.push_back({s, 0, s});
    dirs.push_back({0, s, s});
    const double t = 1.0 / std::sqrt(3.0);
    dirs.push_back({t, t, t});
    dirs.push_back({t, -t, t});
    dirs.push_back({-t, t, t});
    dirs.push_back({t, t, -t});
    return dirs;
}

std::vector<Vec3> positivity_x_samples(const CoefLaw& law, const StaggeredGrid& g, bool on_boundary) {
    std::vector<Vec3> xs;
    if (law.spatially_constant()) {
        xs.push_back(g.x0);
        return xs;
    }
    if (on_boundary) {
        for (const auto& f : boundary_faces(g)) xs.push_back(f.center);
        return xs;
    }
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) xs.push_back(g.node_pos(i, j, k));
    return xs;
}

FamilyCheck scan_family(const CoefLaw& law, const StaggeredGrid& g, const std::string& name,
                        bool derived, bool at_zero_only, double threshold, bool on_boundary,
                        double delta0) {
    FamilyCheck fc;
    fc.family = name;
    fc.threshold = threshold;
    fc.min_eig = std::numeric_limits<double>::infinity();

    std::vector<Vec3> xs = positivity_x_samples(law, g, on_boundary);
    std::vector<Vec3> xis;
    xis.push_back({0, 0, 0});
    if (!at_zero_only && law.field_dependent()) {
        for (const Vec3& d : sample_directions())
            for (double r : {0.25, 0.5, 0.75, 1.0}) xis.push_back((r * delta0) * d);
    }

    for (const Vec3& x : xs) {
        for (const Vec3& xi : xis) {
            Mat3 m = derived ? law.eval_d(x, xi) : law.eval(x, xi);
            double e = sym_min_eig3(m);
            if (e < fc.min_eig) {
                fc.min_eig = e;
                fc.witness_x = x;
                fc.witness_xi = xi;
            }
        }
    }
    fc.pass = fc.min_eig >= threshold;
    return fc;
}

}  // namespace

PositivityReport check_positivity(const MaterialModel& model, const StaggeredGrid& grid) {
    PositivityReport rep;
    const double eta = model.eta, d0 = model.delta0;
    rep.checks[0] = scan_family(model.eps, grid, "eps(0)", false, true, 2.0 * eta, false, d0);
    rep.checks[1] = scan_family(model.mu, grid, "mu(0)", false, true, 2.0 * eta, false, d0);
    rep.checks[2] = scan_family(model.lambda, grid, "lambda(0)", false, true, 2.0 * eta, true, d0);
    rep.checks[3] = scan_family(model.eps, grid, "eps", false, false, eta, false, d0);
    rep.checks[4] = scan_family(model.eps, grid, "eps_d", true, false, eta, false, d0);
    rep.checks[5] = scan_family(model.mu, grid, "mu", false, false, eta, false, d0);
    rep.checks[6] = scan_family(model.mu, grid, "mu_d", true, false, eta, false, d0);
    rep.checks[7] = scan_family(model.lambda, grid, "lambda", false, false, eta, true, d0);
    rep.checks[8] = scan_family(model.lambda, grid, "lambda_d", true, false, eta, true, d0);
    rep.pass = true;
    for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
    return rep;
}

namespace {

Mat3 radial_derivative_fd(const CoefLaw& law, const Vec3& x, const Vec3& x0) {
    // 4th-order central differences per axis, summed against m = x - x0.
    // The step is an analytic cross-check knob, deliberately independent of
    // the grid spacing.
    Vec3 m = x - x0;
    Mat3 acc = Mat3::zero();
    for (int a = 0; a < 3; ++a) {
        if (m[a] == 0.0) continue;
        const double d = 1e-3;
        Vec3 xp = x, xpp = x, xm = x, xmm = x;
        xp[a] += d;
        xpp[a] += 2.0 * d;
        xm[a] -= d;
        xmm[a] -= 2.0 * d;
        Mat3 der = (1.0 / (12.0 * d)) *
                   (law.eval_at0(xmm) - 8.0 * law.eval_at0(xm) + 8.0 * law.eval_at0(xp) -
                    law.eval_at0(xpp));
        acc += m[a] * der;
    }
    return acc;
}

}  // namespace

NontrappingReport check_nontrapping(const MaterialModel& model, const StaggeredGrid& grid,
                                    bool use_fd) {
    NontrappingReport rep;
    rep.eta_bar = std::numeric_limits<double>::infinity();

    for (const CoefLaw* law : {&model.eps, &model.mu}) {
        const bool is_eps = law == &model.eps;
        if (law->spatially_constant()) {
            // derivative term vanishes identically, so the margin is 1 by
            // definition; do not launder the exact value through an eigensolve
            if (1.0 < rep.eta_bar) {
                rep.eta_bar = 1.0;
                rep.witness_x = grid.x0;
                rep.family = is_eps ? "eps" : "mu";
            }
            continue;
        }
        for (int i = 0; i <= grid.cells[0]; ++i) {
            for (int j = 0; j <= grid.cells[1]; ++j) {
                for (int k = 0; k <= grid.cells[2]; ++k) {
                    Vec3 x = grid.node_pos(i, j, k);
                    Mat3 base = law->eval_at0(x);
                    Mat3 der = use_fd ? radial_derivative_fd(*law, x, grid.x0)
                                      : law->radial_derivative_at0(x, grid.x0);
                    double eta = gen_min_eig3(base + der, base);
                    if (eta < rep.eta_bar) {
                        rep.eta_bar = eta;
                        rep.witness_x = x;
                        rep.family = is_eps ? "eps" : "mu";
                    }
                }
            }
        }
    }
    rep.pass = rep.eta_bar > 0.0;
    return rep;
}

EigBounds coef_eig_bounds(const CoefLaw& law, const StaggeredGrid& grid, double delta0,
                          bool include_derived) {
    EigBounds b;
    b.min_eig = std::numeric_limits<double>::infinity();
    b.max_eig = -std::numeric_limits<double>::infinity();

    std::vector<Vec3> xs;
    if (law.spatially_constant()) {
        xs.push_back(grid.x0);
    } else {
        // nodes of a coarse sub-lattice plus the corners: profiles are
        // monotone radial so this brackets the range well
        for (int i = 0; i <= grid.cells[0]; i += std::max(1, grid.cells[0] / 8))
            for (int j = 0; j <= grid.cells[1]; j += std::max(1, grid.cells[1] / 8))
                for (int k = 0; k <= grid.cells[2]; k += std::max(1, grid.cells[2] / 8))
                    xs.push_back(grid.node_pos(i, j, k));
        xs.push_back({0, 0, 0});
        xs.push_back({grid.extent[0], grid.extent[1], grid.extent[2]});
    }

    std::vector<Vec3> xis;
    xis.push_back({0, 0, 0});
    if (law.field_dependent())
        for (const Vec3& d : sample_directions())
            for (double r : {0.5, 1.0}) xis.push_back((r * delta0) * d);

    for (const Vec3& x : xs) {
        for (const Vec3& xi : xis) {
            for (int pass = 0; pass < (include_derived ? 2 : 1); ++pass) {
                Mat3 m = pass == 0 ? law.eval(x, xi) : law.eval_d(x, xi);
                std::array<double, 3> ev;
                Mat3 V;
                sym_eig3(m, ev, V);
                b.min_eig = std::min(b.min_eig, ev[0]);
                b.max_eig = std::max(b.max_eig, ev[2]);
            }
        }
    }
    return b;
}

}  // namespace absd
