#include "absd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absd/initdata.hpp"
#include "absd/materials.hpp"
#include "absd/stepper.hpp"

namespace absd {

namespace {

void require_span(const std::vector<SeriesSample>& v, double a, double b) {
    if (v.size() < 2) throw std::invalid_argument("series must hold at least two samples");
    if (!(b > a)) throw std::invalid_argument("window must have positive length");
    const double slack = 1e-9 * std::max(1.0, v.back().t - v.front().t);
    if (a < v.front().t - slack || b > v.back().t + slack)
        throw std::invalid_argument("window lies outside the series span");
}

// Trapezoid over [a, b] with linear interpolation in the partial end
// intervals; samples are assumed time-sorted.
double integrate_column(const std::vector<SeriesSample>& v, const SampleSelector& pick,
                        double a, double b) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double t0 = v[i].t, t1 = v[i + 1].t;
        if (t1 <= a || t0 >= b || t1 <= t0) continue;
        const double f0 = pick(v[i]), f1 = pick(v[i + 1]);
        const double lo = std::max(a, t0), hi = std::min(b, t1);
        auto lerp = [&](double t) { return f0 + (f1 - f0) * (t - t0) / (t1 - t0); };
        acc += 0.5 * (lerp(lo) + lerp(hi)) * (hi - lo);
    }
    return acc;
}

Rng member_rng(std::uint64_t seed, int member) {
    return Rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(member + 1));
}

// Groupwise application of a law frozen at zero field.
Stag3 law_at_zero_apply(const StaggeredGrid& g, const CoefLaw& law, const Stag3& v,
                        bool edge_layout) {
    Stag3 out = edge_layout ? make_e_field(g) : make_h_field(g);
    const Vec3 zero{0.0, 0.0, 0.0};
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const Vec3 x = g.node_pos(i, j, k);
                const GatherE w = edge_layout ? gather_edge(g, v, i, j, k)
                                              : gather_face(g, v, i, j, k);
                const Vec3 u = law.eval(x, zero) * w.v;
                if (edge_layout)
                    scatter_edge(out, i, j, k, w, u);
                else
                    scatter_face(out, i, j, k, w, u);
            }
    return out;
}

// L2 norm of curl of a face field over the rows that read no wall ghost.
double interior_curl_h_norm(const StaggeredGrid& g, const Stag3& v) {
    const Stag3 cu = curl_h(g, v, nullptr);
    double acc = 0.0;
    const double vol = g.cell_volume();
    for (int c = 0; c < 3; ++c) {
        const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
        const Arr3D& a = cu[c];
        for (int i = 0; i < a.n[0]; ++i)
            for (int j = 0; j < a.n[1]; ++j)
                for (int k = 0; k < a.n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    if (I[c1] <= 0 || I[c1] >= g.cells[c1]) continue;
                    if (I[c2] <= 0 || I[c2] >= g.cells[c2]) continue;
                    const double r = a.at(i, j, k);
                    acc += vol * r * r;
                }
    }
    return std::sqrt(acc);
}

// Wall norm of the impedance mismatch of the pair (u, v): per owned trace
// component, tangential v at the first interior layer plus lambda(w) w.
double impedance_residual_norm(const StaggeredGrid& g, const MaterialModel& model,
                               const Stag3& u, const Stag3& v) {
    double acc = 0.0;
    for_each_wall_point(g, [&](const WallPoint& pt) {
        std::array<int, 3> I = pt.m;
        I[pt.axis] = pt.side ? g.cells[pt.axis] - 1 : 0;
        const double htr = v[pt.comp].at(I[0], I[1], I[2]);
        const Vec3 w = wall_trace_w(g, u, pt);
        const Vec3 lw = eval_lambda(model, pt.x, w) * w;
        const double r = htr + lw[pt.comp];
        acc += pt.weight * r * r;
    });
    return std::sqrt(acc);
}

struct WallMode {
    int p = 0, q = 0;
};

std::vector<WallMode> wall_mode_family() {
    std::vector<WallMode> modes;
    for (int p = 0; p <= 5; ++p)
        for (int q = 0; q <= 5; ++q) modes.push_back({p, q});
    std::sort(modes.begin(), modes.end(), [](const WallMode& a, const WallMode& b) {
        const int ra = a.p * a.p + a.q * a.q, rb = b.p * b.p + b.q * b.q;
        if (ra != rb) return ra < rb;
        if (a.p != b.p) return a.p < b.p;
        return a.q < b.q;
    });
    modes.resize(32);
    return modes;
}

bool cholesky_lower(std::vector<double>& a, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
        for (int j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

void forward_subst(const std::vector<double>& l, int n, std::vector<double>& b) {
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
        b[i] = s / l[i * n + i];
    }
}

}  // namespace

SampleSelector series_column(const std::string& name) {
    if (name.size() == 2 && name[1] >= '0' && name[1] <= '3') {
        const int k = name[1] - '0';
        switch (name[0]) {
            case 'e':
                return [k](const SeriesSample& s) { return s.e[k]; };
            case 'd':
                return [k](const SeriesSample& s) { return s.d[k]; };
            case 'z':
                return [k](const SeriesSample& s) { return s.z[k]; };
            default:
                break;
        }
    }
    throw std::invalid_argument("unknown series column '" + name + "'");
}

DecayFit fit_decay(const FunctionalSeries& series, const SampleSelector& pick,
                   double transient_fraction) {
    const auto& v = series.samples;
    if (v.empty()) throw std::invalid_argument("empty series");
    if (!(transient_fraction >= 0.0 && transient_fraction < 1.0))
        throw std::invalid_argument("transient fraction must lie in [0,1)");

    const auto start =
        static_cast<std::size_t>(std::llround(transient_fraction * double(v.size())));
    std::vector<double> ts, ys;
    bool any_live = false;
    for (std::size_t i = start; i < v.size(); ++i) {
        const double val = pick(v[i]);
        if (val < 1e-300) continue;
        any_live = true;
        ts.push_back(v[i].t);
        ys.push_back(std::log(val));
    }
    if (!any_live) throw DegenerateSeries("every sample is below 1e-300");
    if (ts.size() < 10)
        throw std::invalid_argument("need at least 10 usable samples after the transient cut");

    const double n = static_cast<double>(ts.size());
    double tbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        tbar += ts[i];
        ybar += ys[i];
    }
    tbar /= n;
    ybar /= n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double dt = ts[i] - tbar, dy = ys[i] - ybar;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if (stt <= 0.0) throw std::invalid_argument("samples share a single time");

    const double slope = sty / stt;
    DecayFit fit;
    fit.rate = -slope;
    fit.amplitude = std::exp(ybar - slope * tbar);
    const double ssres = syy - sty * sty / stt;
    // A log-variance at rounding scale means the series is constant.
    fit.r2 = syy <= n * 1e-24 ? 1.0 : std::clamp(1.0 - ssres / syy, 0.0, 1.0);
    fit.t_start = ts.front();
    fit.t_end = ts.back();
    return fit;
}

double observability_ratio(const FunctionalSeries& series, double T) {
    const auto& v = series.samples;
    require_span(v, v.empty() ? 0.0 : v.front().t, T);
    const double diss =
        integrate_column(v, [](const SeriesSample& s) { return s.d[0]; }, v.front().t, T);
    if (!(diss > 0.0))
        throw ZeroDissipation("boundary dissipation vanishes on [0,T]; the window is too short");
    return v.front().e[0] / diss;
}

ConstantEstimate observability_ensemble(const StaggeredGrid& g, const MaterialModel& model,
                                        double T, int count, std::uint64_t seed,
                                        const RunOptions& base) {
    if (count < 1) throw std::invalid_argument("ensemble size must be at least 1");
    ConstantEstimate est;
    est.name = "observability";
    est.ensemble = count;
    est.lo = std::numeric_limits<double>::infinity();
    est.hi = 0.0;
    const double minext = std::min({g.extent[0], g.extent[1], g.extent[2]});
    for (int mbr = 0; mbr < count; ++mbr) {
        Rng rng = member_rng(seed, mbr);
        BumpParams bp;
        bp.radius = minext * rng.uniform(0.10, 0.20);
        for (int c = 0; c < 3; ++c) {
            const double lo = 2.0 * g.h[c] + bp.radius * (1.0 + 1e-9) + 1e-12;
            bp.center[c] = rng.uniform(lo, g.extent[c] - lo);
        }
        Vec3 pol{0.0, 0.0, 1.0};
        do {
            pol = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        } while (norm(pol) < 0.2);
        bp.polarization = pol * (1.0 / norm(pol));
        bp.amplitude = 1.0;

        const InitialData data = make_bump_data(g, model, bp, InitialRecipe::CurlBump);
        RunOptions opts = base;
        opts.T = T;
        opts.kmax = 0;
        opts.snapshot_every = 0;
        opts.progress = false;
        const RunResult rr = run_simulation(g, model, data, opts);
        const double ratio = observability_ratio(rr.series, T);
        est.lo = std::min(est.lo, ratio);
        est.hi = std::max(est.hi, ratio);
    }
    est.value = est.hi;
    return est;
}

double trace_ratio(const FunctionalSeries& series, double s, double t) {
    const auto& v = series.samples;
    require_span(v, s, t);
    const double num = integrate_column(
        v, [](const SeriesSample& r) { return r.trace_normal_d + r.trace_normal_b; }, s, t);
    const double den = integrate_column(
        v, [](const SeriesSample& r) { return r.trace_tangential_e; }, s, t);
    if (!(den > 0.0))
        throw ZeroDenominator("tangential trace vanishes on the window");
    return num / den;
}

std::vector<double> trace_ratio_sweep(const FunctionalSeries& series, double window,
                                      const std::vector<double>& multiples) {
    if (!(window > 0.0)) throw std::invalid_argument("window must be positive");
    std::vector<double> out;
    out.reserve(multiples.size());
    const double t0 = series.samples.empty() ? 0.0 : series.samples.front().t;
    for (double m : multiples) out.push_back(trace_ratio(series, t0, t0 + m * window));
    return out;
}

double default_window_estimate(const StaggeredGrid& g, const MaterialModel& model) {
    const EigBounds ee = coef_eig_bounds(model.eps, g, model.delta0, false);
    const EigBounds em = coef_eig_bounds(model.mu, g, model.delta0, false);
    return 2.0 * g.diameter() * std::sqrt(ee.max_eig * em.max_eig);
}

double divcurl_pair_ratio(const StaggeredGrid& g, const MaterialModel& model,
                          const Stag3& u, const Stag3& v) {
    const double num = discrete_norm(g, u, true, 1) + discrete_norm(g, v, false, 1);
    if (num <= 1e-300) throw ZeroDenominator("degenerate zero field pair");
    const Stag3 cu = curl_e(g, u);
    const double den = std::sqrt(face_weighted_dot(g, cu, cu)) + interior_curl_h_norm(g, v) +
                       charge_edge_norm(g, law_at_zero_apply(g, model.eps, u, true)) +
                       charge_face_norm(g, law_at_zero_apply(g, model.mu, v, false)) +
                       impedance_residual_norm(g, model, u, v);
    if (den <= 1e-300) throw ZeroDenominator("vanishing denominator");
    return num / den;
}

ConstantEstimate divcurl_ratio(const StaggeredGrid& g, const MaterialModel& model,
                               int ensemble, std::uint64_t seed) {
    if (ensemble < 1) throw std::invalid_argument("ensemble size must be at least 1");
    ConstantEstimate est;
    est.name = "divcurl";
    est.lo = std::numeric_limits<double>::infinity();
    est.hi = 0.0;
    int used = 0;
    for (int mbr = 0; mbr < ensemble; ++mbr) {
        Rng rng = member_rng(seed, mbr);
        const Stag3 u = random_trig_field(g, true, rng);
        const Stag3 v = random_trig_field(g, false, rng);
        try {
            const double ratio = divcurl_pair_ratio(g, model, u, v);
            est.lo = std::min(est.lo, ratio);
            est.hi = std::max(est.hi, ratio);
            ++used;
        } catch (const ZeroDenominator&) {
        }
    }
    est.ensemble = used;
    est.value = est.hi;
    return est;
}

double surface_curl_ratio(const StaggeredGrid& g, const Stag3& f) {
    const Stag3 cf = curl_e(g, f);
    const std::vector<WallMode> modes = wall_mode_family();
    const int M = static_cast<int>(modes.size());

    double num2 = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const auto tt = wall_tangents(axis);
        const int n1 = g.cells[tt[0]], n2 = g.cells[tt[1]];
        const double h1 = g.h[tt[0]], h2 = g.h[tt[1]];
        const double L1 = g.extent[tt[0]], L2 = g.extent[tt[1]];
        const double area = h1 * h2;
        for (int side = 0; side < 2; ++side) {
            const int layer = side ? g.cells[axis] : 0;
            std::vector<double> gram(static_cast<std::size_t>(M) * M, 0.0);
            std::vector<double> rhs(M, 0.0);
            std::vector<double> phi(M), gy(M), gz(M);
            for (int p = 0; p < n1; ++p)
                for (int q = 0; q < n2; ++q) {
                    const double y = (p + 0.5) * h1, z = (q + 0.5) * h2;
                    std::array<int, 3> I;
                    I[axis] = layer;
                    I[tt[0]] = p;
                    I[tt[1]] = q;
                    const double gval = cf[axis].at(I[0], I[1], I[2]);
                    for (int m = 0; m < M; ++m) {
                        const double ky = M_PI * modes[m].p / L1;
                        const double kz = M_PI * modes[m].q / L2;
                        const double cy = std::cos(ky * y), cz = std::cos(kz * z);
                        phi[m] = cy * cz;
                        gy[m] = -ky * std::sin(ky * y) * cz;
                        gz[m] = -kz * cy * std::sin(kz * z);
                        rhs[m] += area * gval * phi[m];
                    }
                    for (int m = 0; m < M; ++m)
                        for (int n = 0; n <= m; ++n)
                            gram[static_cast<std::size_t>(m) * M + n] +=
                                area * (phi[m] * phi[n] + gy[m] * gy[n] + gz[m] * gz[n]);
                }
            for (int m = 0; m < M; ++m)
                for (int n = m + 1; n < M; ++n)
                    gram[static_cast<std::size_t>(m) * M + n] =
                        gram[static_cast<std::size_t>(n) * M + m];
            if (!cholesky_lower(gram, M))
                throw std::runtime_error("degenerate boundary test family");
            forward_subst(gram, M, rhs);
            for (int m = 0; m < M; ++m) num2 += rhs[m] * rhs[m];
        }
    }

    const double den2 = wall_tangential_sq(g, f);
    if (den2 <= 1e-300) throw ZeroDenominator("tangential wall trace vanishes");
    return std::sqrt(num2 / den2);
}

ConstantEstimate surface_curl_ensemble(const StaggeredGrid& g, int ensemble,
                                       std::uint64_t seed) {
    if (ensemble < 1) throw std::invalid_argument("ensemble size must be at least 1");
    ConstantEstimate est;
    est.name = "surface_curl";
    est.lo = std::numeric_limits<double>::infinity();
    est.hi = 0.0;
    int used = 0;
    for (int mbr = 0; mbr < ensemble; ++mbr) {
        Rng rng = member_rng(seed, mbr);
        const Stag3 f = random_trig_field(g, true, rng);
        try {
            const double ratio = surface_curl_ratio(g, f);
            est.lo = std::min(est.lo, ratio);
            est.hi = std::max(est.hi, ratio);
            ++used;
        } catch (const ZeroDenominator&) {
        }
    }
    est.ensemble = used;
    est.value = est.hi;
    return est;
}

Stag3 random_trig_field(const StaggeredGrid& g, bool edge_layout, Rng& rng, int max_mode) {
    struct Mode {
        double amp = 0.0;
        std::array<int, 3> k{0, 0, 0};
        std::array<bool, 3> use_sin{false, false, false};
    };
    std::array<std::array<Mode, 3>, 3> modes;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) {
            Mode& m = modes[c][r];
            m.amp = rng.uniform(-1.0, 1.0);
            for (int a = 0; a < 3; ++a) {
                m.k[a] = static_cast<int>(rng.uniform(0.0, double(max_mode) + 1.0));
                m.use_sin[a] = rng.uniform(0.0, 1.0) < 0.5;
            }
        }

    Stag3 F = edge_layout ? make_e_field(g) : make_h_field(g);
    for (int c = 0; c < 3; ++c) {
        Arr3D& a = F[c];
        for (int i = 0; i < a.n[0]; ++i)
            for (int j = 0; j < a.n[1]; ++j)
                for (int k = 0; k < a.n[2]; ++k) {
                    const Vec3 x = edge_layout ? g.e_pos(c, i, j, k) : g.h_pos(c, i, j, k);
                    double val = 0.0;
                    for (const Mode& m : modes[c]) {
                        double term = m.amp;
                        for (int ax = 0; ax < 3; ++ax) {
                            const double ph = M_PI * m.k[ax] * x[ax] / g.extent[ax];
                            term *= m.use_sin[ax] ? std::sin(ph) : std::cos(ph);
                        }
                        val += term;
                    }
                    a.at(i, j, k) = val;
                }
    }
    return F;
}

}  // namespace absd
