#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "absd/analysis.hpp"
#include "absd/initdata.hpp"
#include "absd/materials.hpp"
#include "absd/run.hpp"
#include "absd/stepper.hpp"

using namespace absd;

namespace {

MaterialModel unit_model() {
    MaterialModel m;
    m.eps.kind = CoefLaw::Linear;
    m.mu.kind = CoefLaw::Linear;
    m.lambda.kind = CoefLaw::Linear;
    return m;
}

FunctionalSeries synthetic_series(int count, double t_end,
                                  const std::function<void(double, SeriesSample&)>& fill) {
    FunctionalSeries s;
    for (int i = 0; i < count; ++i) {
        SeriesSample r{};
        r.t = t_end * i / (count - 1);
        fill(r.t, r);
        s.samples.push_back(r);
    }
    return s;
}

}  // namespace

TEST_CASE("decay fit recovers closed-form rates") {
    const auto exp_series = synthetic_series(101, 5.0, [](double t, SeriesSample& r) {
        r.e[0] = 3.0 * std::exp(-2.0 * t);
    });
    const DecayFit fit = fit_decay(exp_series, series_column("e0"), 0.2);
    CHECK(fit.rate == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit.amplitude == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.t_start == doctest::Approx(1.0));
    CHECK(fit.t_end == doctest::Approx(5.0));

    const auto flat = synthetic_series(50, 4.0, [](double, SeriesSample& r) { r.e[0] = 7.0; });
    const DecayFit flat_fit = fit_decay(flat, series_column("e0"), 0.2);
    CHECK(std::abs(flat_fit.rate) < 1e-12);
    CHECK(flat_fit.r2 == 1.0);

    Rng rng(42);
    const auto noisy = synthetic_series(200, 6.0, [&](double t, SeriesSample& r) {
        r.e[0] = 5.0 * std::exp(-1.5 * t) * (1.0 + 1e-3 * rng.uniform(-1.0, 1.0));
    });
    const DecayFit noisy_fit = fit_decay(noisy, series_column("e0"), 0.2);
    CHECK(std::abs(noisy_fit.rate - 1.5) <= 1e-2 * 1.5);

    const auto dead = synthetic_series(40, 1.0, [](double, SeriesSample&) {});
    CHECK_THROWS_AS(fit_decay(dead, series_column("e0"), 0.2), DegenerateSeries);

    const auto tiny = synthetic_series(11, 1.0, [](double t, SeriesSample& r) {
        r.e[0] = std::exp(-t);
    });
    CHECK_THROWS_AS(fit_decay(tiny, series_column("e0"), 0.2), std::invalid_argument);

    CHECK_THROWS_AS(series_column("q7"), std::invalid_argument);
    CHECK_THROWS_AS(series_column("e4"), std::invalid_argument);
    const auto z3 = series_column("z3");
    SeriesSample probe{};
    probe.z[3] = 11.0;
    CHECK(z3(probe) == 11.0);
}

TEST_CASE("simulated linear decay fits cleanly") {
    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});
    const MaterialModel model = unit_model();
    BumpParams bp;
    bp.center = {0.5, 0.5, 0.5};
    bp.radius = 0.3;
    bp.amplitude = 1.0;
    const InitialData data = make_bump_data(g, model, bp, InitialRecipe::CurlBump);

    RunOptions opts;
    opts.T = 8.0;
    opts.kmax = 0;
    opts.stride = 4;
    const RunResult rr = run_simulation(g, model, data, opts);
    const DecayFit fit = fit_decay(rr.series, series_column("e0"), 0.2);
    CHECK(fit.rate > 0.0);
    CHECK(fit.r2 >= 0.9);
}

TEST_CASE("observability ratio on synthetic and simulated series") {
    const auto flat = synthetic_series(9, 4.0, [](double, SeriesSample& r) {
        r.e[0] = 10.0;
        r.d[0] = 2.0;
    });
    CHECK(observability_ratio(flat, 3.0) == doctest::Approx(10.0 / 6.0).epsilon(1e-14));
    CHECK(observability_ratio(flat, 2.75) == doctest::Approx(10.0 / 5.5).epsilon(1e-14));
    CHECK_THROWS_AS(observability_ratio(flat, 4.5), std::invalid_argument);
    CHECK_THROWS_AS(observability_ratio(flat, 0.0), std::invalid_argument);

    const auto silent = synthetic_series(9, 4.0, [](double, SeriesSample& r) { r.e[0] = 1.0; });
    CHECK_THROWS_AS(observability_ratio(silent, 3.0), ZeroDissipation);

    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {16, 16, 16});
    const MaterialModel model = unit_model();
    BumpParams bp;
    bp.center = {0.5, 0.5, 0.5};
    bp.radius = 0.2;
    bp.amplitude = 1.0;
    const InitialData data = make_bump_data(g, model, bp, InitialRecipe::CurlBump);

    RunOptions quick;
    quick.T = 0.01;
    quick.dt_override = 0.01;
    quick.kmax = 0;
    const RunResult rq = run_simulation(g, model, data, quick);
    CHECK_THROWS_AS(observability_ratio(rq.series, 0.01), ZeroDissipation);

    const StaggeredGrid g12 = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});
    BumpParams b2 = bp;
    b2.radius = 0.22;
    RunOptions opts;
    opts.T = 1.0;
    opts.kmax = 0;
    const InitialData d1 = make_bump_data(g12, model, b2, InitialRecipe::CurlBump);
    b2.amplitude = 2.0;
    const InitialData d2 = make_bump_data(g12, model, b2, InitialRecipe::CurlBump);
    const double r1 = observability_ratio(run_simulation(g12, model, d1, opts).series, 1.0);
    const double r2 = observability_ratio(run_simulation(g12, model, d2, opts).series, 1.0);
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-10));
}

TEST_CASE("observability ensemble reports a stable spread") {
    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {8, 8, 8});
    const MaterialModel model = unit_model();
    RunOptions base;
    base.stride = 2;

    const double T = 4.0 * g.diameter();
    const ConstantEstimate est = observability_ensemble(g, model, T, 3, 17, base);
    CHECK(est.ensemble == 3);
    CHECK(std::isfinite(est.value));
    CHECK(est.value > 0.0);
    CHECK(est.lo > 0.0);
    CHECK(est.lo <= est.hi);
    CHECK(est.value == est.hi);

    const ConstantEstimate again = observability_ensemble(g, model, T, 3, 17, base);
    CHECK(again.value == est.value);
    CHECK(again.lo == est.lo);
}

TEST_CASE("trace ratio measures windowed boundary quotients") {
    const auto flat = synthetic_series(17, 8.0, [](double, SeriesSample& r) {
        r.trace_normal_d = 4.0;
        r.trace_normal_b = 5.0;
        r.trace_tangential_e = 3.0;
    });
    CHECK(trace_ratio(flat, 0.0, 8.0) == doctest::Approx(3.0).epsilon(1e-14));
    const std::vector<double> sweep = trace_ratio_sweep(flat, 1.0);
    REQUIRE(sweep.size() == 4);
    for (double r : sweep) CHECK(r == doctest::Approx(3.0).epsilon(1e-14));

    const auto mute = synthetic_series(17, 8.0, [](double, SeriesSample& r) {
        r.trace_normal_d = 1.0;
    });
    CHECK_THROWS_AS(trace_ratio(mute, 0.0, 8.0), ZeroDenominator);
    CHECK_THROWS_AS(trace_ratio(flat, 3.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(trace_ratio(flat, 0.0, 9.5), std::invalid_argument);

    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {8, 8, 8});
    MaterialModel model = unit_model();
    CHECK(default_window_estimate(g, model) ==
          doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    model.eps.M = Mat3::scale(4.0);
    CHECK(default_window_estimate(g, model) ==
          doctest::Approx(4.0 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("trace ratio sweep on a simulated run stays bounded") {
    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});
    const MaterialModel model = unit_model();
    BumpParams bp;
    bp.center = {0.5, 0.5, 0.5};
    bp.radius = 0.28;
    bp.amplitude = 1.0;
    const InitialData data = make_bump_data(g, model, bp, InitialRecipe::CurlBump);

    const double window = default_window_estimate(g, model);
    RunOptions opts;
    opts.T = 8.0 * window;
    opts.kmax = 0;
    opts.stride = 4;
    const RunResult rr = run_simulation(g, model, data, opts);
    const std::vector<double> sweep = trace_ratio_sweep(rr.series, window);
    REQUIRE(sweep.size() == 4);
    double lo = sweep[1], hi = sweep[1];
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        CHECK(std::isfinite(sweep[i]));
        CHECK(sweep[i] > 0.0);
        lo = std::min(lo, sweep[i]);
        hi = std::max(hi, sweep[i]);
    }
    CHECK(hi / lo <= 3.0);
}

TEST_CASE("divcurl estimate hits closed forms") {
    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {10, 10, 10});
    const MaterialModel model = unit_model();

    Stag3 u = make_e_field(g);
    const Vec3 c{0.3, -1.1, 0.7};
    for (int comp = 0; comp < 3; ++comp)
        for (double& val : u[comp].v) val = c[comp];
    const Stag3 v = make_h_field(g);
    CHECK(divcurl_pair_ratio(g, model, u, v) == doctest::Approx(0.5).epsilon(1e-10));

    auto gradient_pair_ratio = [&](const StaggeredGrid& gr) {
        Stag3 gu = make_e_field(gr);
        for (int comp = 0; comp < 3; ++comp) {
            Arr3D& a = gu[comp];
            for (int i = 0; i < a.n[0]; ++i)
                for (int j = 0; j < a.n[1]; ++j)
                    for (int k = 0; k < a.n[2]; ++k) {
                        const Vec3 x = gr.e_pos(comp, i, j, k);
                        const Vec3 grad{x[1] + x[2], x[0] + x[2], x[0] + x[1]};
                        a.at(i, j, k) = grad[comp];
                    }
        }
        return divcurl_pair_ratio(gr, model, gu, make_h_field(gr));
    };
    const double r10 = gradient_pair_ratio(g);
    const double r20 = gradient_pair_ratio(build_grid({1.0, 1.0, 1.0}, {20, 20, 20}));
    CHECK(std::isfinite(r10));
    CHECK(r10 > 0.0);
    CHECK(r10 == doctest::Approx(r20).epsilon(0.05));

    CHECK_THROWS_AS(divcurl_pair_ratio(g, model, make_e_field(g), make_h_field(g)),
                    ZeroDenominator);

    const ConstantEstimate est = divcurl_ratio(g, model, 6, 7);
    CHECK(est.ensemble == 6);
    CHECK(std::isfinite(est.value));
    CHECK(est.lo > 0.0);
    CHECK(est.lo <= est.hi);
    const ConstantEstimate rerun = divcurl_ratio(g, model, 6, 7);
    CHECK(rerun.value == est.value);

    const ConstantEstimate c12 = divcurl_ratio(build_grid({1.0, 1.0, 1.0}, {12, 12, 12}),
                                               model, 5, 11);
    const ConstantEstimate c24 = divcurl_ratio(build_grid({1.0, 1.0, 1.0}, {24, 24, 24}),
                                               model, 5, 11);
    CHECK(std::abs(c24.value - c12.value) <= 0.25 * c12.value);
}

TEST_CASE("surface curl bound behaves on the closed families") {
    const StaggeredGrid g = build_grid({1.0, 1.0, 1.0}, {12, 12, 12});

    Arr3D psi;
    psi.resize({g.cells[0] + 1, g.cells[1] + 1, g.cells[2] + 1});
    for (int i = 0; i <= g.cells[0]; ++i)
        for (int j = 0; j <= g.cells[1]; ++j)
            for (int k = 0; k <= g.cells[2]; ++k) {
                const Vec3 x = g.node_pos(i, j, k);
                psi.at(i, j, k) = x[0] * x[1] + x[1] * x[2] + std::sin(M_PI * x[0]) * x[2];
            }
    Stag3 grad = make_e_field(g);
    for (int comp = 0; comp < 3; ++comp) {
        Arr3D& a = grad[comp];
        for (int i = 0; i < a.n[0]; ++i)
            for (int j = 0; j < a.n[1]; ++j)
                for (int k = 0; k < a.n[2]; ++k) {
                    std::array<int, 3> I{i, j, k};
                    std::array<int, 3> J = I;
                    ++J[comp];
                    a.at(i, j, k) =
                        (psi.at(J[0], J[1], J[2]) - psi.at(I[0], I[1], I[2])) / g.h[comp];
                }
    }
    CHECK(surface_curl_ratio(g, grad) < 1e-12);

    const MaterialModel model = unit_model();
    BumpParams bp;
    bp.center = {0.5, 0.5, 0.5};
    bp.radius = 0.2;
    bp.amplitude = 1.0;
    const InitialData data = make_bump_data(g, model, bp, InitialRecipe::CurlBump);
    CHECK_THROWS_AS(surface_curl_ratio(g, data.E), ZeroDenominator);

    Rng rng(5);
    const Stag3 f = random_trig_field(g, true, rng);
    Stag3 f3 = f;
    for (int comp = 0; comp < 3; ++comp)
        for (double& val : f3[comp].v) val *= 3.0;
    const double base = surface_curl_ratio(g, f);
    CHECK(surface_curl_ratio(g, f3) == doctest::Approx(base).epsilon(1e-12));

    const ConstantEstimate est = surface_curl_ensemble(g, 5, 9);
    CHECK(est.ensemble == 5);
    CHECK(std::isfinite(est.value));
    CHECK(est.lo > 0.0);
    CHECK(est.lo <= est.hi);
    const ConstantEstimate rerun = surface_curl_ensemble(g, 5, 9);
    CHECK(rerun.value == est.value);
}
