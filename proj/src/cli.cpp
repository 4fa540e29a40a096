#include "absd/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "absd/analysis.hpp"
#include "absd/config.hpp"
#include "absd/snapshot.hpp"

namespace absd {
namespace {

using nlohmann::json;

struct CliContext {
    std::string config_path;
    std::string out_dir = ".";
    int threads = 0;
    std::string resume_path;
};

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("ABSD_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return 1;
}

std::filesystem::path out_file(const CliContext& ctx, const std::string& name) {
    std::filesystem::path p(name);
    if (p.is_absolute()) return p;
    return std::filesystem::path(ctx.out_dir) / p;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json estimate_json(const ConstantEstimate& e) {
    return {{"name", e.name}, {"value", e.value}, {"ensemble", e.ensemble},
            {"lo", e.lo},     {"hi", e.hi}};
}

json fit_json(const DecayFit& f) {
    return {{"amplitude", f.amplitude},
            {"rate", f.rate},
            {"r2", f.r2},
            {"t_start", f.t_start},
            {"t_end", f.t_end}};
}

json sample_json(const SeriesSample& s) {
    return {{"t", s.t},
            {"e0", s.e[0]},
            {"d0", s.d[0]},
            {"charge_e", s.charge_e},
            {"charge_h", s.charge_h},
            {"bc_dissipation", s.bc_dissipation},
            {"identity_residual", s.identity_residual}};
}

void write_summary(const CliContext& ctx, const ExperimentConfig& cfg, const json& body) {
    const auto path = out_file(ctx, cfg.summary_path);
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write summary file " + path.string());
    f << body.dump(2) << "\n";
    std::cout << body.dump(2) << "\n";
}

json base_summary(const char* command, const CliContext& ctx, const ExperimentConfig& cfg) {
    return {{"command", command},
            {"config_hash", hash_hex(config_hash(cfg))},
            {"threads", resolve_threads(ctx.threads)}};
}

FunctionalSeries load_series(const ExperimentConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(cfg.source + ": cannot open series file " + path);
    return read_series_csv(f);
}

// Shared by every command that integrates the configured experiment.
struct SimProducts {
    StaggeredGrid g;
    MaterialModel model;
    RunResult result;
    double wall_seconds = 0.0;
};

SimProducts run_configured(const ExperimentConfig& cfg, const CliContext& ctx,
                           double final_time_override = -1.0) {
    require_blocks(cfg, {"grid", "material", "initial", "stepping"});
    SimProducts out;
    out.g = config_grid(cfg);
    out.model = config_model(cfg, out.g);
    const ResolvedInitial spec = config_initial(cfg, out.g);
    RunOptions opts = config_run_options(cfg);
    if (final_time_override >= 0.0) opts.T = final_time_override;
    if (opts.snapshot_every > 0) {
        if (opts.snapshot_path.empty()) opts.snapshot_path = "state.snap";
        opts.snapshot_path = out_file(ctx, opts.snapshot_path).string();
    }

    const auto t0 = std::chrono::steady_clock::now();
    if (!ctx.resume_path.empty()) {
        if (!(opts.T > 0.0))
            throw ConfigError(cfg.source + ": resume needs a positive final_time");
        const double dt = run_step_size(out.g, out.model, opts);
        SimState st = load_snapshot(ctx.resume_path, out.g, dt);
        out.result = resume_simulation(out.g, out.model, std::move(st), opts);
    } else {
        const InitialData data = make_bump_data(out.g, out.model, spec.bump, spec.recipe);
        out.result = run_simulation(out.g, out.model, data, opts);
    }
    out.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0).count();
    return out;
}

int cmd_simulate(const ExperimentConfig& cfg, const CliContext& ctx) {
    SimProducts sim = run_configured(cfg, ctx);

    std::filesystem::create_directories(out_file(ctx, cfg.series_path).parent_path());
    {
        const auto path = out_file(ctx, cfg.series_path);
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write series file " + path.string());
        write_series_csv(f, sim.result.series);
    }

    json body = base_summary("simulate", ctx, cfg);
    body["wall_seconds"] = sim.wall_seconds;
    body["dt"] = sim.result.dt;
    body["steps"] = sim.result.steps;
    body["samples"] = sim.result.series.samples.size();
    body["nonfinite_abort"] = sim.result.nonfinite_abort;
    body["series"] = out_file(ctx, cfg.series_path).string();
    if (!sim.result.series.samples.empty())
        body["final"] = sample_json(sim.result.series.samples.back());
    write_summary(ctx, cfg, body);
    return sim.result.nonfinite_abort ? 3 : 0;
}

int cmd_check_material(const ExperimentConfig& cfg, const CliContext& ctx) {
    require_blocks(cfg, {"grid", "material"});
    const StaggeredGrid g = config_grid(cfg);
    const MaterialModel model = config_model(cfg, g);

    const PositivityReport pos = check_positivity(model, g);
    const NontrappingReport non = check_nontrapping(model, g);

    json checks = json::array();
    for (const auto& c : pos.checks)
        checks.push_back({{"family", c.family},
                          {"min_eig", c.min_eig},
                          {"threshold", c.threshold},
                          {"witness_x", vec_json(c.witness_x)},
                          {"witness_xi", vec_json(c.witness_xi)},
                          {"pass", c.pass}});

    json body = base_summary("check-material", ctx, cfg);
    body["kind"] = model.kind_name();
    body["positivity"] = {{"pass", pos.pass}, {"checks", checks}};
    body["nontrapping"] = {{"pass", non.pass},
                           {"eta_bar", non.eta_bar},
                           {"witness_x", vec_json(non.witness_x)},
                           {"family", non.family}};
    write_summary(ctx, cfg, body);
    return (pos.pass && non.pass) ? 0 : 4;
}

int cmd_fit_decay(const ExperimentConfig& cfg, const CliContext& ctx) {
    FunctionalSeries series;
    json body = base_summary("fit-decay", ctx, cfg);
    if (!cfg.series_in.empty()) {
        series = load_series(cfg, cfg.series_in);
        body["series_in"] = cfg.series_in;
    } else {
        SimProducts sim = run_configured(cfg, ctx);
        series = std::move(sim.result.series);
        body["wall_seconds"] = sim.wall_seconds;
    }

    const DecayFit fit = fit_decay(series, series_column(cfg.functional),
                                   cfg.transient_fraction);
    body["functional"] = cfg.functional;
    body["samples"] = series.samples.size();
    body["fit"] = fit_json(fit);
    write_summary(ctx, cfg, body);
    return 0;
}

int cmd_observability(const ExperimentConfig& cfg, const CliContext& ctx) {
    require_blocks(cfg, {"grid", "material"});
    const StaggeredGrid g = config_grid(cfg);
    const MaterialModel model = config_model(cfg, g);

    const double T = cfg.observe_T > 0.0 ? cfg.observe_T
                     : cfg.t_hat > 0.0   ? cfg.t_hat
                                         : default_window_estimate(g, model);
    const ConstantEstimate est =
        observability_ensemble(g, model, T, cfg.ensemble, cfg.analysis_seed,
                               config_run_options(cfg));

    json body = base_summary("observability", ctx, cfg);
    body["T"] = T;
    body["estimate"] = estimate_json(est);
    write_summary(ctx, cfg, body);
    return 0;
}

int cmd_trace(const ExperimentConfig& cfg, const CliContext& ctx) {
    require_blocks(cfg, {"grid", "material"});
    const StaggeredGrid g = config_grid(cfg);
    const MaterialModel model = config_model(cfg, g);
    const double window = cfg.t_hat > 0.0 ? cfg.t_hat : default_window_estimate(g, model);

    FunctionalSeries series;
    json body = base_summary("trace", ctx, cfg);
    if (!cfg.series_in.empty()) {
        series = load_series(cfg, cfg.series_in);
        body["series_in"] = cfg.series_in;
    } else {
        double maxm = 0.0;
        for (double m : cfg.window_multiples) maxm = std::max(maxm, m);
        SimProducts sim = run_configured(cfg, ctx, window * maxm);
        series = std::move(sim.result.series);
        body["wall_seconds"] = sim.wall_seconds;
    }

    const std::vector<double> ratios =
        trace_ratio_sweep(series, window, cfg.window_multiples);
    body["window"] = window;
    body["multiples"] = cfg.window_multiples;
    body["ratios"] = ratios;
    if (ratios.size() >= 3) {
        double lo = ratios[ratios.size() - 3], hi = lo;
        for (std::size_t i = ratios.size() - 3; i < ratios.size(); ++i) {
            lo = std::min(lo, ratios[i]);
            hi = std::max(hi, ratios[i]);
        }
        body["tail_spread"] = lo > 0.0 ? hi / lo : 0.0;
    }
    write_summary(ctx, cfg, body);
    return 0;
}

int cmd_divcurl(const ExperimentConfig& cfg, const CliContext& ctx) {
    require_blocks(cfg, {"grid", "material"});
    const StaggeredGrid g = config_grid(cfg);
    const MaterialModel model = config_model(cfg, g);

    const ConstantEstimate vol = divcurl_ratio(g, model, cfg.ensemble, cfg.analysis_seed);
    const ConstantEstimate surf = surface_curl_ensemble(g, cfg.ensemble, cfg.analysis_seed);

    json body = base_summary("divcurl", ctx, cfg);
    body["divcurl"] = estimate_json(vol);
    body["surface_curl"] = estimate_json(surf);
    write_summary(ctx, cfg, body);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"quasilinear Maxwell impedance-wall experiment runner", "absd"};
    app.require_subcommand(1);

    CliContext ctx;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", ctx.config_path, "experiment config file")->required();
        sub->add_option("--out", ctx.out_dir, "output directory (default .)");
        sub->add_option("--threads", ctx.threads,
                        "worker threads; env ABSD_THREADS when absent");
    };

    CLI::App* sim = app.add_subcommand("simulate", "integrate the configured experiment");
    add_common(sim);
    sim->add_option("--resume", ctx.resume_path, "snapshot file to resume from");
    CLI::App* chk = app.add_subcommand("check-material",
                                       "positivity and non-trapping report");
    add_common(chk);
    CLI::App* fit = app.add_subcommand("fit-decay", "exponential decay fit of a functional");
    add_common(fit);
    CLI::App* obs = app.add_subcommand("observability", "boundary observability ensemble");
    add_common(obs);
    CLI::App* trc = app.add_subcommand("trace", "normal/tangential trace ratio sweep");
    add_common(trc);
    CLI::App* dvc = app.add_subcommand("divcurl", "div-curl and surface-curl estimates");
    add_common(dvc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        std::filesystem::create_directories(ctx.out_dir);
        const ExperimentConfig cfg = parse_config_file(ctx.config_path);
        if (sim->parsed()) return cmd_simulate(cfg, ctx);
        if (chk->parsed()) return cmd_check_material(cfg, ctx);
        if (fit->parsed()) return cmd_fit_decay(cfg, ctx);
        if (obs->parsed()) return cmd_observability(cfg, ctx);
        if (trc->parsed()) return cmd_trace(cfg, ctx);
        if (dvc->parsed()) return cmd_divcurl(cfg, ctx);
        std::cerr << "absd: no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "absd: " << e.what() << "\n";
        return 2;
    } catch (const SnapshotError& e) {
        std::cerr << "absd: " << e.what() << "\n";
        return 2;
    } catch (const NonConvergence& e) {
        std::cerr << "absd: solver did not converge: " << e.what() << " at t=" << e.t
                  << " near (" << e.x.x << ", " << e.x.y << ", " << e.x.z << ")\n";
        return 3;
    } catch (const DegenerateSeries& e) {
        std::cerr << "absd: degenerate series: " << e.what() << "\n";
        return 5;
    } catch (const ZeroDissipation& e) {
        std::cerr << "absd: " << e.what() << "\n";
        return 5;
    } catch (const ZeroDenominator& e) {
        std::cerr << "absd: " << e.what() << "\n";
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "absd: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "absd: error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace absd
