#include "absd/run.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "absd/fields.hpp"
#include "absd/snapshot.hpp"

namespace absd {

namespace {

RunResult drive(const StaggeredGrid& g, const MaterialModel& model, SimState state,
                double dt, const RunOptions& opts) {
    RunResult res;
    res.dt = dt;
    StepParams p = opts.params;
    p.dt = dt;
    const auto total = static_cast<std::uint64_t>(std::llround(opts.T / dt));
    const int stride = std::max(1, opts.stride);

    double diss_integral = 0.0;
    double e0_first = 0.0, prev_t = 0.0, prev_d = 0.0;
    bool have_first = false;
    auto take_sample = [&]() {
        SeriesSample s = sample_functionals(g, model, state.ring, opts.kmax);
        s.bc_dissipation = wall_dissipation(g, model, opts.bc, state.ring.back().E);
        if (!have_first) {
            have_first = true;
            e0_first = s.e[0];
        } else {
            diss_integral += 0.5 * (prev_d + s.bc_dissipation) * (s.t - prev_t);
        }
        prev_t = s.t;
        prev_d = s.bc_dissipation;
        s.identity_residual = std::abs(s.e[0] + diss_integral - e0_first);
        res.series.samples.push_back(s);
    };

    const std::uint64_t report = std::max<std::uint64_t>(1, total / 10);
    while (state.step < total) {
        const std::uint64_t n = state.step;  // level completed by this step
        step(state, g, model, opts.bc, p);
        if (!all_finite(state.E) || !all_finite(state.H)) {
            res.nonfinite_abort = true;
            break;
        }
        if (n % static_cast<std::uint64_t>(stride) == 0) take_sample();
        if (opts.snapshot_every > 0 &&
            state.step % static_cast<std::uint64_t>(opts.snapshot_every) == 0)
            save_snapshot(opts.snapshot_path, g, state, dt);
        if (opts.progress && (n % report == 0 || state.step == total))
            std::cerr << "step " << state.step << "/" << total << "  t=" << state.t
                      << '\n';
    }
    if (!res.nonfinite_abort) {
        push_terminal_sample(state, g, model, p);
        take_sample();
    }
    res.steps = state.step;
    res.state = std::move(state);
    return res;
}

}  // namespace

double run_step_size(const StaggeredGrid& g, const MaterialModel& model,
                     const RunOptions& opts) {
    const double base =
        opts.dt_override > 0.0 ? opts.dt_override : cfl_dt(g, model, opts.cfl_safety);
    if (!(base > 0.0) || !(opts.T > 0.0))
        throw std::invalid_argument("run needs a positive step bound and final time");
    const double steps = std::max(1.0, std::ceil(opts.T / base - 1e-12));
    return opts.T / steps;
}

RunResult run_simulation(const StaggeredGrid& g, const MaterialModel& model,
                         const InitialData& init, const RunOptions& opts) {
    if (opts.T <= 0.0) {
        // Degenerate request: report the exact initial sample without stepping.
        SimState state;
        state.t = 0.0;
        state.step = 0;
        state.E = init.E;
        state.D = init.D;
        state.H = init.H;
        state.B = init.B;
        RingEntry ent;
        ent.t = 0.0;
        ent.E = init.E;
        ent.Hbar = init.H;
        state.ring.push_back(std::move(ent));
        RunResult res;
        res.dt = 0.0;
        res.steps = 0;
        SeriesSample s = sample_functionals(g, model, state.ring, opts.kmax);
        s.bc_dissipation = wall_dissipation(g, model, opts.bc, state.ring.back().E);
        s.identity_residual = 0.0;
        res.series.samples.push_back(s);
        res.state = std::move(state);
        return res;
    }
    const double dt = run_step_size(g, model, opts);
    StepParams p = opts.params;
    p.dt = dt;
    const InitialJet jet = initial_time_derivatives(g, model, init.E, init.H);
    SimState state;
    init_state(state, g, model, init.E, init.H, init.D, init.B, jet.E1, p);
    return drive(g, model, std::move(state), dt, opts);
}

RunResult resume_simulation(const StaggeredGrid& g, const MaterialModel& model,
                            SimState state, const RunOptions& opts) {
    const double dt = run_step_size(g, model, opts);
    return drive(g, model, std::move(state), dt, opts);
}

}  // namespace absd
