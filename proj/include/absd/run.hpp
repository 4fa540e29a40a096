#pragma once

#include <cstdint>
#include <string>

#include "absd/functionals.hpp"
#include "absd/grid.hpp"
#include "absd/initdata.hpp"
#include "absd/materials.hpp"
#include "absd/stepper.hpp"

namespace absd {

struct RunOptions {
    double T = 1.0;           // final time
    int kmax = 1;             // highest functional order sampled (0..3)
    int stride = 1;           // sample every stride-th completed level
    double cfl_safety = 0.5;  // fraction of the stable step
    double dt_override = 0.0; // fixed step when positive (still rounded to hit T)
    BcSpec bc = all_walls(WallBc::Impedance);
    StepParams params;
    int snapshot_every = 0;      // steps between snapshots, 0 disables
    std::string snapshot_path;   // target file when snapshots are enabled
    bool progress = false;       // coarse progress lines on stderr
};

struct RunResult {
    FunctionalSeries series;
    SimState state;
    double dt = 0.0;
    std::uint64_t steps = 0;
    bool nonfinite_abort = false;  // fields left the finite range; series is
                                   // truncated at the last good sample
};

// The step size a run will use: the CFL bound scaled by `cfl_safety` (or the
// override), shortened so an integer number of steps lands exactly on T.
double run_step_size(const StaggeredGrid& g, const MaterialModel& model,
                     const RunOptions& opts);

// Drive a freshly initialized state from the given initial fields to time T,
// sampling the functional series and accumulating the energy identity
// residual along the way.  The first time derivative of E for the half-step
// offset of H is derived from the initial fields.
RunResult run_simulation(const StaggeredGrid& g, const MaterialModel& model,
                         const InitialData& init, const RunOptions& opts);

// Continue a state restored from a snapshot to time T under the same
// options that produced it; the trajectory is bitwise the one an unbroken
// run would have taken.  The series restarts at the resume point.
RunResult resume_simulation(const StaggeredGrid& g, const MaterialModel& model,
                            SimState state, const RunOptions& opts);

}  // namespace absd
