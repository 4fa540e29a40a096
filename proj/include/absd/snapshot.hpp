#pragma once

#include <stdexcept>
#include <string>

#include "absd/grid.hpp"
#include "absd/stepper.hpp"

namespace absd {

struct SnapshotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary state file (little-endian): magic "ABSD", format version, grid
// dimensions and extent, dt, time, step index, solver counters, the four
// staggered field arrays, the retained ring levels, and a trailing CRC32.
// The ring is included so a resumed run reproduces the original bit for bit.
void save_snapshot(const std::string& path, const StaggeredGrid& g, const SimState& s,
                   double dt);

// Throws SnapshotError on IO failure, corruption, or mismatch against the
// grid / dt the configuration produces.
SimState load_snapshot(const std::string& path, const StaggeredGrid& g, double expected_dt);

}  // namespace absd
