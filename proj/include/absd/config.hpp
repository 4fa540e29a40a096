#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "absd/initdata.hpp"
#include "absd/materials.hpp"
#include "absd/run.hpp"

namespace absd {

// Parse or semantic failure; the message is "<file>:<line>: <reason>" when a
// source line is attributable.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat block/key=value experiment description.  Parsing fills defaults and
// records which blocks appeared so commands can demand the ones they need.
struct ExperimentConfig {
    std::string source = "<config>";
    std::set<std::string> blocks;

    // [grid]
    std::array<double, 3> extent{1.0, 1.0, 1.0};
    std::array<int, 3> cells{32, 32, 32};
    Vec3 x0{0.0, 0.0, 0.0};
    bool x0_set = false;

    // [material]  (profile centers are stamped with the grid x0 at build time)
    MaterialModel material;

    // [initial]  (geometry left unset is drawn from the seed)
    InitialRecipe recipe = InitialRecipe::CurlBump;
    double amplitude = 1.0;
    std::uint64_t seed = 1;
    Vec3 init_center{0.0, 0.0, 0.0};
    bool center_set = false;
    double init_radius = 0.0;
    bool radius_set = false;
    Vec3 init_polarization{0.0, 0.0, 1.0};
    bool polarization_set = false;

    // [stepping]
    double final_time = 1.0;
    double cfl_safety = 0.5;
    double dt = 0.0;  // fixed step override when positive
    StepParams params;
    int sample_stride = 1;
    int kmax = 1;
    WallBc wall = WallBc::Impedance;

    // [output]
    std::string series_path = "series.csv";
    std::string summary_path = "summary.json";
    std::string snapshot_path;
    int snapshot_every = 0;

    // [analysis]
    double transient_fraction = 0.2;
    int ensemble = 8;
    std::uint64_t analysis_seed = 1;
    double t_hat = 0.0;     // window estimate override, 0 = derive from model
    std::vector<double> window_multiples{1.0, 2.0, 4.0, 8.0};
    std::string functional = "e0";
    std::string series_in;  // analyze this CSV instead of running
    double observe_T = 0.0; // observability horizon override
};

ExperimentConfig parse_config(std::istream& is, const std::string& source);
ExperimentConfig parse_config_file(const std::string& path);

// Throws ConfigError naming the first absent block.
void require_blocks(const ExperimentConfig& cfg, const std::vector<std::string>& needed);

StaggeredGrid config_grid(const ExperimentConfig& cfg);
MaterialModel config_model(const ExperimentConfig& cfg, const StaggeredGrid& g);

// Initial bump with any unset geometry drawn from the seed: the support ball
// stays two cells clear of every wall and the polarization is a unit vector.
struct ResolvedInitial {
    InitialRecipe recipe = InitialRecipe::CurlBump;
    BumpParams bump;
};
ResolvedInitial config_initial(const ExperimentConfig& cfg, const StaggeredGrid& g);

RunOptions config_run_options(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization of the fully resolved experiment
// (grid, stamped material, drawn initial geometry, stepping, sampling), so
// spelling differences and consumed seeds do not perturb it.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace absd
