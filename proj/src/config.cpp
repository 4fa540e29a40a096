#include "absd/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "absd/analysis.hpp"

namespace absd {
namespace {

[[noreturn]] void fail(const std::string& src, int line, const std::string& msg) {
    throw ConfigError(src + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<double> split_doubles(const std::string& src, int line, const std::string& key,
                                  const std::string& value) {
    std::istringstream iss(value);
    std::vector<double> out;
    std::string tok;
    while (iss >> tok) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            fail(src, line, "key '" + key + "': '" + tok + "' is not a number");
        }
    }
    if (out.empty()) fail(src, line, "key '" + key + "': no numeric values");
    return out;
}

double parse_double(const std::string& src, int line, const std::string& key,
                    const std::string& value) {
    const auto v = split_doubles(src, line, key, value);
    if (v.size() != 1) fail(src, line, "key '" + key + "': expected one number");
    return v[0];
}

long parse_long(const std::string& src, int line, const std::string& key,
                const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(src, line, "key '" + key + "': '" + value + "' is not an integer");
    }
}

std::uint64_t parse_u64(const std::string& src, int line, const std::string& key,
                        const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(src, line, "key '" + key + "': '" + value + "' is not an unsigned integer");
    }
}

Vec3 parse_vec3(const std::string& src, int line, const std::string& key,
                const std::string& value) {
    const auto v = split_doubles(src, line, key, value);
    if (v.size() != 3) fail(src, line, "key '" + key + "': expected three numbers");
    return {v[0], v[1], v[2]};
}

Mat3 parse_matrix(const std::string& src, int line, const std::string& key,
                  const std::string& value) {
    const auto v = split_doubles(src, line, key, value);
    if (v.size() == 1) return Mat3::scale(v[0]);
    if (v.size() == 3) return Mat3::diag(v[0], v[1], v[2]);
    if (v.size() == 9) {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = v[static_cast<std::size_t>(3 * i + j)];
        return m;
    }
    fail(src, line, "key '" + key + "': expected 1, 3, or 9 numbers");
}

SpatialProfile::Shape parse_shape(const std::string& src, int line, const std::string& key,
                                  const std::string& value) {
    if (value == "constant") return SpatialProfile::Constant;
    if (value == "radial_quadratic") return SpatialProfile::RadialQuadratic;
    if (value == "radial_inverse_quadratic") return SpatialProfile::RadialInverseQuadratic;
    fail(src, line, "key '" + key + "': unknown profile '" + value +
                        "' (constant, radial_quadratic, radial_inverse_quadratic)");
}

const std::set<std::string>& block_names() {
    static const std::set<std::string> names{"grid",     "material", "initial",
                                             "stepping", "output",   "analysis"};
    return names;
}

struct KeyRecord {
    int line = 0;
};

// Keys seen in the material block per coefficient family, for the
// kind-applicability check once the whole block is known.
using FamilySeen = std::map<std::string, KeyRecord>;

void check_family_keys(const std::string& src, const std::string& family, const CoefLaw& law,
                       const FamilySeen& seen) {
    std::set<std::string> allowed{"kind"};
    switch (law.kind) {
        case CoefLaw::Linear:
            allowed.insert({"matrix", "profile"});
            break;
        case CoefLaw::Kerr:
            allowed.insert({"lin", "nl", "lin_profile", "nl_profile"});
            break;
        case CoefLaw::Poly2:
            allowed.insert({"matrix", "profile", "c1", "c2"});
            break;
    }
    for (const auto& [sub, rec] : seen) {
        if (!allowed.count(sub)) {
            const char* kind = law.kind == CoefLaw::Linear  ? "linear"
                               : law.kind == CoefLaw::Kerr  ? "kerr"
                                                            : "poly2";
            fail(src, rec.line,
                 "key '" + family + "_" + sub + "' does not apply to kind '" + kind + "'");
        }
    }
}

void set_material_key(ExperimentConfig& cfg, const std::string& src, int line,
                      const std::string& key, const std::string& value,
                      std::array<FamilySeen, 3>& seen) {
    if (key == "eta") {
        cfg.material.eta = parse_double(src, line, key, value);
        if (!(cfg.material.eta > 0.0)) fail(src, line, "eta must be positive");
        return;
    }
    if (key == "delta0") {
        cfg.material.delta0 = parse_double(src, line, key, value);
        if (!(cfg.material.delta0 > 0.0)) fail(src, line, "delta0 must be positive");
        return;
    }
    CoefLaw* law = nullptr;
    std::string sub;
    int fam = -1;
    const std::pair<const char*, int> prefixes[] = {{"eps_", 0}, {"mu_", 1}, {"lambda_", 2}};
    for (const auto& [prefix, index] : prefixes) {
        const std::string p(prefix);
        if (key.size() > p.size() && key.compare(0, p.size(), p) == 0) {
            fam = index;
            sub = key.substr(p.size());
            break;
        }
    }
    if (fam == 0) law = &cfg.material.eps;
    if (fam == 1) law = &cfg.material.mu;
    if (fam == 2) law = &cfg.material.lambda;
    if (!law) fail(src, line, "unknown key '" + key + "' in [material]");
    seen[static_cast<std::size_t>(fam)][sub] = {line};

    if (sub == "kind") {
        if (value == "linear")
            law->kind = CoefLaw::Linear;
        else if (value == "kerr")
            law->kind = CoefLaw::Kerr;
        else if (value == "poly2")
            law->kind = CoefLaw::Poly2;
        else
            fail(src, line, "key '" + key + "': unknown kind '" + value +
                                "' (linear, kerr, poly2)");
    } else if (sub == "matrix") {
        law->M = parse_matrix(src, line, key, value);
    } else if (sub == "profile") {
        law->profile.shape = parse_shape(src, line, key, value);
    } else if (sub == "lin") {
        law->lin = parse_double(src, line, key, value);
    } else if (sub == "nl") {
        law->nl = parse_double(src, line, key, value);
    } else if (sub == "lin_profile") {
        law->lin_profile.shape = parse_shape(src, line, key, value);
    } else if (sub == "nl_profile") {
        law->nl_profile.shape = parse_shape(src, line, key, value);
    } else if (sub == "c1") {
        law->c1 = parse_double(src, line, key, value);
    } else if (sub == "c2") {
        law->c2 = parse_double(src, line, key, value);
    } else {
        fail(src, line, "unknown key '" + key + "' in [material]");
    }
}

void set_grid_key(ExperimentConfig& cfg, const std::string& src, int line,
                  const std::string& key, const std::string& value) {
    if (key == "extent") {
        const auto v = split_doubles(src, line, key, value);
        if (v.size() == 1)
            cfg.extent = {v[0], v[0], v[0]};
        else if (v.size() == 3)
            cfg.extent = {v[0], v[1], v[2]};
        else
            fail(src, line, "key 'extent': expected 1 or 3 numbers");
        for (double e : cfg.extent)
            if (!(e > 0.0)) fail(src, line, "extent must be positive");
    } else if (key == "cells") {
        const auto v = split_doubles(src, line, key, value);
        auto to_cells = [&](double d) {
            const long n = std::lround(d);
            if (static_cast<double>(n) != d || n < 2)
                fail(src, line, "cells must be integers of at least 2");
            return static_cast<int>(n);
        };
        if (v.size() == 1)
            cfg.cells = {to_cells(v[0]), to_cells(v[0]), to_cells(v[0])};
        else if (v.size() == 3)
            cfg.cells = {to_cells(v[0]), to_cells(v[1]), to_cells(v[2])};
        else
            fail(src, line, "key 'cells': expected 1 or 3 numbers");
    } else if (key == "x0") {
        cfg.x0 = parse_vec3(src, line, key, value);
        cfg.x0_set = true;
    } else {
        fail(src, line, "unknown key '" + key + "' in [grid]");
    }
}

void set_initial_key(ExperimentConfig& cfg, const std::string& src, int line,
                     const std::string& key, const std::string& value) {
    if (key == "recipe") {
        if (value == "bump")
            cfg.recipe = InitialRecipe::Bump;
        else if (value == "curl_bump")
            cfg.recipe = InitialRecipe::CurlBump;
        else
            fail(src, line, "key 'recipe': unknown recipe '" + value + "' (bump, curl_bump)");
    } else if (key == "amplitude") {
        cfg.amplitude = parse_double(src, line, key, value);
        if (cfg.amplitude < 0.0) fail(src, line, "amplitude must be nonnegative");
    } else if (key == "seed") {
        cfg.seed = parse_u64(src, line, key, value);
    } else if (key == "center") {
        cfg.init_center = parse_vec3(src, line, key, value);
        cfg.center_set = true;
    } else if (key == "radius") {
        cfg.init_radius = parse_double(src, line, key, value);
        if (!(cfg.init_radius > 0.0)) fail(src, line, "radius must be positive");
        cfg.radius_set = true;
    } else if (key == "polarization") {
        cfg.init_polarization = parse_vec3(src, line, key, value);
        if (!(norm(cfg.init_polarization) > 0.0))
            fail(src, line, "polarization must be nonzero");
        cfg.polarization_set = true;
    } else {
        fail(src, line, "unknown key '" + key + "' in [initial]");
    }
}

void set_stepping_key(ExperimentConfig& cfg, const std::string& src, int line,
                      const std::string& key, const std::string& value) {
    if (key == "final_time") {
        cfg.final_time = parse_double(src, line, key, value);
        if (cfg.final_time < 0.0) fail(src, line, "final_time must be nonnegative");
    } else if (key == "cfl_safety") {
        cfg.cfl_safety = parse_double(src, line, key, value);
        if (!(cfg.cfl_safety > 0.0) || cfg.cfl_safety > 1.0)
            fail(src, line, "cfl_safety must lie in (0, 1]");
    } else if (key == "dt") {
        cfg.dt = parse_double(src, line, key, value);
        if (cfg.dt < 0.0) fail(src, line, "dt must be nonnegative");
    } else if (key == "newton_tol") {
        cfg.params.newton_tol = parse_double(src, line, key, value);
        if (!(cfg.params.newton_tol > 0.0)) fail(src, line, "newton_tol must be positive");
    } else if (key == "newton_max") {
        const long v = parse_long(src, line, key, value);
        if (v < 1) fail(src, line, "newton_max must be at least 1");
        cfg.params.newton_max = static_cast<int>(v);
    } else if (key == "bc_tol") {
        cfg.params.bc_tol = parse_double(src, line, key, value);
        if (!(cfg.params.bc_tol > 0.0)) fail(src, line, "bc_tol must be positive");
    } else if (key == "bc_max_passes") {
        const long v = parse_long(src, line, key, value);
        if (v < 1) fail(src, line, "bc_max_passes must be at least 1");
        cfg.params.bc_max_passes = static_cast<int>(v);
    } else if (key == "sample_stride") {
        const long v = parse_long(src, line, key, value);
        if (v < 1) fail(src, line, "sample_stride must be at least 1");
        cfg.sample_stride = static_cast<int>(v);
    } else if (key == "kmax") {
        const long v = parse_long(src, line, key, value);
        if (v < 0 || v > 3) fail(src, line, "kmax must lie in 0..3");
        cfg.kmax = static_cast<int>(v);
    } else if (key == "walls") {
        if (value == "impedance")
            cfg.wall = WallBc::Impedance;
        else if (value == "pec")
            cfg.wall = WallBc::Pec;
        else if (value == "pmc")
            cfg.wall = WallBc::Pmc;
        else
            fail(src, line, "key 'walls': unknown wall type '" + value +
                                "' (impedance, pec, pmc)");
    } else {
        fail(src, line, "unknown key '" + key + "' in [stepping]");
    }
}

void set_output_key(ExperimentConfig& cfg, const std::string& src, int line,
                    const std::string& key, const std::string& value) {
    if (key == "series") {
        cfg.series_path = value;
    } else if (key == "summary") {
        cfg.summary_path = value;
    } else if (key == "snapshot") {
        cfg.snapshot_path = value;
    } else if (key == "snapshot_every") {
        const long v = parse_long(src, line, key, value);
        if (v < 0) fail(src, line, "snapshot_every must be nonnegative");
        cfg.snapshot_every = static_cast<int>(v);
    } else {
        fail(src, line, "unknown key '" + key + "' in [output]");
    }
}

void set_analysis_key(ExperimentConfig& cfg, const std::string& src, int line,
                      const std::string& key, const std::string& value) {
    if (key == "transient_fraction") {
        cfg.transient_fraction = parse_double(src, line, key, value);
        if (cfg.transient_fraction < 0.0 || cfg.transient_fraction > 0.9)
            fail(src, line, "transient_fraction must lie in [0, 0.9]");
    } else if (key == "ensemble") {
        const long v = parse_long(src, line, key, value);
        if (v < 1) fail(src, line, "ensemble must be at least 1");
        cfg.ensemble = static_cast<int>(v);
    } else if (key == "seed") {
        cfg.analysis_seed = parse_u64(src, line, key, value);
    } else if (key == "t_hat") {
        cfg.t_hat = parse_double(src, line, key, value);
        if (cfg.t_hat < 0.0) fail(src, line, "t_hat must be nonnegative");
    } else if (key == "window_multiples") {
        cfg.window_multiples = split_doubles(src, line, key, value);
        for (double m : cfg.window_multiples)
            if (!(m > 0.0)) fail(src, line, "window multiples must be positive");
    } else if (key == "functional") {
        try {
            series_column(value);
        } catch (const std::exception&) {
            fail(src, line, "key 'functional': unknown series column '" + value + "'");
        }
        cfg.functional = value;
    } else if (key == "series_in") {
        cfg.series_in = value;
    } else if (key == "observe_T") {
        cfg.observe_T = parse_double(src, line, key, value);
        if (cfg.observe_T < 0.0) fail(src, line, "observe_T must be nonnegative");
    } else {
        fail(src, line, "unknown key '" + key + "' in [analysis]");
    }
}

void hash_append(std::string& s, const char* tag) {
    s += tag;
    s += '|';
}

void hash_append(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g|", v);
    s += buf;
}

void hash_append(std::string& s, long long v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld|", v);
    s += buf;
}

void hash_append(std::string& s, const Vec3& v) {
    hash_append(s, v.x);
    hash_append(s, v.y);
    hash_append(s, v.z);
}

void hash_append(std::string& s, const SpatialProfile& p) {
    hash_append(s, static_cast<long long>(p.shape));
    hash_append(s, p.center);
}

void hash_append(std::string& s, const CoefLaw& law) {
    hash_append(s, static_cast<long long>(law.kind));
    switch (law.kind) {
        case CoefLaw::Linear:
            hash_append(s, law.profile);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) hash_append(s, law.M(i, j));
            break;
        case CoefLaw::Kerr:
            hash_append(s, law.lin);
            hash_append(s, law.nl);
            hash_append(s, law.lin_profile);
            hash_append(s, law.nl_profile);
            break;
        case CoefLaw::Poly2:
            hash_append(s, law.profile);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) hash_append(s, law.M(i, j));
            hash_append(s, law.c1);
            hash_append(s, law.c2);
            break;
    }
}

}  // namespace

ExperimentConfig parse_config(std::istream& is, const std::string& source) {
    ExperimentConfig cfg;
    cfg.source = source;
    std::string block;
    std::string raw;
    int ln = 0;
    std::set<std::string> seen_keys;
    std::array<FamilySeen, 3> family_seen;

    while (std::getline(is, raw)) {
        ++ln;
        const auto comment = raw.find('#');
        if (comment != std::string::npos) raw.erase(comment);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(source, ln, "unterminated block header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!block_names().count(name)) fail(source, ln, "unknown block [" + name + "]");
            if (cfg.blocks.count(name)) fail(source, ln, "block [" + name + "] reopened");
            cfg.blocks.insert(name);
            block = name;
            continue;
        }
        if (block.empty()) fail(source, ln, "key outside any block");

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(source, ln, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(source, ln, "missing key before '='");
        if (value.empty()) fail(source, ln, "key '" + key + "': empty value");
        if (!seen_keys.insert(block + "." + key).second)
            fail(source, ln, "duplicate key '" + key + "' in [" + block + "]");

        if (block == "grid")
            set_grid_key(cfg, source, ln, key, value);
        else if (block == "material")
            set_material_key(cfg, source, ln, key, value, family_seen);
        else if (block == "initial")
            set_initial_key(cfg, source, ln, key, value);
        else if (block == "stepping")
            set_stepping_key(cfg, source, ln, key, value);
        else if (block == "output")
            set_output_key(cfg, source, ln, key, value);
        else
            set_analysis_key(cfg, source, ln, key, value);
    }

    check_family_keys(source, "eps", cfg.material.eps, family_seen[0]);
    check_family_keys(source, "mu", cfg.material.mu, family_seen[1]);
    check_family_keys(source, "lambda", cfg.material.lambda, family_seen[2]);
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(path + ": cannot open config file");
    return parse_config(f, path);
}

void require_blocks(const ExperimentConfig& cfg, const std::vector<std::string>& needed) {
    for (const auto& b : needed)
        if (!cfg.blocks.count(b))
            throw ConfigError(cfg.source + ": missing required block [" + b + "]");
}

StaggeredGrid config_grid(const ExperimentConfig& cfg) {
    if (cfg.x0_set) return build_grid(cfg.extent, cfg.cells, cfg.x0);
    return build_grid(cfg.extent, cfg.cells);
}

MaterialModel config_model(const ExperimentConfig& cfg, const StaggeredGrid& g) {
    MaterialModel m = cfg.material;
    for (CoefLaw* law : {&m.eps, &m.mu, &m.lambda}) {
        law->profile.center = g.x0;
        law->lin_profile.center = g.x0;
        law->nl_profile.center = g.x0;
    }
    try {
        validate_model(m);
    } catch (const std::exception& e) {
        throw ConfigError(cfg.source + ": material rejected: " + e.what());
    }
    return m;
}

ResolvedInitial config_initial(const ExperimentConfig& cfg, const StaggeredGrid& g) {
    ResolvedInitial r;
    r.recipe = cfg.recipe;
    r.bump.amplitude = cfg.amplitude;
    Rng rng(cfg.seed);

    double minext = g.extent[0];
    for (int c = 1; c < 3; ++c) minext = std::min(minext, g.extent[c]);
    r.bump.radius = cfg.radius_set ? cfg.init_radius : minext * rng.uniform(0.10, 0.20);

    for (int c = 0; c < 3; ++c) {
        const double lo = 2.0 * g.h[c] + r.bump.radius;
        const double hi = g.extent[c] - lo;
        if (!(hi > lo) && !cfg.center_set)
            throw ConfigError(cfg.source +
                              ": initial radius leaves no room for the two-cell wall margin");
        if (cfg.center_set) {
            r.bump.center[c] = cfg.init_center[c];
            if (r.bump.center[c] - r.bump.radius < 2.0 * g.h[c] ||
                g.extent[c] - (r.bump.center[c] + r.bump.radius) < 2.0 * g.h[c])
                throw ConfigError(cfg.source +
                                  ": initial support ball violates the two-cell wall margin");
        } else {
            r.bump.center[c] = rng.uniform(lo + 1e-12, hi);
        }
    }

    if (cfg.polarization_set) {
        r.bump.polarization = cfg.init_polarization;
    } else {
        Vec3 pol;
        do {
            pol = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        } while (norm(pol) < 0.2);
        r.bump.polarization = pol * (1.0 / norm(pol));
    }
    return r;
}

RunOptions config_run_options(const ExperimentConfig& cfg) {
    RunOptions opts;
    opts.T = cfg.final_time;
    opts.kmax = cfg.kmax;
    opts.stride = cfg.sample_stride;
    opts.cfl_safety = cfg.cfl_safety;
    opts.dt_override = cfg.dt;
    opts.bc = all_walls(cfg.wall);
    opts.params = cfg.params;
    opts.snapshot_every = cfg.snapshot_every;
    opts.snapshot_path = cfg.snapshot_path;
    return opts;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const StaggeredGrid g = config_grid(cfg);
    const MaterialModel m = config_model(cfg, g);
    const ResolvedInitial init = config_initial(cfg, g);

    std::string s;
    hash_append(s, "grid");
    for (double e : cfg.extent) hash_append(s, e);
    for (int c : cfg.cells) hash_append(s, static_cast<long long>(c));
    hash_append(s, g.x0);

    hash_append(s, "material");
    hash_append(s, m.eta);
    hash_append(s, m.delta0);
    hash_append(s, m.eps);
    hash_append(s, m.mu);
    hash_append(s, m.lambda);

    hash_append(s, "initial");
    hash_append(s, static_cast<long long>(init.recipe));
    hash_append(s, init.bump.amplitude);
    hash_append(s, init.bump.center);
    hash_append(s, init.bump.radius);
    hash_append(s, init.bump.polarization);

    hash_append(s, "stepping");
    hash_append(s, cfg.final_time);
    hash_append(s, cfg.cfl_safety);
    hash_append(s, cfg.dt);
    hash_append(s, cfg.params.newton_tol);
    hash_append(s, static_cast<long long>(cfg.params.newton_max));
    hash_append(s, cfg.params.bc_tol);
    hash_append(s, static_cast<long long>(cfg.params.bc_max_passes));
    hash_append(s, static_cast<long long>(cfg.sample_stride));
    hash_append(s, static_cast<long long>(cfg.kmax));
    hash_append(s, static_cast<long long>(cfg.wall));
    hash_append(s, static_cast<long long>(cfg.snapshot_every));

    hash_append(s, "analysis");
    hash_append(s, cfg.transient_fraction);
    hash_append(s, static_cast<long long>(cfg.ensemble));
    hash_append(s, static_cast<long long>(cfg.analysis_seed));
    hash_append(s, cfg.t_hat);
    for (double w : cfg.window_multiples) hash_append(s, w);
    s += cfg.functional;
    s += '|';
    hash_append(s, cfg.observe_T);

    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace absd
