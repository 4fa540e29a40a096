#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "absd/functionals.hpp"
#include "absd/run.hpp"

namespace absd {

struct DegenerateSeries : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroDissipation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ZeroDenominator : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Log-linear least-squares fit of a positive series column against M e^{-w t}.
struct DecayFit {
    double amplitude = 0.0;
    double rate = 0.0;
    double r2 = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
};

using SampleSelector = std::function<double(const SeriesSample&)>;

// Named series column: "e0".."e3", "d0".."d3", "z0".."z3".
SampleSelector series_column(const std::string& name);

// Drops the leading `transient_fraction` of the samples, trims non-positive
// values, and fits log v against t.  Requires at least 10 usable samples.
DecayFit fit_decay(const FunctionalSeries& series, const SampleSelector& pick,
                   double transient_fraction = 0.2);

// e0(0) / integral of d0 over [t0, T] (trapezoid, partial last interval).
double observability_ratio(const FunctionalSeries& series, double T);

// Empirical constant: ensemble max with the spread over members.
struct ConstantEstimate {
    std::string name;
    double value = 0.0;
    int ensemble = 0;
    double lo = 0.0;
    double hi = 0.0;
};

// Repeats observability_ratio over `count` random solenoidal bumps.  `base`
// supplies the stepping controls (cfl_safety, stride, bc); T and kmax are
// overridden.
ConstantEstimate observability_ensemble(const StaggeredGrid& g, const MaterialModel& model,
                                        double T, int count, std::uint64_t seed,
                                        const RunOptions& base);

// Integral ratio of squared normal traces of D and B against the squared
// tangential trace of E over the window [s, t].
double trace_ratio(const FunctionalSeries& series, double s, double t);

// Ratios over the growing windows [t0, t0 + m * window] for each multiple m.
std::vector<double> trace_ratio_sweep(const FunctionalSeries& series, double window,
                                      const std::vector<double>& multiples = {1.0, 2.0,
                                                                              4.0, 8.0});

// Default observation window: two domain crossings at the slowest wave speed.
double default_window_estimate(const StaggeredGrid& g, const MaterialModel& model);

// Ensemble max of ||u||_H1 + ||v||_H1 over ||curl u|| + ||curl v|| +
// ||div(eps u)|| + ||div(mu v)|| + ||impedance residual on the walls||
// for random trig-polynomial field pairs sampled on the staggered layouts.
ConstantEstimate divcurl_ratio(const StaggeredGrid& g, const MaterialModel& model,
                               int ensemble, std::uint64_t seed);

// Single-pair quotient behind divcurl_ratio; u edge layout, v face layout.
double divcurl_pair_ratio(const StaggeredGrid& g, const MaterialModel& model,
                          const Stag3& u, const Stag3& v);

// Dual-family surrogate of ||nu . curl f||_{H^-1 on the walls} divided by the
// tangential wall norm of f.  Throws ZeroDenominator when both vanish.
double surface_curl_ratio(const StaggeredGrid& g, const Stag3& f);
ConstantEstimate surface_curl_ensemble(const StaggeredGrid& g, int ensemble,
                                       std::uint64_t seed);

// Smooth random field for the estimate ensembles: per component, a short sum
// of separable sine/cosine modes with wave numbers up to max_mode, sampled at
// the staggered positions of the requested layout.
Stag3 random_trig_field(const StaggeredGrid& g, bool edge_layout, Rng& rng,
                        int max_mode = 2);

}  // namespace absd
