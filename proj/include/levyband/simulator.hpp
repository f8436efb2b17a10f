#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "levyband/band_solver.hpp"
#include "levyband/exit_analysis.hpp"
#include "levyband/model.hpp"

namespace levyband {

struct SimConfig {
    double dt = 1e-3;
    double horizon = 50.0;
    std::int64_t paths = 1000;
    std::uint64_t seed = 42;
    /// Detect barrier crossings between grid points with the Brownian-bridge
    /// crossing probability.
    bool bridge_correction = false;
    /// Store (t, X_t) after every step in PathRecord::grid_samples.
    bool record_grid = false;
    /// Worker threads; 0 means hardware concurrency capped by LEVYBAND_THREADS.
    int threads = 0;
};

struct PathRecord {
    std::vector<double> intervention_times;
    std::vector<double> intervention_sizes;  // post - pre
    std::vector<double> pre_states;
    std::vector<double> post_states;
    double running_cost = 0.0;     // discounted integral of phi
    double discounted_cost = 0.0;  // running_cost + sum e^{-lambda tau_n} g(xi_n)
    double end_time = 0.0;
    double end_state = 0.0;
    std::vector<std::pair<double, double>> grid_samples;
};

/// Counter-based generator: output i of stream `key` is a SplitMix64
/// finalizer applied to key + i * golden gamma, so streams can be split by
/// path index without any shared state.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) : key_(key) {}
    /// Stream key of path `path` under run seed `seed`.
    static std::uint64_t path_key(std::uint64_t seed, std::uint64_t path);
    static CounterRng for_path(std::uint64_t seed, std::uint64_t path) { return CounterRng(path_key(seed, path)); }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()();

    /// Uniform on (0, 1).
    double uniform();
    double exponential(double rate);
    double normal();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Number of workers used for `paths` independent jobs.
int worker_count(const SimConfig& cfg, std::int64_t jobs);

/// One controlled path on [0, cfg.horizon] driven by CounterRng(path_seed).
/// With path_seed = CounterRng::path_key(cfg.seed, i) it reproduces path i of estimate_value.
PathRecord simulate_path(const ModelParams& model, const CostParams& costs, const BandPolicy& bands, double x0,
                         const SimConfig& cfg, std::uint64_t path_seed);

/// Y_t - Y_0 of the uncontrolled process, drawn exactly.
double sample_increment(const ModelParams& model, double t, CounterRng& rng);

/// Smallest horizon H with e^{-lambda H} sup_{[a,b]} phi / lambda <= bias_tol.
double certified_horizon(const ModelParams& model, const BandPolicy& bands, double bias_tol);

struct ValueEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n = 0;
    double horizon = 0.0;
    /// e^{-lambda H} sup_{[a,b]} phi / lambda for the horizon used.
    double truncation_bound = 0.0;
};

ValueEstimate estimate_value(const ModelParams& model, const CostParams& costs, const BandPolicy& bands, double x0,
                             const SimConfig& cfg);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> mass;  // normalized time fractions per bin
    double total_time = 0.0;
    double outside_time = 0.0;  // time spent outside [lo, hi]
    std::int64_t cycles = 0;    // observed resets (regenerations)
    std::string warning;

    double bin_width() const { return (hi - lo) / static_cast<double>(mass.size()); }
    /// Empirical CDF at the right edge of each bin.
    std::vector<double> cdf() const;
};

/// Time-weighted occupation of [a, b] over cfg.paths paths of length cfg.horizon started at x0.
Histogram empirical_occupation(const ModelParams& model, const BandPolicy& bands, const SimConfig& cfg, int bins,
                               double x0);
Histogram empirical_occupation(const ModelParams& model, const BandPolicy& bands, const SimConfig& cfg, int bins);

struct ProportionEstimate {
    double p_hat = 0.0;
    double std_error = 0.0;
    std::int64_t n = 0;
};

/// P_x[X(e_q) in interval] with e_q ~ Exp(q) drawn per path; cfg.horizon is ignored.
ProportionEstimate estimate_transient_mc(const ModelParams& model, const BandPolicy& bands,
                                         const TransientQuery& query, const SimConfig& cfg);

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n = 0;
};

/// First exit time of the uncontrolled process from (a, b), truncated at cfg.horizon.
MeanEstimate estimate_exit_time_mc(const ModelParams& model, const BandPolicy& bands, double x0,
                                   const SimConfig& cfg);

/// Order-fixed pairwise summation.
double pairwise_sum(const double* data, std::size_t n);

}  // namespace levyband
