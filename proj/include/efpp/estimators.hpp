#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "efpp/forest.hpp"
#include "efpp/geodesic.hpp"

namespace efpp {

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_lo = 0.0; // 95% bootstrap interval on the slope
    double ci_hi = 0.0;
};

/// OLS on (log x, log y).
FitResult loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Bootstrap CI: resample within each cell, recompute the per-cell statistic,
/// refit; percentile interval over `resamples` slopes.
FitResult bootstrap_loglog(const std::vector<double>& x,
                           const std::vector<std::vector<double>>& samples,
                           const std::function<double(const std::vector<double>&)>& statistic,
                           int resamples, std::uint64_t seed);

double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v); // ddof = 1
double stderr_of(const std::vector<double>& v);

/// Per-length Monte Carlo samples plus the log-log regression on a derived
/// statistic.  Deterministic in (seed, parameters) and worker count:
/// sample (g, r) uses point-set seed substream_key(seed, g * replicates + r).
struct ScalingEstimate {
    std::vector<double> lengths;
    std::vector<std::vector<double>> samples; // [length][replicate]
    std::vector<double> mean, var, se;
    FitResult fit;
    int replicates = 0;
    std::uint64_t seed = 0;
    double mu_hat = 0.0;     // estimate_mu only: mean(T/l) at the largest length
    double mu_hat_se = 0.0;
    bool monotone_ok = true; // estimate_mu diagnostic
    bool pass = false;       // variance/wandering scaling bound flag
    std::vector<int> untrusted; // per length, after regrowth
};

struct EstimatorOptions {
    WindowPolicy policy;
    int workers = 0;
    int bootstrap_resamples = 1000;
    double max_untrusted_fraction = 0.05;
};

/// Mean of T_l / l per length; mu_hat taken at the largest length.  Throws
/// WindowPolicyError if more than 5% of paths stay untrusted at any length.
ScalingEstimate estimate_mu(int d, double alpha, double lambda, std::vector<double> lengths,
                            int replicates, std::uint64_t seed,
                            const EstimatorOptions& opt = EstimatorOptions());

/// Slope of log Var T_l vs log l; pass flag: slope - ci half-width <= 1.
ScalingEstimate variance_scaling(int d, double alpha, double lambda, std::vector<double> lengths,
                                 int replicates, std::uint64_t seed,
                                 const EstimatorOptions& opt = EstimatorOptions());

/// Slope of log E[d_max] vs log l; pass flag: lower CI end <= 0.8.
ScalingEstimate wandering_scaling(int d, double alpha, double lambda, std::vector<double> lengths,
                                  int replicates, std::uint64_t seed,
                                  const EstimatorOptions& opt = EstimatorOptions());

/// d_max of a path from the segment x..y.
double max_segment_deviation(const PathResult& p, int d, Vec x, Vec y);

struct ShapeSample {
    double s = 0.0;
    double eps_hat = 0.0;
};

struct ShapeReport {
    std::vector<double> s_grid;
    std::vector<std::vector<double>> eps_samples; // [s][replicate]
    std::vector<double> eps_mean, eps_se;
    bool monotone_ok = true; // eps_hat(s) non-increasing within 2 se
    // isotropy sub-check
    std::vector<double> direction_means, direction_ses;
    double isotropy_max_z = 0.0; // max pairwise |mean_i - mean_j| / combined se
    bool isotropy_ok = true;     // max_z <= 3
    double mu_hat = 0.0;
};

/// Shape theorem check: per realization the smallest eps with
/// Q cap (1-eps) s B0 subset B_alpha(0, s^(1/alpha)) subset (1+eps) s B0,
/// B0 = B(0, 1/mu_hat); plus an 8-direction isotropy comparison of T(0, l xhat).
ShapeReport shape_check(int d, double alpha, double lambda, std::vector<double> s_grid,
                        int replicates, std::uint64_t seed, double mu_hat,
                        double isotropy_length = 40.0, int isotropy_replicates = 64,
                        const EstimatorOptions& opt = EstimatorOptions());

struct ConcentrationReport {
    double ell = 0.0;
    int replicates = 0;
    double mean_T = 0.0;
    std::vector<double> standardized;       // (T - mean)/sqrt(l), sorted
    std::vector<double> quantile_probs;     // e.g. .5 .75 .9 .95 .99
    std::vector<double> quantiles;          // |standardized| quantiles
    double fit_exponent = 0.0;              // stretched-exponential tail exponent
    double fit_ci_lo = 0.0, fit_ci_hi = 0.0;
    double kappa1 = 0.0, kappa2 = 0.0;      // recorded metadata, never asserted
};

ConcentrationReport concentration_check(int d, double alpha, double lambda, double ell,
                                        int replicates, std::uint64_t seed,
                                        const EstimatorOptions& opt = EstimatorOptions());

struct SuperadditivityReport {
    std::vector<double> lengths;
    std::vector<double> mean_T, se_T;
    double mu_hat = 0.0;
    struct Pair {
        double ell = 0.0;
        double gap = 0.0;      // mean T_2l - 2 mean T_l  (expected <= 0 within noise)
        double gap_se = 0.0;
        bool subadditive_ok = true;
    };
    std::vector<Pair> pairs;
    bool lower_bound_ok = true; // mean T_l >= mu_hat * l - 2 se at every l
};

SuperadditivityReport superadditivity_check(int d, double alpha, double lambda,
                                            std::vector<double> lengths, int replicates,
                                            std::uint64_t seed,
                                            const EstimatorOptions& opt = EstimatorOptions());

struct BoxPathStats {
    int length = 0;              // number of boxes on beta
    double occupied_fraction = 0.0;
    bool covers_long_midpoints = true;
    int long_links = 0;          // links longer than 33 eps sqrt(d+3)
    bool connected = true;       // consecutive boxes face-adjacent
    std::vector<std::vector<std::int64_t>> boxes;
};

/// eps-box path along a polygonal path: the first box contains the path start;
/// the successor of a box is the box the path enters when it last exits it.
BoxPathStats boxpath_stats(const PointSet& ps, const PathResult& p, double eps);

} // namespace efpp
