#include "efpp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "efpp/errors.hpp"
#include "efpp/parallel.hpp"
#include "efpp/rng.hpp"

namespace efpp {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

double stderr_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::sqrt(variance_of(v) / v.size());
}

FitResult loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("loglog_fit: need at least two grid points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("loglog_fit: values must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw std::invalid_argument("loglog_fit: degenerate grid");
    FitResult f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    f.ci_lo = f.ci_hi = f.slope;
    return f;
}

FitResult bootstrap_loglog(const std::vector<double>& x,
                           const std::vector<std::vector<double>>& samples,
                           const std::function<double(const std::vector<double>&)>& statistic,
                           int resamples, std::uint64_t seed) {
    std::vector<double> stat(x.size());
    for (std::size_t g = 0; g < x.size(); ++g) stat[g] = statistic(samples[g]);
    FitResult f = loglog_fit(x, stat);

    std::vector<double> slopes;
    slopes.reserve(resamples);
    std::vector<double> resampled;
    std::vector<double> boot_stat(x.size());
    int skipped = 0;
    for (int b = 0; b < resamples; ++b) {
        Substream rng(seed, 1 + static_cast<std::uint64_t>(b));
        bool ok = true;
        for (std::size_t g = 0; g < x.size(); ++g) {
            const auto& cell = samples[g];
            resampled.resize(cell.size());
            for (std::size_t i = 0; i < cell.size(); ++i)
                resampled[i] = cell[rng.next_below(cell.size())];
            boot_stat[g] = statistic(resampled);
            if (!(boot_stat[g] > 0.0)) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            ++skipped;
            continue;
        }
        slopes.push_back(loglog_fit(x, boot_stat).slope);
    }
    if (slopes.size() < static_cast<std::size_t>(resamples) / 2)
        throw std::runtime_error("bootstrap_loglog: too many degenerate resamples");
    (void)skipped;
    std::sort(slopes.begin(), slopes.end());
    const std::size_t m = slopes.size();
    f.ci_lo = slopes[static_cast<std::size_t>(0.025 * (m - 1))];
    f.ci_hi = slopes[static_cast<std::size_t>(std::ceil(0.975 * (m - 1)))];
    return f;
}

double max_segment_deviation(const PathResult& p, int d, Vec x, Vec y) {
    double dmax = 0.0;
    for (int i = 0; i < p.length(); ++i)
        dmax = std::max(dmax, segment_distance(p.vertex(i, d), x, y));
    return dmax;
}

namespace {

struct CellSample {
    double T = 0.0;
    double dmax = 0.0;
    bool trusted = false;
};

void check_grid(const std::vector<double>& lengths, int replicates) {
    if (lengths.empty()) throw std::invalid_argument("estimator: empty length grid");
    for (std::size_t i = 0; i + 1 < lengths.size(); ++i)
        if (!(lengths[i] < lengths[i + 1]))
            throw std::invalid_argument("estimator: length grid must be increasing");
    for (double l : lengths)
        if (!(l > 0.0)) throw std::invalid_argument("estimator: lengths must be positive");
    if (replicates < 1) throw std::invalid_argument("estimator: replicates >= 1");
}

/// T_l Monte Carlo over the grid: sample (g, r) uses substream g*R + r.
std::vector<std::vector<CellSample>> run_passage_grid(int d, const CostModel& cm, double lambda,
                                                      const std::vector<double>& lengths,
                                                      int replicates, std::uint64_t seed,
                                                      const EstimatorOptions& opt) {
    const std::size_t total = lengths.size() * static_cast<std::size_t>(replicates);
    std::vector<std::vector<CellSample>> out(lengths.size(),
                                             std::vector<CellSample>(replicates));
    parallel_for(total, opt.workers, [&](std::size_t idx) {
        const std::size_t g = idx / replicates;
        const std::size_t r = idx % replicates;
        const double ell = lengths[g];
        std::vector<double> x(d, 0.0), y(d, 0.0);
        y[0] = ell;
        const WindowedPassage wp =
            windowed_passage_time(d, cm, lambda, Vec(x), Vec(y), substream_key(seed, idx),
                                  EndpointMode::ParticleEndpoints, opt.policy);
        CellSample& cell = out[g][r];
        cell.T = wp.cost;
        cell.trusted = wp.path.trusted;
        cell.dmax = max_segment_deviation(wp.path, d, Vec(x), Vec(y));
    });
    for (std::size_t g = 0; g < lengths.size(); ++g) {
        int untrusted = 0;
        for (const auto& c : out[g])
            if (!c.trusted) ++untrusted;
        if (untrusted > opt.max_untrusted_fraction * replicates)
            throw WindowPolicyError("estimator: untrusted-path fraction above threshold at l = " +
                                    std::to_string(lengths[g]));
    }
    return out;
}

void fill_moments(ScalingEstimate& est) {
    const std::size_t G = est.lengths.size();
    est.mean.resize(G);
    est.var.resize(G);
    est.se.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        est.mean[g] = mean_of(est.samples[g]);
        est.var[g] = variance_of(est.samples[g]);
        est.se[g] = stderr_of(est.samples[g]);
    }
}

std::vector<int> untrusted_counts(const std::vector<std::vector<CellSample>>& cells) {
    std::vector<int> out(cells.size(), 0);
    for (std::size_t g = 0; g < cells.size(); ++g)
        for (const auto& c : cells[g])
            if (!c.trusted) out[g]++;
    return out;
}

} // namespace

ScalingEstimate estimate_mu(int d, double alpha, double lambda, std::vector<double> lengths,
                            int replicates, std::uint64_t seed, const EstimatorOptions& opt) {
    check_grid(lengths, replicates);
    const CostModel cm = CostModel::power(alpha);
    const auto cells = run_passage_grid(d, cm, lambda, lengths, replicates, seed, opt);

    ScalingEstimate est;
    est.lengths = std::move(lengths);
    est.replicates = replicates;
    est.seed = seed;
    est.untrusted = untrusted_counts(cells);
    est.samples.resize(est.lengths.size());
    for (std::size_t g = 0; g < est.lengths.size(); ++g) {
        est.samples[g].resize(replicates);
        for (int r = 0; r < replicates; ++r) est.samples[g][r] = cells[g][r].T / est.lengths[g];
    }
    fill_moments(est);
    est.mu_hat = est.mean.back();
    est.mu_hat_se = est.se.back();
    // subadditivity implies E T_l / l decreases toward mu
    est.monotone_ok = true;
    for (std::size_t g = 0; g + 1 < est.lengths.size(); ++g) {
        const double allowance =
            2.0 * std::sqrt(est.se[g] * est.se[g] + est.se[g + 1] * est.se[g + 1]);
        if (est.mean[g + 1] > est.mean[g] + allowance) est.monotone_ok = false;
    }
    if (est.lengths.size() >= 2)
        est.fit = bootstrap_loglog(
            est.lengths, est.samples, [](const std::vector<double>& v) { return mean_of(v); },
            opt.bootstrap_resamples, seed + 0x9e37);
    est.pass = est.monotone_ok;
    return est;
}

ScalingEstimate variance_scaling(int d, double alpha, double lambda, std::vector<double> lengths,
                                 int replicates, std::uint64_t seed, const EstimatorOptions& opt) {
    check_grid(lengths, replicates);
    if (replicates < 2) throw std::invalid_argument("variance_scaling: replicates >= 2");
    if (lengths.size() < 2) throw std::invalid_argument("variance_scaling: need >= 2 lengths");
    const CostModel cm = CostModel::power(alpha);
    const auto cells = run_passage_grid(d, cm, lambda, lengths, replicates, seed, opt);

    ScalingEstimate est;
    est.lengths = std::move(lengths);
    est.replicates = replicates;
    est.seed = seed;
    est.untrusted = untrusted_counts(cells);
    est.samples.resize(est.lengths.size());
    for (std::size_t g = 0; g < est.lengths.size(); ++g) {
        est.samples[g].resize(replicates);
        for (int r = 0; r < replicates; ++r) est.samples[g][r] = cells[g][r].T;
    }
    fill_moments(est);
    est.fit = bootstrap_loglog(
        est.lengths, est.samples, [](const std::vector<double>& v) { return variance_of(v); },
        opt.bootstrap_resamples, seed + 0x9e37);
    est.pass = est.fit.ci_lo <= 1.0;
    return est;
}

ScalingEstimate wandering_scaling(int d, double alpha, double lambda, std::vector<double> lengths,
                                  int replicates, std::uint64_t seed, const EstimatorOptions& opt) {
    check_grid(lengths, replicates);
    if (lengths.size() < 2) throw std::invalid_argument("wandering_scaling: need >= 2 lengths");
    const CostModel cm = CostModel::power(alpha);
    const auto cells = run_passage_grid(d, cm, lambda, lengths, replicates, seed, opt);

    ScalingEstimate est;
    est.lengths = std::move(lengths);
    est.replicates = replicates;
    est.seed = seed;
    est.untrusted = untrusted_counts(cells);
    est.samples.resize(est.lengths.size());
    for (std::size_t g = 0; g < est.lengths.size(); ++g) {
        est.samples[g].resize(replicates);
        for (int r = 0; r < replicates; ++r) est.samples[g][r] = cells[g][r].dmax;
    }
    fill_moments(est);
    est.fit = bootstrap_loglog(
        est.lengths, est.samples, [](const std::vector<double>& v) { return mean_of(v); },
        opt.bootstrap_resamples, seed + 0x9e37);
    est.pass = est.fit.ci_lo <= 0.75 + 0.05;
    return est;
}

// ---------------------------------------------------------------------------
// shape / isotropy
// ---------------------------------------------------------------------------

namespace {

double shape_epsilon_once(int d, const CostModel& cm, double lambda, double s, double mu_hat,
                          std::uint64_t seed, const WindowPolicy& policy) {
    const double r0 = s / mu_hat; // target Euclidean radius of the s-ball
    for (int attempt = 0; attempt <= policy.max_regrow; ++attempt) {
        const double margin = policy.margin(lambda, d, r0) * std::pow(2.0, attempt);
        const double half = 1.3 * r0 + margin;
        const double band = policy.trust_band(lambda, d, r0);
        const double r_core = half - band;
        PointSet ps = PointSet::sample_poisson(Window::centered_cube(d, half), lambda,
                                               substream_key(seed, attempt));
        if (ps.size() < 2) continue;
        CandidateGraph g = CandidateGraph::build(ps, cm, policy.k, policy.audit);
        std::vector<double> origin(d, 0.0);
        const int q0 = ps.nearest(Vec(origin));
        const ShortestPaths sp = shortest_paths_from(g, q0);

        bool member_outside_core = false;
        double eps_in = 0.0, eps_out = 0.0;
        for (int v = 0; v < ps.size(); ++v) {
            const double rv = norm(ps.point(v));
            const bool member = sp.reachable(v) && sp.cost[v] <= s;
            if (member && rv > r_core) {
                member_outside_core = true;
                break;
            }
            if (member) {
                eps_out = std::max(eps_out, rv * mu_hat / s - 1.0);
            } else if (rv < r0) {
                eps_in = std::max(eps_in, 1.0 - rv * mu_hat / s);
            }
        }
        if (member_outside_core) continue; // regrow
        return std::max(eps_in, eps_out);
    }
    throw WindowPolicyError("shape_check: core too small for requested s");
}

} // namespace

ShapeReport shape_check(int d, double alpha, double lambda, std::vector<double> s_grid,
                        int replicates, std::uint64_t seed, double mu_hat,
                        double isotropy_length, int isotropy_replicates,
                        const EstimatorOptions& opt) {
    if (s_grid.empty()) throw std::invalid_argument("shape_check: empty s grid");
    if (!(mu_hat > 0.0)) throw std::invalid_argument("shape_check: mu_hat must be positive");
    if (replicates < 2) throw std::invalid_argument("shape_check: replicates >= 2");
    const CostModel cm = CostModel::power(alpha);

    ShapeReport rep;
    rep.s_grid = std::move(s_grid);
    rep.mu_hat = mu_hat;
    const std::size_t S = rep.s_grid.size();
    rep.eps_samples.assign(S, std::vector<double>(replicates));
    parallel_for(S * replicates, opt.workers, [&](std::size_t idx) {
        const std::size_t g = idx / replicates;
        const int r = static_cast<int>(idx % replicates);
        rep.eps_samples[g][r] = shape_epsilon_once(d, cm, lambda, rep.s_grid[g], mu_hat,
                                                   substream_key(seed, idx), opt.policy);
    });
    rep.eps_mean.resize(S);
    rep.eps_se.resize(S);
    for (std::size_t g = 0; g < S; ++g) {
        rep.eps_mean[g] = mean_of(rep.eps_samples[g]);
        rep.eps_se[g] = stderr_of(rep.eps_samples[g]);
    }
    rep.monotone_ok = true;
    for (std::size_t g = 0; g + 1 < S; ++g) {
        const double allowance =
            2.0 * std::sqrt(rep.eps_se[g] * rep.eps_se[g] + rep.eps_se[g + 1] * rep.eps_se[g + 1]);
        if (rep.eps_mean[g + 1] > rep.eps_mean[g] + allowance) rep.monotone_ok = false;
    }

    // isotropy: statistical invariance across 8 directions in a coordinate plane
    const int ndir = 8;
    std::vector<std::vector<double>> dir_samples(ndir, std::vector<double>(isotropy_replicates));
    const std::size_t base = S * static_cast<std::size_t>(replicates);
    parallel_for(static_cast<std::size_t>(ndir) * isotropy_replicates, opt.workers,
                 [&](std::size_t idx) {
                     const int j = static_cast<int>(idx / isotropy_replicates);
                     const int r = static_cast<int>(idx % isotropy_replicates);
                     const double th = 2.0 * 3.14159265358979323846 * j / ndir;
                     std::vector<double> x(d, 0.0), y(d, 0.0);
                     y[0] = isotropy_length * std::cos(th);
                     y[1] = isotropy_length * std::sin(th);
                     const WindowedPassage wp = windowed_passage_time(
                         d, cm, lambda, Vec(x), Vec(y), substream_key(seed, base + idx),
                         EndpointMode::ParticleEndpoints, opt.policy);
                     dir_samples[j][r] = wp.cost;
                 });
    rep.direction_means.resize(ndir);
    rep.direction_ses.resize(ndir);
    for (int j = 0; j < ndir; ++j) {
        rep.direction_means[j] = mean_of(dir_samples[j]);
        rep.direction_ses[j] = stderr_of(dir_samples[j]);
    }
    rep.isotropy_max_z = 0.0;
    for (int i = 0; i < ndir; ++i)
        for (int j = i + 1; j < ndir; ++j) {
            const double se = std::sqrt(rep.direction_ses[i] * rep.direction_ses[i] +
                                        rep.direction_ses[j] * rep.direction_ses[j]);
            const double z = std::fabs(rep.direction_means[i] - rep.direction_means[j]) /
                             std::max(se, 1e-300);
            rep.isotropy_max_z = std::max(rep.isotropy_max_z, z);
        }
    rep.isotropy_ok = rep.isotropy_max_z <= 3.0;
    return rep;
}

// ---------------------------------------------------------------------------
// concentration / superadditivity
// ---------------------------------------------------------------------------

namespace {

double tail_exponent(const std::vector<double>& absvals) {
    // fit -log P[|X| > x] ~ c x^kappa over the upper tail
    std::vector<double> sorted(absvals);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = 1.0 - static_cast<double>(i + 1) / (n + 1);
        if (p < 0.005 || p > 0.30) continue;
        if (!(sorted[i] > 0.0)) continue;
        lx.push_back(std::log(sorted[i]));
        ly.push_back(std::log(-std::log(p)));
    }
    if (lx.size() < 8) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double den = lx.size() * sxx - sx * sx;
    return den != 0.0 ? (lx.size() * sxy - sx * sy) / den : 0.0;
}

} // namespace

ConcentrationReport concentration_check(int d, double alpha, double lambda, double ell,
                                        int replicates, std::uint64_t seed,
                                        const EstimatorOptions& opt) {
    if (replicates < 1000)
        throw std::invalid_argument("concentration_check: replicates >= 1000 required");
    const CostModel cm = CostModel::power(alpha);
    const auto cells = run_passage_grid(d, cm, lambda, {ell}, replicates, seed, opt);

    ConcentrationReport rep;
    rep.ell = ell;
    rep.replicates = replicates;
    std::vector<double> T(replicates);
    for (int r = 0; r < replicates; ++r) T[r] = cells[0][r].T;
    rep.mean_T = mean_of(T);
    rep.standardized.resize(replicates);
    for (int r = 0; r < replicates; ++r)
        rep.standardized[r] = (T[r] - rep.mean_T) / std::sqrt(ell);
    std::sort(rep.standardized.begin(), rep.standardized.end());

    std::vector<double> absvals(replicates);
    for (int r = 0; r < replicates; ++r) absvals[r] = std::fabs(rep.standardized[r]);
    std::sort(absvals.begin(), absvals.end());
    rep.quantile_probs = {0.5, 0.75, 0.9, 0.95, 0.99};
    for (double p : rep.quantile_probs)
        rep.quantiles.push_back(absvals[static_cast<std::size_t>(p * (replicates - 1))]);

    rep.fit_exponent = tail_exponent(absvals);
    // bootstrap over replicates
    std::vector<double> boots;
    std::vector<double> res(replicates);
    for (int b = 0; b < 200; ++b) {
        Substream rng(seed, 40000 + static_cast<std::uint64_t>(b));
        for (int r = 0; r < replicates; ++r) res[r] = std::fabs(rep.standardized[rng.next_below(replicates)]);
        const double e = tail_exponent(res);
        if (e != 0.0) boots.push_back(e);
    }
    if (!boots.empty()) {
        std::sort(boots.begin(), boots.end());
        rep.fit_ci_lo = boots[static_cast<std::size_t>(0.025 * (boots.size() - 1))];
        rep.fit_ci_hi = boots[static_cast<std::size_t>(std::ceil(0.975 * (boots.size() - 1)))];
    }
    rep.kappa1 = std::min(1.0, static_cast<double>(d) / alpha);
    rep.kappa2 = 1.0 / (4.0 * alpha + 3.0);
    return rep;
}

SuperadditivityReport superadditivity_check(int d, double alpha, double lambda,
                                            std::vector<double> lengths, int replicates,
                                            std::uint64_t seed, const EstimatorOptions& opt) {
    check_grid(lengths, replicates);
    bool has_pair = false;
    for (double l : lengths)
        for (double l2 : lengths)
            if (std::fabs(l2 - 2.0 * l) <= 1e-9 * l) has_pair = true;
    if (!has_pair)
        throw std::invalid_argument("superadditivity_check: grid must contain an (l, 2l) pair");

    const CostModel cm = CostModel::power(alpha);
    const auto cells = run_passage_grid(d, cm, lambda, lengths, replicates, seed, opt);

    SuperadditivityReport rep;
    rep.lengths = lengths;
    rep.mean_T.resize(lengths.size());
    rep.se_T.resize(lengths.size());
    for (std::size_t g = 0; g < lengths.size(); ++g) {
        std::vector<double> T(replicates);
        for (int r = 0; r < replicates; ++r) T[r] = cells[g][r].T;
        rep.mean_T[g] = mean_of(T);
        rep.se_T[g] = stderr_of(T);
    }
    rep.mu_hat = rep.mean_T.back() / lengths.back();
    rep.lower_bound_ok = true;
    for (std::size_t g = 0; g < lengths.size(); ++g)
        if (rep.mean_T[g] < rep.mu_hat * lengths[g] - 2.0 * rep.se_T[g]) rep.lower_bound_ok = false;
    for (std::size_t g = 0; g < lengths.size(); ++g) {
        for (std::size_t g2 = 0; g2 < lengths.size(); ++g2) {
            if (std::fabs(lengths[g2] - 2.0 * lengths[g]) > 1e-9 * lengths[g]) continue;
            SuperadditivityReport::Pair pr;
            pr.ell = lengths[g];
            pr.gap = rep.mean_T[g2] - 2.0 * rep.mean_T[g];
            pr.gap_se = std::sqrt(rep.se_T[g2] * rep.se_T[g2] + 4.0 * rep.se_T[g] * rep.se_T[g]);
            pr.subadditive_ok = pr.gap <= 3.0 * pr.gap_se;
            rep.pairs.push_back(pr);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// box paths
// ---------------------------------------------------------------------------

namespace {

std::vector<std::int64_t> box_of(Vec x, double eps) {
    std::vector<std::int64_t> nu(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        nu[j] = static_cast<std::int64_t>(std::floor(x[j] / eps + 0.5));
    return nu;
}

/// Boxes visited by the polygonal path, in order, consecutive duplicates
/// merged (grid walk per link).
std::vector<std::vector<std::int64_t>> visited_boxes(const PathResult& p, int d, double eps) {
    std::vector<std::vector<std::int64_t>> visits;
    if (p.length() == 0) return visits;
    visits.push_back(box_of(p.vertex(0, d), eps));
    for (int li = 0; li + 1 < p.length(); ++li) {
        const Vec P = p.vertex(li, d), Q = p.vertex(li + 1, d);
        std::vector<std::int64_t> nu = visits.back();
        const std::vector<std::int64_t> nuq = box_of(Q, eps);
        std::vector<double> tnext(d), dt(d);
        std::vector<int> step(d);
        for (int j = 0; j < d; ++j) {
            const double dir = Q[j] - P[j];
            if (dir > 0.0) {
                step[j] = 1;
                tnext[j] = (eps * (static_cast<double>(nu[j]) + 0.5) - P[j]) / dir;
                dt[j] = eps / dir;
            } else if (dir < 0.0) {
                step[j] = -1;
                tnext[j] = (eps * (static_cast<double>(nu[j]) - 0.5) - P[j]) / dir;
                dt[j] = -eps / dir;
            } else {
                step[j] = 0;
                tnext[j] = std::numeric_limits<double>::infinity();
                dt[j] = 0.0;
            }
        }
        int guard = 0;
        while (nu != nuq) {
            int axis = 0;
            for (int j = 1; j < d; ++j)
                if (tnext[j] < tnext[axis]) axis = j;
            if (!(tnext[axis] <= 1.0 + 1e-12) || ++guard > 1000000) {
                // numeric corner: snap to the end box
                nu = nuq;
                break;
            }
            nu[axis] += step[axis];
            tnext[axis] += dt[axis];
            if (nu != visits.back()) visits.push_back(nu);
        }
        if (visits.back() != nuq && nu == nuq) visits.push_back(nuq);
    }
    return visits;
}

} // namespace

BoxPathStats boxpath_stats(const PointSet& ps, const PathResult& p, double eps) {
    if (p.length() == 0) throw std::invalid_argument("boxpath_stats: empty path");
    if (!(eps > 0.0)) throw std::invalid_argument("boxpath_stats: eps must be positive");
    const int d = ps.dim();
    BoxPathStats st;

    const auto visits = visited_boxes(p, d, eps);
    std::map<std::vector<std::int64_t>, std::size_t> last_at;
    for (std::size_t i = 0; i < visits.size(); ++i) last_at[visits[i]] = i;

    // beta: successor = box entered when the path last exits the current one
    std::vector<std::vector<std::int64_t>> beta;
    std::size_t pos = 0;
    beta.push_back(visits[0]);
    for (;;) {
        pos = last_at[beta.back()];
        if (pos + 1 >= visits.size()) break;
        beta.push_back(visits[pos + 1]);
    }
    st.length = static_cast<int>(beta.size());
    st.boxes = beta;

    st.connected = true;
    for (std::size_t i = 0; i + 1 < beta.size(); ++i) {
        std::int64_t l1 = 0;
        for (int j = 0; j < d; ++j) l1 += std::llabs(beta[i][j] - beta[i + 1][j]);
        if (l1 != 1) st.connected = false;
    }

    std::set<std::vector<std::int64_t>> occupied;
    for (int i = 0; i < ps.size(); ++i) occupied.insert(box_of(ps.point(i), eps));
    int occ = 0;
    std::set<std::vector<std::int64_t>> beta_set(beta.begin(), beta.end());
    for (const auto& b : beta)
        if (occupied.count(b)) ++occ;
    st.occupied_fraction = beta.empty() ? 0.0 : static_cast<double>(occ) / beta.size();

    const double threshold = 33.0 * eps * std::sqrt(static_cast<double>(d) + 3.0);
    std::vector<double> mid(d);
    st.covers_long_midpoints = true;
    for (int li = 0; li + 1 < p.length(); ++li) {
        if (p.link_lengths[li] <= threshold) continue;
        st.long_links++;
        const Vec P = p.vertex(li, d), Q = p.vertex(li + 1, d);
        for (int j = 0; j < d; ++j) mid[j] = 0.5 * (P[j] + Q[j]);
        if (!beta_set.count(box_of(Vec(mid), eps))) st.covers_long_midpoints = false;
    }
    return st;
}

} // namespace efpp
