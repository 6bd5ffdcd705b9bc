#include <doctest.h>

#include <cmath>

#include "efpp/errors.hpp"
#include "efpp/estimators.hpp"
#include "efpp/rng.hpp"

using namespace efpp;

TEST_CASE("log-log fit recovers an exact power law") {
    const std::vector<double> x{10.0, 20.0, 40.0, 80.0};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 1.7));
    const FitResult f = loglog_fit(x, y);
    CHECK(f.slope == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK_THROWS_AS(loglog_fit({10.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("regression calibration: variance slope 1 on synthetic i.i.d. data") {
    // samples at length l are N(0, l): Var = l exactly, so the fitted slope
    // must come back 1 within +-0.02 before the machinery touches FPP data
    const std::vector<double> lengths{10.0, 20.0, 40.0, 80.0};
    std::vector<std::vector<double>> samples(lengths.size());
    for (std::size_t g = 0; g < lengths.size(); ++g) {
        Substream rng(100 + g, 0);
        samples[g].resize(20000);
        for (double& v : samples[g]) v = std::sqrt(lengths[g]) * rng.next_normal();
    }
    const FitResult f = bootstrap_loglog(
        lengths, samples, [](const std::vector<double>& v) { return variance_of(v); }, 300, 9);
    CHECK(std::fabs(f.slope - 1.0) <= 0.02);
    CHECK(f.ci_lo <= 1.0);
    CHECK(f.ci_hi >= 1.0);
    CHECK(f.ci_hi - f.ci_lo <= 0.15);
}

TEST_CASE("one-dimensional closed form: variance of sums of exponential powers scales linearly") {
    // T_l ~ sum of alpha-powers of i.i.d. exponential gaps until total length l
    const double alpha = 2.0;
    const std::vector<double> lengths{100.0, 200.0, 400.0, 800.0};
    std::vector<std::vector<double>> samples(lengths.size());
    for (std::size_t g = 0; g < lengths.size(); ++g) {
        samples[g].resize(400);
        for (int r = 0; r < 400; ++r) {
            Substream rng(substream_key(4242, g * 400 + r), 0);
            double pos = 0.0, total = 0.0;
            while (pos < lengths[g]) {
                double u = rng.next_uniform();
                while (u <= 0.0) u = rng.next_uniform();
                const double gap = -std::log(u);
                pos += gap;
                total += std::pow(gap, alpha);
            }
            samples[g][r] = total;
        }
    }
    const FitResult f = bootstrap_loglog(
        lengths, samples, [](const std::vector<double>& v) { return variance_of(v); }, 400, 11);
    CHECK(std::fabs(f.slope - 1.0) <= 0.15);
    CHECK(f.ci_lo <= 1.0);
    CHECK(f.ci_hi >= 0.85);
}

TEST_CASE("estimator input validation") {
    CHECK_THROWS_AS(estimate_mu(2, 2.0, 1.0, {10.0, 20.0}, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(estimate_mu(2, 2.0, 1.0, {}, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(estimate_mu(2, 2.0, 1.0, {20.0, 10.0}, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(variance_scaling(2, 2.0, 1.0, {10.0}, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(concentration_check(2, 2.0, 1.0, 10.0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(superadditivity_check(2, 2.0, 1.0, {10.0, 15.0}, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("estimate_mu on a small grid: deterministic, positive, monotone") {
    EstimatorOptions opt;
    opt.workers = 2;
    opt.bootstrap_resamples = 100;
    const ScalingEstimate a = estimate_mu(2, 2.0, 1.0, {8.0, 16.0}, 24, 5, opt);
    CHECK(a.mu_hat > 0.0);
    CHECK(a.mu_hat_se > 0.0);
    CHECK(a.monotone_ok);
    opt.workers = 1;
    const ScalingEstimate b = estimate_mu(2, 2.0, 1.0, {8.0, 16.0}, 24, 5, opt);
    CHECK(a.samples == b.samples); // worker count cannot change the samples
}

TEST_CASE("max segment deviation") {
    PathResult p;
    p.vertex_ids = {0, 1, 2};
    p.coords = {0.0, 0.0, 5.0, 3.0, 10.0, 0.0};
    p.link_lengths = {std::hypot(5.0, 3.0), std::hypot(5.0, 3.0)};
    const std::vector<double> x{0.0, 0.0}, y{10.0, 0.0};
    CHECK(max_segment_deviation(p, 2, x, y) == doctest::Approx(3.0));

    // invariant under rotating everything
    const double th = 1.1;
    PathResult q = p;
    for (int i = 0; i < 3; ++i) {
        const double px = p.coords[2 * i], py = p.coords[2 * i + 1];
        q.coords[2 * i] = std::cos(th) * px - std::sin(th) * py;
        q.coords[2 * i + 1] = std::sin(th) * px + std::cos(th) * py;
    }
    const std::vector<double> y2{10.0 * std::cos(th), 10.0 * std::sin(th)};
    CHECK(max_segment_deviation(q, 2, x, y2) == doctest::Approx(3.0).epsilon(1e-12));

    // two-point degenerate path has no deviation
    PathResult direct;
    direct.vertex_ids = {0, 1};
    direct.coords = {0.0, 0.0, 10.0, 0.0};
    direct.link_lengths = {10.0};
    CHECK(max_segment_deviation(direct, 2, x, y) == 0.0);
}

TEST_CASE("box path: single box and a two-box crossing") {
    const PointSet ps = PointSet::from_points(Window::cube(2, -2.0, 2.0), {0.1, 0.1}, 1.0);
    PathResult inside;
    inside.vertex_ids = {0, 1};
    inside.coords = {0.1, 0.1, 0.3, 0.2};
    inside.link_lengths = {dist(Vec(std::vector<double>{0.1, 0.1}),
                                Vec(std::vector<double>{0.3, 0.2}))};
    const BoxPathStats one = boxpath_stats(ps, inside, 1.0);
    CHECK(one.length == 1);
    CHECK(one.occupied_fraction == doctest::Approx(1.0));

    PathResult crossing;
    crossing.vertex_ids = {0, 1};
    crossing.coords = {0.1, 0.1, 1.2, 0.1}; // crosses x = 0.5 into the next box
    crossing.link_lengths = {1.1};
    const BoxPathStats two = boxpath_stats(ps, crossing, 1.0);
    CHECK(two.length == 2);
    CHECK(two.connected);
}

TEST_CASE("box path along a geodesic: connected, adjacent, covers long links") {
    const CostModel cm = CostModel::power(2.0);
    const std::vector<double> x{0.0, 0.0}, y{25.0, 0.0};
    for (std::uint64_t r = 0; r < 10; ++r) {
        const PointSet ps = PointSet::sample_poisson(Window({-10.0, -10.0}, {35.0, 10.0}), 1.0,
                                                     substream_key(600, r));
        if (ps.size() < 2) continue;
        const PassageResult pr = passage_time(ps, cm, x, y, EndpointMode::ParticleEndpoints);
        const BoxPathStats st = boxpath_stats(ps, pr.path, 0.5);
        CHECK(st.connected);
        CHECK(st.length >= 1);
        CHECK(st.covers_long_midpoints);
        // beta starts at the box containing the path start
        const Vec start = pr.path.vertex(0, 2);
        for (int j = 0; j < 2; ++j)
            CHECK(st.boxes.front()[j] ==
                  static_cast<std::int64_t>(std::floor(start[j] / 0.5 + 0.5)));
    }
}

TEST_CASE("superadditivity report on a small run") {
    EstimatorOptions opt;
    opt.workers = 2;
    const SuperadditivityReport rep =
        superadditivity_check(2, 2.0, 1.0, {8.0, 16.0}, 40, 21, opt);
    REQUIRE(rep.pairs.size() == 1);
    CHECK(rep.pairs[0].ell == 8.0);
    CHECK(rep.lower_bound_ok);
    CHECK(rep.pairs[0].subadditive_ok);
}

TEST_CASE("exact process scaling: T at density 2 matches rescaled density 1") {
    // The map x -> x / sqrt(2) sends a unit-density process to density 2 in
    // d = 2 and scales every link cost by 2^(-alpha/2), so
    // E T^(2)(0, l e1) = 2^(-alpha/2) E T^(1)(0, sqrt(2) l e1) exactly.
    const double alpha = 2.0;
    const double ell = 12.0;
    const int reps = 150;
    EstimatorOptions opt;
    opt.workers = 2;
    std::vector<double> t2(reps), t1(reps);
    const CostModel cm = CostModel::power(alpha);
    for (int r = 0; r < reps; ++r) {
        std::vector<double> x{0.0, 0.0}, y{ell, 0.0};
        t2[r] = windowed_passage_time(2, cm, 2.0, x, y, substream_key(808, r),
                                      EndpointMode::ParticleEndpoints)
                    .cost;
        std::vector<double> y1{ell * std::sqrt(2.0), 0.0};
        t1[r] = std::pow(2.0, -alpha / 2.0) *
                windowed_passage_time(2, cm, 1.0, x, y1, substream_key(909, r),
                                      EndpointMode::ParticleEndpoints)
                    .cost;
    }
    const double gap = mean_of(t2) - mean_of(t1);
    const double se = std::sqrt(stderr_of(t2) * stderr_of(t2) + stderr_of(t1) * stderr_of(t1));
    CHECK(std::fabs(gap) <= 3.0 * se);
}
