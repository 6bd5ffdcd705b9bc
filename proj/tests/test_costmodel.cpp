#include <doctest.h>

#include <cmath>

#include "efpp/costmodel.hpp"
#include "efpp/rng.hpp"

using namespace efpp;

namespace {

double phi_direct(double alpha, double h, double t) {
    if (t <= h) return std::pow(t, alpha);
    return std::pow(h, alpha) + alpha * std::pow(h, alpha - 1.0) * (t - h);
}

} // namespace

TEST_CASE("link cost: power and truncated branches") {
    CHECK(CostModel::power(2.0).link_cost(3.0) == doctest::Approx(9.0));
    CHECK(CostModel::truncated(2.0, 2.0).link_cost(3.0) == doctest::Approx(8.0));
    CHECK(CostModel::power(1.7).link_cost(0.0) == 0.0);
    CHECK(CostModel::truncated(3.0, 1.0).link_cost(0.0) == 0.0);
    CHECK_THROWS_AS(CostModel::power(2.0).link_cost(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(CostModel(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(CostModel(2.0, 0.0), std::invalid_argument);
}

TEST_CASE("phi is monotone and convex") {
    Substream rng(2024, 0);
    for (int t = 0; t < 2000; ++t) {
        const double alpha = rng.uniform(1.01, 4.0);
        const double h = t % 2 ? rng.uniform(0.1, 5.0) : std::numeric_limits<double>::infinity();
        const CostModel cm(alpha, h);
        double s1 = rng.uniform(0.0, 10.0), s2 = rng.uniform(0.0, 10.0);
        if (s1 > s2) std::swap(s1, s2);
        const double f1 = cm.link_cost(s1), f2 = cm.link_cost(s2);
        CHECK(f1 <= f2 * (1.0 + 1e-12) + 1e-300);
        const double th = rng.next_uniform();
        const double mid = cm.link_cost(th * s1 + (1.0 - th) * s2);
        CHECK(mid <= (th * f1 + (1.0 - th) * f2) * (1.0 + 1e-12) + 1e-300);
    }
}

TEST_CASE("path cost") {
    const CostModel cm = CostModel::power(2.0);
    const std::vector<double> pts{0.0, 0.0, 1.0, 0.0, 1.0, 1.0};
    CHECK(path_cost(cm, pts, 2) == doctest::Approx(2.0));
    const std::vector<double> single{4.0, 5.0};
    CHECK(path_cost(cm, single, 2) == 0.0);
    CHECK_THROWS_AS(path_cost(cm, std::vector<double>{}, 2), std::invalid_argument);

    // random sequence equals term-by-term summation
    Substream rng(11, 0);
    std::vector<double> seq(12);
    for (double& v : seq) v = rng.uniform(-3.0, 3.0);
    const CostModel cm2(1.8, 1.3);
    double expect = 0.0;
    for (int i = 0; i + 1 < 6; ++i) {
        const double dx = seq[2 * i] - seq[2 * i + 2];
        const double dy = seq[2 * i + 1] - seq[2 * i + 3];
        expect += phi_direct(1.8, 1.3, std::hypot(dx, dy));
    }
    CHECK(path_cost(cm2, seq, 2) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("lens membership: alpha=2 is the Thales disk") {
    const CostModel cm = CostModel::power(2.0);
    const std::vector<double> a{0.0, 0.0}, b{4.0, 0.0};
    // center (2,0), radius 2
    CHECK(lens_contains(cm, a, b, std::vector<double>{2.0, 0.0}, true));
    CHECK(lens_contains(cm, a, b, std::vector<double>{2.0, 1.999999}, true));
    CHECK(lens_contains(cm, a, b, std::vector<double>{2.0, 2.0}, false));
    CHECK_FALSE(lens_contains(cm, a, b, std::vector<double>{2.0, 2.0001}, false));
    CHECK_FALSE(lens_contains(cm, a, b, std::vector<double>{-0.1, 0.0}, false));
    CHECK_THROWS_AS(lens_contains(cm, a, a, b, false), std::invalid_argument);
}

TEST_CASE("midpoint lies strictly inside for every cost model") {
    Substream rng(3, 0);
    for (int t = 0; t < 200; ++t) {
        const double alpha = rng.uniform(1.05, 4.0);
        const double h = t % 2 ? rng.uniform(0.2, 4.0) : std::numeric_limits<double>::infinity();
        const CostModel cm(alpha, h);
        std::vector<double> a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        std::vector<double> b{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        if (dist(Vec(a), Vec(b)) < 1e-6) continue;
        const std::vector<double> mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
        CHECK(lens_contains(cm, a, b, mid, true));
    }
}

TEST_CASE("lens membership agrees with the direct inequality") {
    Substream rng(4, 0);
    for (int t = 0; t < 1000; ++t) {
        const double alpha = rng.uniform(1.05, 4.0);
        const double h = t % 3 ? rng.uniform(0.2, 6.0) : std::numeric_limits<double>::infinity();
        const CostModel cm(alpha, h);
        std::vector<double> a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        std::vector<double> b{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        std::vector<double> c{rng.uniform(-7, 7), rng.uniform(-7, 7)};
        if (dist(Vec(a), Vec(b)) < 1e-6) continue;
        const double lhs = phi_direct(alpha, h, dist(Vec(a), Vec(c))) +
                           phi_direct(alpha, h, dist(Vec(c), Vec(b)));
        const double rhs = phi_direct(alpha, h, dist(Vec(a), Vec(b)));
        CHECK(lens_contains(cm, a, b, c, false) == (lhs <= rhs * (1.0 + 1e-12)));
        CHECK(lens_contains(cm, a, b, c, true) == (lhs < rhs * (1.0 - 1e-12)));
    }
}

TEST_CASE("strict interior implies strict cost improvement") {
    Substream rng(5, 0);
    const CostModel cm = CostModel::power(2.5);
    std::vector<double> a{0, 0}, b{3, 1};
    for (int t = 0; t < 500; ++t) {
        std::vector<double> c{rng.uniform(-1, 4), rng.uniform(-2, 3)};
        if (!lens_contains(cm, a, b, c, true)) continue;
        CHECK(cm.link_cost(dist(Vec(a), Vec(c))) + cm.link_cost(dist(Vec(c), Vec(b))) <
              cm.link_cost(dist(Vec(a), Vec(b))));
    }
}

TEST_CASE("lens bounding ball contains the lens") {
    const CostModel cm2 = CostModel::power(2.0);
    const std::vector<double> a{1.0, 1.0}, b{5.0, 1.0};
    const Ball ball = lens_bounding_ball(cm2, a, b);
    // Thales disk: center (3,1) radius 2
    CHECK(ball.contains(std::vector<double>{3.0, 3.0}));
    CHECK(ball.contains(std::vector<double>{1.0, 1.0}));

    const Ball swapped = lens_bounding_ball(cm2, b, a);
    CHECK(ball.center == swapped.center);
    CHECK(ball.radius == swapped.radius);

    Substream rng(6, 0);
    int members = 0;
    for (int t = 0; t < 4000 && members < 1000; ++t) {
        const double alpha = rng.uniform(1.05, 4.0);
        const double h = t % 2 ? rng.uniform(0.2, 6.0) : std::numeric_limits<double>::infinity();
        const CostModel cm(alpha, h);
        std::vector<double> c{rng.uniform(-1, 7), rng.uniform(-4, 6)};
        if (!lens_contains(cm, a, b, c, false)) continue;
        ++members;
        CHECK(lens_bounding_ball(cm, a, b).contains(c));
    }
    CHECK(members >= 100);
}

TEST_CASE("angle and cones") {
    const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, me1{-1.0, 0.0};
    CHECK(angle(e1, e1) == doctest::Approx(0.0));
    CHECK(angle(e1, me1) == doctest::Approx(3.14159265358979));
    CHECK(angle(e1, e2) == doctest::Approx(1.57079632679490));
    CHECK_THROWS_AS(angle(std::vector<double>{0.0, 0.0}, e1), std::invalid_argument);

    CHECK(cone_contains(e1, 0.1, std::vector<double>{5.0, 0.0}));
    CHECK_FALSE(cone_contains(e1, 0.1, e2));
    CHECK(cone_contains(e1, 0.1, std::vector<double>{0.0, 0.0})); // y = 0 convention

    Substream rng(7, 0);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        std::vector<double> y{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (norm(Vec(x)) < 1e-9 || norm(Vec(y)) < 1e-9) continue;
        const double eps = rng.uniform(0.0, 3.0);
        CHECK(cone_contains(x, eps, y) == (angle(x, y) <= eps));
    }
}

TEST_CASE("segment distance matches dense sampling") {
    const std::vector<double> a{0.0, 0.0}, b{2.0, 0.0};
    CHECK(segment_distance(std::vector<double>{1.0, 0.0}, a, b) == doctest::Approx(0.0));
    CHECK(segment_distance(a, a, b) == doctest::Approx(0.0));
    CHECK(segment_distance(std::vector<double>{1.0, 1.5}, a, b) == doctest::Approx(1.5));

    Substream rng(8, 0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> p{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        std::vector<double> u{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        std::vector<double> v{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        auto at = [&](double s) {
            const std::vector<double> q{u[0] + s * (v[0] - u[0]), u[1] + s * (v[1] - u[1])};
            return dist(Vec(p), Vec(q));
        };
        // dense grid, then ternary refinement around the best sample
        double best = std::numeric_limits<double>::infinity();
        int best_i = 0;
        for (int i = 0; i <= 4000; ++i) {
            const double f = at(static_cast<double>(i) / 4000.0);
            if (f < best) {
                best = f;
                best_i = i;
            }
        }
        double lo = std::max(0.0, (best_i - 1) / 4000.0), hi = std::min(1.0, (best_i + 1) / 4000.0);
        for (int it = 0; it < 100; ++it) {
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            if (at(m1) <= at(m2))
                hi = m2;
            else
                lo = m1;
        }
        best = std::min(best, at(0.5 * (lo + hi)));
        CHECK(std::fabs(segment_distance(p, u, v) - best) <= 1e-6);
    }
}

TEST_CASE("segment-segment distance sanity") {
    const std::vector<double> a{0, 0}, b{2, 0}, c{1, -1}, d{1, 1};
    CHECK(segment_segment_distance(a, b, c, d) == doctest::Approx(0.0));
    const std::vector<double> e{0, 1}, f{2, 1};
    CHECK(segment_segment_distance(a, b, e, f) == doctest::Approx(1.0));
    const std::vector<double> g{3, 0}, h{4, 0};
    CHECK(segment_segment_distance(a, b, g, h) == doctest::Approx(1.0));
}

TEST_CASE("pure-power lens scales: c in W(0,e1) iff l c in W(0, l e1)") {
    Substream rng(14, 0);
    for (int t = 0; t < 500; ++t) {
        const CostModel cm = CostModel::power(rng.uniform(1.05, 4.0));
        const double l = rng.uniform(0.1, 20.0);
        const std::vector<double> zero{0.0, 0.0}, e1{1.0, 0.0}, le1{l, 0.0};
        const std::vector<double> c{rng.uniform(-0.5, 1.5), rng.uniform(-1.0, 1.0)};
        const std::vector<double> lc{l * c[0], l * c[1]};
        CHECK(lens_contains(cm, zero, e1, c, false) == lens_contains(cm, zero, le1, lc, false));
    }
}

TEST_CASE("lens property report: zero violations across the phi family") {
    for (double alpha : {1.5, 2.0, 3.0}) {
        for (double h : {2.5, std::numeric_limits<double>::infinity()}) {
            const CostModel cm(alpha, h);
            const LensPropertyReport rep = lens_property_report(cm, 2000, 77);
            CHECK(rep.ok());
            CHECK(rep.quad_ineq_checked > 0);
            CHECK(rep.convexity_checked > 0);
            if (cm.pure_power()) CHECK(rep.scaling_monotone_checked > 0);
        }
    }
    CHECK_THROWS_AS(lens_property_report(CostModel::power(2.0), 0, 1), std::invalid_argument);
}

TEST_CASE("tube of radius E sits inside the lens above the h0 threshold") {
    // alpha = 2, E = 1, h = |a-b| = 10 h0: phi is the pure square on the
    // relevant range, so the lens is the Thales disk.
    const double E = 1.0;
    const double h0 = lens_tube_h0(2.0, E);
    const double ell = 10.0 * h0;
    const CostModel cm = CostModel::truncated(2.0, ell);
    const std::vector<double> a{0.0, 0.0}, b{ell, 0.0};
    Substream rng(9, 0);
    for (int t = 0; t < 500; ++t) {
        const double s = rng.uniform(0.25, 0.75);
        const double angle_t = rng.uniform(0.0, 6.2831853);
        const double r = E * std::sqrt(rng.next_uniform());
        const std::vector<double> c{s * ell + r * std::cos(angle_t), r * std::sin(angle_t)};
        CHECK(lens_contains(cm, a, b, c, false));
        // Thales disk membership, directly
        const double cx = c[0] - ell / 2.0;
        CHECK(cx * cx + c[1] * c[1] <= (ell / 2.0) * (ell / 2.0) * (1.0 + 1e-12));
    }
}
