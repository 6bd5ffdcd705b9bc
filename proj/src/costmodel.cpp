#include "efpp/costmodel.hpp"

#include <cmath>
#include <stdexcept>

#include "efpp/rng.hpp"

namespace efpp {

CostModel::CostModel(double alpha_, double h_) : alpha(alpha_), h(h_) {
    if (!(alpha > 1.0)) throw std::invalid_argument("CostModel: alpha must exceed 1");
    if (!(h > 0.0)) throw std::invalid_argument("CostModel: h must be positive");
}

double CostModel::link_cost(double s) const {
    if (s < 0.0) throw std::invalid_argument("link_cost: negative length");
    if (alpha == 2.0 && s <= h) return s * s;
    if (s <= h) return std::pow(s, alpha);
    return std::pow(h, alpha) + alpha * std::pow(h, alpha - 1.0) * (s - h);
}

double CostModel::d_root(double total_cost) const {
    if (total_cost < 0.0) throw std::invalid_argument("d_root: negative cost");
    return std::pow(total_cost, 1.0 / alpha);
}

double path_cost(const CostModel& cm, std::span<const double> pts, int d) {
    if (pts.empty() || pts.size() % d != 0) throw std::invalid_argument("path_cost: bad sequence");
    const std::size_t n = pts.size() / d;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Vec a(pts.data() + i * d, d);
        const Vec b(pts.data() + (i + 1) * d, d);
        total += cm.link_cost(dist(a, b));
    }
    return total;
}

bool lens_contains(const CostModel& cm, Vec a, Vec b, Vec c, bool strict) {
    const double ab = dist(a, b);
    if (ab == 0.0) throw std::invalid_argument("lens_contains: a == b");
    const double lhs = cm.link_cost(dist(a, c)) + cm.link_cost(dist(c, b));
    const double rhs = cm.link_cost(ab);
    if (strict) return lhs < rhs * (1.0 - kLensSlack);
    return lhs <= rhs * (1.0 + kLensSlack);
}

Ball lens_bounding_ball(const CostModel& cm, Vec a, Vec b) {
    (void)cm; // the containment argument only uses monotonicity of phi
    const double ab = dist(a, b);
    if (ab == 0.0) throw std::invalid_argument("lens_bounding_ball: a == b");
    Ball ball;
    ball.center.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) ball.center[i] = 0.5 * (a[i] + b[i]);
    ball.radius = 0.5 * std::sqrt(3.0) * ab;
    return ball;
}

double lens_tube_h0(double alpha, double E) {
    const double c1 = (alpha - 1.0) / (2.0 * alpha);
    const double c2 = std::pow(2.0, -1.0 / alpha) - 0.5;
    const double c3 = std::pow(2.0, -1.0 / alpha) * std::pow(1.0 + alpha, 1.0 / alpha) - 1.0;
    const double C = std::min({c1, c2, c3});
    return std::max(8.0 * E, 4.0 * E / C);
}

namespace {

// Random point of the unit ball in R^d.
void unit_ball_point(Substream& rng, int d, std::vector<double>& out) {
    out.resize(d);
    double n2 = 0.0;
    for (int j = 0; j < d; ++j) {
        out[j] = rng.next_normal();
        n2 += out[j] * out[j];
    }
    const double r = std::pow(rng.next_uniform(), 1.0 / d) / std::sqrt(std::max(n2, 1e-300));
    for (int j = 0; j < d; ++j) out[j] *= r;
}

// Rejection-samples a member of W_phi(a, b) from the bounding ball; returns
// false if none found in a bounded number of draws (possible only for thin
// lenses; the caller just skips the trial).
bool sample_lens_member(const CostModel& cm, Vec a, Vec b, Substream& rng,
                        std::vector<double>& out) {
    const Ball ball = lens_bounding_ball(cm, a, b);
    std::vector<double> u;
    for (int attempt = 0; attempt < 64; ++attempt) {
        unit_ball_point(rng, static_cast<int>(a.size()), u);
        out.resize(a.size());
        for (std::size_t j = 0; j < a.size(); ++j) out[j] = ball.center[j] + ball.radius * u[j];
        if (lens_contains(cm, a, b, Vec(out), false)) return true;
    }
    return false;
}

void record(LensPropertyReport& rep, const char* check, std::initializer_list<Vec> tuple) {
    LensViolation v;
    v.check = check;
    for (Vec t : tuple) v.witness.insert(v.witness.end(), t.begin(), t.end());
    rep.violations.push_back(std::move(v));
}

} // namespace

LensPropertyReport lens_property_report(const CostModel& cm, std::uint64_t trials,
                                        std::uint64_t seed, double tube_E) {
    if (trials < 1) throw std::invalid_argument("lens_property_report: trials >= 1");
    LensPropertyReport rep;
    rep.trials = trials;
    Substream rng(seed, 0);
    const int d = 2 + static_cast<int>(rng.next_below(2)); // mix of d = 2 and 3

    std::vector<double> a(d), b(d), c(d), c2(d), mix(d), p(d), off;
    for (std::uint64_t t = 0; t < trials; ++t) {
        for (int j = 0; j < d; ++j) {
            a[j] = rng.uniform(-10.0, 10.0);
            b[j] = rng.uniform(-10.0, 10.0);
            c[j] = rng.uniform(-10.0, 10.0);
        }
        if (dist(Vec(a), Vec(b)) < 1e-9) continue;

        // the quadratic and excess inequalities hold for arbitrary triples
        {
            const double pac = cm.link_cost(dist(Vec(a), Vec(c)));
            const double pab = cm.link_cost(dist(Vec(a), Vec(b)));
            const double pbc = cm.link_cost(dist(Vec(b), Vec(c)));
            const double bound = std::pow(2.0, 2.0 * cm.alpha) * (pab * pab + pbc * pbc);
            rep.quad_ineq_checked++;
            if (pac * pac > bound * (1.0 + 1e-9))
                record(rep, "phi2_quad", {Vec(a), Vec(b), Vec(c)});
            if (std::isfinite(cm.h)) {
                rep.excess_ineq_checked++;
                const double excess = pac - pab - pbc;
                const double cap = std::pow(2.0, cm.alpha) * std::pow(cm.h, cm.alpha);
                if (excess > cap * (1.0 + 1e-9) + 1e-12)
                    record(rep, "phi_excess", {Vec(a), Vec(b), Vec(c)});
            }
        }

        // Convexity of the lens region.
        std::vector<double> m1, m2;
        if (sample_lens_member(cm, Vec(a), Vec(b), rng, m1) &&
            sample_lens_member(cm, Vec(a), Vec(b), rng, m2)) {
            const double th = rng.next_uniform();
            for (int j = 0; j < d; ++j) mix[j] = th * m1[j] + (1.0 - th) * m2[j];
            rep.convexity_checked++;
            if (!lens_contains(cm, Vec(a), Vec(b), Vec(mix), false))
                record(rep, "convexity", {Vec(a), Vec(b), Vec(mix)});
        }

        // Pure power only: W(0, l' e1) subset W(0, l e1) for l' < l, checked
        // pointwise through the scaling map.
        if (cm.pure_power()) {
            const double l = rng.uniform(0.5, 10.0);
            const double lp = l * rng.uniform(0.05, 0.999);
            std::vector<double> zero(d, 0.0), le(d, 0.0), lpe(d, 0.0);
            le[0] = l;
            lpe[0] = lp;
            std::vector<double> member;
            if (sample_lens_member(cm, Vec(zero), Vec(lpe), rng, member)) {
                rep.scaling_monotone_checked++;
                if (!lens_contains(cm, Vec(zero), Vec(le), Vec(member), false))
                    record(rep, "containment_monotone", {Vec(zero), Vec(le), Vec(member)});
            }
        }

        // tube containment: H_E(a,b) sits inside W_phi(a,b) once h, |a-b| > h0
        if (std::isfinite(cm.h)) {
            const double h0 = lens_tube_h0(cm.alpha, tube_E);
            if (cm.h > h0) {
                const double l = rng.uniform(h0 * 1.0000001, h0 * 10.0);
                for (int j = 0; j < d; ++j) {
                    a[j] = rng.uniform(-5.0, 5.0);
                    b[j] = a[j];
                }
                // random direction via normal vector
                double n2 = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double g = rng.next_normal();
                    c[j] = g;
                    n2 += g * g;
                }
                const double inv = 1.0 / std::sqrt(std::max(n2, 1e-300));
                for (int j = 0; j < d; ++j) b[j] = a[j] + l * c[j] * inv;
                const double s = rng.uniform(0.25, 0.75);
                for (int j = 0; j < d; ++j) p[j] = a[j] + s * (b[j] - a[j]);
                unit_ball_point(rng, d, off);
                for (int j = 0; j < d; ++j) p[j] += tube_E * off[j];
                rep.tube_containment_checked++;
                if (!lens_contains(cm, Vec(a), Vec(b), Vec(p), false))
                    record(rep, "tube_containment", {Vec(a), Vec(b), Vec(p)});
            }
        }
    }
    return rep;
}

} // namespace efpp
