#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "efpp/geometry.hpp"

namespace efpp {

/// Link-cost family phi: pure power t^alpha when h is infinite, otherwise the
/// truncation  phi(t) = t^alpha for t <= h,  h^alpha + alpha h^(alpha-1)(t-h)
/// for t > h.  alpha > 1 throughout.
struct CostModel {
    double alpha = 2.0;
    double h = std::numeric_limits<double>::infinity();

    CostModel() = default;
    CostModel(double alpha_, double h_);

    static CostModel power(double alpha_) { return CostModel(alpha_, std::numeric_limits<double>::infinity()); }
    static CostModel truncated(double alpha_, double h_) { return CostModel(alpha_, h_); }

    bool pure_power() const { return !std::isfinite(h); }

    double link_cost(double s) const;
    /// Inverse accessor: additive cost T -> D = T^(1/alpha).
    double d_root(double total_cost) const;
};

/// Sum of link costs over a point sequence (flat row-major, length >= 1).
double path_cost(const CostModel& cm, std::span<const double> pts, int d);

/// Relative slack applied to the lens inequality (see lens_contains).
inline constexpr double kLensSlack = 1e-12;

/// Membership of c in the lens W_phi(a,b) = {c : phi(|a-c|)+phi(|c-b|) <= phi(|a-b|)}.
/// Non-strict membership allows relative slack kLensSlack on the right side;
/// strict (interior) membership subtracts the same slack.
bool lens_contains(const CostModel& cm, Vec a, Vec b, Vec c, bool strict);

struct Ball {
    std::vector<double> center;
    double radius = 0.0;
    bool contains(Vec x) const { return dist(Vec(center), x) <= radius; }
};

/// Ball guaranteed to contain W_phi(a,b): membership forces |a-c| <= |a-b| and
/// |b-c| <= |a-b|, so the lens sits inside B(midpoint, sqrt(3)/2 |a-b|).
Ball lens_bounding_ball(const CostModel& cm, Vec a, Vec b);

struct LensViolation {
    std::string check;
    std::vector<double> witness; // flattened tuple that failed
};

struct LensPropertyReport {
    std::uint64_t trials = 0;
    std::uint64_t convexity_checked = 0;
    std::uint64_t scaling_monotone_checked = 0;
    std::uint64_t quad_ineq_checked = 0;   // phi^2(|a-c|) <= 2^(2a)(phi^2+phi^2)
    std::uint64_t excess_ineq_checked = 0; // phi(|a-c|)-phi(|a-b|)-phi(|b-c|) <= 2^a h^a
    std::uint64_t tube_containment_checked = 0;
    std::vector<LensViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Randomized verification of the deterministic lens lemmas: convexity of
/// W_phi, monotone containment under the pure power, the two phi inequalities
/// with constants 2^(2 alpha) and 2^alpha h^alpha, and containment of the
/// radius-E tube around the middle half of [a,b] once h and |a-b| exceed
/// h0 = max(8E, 4E/C), C = min((alpha-1)/(2 alpha), 2^(-1/alpha) - 1/2,
/// 2^(-1/alpha)(1+alpha)^(1/alpha) - 1).
LensPropertyReport lens_property_report(const CostModel& cm, std::uint64_t trials, std::uint64_t seed,
                                        double tube_E = 1.0);

/// The h0 threshold above.
double lens_tube_h0(double alpha, double E);

} // namespace efpp
