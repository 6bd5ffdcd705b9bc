#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace efpp {

using Vec = std::span<const double>;

inline double dist_sq(Vec a, Vec b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(Vec a, Vec b) { return std::sqrt(dist_sq(a, b)); }

inline double dot(Vec a, Vec b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(Vec a) { return std::sqrt(dot(a, a)); }

/// Angle in [0, pi] between nonzero vectors.
inline double angle(Vec x, Vec y) {
    const double nx = norm(x), ny = norm(y);
    if (nx == 0.0 || ny == 0.0) throw std::invalid_argument("angle: zero vector");
    const double c = std::clamp(dot(x, y) / (nx * ny), -1.0, 1.0);
    return std::acos(c);
}

/// Cone test theta(x,y) <= eps; y = 0 counts as contained.
inline bool cone_contains(Vec x, double eps, Vec y) {
    if (norm(x) == 0.0) throw std::invalid_argument("cone_contains: zero axis");
    if (norm(y) == 0.0) return true;
    return angle(x, y) <= eps;
}

/// min over t in [0,1] of |p - (a + t (b-a))|.
inline double segment_distance(Vec p, Vec a, Vec b) {
    const std::size_t d = p.size();
    double ab2 = 0.0, ap_ab = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double e = b[i] - a[i];
        ab2 += e * e;
        ap_ab += (p[i] - a[i]) * e;
    }
    double t = ab2 > 0.0 ? std::clamp(ap_ab / ab2, 0.0, 1.0) : 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double q = a[i] + t * (b[i] - a[i]) - p[i];
        s += q * q;
    }
    return std::sqrt(s);
}

/// Distance between closed segments [a,b] and [c,e] in any dimension.
double segment_segment_distance(Vec a, Vec b, Vec c, Vec e);

/// Householder map taking the unit vector u to e1 (an isometry; identity when
/// u is already e1 to working precision).  apply() maps a vector into the
/// rotated frame.
class FrameToE1 {
public:
    explicit FrameToE1(std::span<const double> u);
    void apply(Vec x, std::span<double> out) const;

private:
    std::vector<double> v_; // empty => identity
    double inv_half_vv_ = 0.0;
};

} // namespace efpp
