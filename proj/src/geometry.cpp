#include "efpp/geometry.hpp"

namespace efpp {

// Closest-point parameters between segments a+s(b-a), c+t(e-c), s,t in [0,1].
// Standard clamped solve of the 2x2 system; degenerate segments fall back to
// point-segment distances.
double segment_segment_distance(Vec a, Vec b, Vec c, Vec e) {
    const std::size_t d = a.size();
    std::vector<double> u(d), v(d), w(d);
    for (std::size_t i = 0; i < d; ++i) {
        u[i] = b[i] - a[i];
        v[i] = e[i] - c[i];
        w[i] = a[i] - c[i];
    }
    const double A = dot(u, u);
    const double B = dot(u, v);
    const double C = dot(v, v);
    const double D = dot(u, w);
    const double E = dot(v, w);

    if (A == 0.0 && C == 0.0) return dist(a, c);
    if (A == 0.0) return segment_distance(a, c, e);
    if (C == 0.0) return segment_distance(c, a, b);

    const double den = A * C - B * B;
    double s = 0.0;
    if (den > 0.0) s = std::clamp((B * E - C * D) / den, 0.0, 1.0);
    double t = B > 0.0 || E != 0.0 ? (B * s + E) / C : 0.0;

    if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-D / A, 0.0, 1.0);
    } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((B - D) / A, 0.0, 1.0);
    }

    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = w[i] + s * u[i] - t * v[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

FrameToE1::FrameToE1(std::span<const double> u) {
    const std::size_t d = u.size();
    // v = u - e1; if |v| ~ 0 the frame is the identity.
    std::vector<double> v(u.begin(), u.end());
    v[0] -= 1.0;
    double vv = dot(v, v);
    if (vv > 1e-28) {
        v_ = std::move(v);
        inv_half_vv_ = 2.0 / vv;
    }
    (void)d;
}

void FrameToE1::apply(Vec x, std::span<double> out) const {
    if (v_.empty()) {
        std::copy(x.begin(), x.end(), out.begin());
        return;
    }
    const double proj = dot(Vec(v_), x) * inv_half_vv_;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - proj * v_[i];
}

} // namespace efpp
