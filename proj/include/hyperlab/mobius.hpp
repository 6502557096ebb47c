#pragma once

#include <array>
#include <cmath>
#include <complex>

#include "hyperlab/common.hpp"

namespace hyperlab {

// z -> (a z + b)/(c z + d), kept at determinant 1.
struct Mobius {
    cplx a{1.0}, b{0.0}, c{0.0}, d{1.0};

    static Mobius identity() { return {}; }

    cplx apply(cplx z) const { return (a * z + b) / (c * z + d); }
    cplx derivative(cplx z) const {
        cplx den = c * z + d;
        return 1.0 / (den * den);
    }
    Mobius inverse() const { return {d, -b, -c, a}; }
    cplx trace() const { return a + d; }
    cplx det() const { return a * d - b * c; }

    Mobius operator*(const Mobius& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }

    Mobius normalized() const {
        cplx s = std::sqrt(det());
        return {a / s, b / s, c / s, d / s};
    }

    // unit tangent direction angle transported by the map
    double push_angle(cplx z, double theta) const {
        return wrap_angle(theta + std::arg(derivative(z)));
    }

    // translation length for a hyperbolic element (disk or half-plane form)
    double translation_length() const {
        double t = std::abs(trace().real());
        return t > 2.0 ? 2.0 * std::acosh(t / 2.0) : 0.0;
    }

    static Mobius rotation(double phi) {
        return {std::polar(1.0, phi / 2), 0.0, 0.0, std::polar(1.0, -phi / 2)};
    }
    // hyperbolic translation by tau along the real diameter
    static Mobius axis_translation(double tau) {
        double ch = std::cosh(tau / 2), sh = std::sinh(tau / 2);
        return {ch, sh, sh, ch};
    }
    // disk automorphism sending 0 to p with derivative (1-|p|^2) > 0 at 0
    static Mobius translate_to(cplx p) {
        double s = 1.0 / std::sqrt(1.0 - std::norm(p));
        return {s, s * p, s * std::conj(p), s};
    }
    // real SL(2) matrix acting on the upper half-plane, conjugated to the disk
    // via w -> (w - i)/(w + i)
    static Mobius from_halfplane(const std::array<double, 4>& m) {
        const cplx I(0, 1);
        Mobius C{1.0, -I, 1.0, I};
        Mobius Ci = C.inverse();
        Mobius H{m[0], m[1], m[2], m[3]};
        return (C * H * Ci).normalized();
    }
    std::array<double, 4> to_halfplane() const {
        const cplx I(0, 1);
        Mobius C{1.0, -I, 1.0, I};
        Mobius H = (C.inverse() * (*this) * C).normalized();
        if (H.a.real() < 0 || (H.a.real() == 0 && H.b.real() < 0))
            H = {-H.a, -H.b, -H.c, -H.d};
        return {H.a.real(), H.b.real(), H.c.real(), H.d.real()};
    }
};

// hyperbolic distance in the unit disk for curvature -1
inline double disk_distance(cplx z, cplx w) {
    double q = std::abs(z - w) / std::abs(1.0 - std::conj(w) * z);
    return 2.0 * std::atanh(std::min(q, 1.0 - 1e-17));
}

// cosh of the disk distance, accurate for far-apart points
inline double disk_cosh_distance(cplx z, cplx w) {
    return 1.0 + 2.0 * std::norm(z - w) / ((1.0 - std::norm(z)) * (1.0 - std::norm(w)));
}

// Endpoints on the unit circle of the axis of a hyperbolic disk element:
// first is repelling, second attracting.
inline std::array<cplx, 2> axis_endpoints(const Mobius& m) {
    cplx A = m.c, B = m.d - m.a, C = -m.b;
    cplx disc = std::sqrt(B * B - 4.0 * A * C);
    cplx z1 = (-B + disc) / (2.0 * A), z2 = (-B - disc) / (2.0 * A);
    if (std::abs(A) < 1e-300) { z1 = 1.0; z2 = -1.0; }
    // attracting point has |derivative| < 1
    if (std::abs(m.derivative(z1)) < 1.0) return {z2, z1};
    return {z1, z2};
}

// Point on the geodesic between two circle points closest to the origin,
// together with the direction angle pointing toward the second endpoint.
inline std::pair<cplx, double> geodesic_foot_from_origin(cplx from, cplx to) {
    cplx mid = from + to;
    double theta;
    cplx foot;
    if (std::abs(mid) < 1e-14) {
        foot = 0.0;
        theta = std::arg(to);
    } else {
        // circle orthogonal to the unit circle through both endpoints
        cplx u = mid / std::abs(mid);
        double cos_half = std::abs(mid) / 2.0;  // cos of half the angular gap
        double s = std::sqrt(1.0 - cos_half * cos_half);
        double dist = (1.0 - s) / cos_half;  // Euclidean distance of foot from 0
        foot = u * dist;
        // tangent at foot is perpendicular to u, orient toward `to`
        cplx tan = u * cplx(0, 1);
        if (std::real(std::conj(tan) * (to - from)) < 0) tan = -tan;
        theta = std::arg(tan);
    }
    return {foot, wrap_angle(theta)};
}

}  // namespace hyperlab
