#pragma once
// Small fixed-capacity vector for 2-D/3-D geometry. The ambient dimension is a
// runtime scene parameter restricted to {2,3}; vectors are stored zero-padded
// in three doubles so dot products and norms are dimension-agnostic.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace nfr {

struct Vec {
    std::array<double, 3> c{0.0, 0.0, 0.0};

    constexpr Vec() = default;
    constexpr Vec(double x, double y) : c{x, y, 0.0} {}
    constexpr Vec(double x, double y, double z) : c{x, y, z} {}

    constexpr double operator[](std::size_t i) const { return c[i]; }
    constexpr double& operator[](std::size_t i) { return c[i]; }

    constexpr Vec operator+(const Vec& r) const { return {c[0] + r.c[0], c[1] + r.c[1], c[2] + r.c[2]}; }
    constexpr Vec operator-(const Vec& r) const { return {c[0] - r.c[0], c[1] - r.c[1], c[2] - r.c[2]}; }
    constexpr Vec operator*(double s) const { return {c[0] * s, c[1] * s, c[2] * s}; }
    constexpr Vec operator/(double s) const { return {c[0] / s, c[1] / s, c[2] / s}; }
    constexpr Vec operator-() const { return {-c[0], -c[1], -c[2]}; }
    Vec& operator+=(const Vec& r) { c[0] += r.c[0]; c[1] += r.c[1]; c[2] += r.c[2]; return *this; }
    Vec& operator-=(const Vec& r) { c[0] -= r.c[0]; c[1] -= r.c[1]; c[2] -= r.c[2]; return *this; }
    Vec& operator*=(double s) { c[0] *= s; c[1] *= s; c[2] *= s; return *this; }
    constexpr bool operator==(const Vec& r) const { return c == r.c; }
};

inline constexpr Vec operator*(double s, const Vec& v) { return v * s; }

inline constexpr double dot(const Vec& a, const Vec& b) {
    return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}

inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }
inline constexpr double norm2(const Vec& v) { return dot(v, v); }

inline Vec normalized(const Vec& v) {
    double n = norm(v);
    return {v.c[0] / n, v.c[1] / n, v.c[2] / n};
}

inline constexpr Vec cross(const Vec& a, const Vec& b) {
    return {a.c[1] * b.c[2] - a.c[2] * b.c[1],
            a.c[2] * b.c[0] - a.c[0] * b.c[2],
            a.c[0] * b.c[1] - a.c[1] * b.c[0]};
}

/// Unit vector along the vertical coordinate axis (the last of the n axes).
inline constexpr Vec vertical_axis(int n) { return n == 2 ? Vec{0.0, 1.0} : Vec{0.0, 0.0, 1.0}; }

/// Vertical component of v (coordinate n-1).
inline constexpr double vertical(const Vec& v, int n) { return v.c[static_cast<std::size_t>(n - 1)]; }

/// Horizontal part of v (the first n-1 coordinates, zero-padded).
inline constexpr Vec horizontal(const Vec& v, int n) {
    Vec h = v;
    h.c[static_cast<std::size_t>(n - 1)] = 0.0;
    if (n == 2) h.c[2] = 0.0;
    return h;
}

inline double horizontal_norm(const Vec& v, int n) { return norm(horizontal(v, n)); }

/// Orthonormal basis of the tangent space at a unit vector x0 (n-1 vectors).
inline std::vector<Vec> tangent_basis(const Vec& x0, int n) {
    if (n == 2) return {Vec{-x0[1], x0[0]}};
    Vec seed = std::abs(x0[0]) < 0.9 ? Vec{1.0, 0.0, 0.0} : Vec{0.0, 1.0, 0.0};
    Vec t1 = normalized(seed - dot(seed, x0) * x0);
    Vec t2 = cross(x0, t1);
    return {t1, t2};
}

/// Component of v orthogonal to the unit vector u.
inline Vec reject(const Vec& v, const Vec& u) { return v - dot(v, u) * u; }

/// Rotate the unit vector x by angle `ang` toward the unit tangent t (t orthogonal to x).
/// Stays on the unit sphere; this is the geodesic step used for sphere sampling.
inline Vec geodesic_step(const Vec& x, const Vec& t, double ang) {
    return x * std::cos(ang) + t * std::sin(ang);
}

/// Point on the geodesic from a to b at parameter s in [0,1] (unit vectors, a != -b).
inline Vec slerp(const Vec& a, const Vec& b, double s) {
    double cosang = std::clamp(dot(a, b), -1.0, 1.0);
    double ang = std::acos(cosang);
    if (ang < 1e-14) return normalized(a + s * (b - a));
    double sa = std::sin((1.0 - s) * ang), sb = std::sin(s * ang);
    return normalized((a * sa + b * sb) / std::sin(ang));
}

}  // namespace nfr
