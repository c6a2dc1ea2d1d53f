#pragma once
// Descartes oval kernel. An oval O(Y,b) = {X : |X| + kappa |X - Y| = b} with
// kappa |Y| < b < |Y| refracts rays issued from the origin into the focus Y.
// This header evaluates the polar radius of the oval, the supporting-oval
// function h built from a surface point, the auxiliary B/C/Delta scalars, and
// first/second derivatives of h in the direction and focus variables. All
// functions are pure; domain violations throw the typed errors in errors.hpp.

#include <array>
#include <cmath>

#include "config.hpp"
#include "errors.hpp"
#include "vec.hpp"

namespace nfr {

struct OvalParams {
    Vec focus;     // Y
    double b = 0;  // oval constant, length units
    double kappa = 0;
};

/// Scalars of the radius formula: h = B - sqrt(B^2 - C), Delta = (1-k^2)^2 (B^2 - C).
struct OvalScalars {
    double B = 0;
    double C = 0;
    double Delta = 0;
};

inline void validate_oval(const OvalParams& o) {
    if (!(o.kappa > 0.0 && o.kappa < 1.0))
        throw InvalidOval("kappa must lie in (0,1)");
    double ay = norm(o.focus);
    if (!(o.kappa * ay < o.b && o.b < ay))
        throw InvalidOval("oval constant must satisfy kappa|Y| < b < |Y|");
}

/// Discriminant Delta(t) = (b - k^2 t)^2 - (1-k^2)(b^2 - k^2 |Y|^2) as a function
/// of t = x . Y. Equals k^2 ((b-t)^2 + (1-k^2)(|Y|^2 - t^2)).
inline double oval_delta_of_t(double t, double b, double y2, double kappa) {
    double k2 = kappa * kappa;
    double p = b - k2 * t;
    return p * p - (1.0 - k2) * (b * b - k2 * y2);
}

namespace detail {

struct RadiusParts {
    double P;      // b - k^2 x.Y
    double Delta;  // discriminant at t = x.Y
    double C2;     // b^2 - k^2 |Y|^2
};

inline RadiusParts radius_parts(const Vec& x, const Vec& Y, double b, double kappa) {
    double k2 = kappa * kappa;
    double t = dot(x, Y);
    double P = b - k2 * t;
    double C2 = b * b - k2 * norm2(Y);
    return {P, P * P - (1.0 - k2) * C2, C2};
}

}  // namespace detail

/// Polar radius rho(x,Y,b) of the oval: the minus branch of the quadratic, i.e.
/// the inner sheet met first by the ray from the origin. The plus branch is
/// never used. Throws NegativeDiscriminant when the direction (possibly with
/// |x| > 1, see the extended-domain estimates) leaves the admissible region.
/// If `tiny_delta` is non-null it is set when 0 < Delta < Tolerances::tiny_delta,
/// which signals an inadmissible scene rather than a computation failure.
inline double oval_radius(const Vec& x, const OvalParams& o, bool* tiny_delta = nullptr) {
    validate_oval(o);
    auto parts = detail::radius_parts(x, o.focus, o.b, o.kappa);
    if (parts.Delta < 0.0)
        throw NegativeDiscriminant("oval radius: discriminant negative");
    if (tiny_delta) *tiny_delta = parts.Delta < default_tolerances().tiny_delta;
    // Algebraically (P - sqrt(Delta)) / (1-k^2); this form avoids cancellation.
    return parts.C2 / (parts.P + std::sqrt(parts.Delta));
}

/// Oval constant of the oval with focus Y passing through the surface point X0.
inline double oval_b_through(const Vec& Y, const Vec& X0, double kappa) {
    return norm(X0) + kappa * norm(X0 - Y);
}

/// Cosine the refraction condition compares with kappa: (X0/|X0|) . (Y-X0)/|Y-X0|.
inline double refraction_cosine(const Vec& Y, const Vec& X0) {
    return dot(normalized(X0), normalized(Y - X0));
}

/// h(x,Y,X0) = rho(x,Y,b) with b = |X0| + kappa |X0 - Y|: the radius of the
/// supporting oval with focus Y through X0. Requires the refraction condition
/// at X0; satisfies h(x0,Y,X0) = |X0| at x0 = X0/|X0| and is bounded below by
/// (b - kappa|Y|)/(1 + kappa) over the whole sphere.
inline double h_value(const Vec& x, const Vec& Y, const Vec& X0, double kappa,
                      bool* tiny_delta = nullptr) {
    if (refraction_cosine(Y, X0) < kappa)
        throw RefractionConditionViolated("h: refraction condition fails at X0");
    return oval_radius(x, OvalParams{Y, oval_b_through(Y, X0, kappa), kappa}, tiny_delta);
}

/// B/C scalars of h at (x,Y,X0), using the decomposition Y = X0 + s m.
inline OvalScalars bc_scalars(const Vec& x, const Vec& Y, const Vec& X0, double kappa) {
    Vec d = Y - X0;
    if (norm(d) <= 0.0)
        throw DegenerateDecomposition("bc_scalars: Y coincides with X0");
    double k2 = kappa * kappa;
    double b = oval_b_through(Y, X0, kappa);
    OvalScalars s;
    s.B = (b - k2 * dot(x, Y)) / (1.0 - k2);
    s.C = (b * b - k2 * norm2(Y)) / (1.0 - k2);
    s.Delta = oval_delta_of_t(dot(x, Y), b, norm2(Y), kappa);
    return s;
}

/// f(B,C) = B - sqrt(B^2 - C) on {0 <= C <= B^2, B >= 0}.
inline double f_BC(double B, double C) {
    if (C > B * B)
        throw DomainError("f_BC: C exceeds B^2");
    if (B < 0.0)
        throw DomainError("f_BC: negative B");
    return C <= 0.0 ? B - std::sqrt(B * B - C) : C / (B + std::sqrt(B * B - C));
}

/// Upper bound for f(B,C) when C - Cbar <= 2 (B - Bbar) f(Bbar,Cbar) - E:
/// returns f(Bbar,Cbar) - E / (B + sqrt(B^2-C) - f(Bbar,Cbar)).
inline double slack_update(double Bbar, double Cbar, double B, double C, double E) {
    if (E < 0.0)
        throw DomainError("slack_update: negative slack");
    double fbar = f_BC(Bbar, Cbar);
    if (fbar > B)
        throw DomainError("slack_update: requires f(Bbar,Cbar) <= B");
    if (C > B * B)
        throw DomainError("slack_update: C exceeds B^2");
    return fbar - E / (B + std::sqrt(B * B - C) - fbar);
}

struct Mat {
    std::array<std::array<double, 3>, 3> m{};
    double operator()(int i, int j) const { return m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
    double& operator()(int i, int j) { return m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
};

inline double max_abs_entry(const Mat& a) {
    double r = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r = std::max(r, std::abs(a(i, j)));
    return r;
}

namespace detail {

inline void require_positive_delta(double Delta) {
    if (Delta <= 0.0)
        throw NegativeDiscriminant("derivative of h: discriminant not positive");
}

}  // namespace detail

/// Gradient of h in x:  dh/dx_i = k^2 h Y_i / sqrt(Delta(x.Y)).
inline Vec grad_h_x(const Vec& x, const Vec& Y, const Vec& X0, double kappa) {
    double b = oval_b_through(Y, X0, kappa);
    auto parts = detail::radius_parts(x, Y, b, kappa);
    detail::require_positive_delta(parts.Delta);
    double h = parts.C2 / (parts.P + std::sqrt(parts.Delta));
    double k2 = kappa * kappa;
    return Y * (k2 * h / std::sqrt(parts.Delta));
}

/// Hessian of h in x: a rank-one matrix proportional to the outer product Y x Y,
/// d2h/dx_j dx_i = k^4 h Y_i Y_j Delta^{-1} (1 + (b - k^2 x.Y)/sqrt(Delta)).
inline Mat hess_h_x(const Vec& x, const Vec& Y, const Vec& X0, double kappa) {
    double b = oval_b_through(Y, X0, kappa);
    auto parts = detail::radius_parts(x, Y, b, kappa);
    detail::require_positive_delta(parts.Delta);
    double sq = std::sqrt(parts.Delta);
    double h = parts.C2 / (parts.P + sq);
    double k2 = kappa * kappa;
    double scale = k2 * k2 * h / parts.Delta * (1.0 + parts.P / sq);
    Mat out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out(i, j) = scale * Y[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(j)];
    return out;
}

namespace detail {

/// d b / dY_k = -kappa (X0 - Y)_k / |X0 - Y|.
inline Vec grad_b_Y(const Vec& Y, const Vec& X0, double kappa) {
    Vec d = X0 - Y;
    double nd = norm(d);
    if (nd <= 0.0)
        throw DegenerateDecomposition("grad of b: Y coincides with X0");
    return d * (-kappa / nd);
}

/// Total derivative of Delta(x.Y, b(Y), |Y|) in Y_k.
inline Vec grad_delta_Y(const Vec& x, const Vec& Y, const Vec& X0, double kappa, double b, double P) {
    double k2 = kappa * kappa;
    Vec db = grad_b_Y(Y, X0, kappa);
    Vec out;
    for (std::size_t k = 0; k < 3; ++k)
        out[k] = 2.0 * P * (db[k] - k2 * x[k]) - (1.0 - k2) * (2.0 * b * db[k] - 2.0 * k2 * Y[k]);
    return out;
}

}  // namespace detail

/// Gradient of h in the focus Y. Vanishes at x = x0 = X0/|X0| since
/// h(x0, Y, X0) = |X0| for every admissible Y.
inline Vec grad_h_Y(const Vec& x, const Vec& Y, const Vec& X0, double kappa) {
    double b = oval_b_through(Y, X0, kappa);
    auto parts = detail::radius_parts(x, Y, b, kappa);
    detail::require_positive_delta(parts.Delta);
    double k2 = kappa * kappa;
    Vec db = detail::grad_b_Y(Y, X0, kappa);
    Vec dDelta = detail::grad_delta_Y(x, Y, X0, kappa, b, parts.P);
    double inv_sq = 1.0 / std::sqrt(parts.Delta);
    Vec out;
    for (std::size_t k = 0; k < 3; ++k)
        out[k] = (db[k] - k2 * x[k] - 0.5 * inv_sq * dDelta[k]) / (1.0 - k2);
    return out;
}

/// Mixed second derivative d2h / dY_k dx_i (rows indexed by k, columns by i).
inline Mat mixed_h_Yx(const Vec& x, const Vec& Y, const Vec& X0, double kappa) {
    double b = oval_b_through(Y, X0, kappa);
    auto parts = detail::radius_parts(x, Y, b, kappa);
    detail::require_positive_delta(parts.Delta);
    double sq = std::sqrt(parts.Delta);
    double h = parts.C2 / (parts.P + sq);
    double k2 = kappa * kappa;
    Vec dh = grad_h_Y(x, Y, X0, kappa);
    Vec dDelta = detail::grad_delta_Y(x, Y, X0, kappa, b, parts.P);
    Mat out;
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < 3; ++i) {
            double yi = Y[static_cast<std::size_t>(i)];
            double v = k2 * dh[static_cast<std::size_t>(k)] * yi / sq;
            if (i == k) v += k2 * h / sq;
            v -= 0.5 * k2 * h * yi * dDelta[static_cast<std::size_t>(k)] / (parts.Delta * sq);
            out(k, i) = v;
        }
    }
    return out;
}

/// Tangential gradient at the unit direction x: grad_x h minus its radial part.
/// This is the surface gradient of the radial graph of the supporting oval.
inline Vec tangential_grad_h(const Vec& x, const Vec& Y, const Vec& X0, double kappa) {
    Vec g = grad_h_x(x, Y, X0, kappa);
    Vec xhat = normalized(x);
    return g - dot(g, xhat) * xhat;
}

struct DeltaBoundResult {
    double min_value = 0;
    bool passes = false;
    double argmin_t = 0;
};

/// Minimum of Delta(x . Y) over the extended ball |x| <= 1 + epsilon, in closed
/// form: Delta is a convex parabola in t = x.Y with vertex at b/kappa^2, so the
/// minimum over the admissible t-interval sits at the clamped vertex. Reports
/// whether the minimum is positive (no error is thrown for non-positive minima).
inline DeltaBoundResult delta_lower_bound_check(const Vec& Y, const Vec& X0, double kappa,
                                                double epsilon) {
    double b = oval_b_through(Y, X0, kappa);
    double ay = norm(Y);
    double k2 = kappa * kappa;
    double tmax = (1.0 + epsilon) * ay;
    double tv = b / k2;
    double t = std::clamp(tv, -tmax, tmax);
    DeltaBoundResult r;
    r.argmin_t = t;
    r.min_value = oval_delta_of_t(t, b, ay * ay, kappa);
    r.passes = r.min_value > 0.0;
    return r;
}

}  // namespace nfr
