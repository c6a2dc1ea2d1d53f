#pragma once
// Projected spherical segments and the associated coordinate transforms.
//
// Given a base direction x0 and two directions m_bar, m_hat in the refraction
// cap {m . x0 >= kappa}, the segment [m_bar, m_hat]_{x0} is the curve cut on
// the unit sphere by the triangle with vertices m_bar, m_hat and x0/kappa.
// These curves replace geodesics in the concavity conditions on targets. The
// header also provides the tangent-plane chart v = T_{X0}(m) in which those
// curves become straight chords.

#include <cmath>
#include <functional>

#include "errors.hpp"
#include "oval.hpp"
#include "rng.hpp"
#include "vec.hpp"

namespace nfr {

struct SphericalSegment {
    Vec x0;     // unit base direction
    Vec m_bar;  // endpoints, unit, with m . x0 >= kappa
    Vec m_hat;
    double kappa = 0;
};

namespace detail {

/// Smaller positive root of |x0/kappa + beta xi| = 1 via bisection on [0,1].
inline double beta_bisect(const Vec& x0, const Vec& xi, double kappa) {
    auto g = [&](double beta) { return norm2(x0 / kappa + xi * beta) - 1.0; };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Sphere-intersection parameter of the chord point m_lambda = (1-l) m_bar + l m_hat:
/// the smaller root of |x0/kappa + beta (m_lambda - x0/kappa)| = 1, which lies in (0,1].
/// Throws ComplexRoot when the line misses the sphere (segment invariant violated);
/// a tangent line (zero discriminant) is accepted with the double root.
inline double beta_of_lambda(double lambda, const SphericalSegment& seg) {
    Vec m_lambda = seg.m_bar * (1.0 - lambda) + seg.m_hat * lambda;
    Vec xi = m_lambda - seg.x0 / seg.kappa;
    double a = dot(seg.x0, xi);
    double n2 = norm2(xi);
    double disc = a * a - (1.0 - seg.kappa * seg.kappa) * n2;
    if (disc < 0.0) {
        if (disc > -1e-12 * a * a)  // tangency up to roundoff
            return detail::beta_bisect(seg.x0, xi, seg.kappa);
        throw ComplexRoot("beta: chord line misses the unit sphere");
    }
    if (disc < 1e-12 * a * a)  // near-tangent: closed form cancels, fall back
        return detail::beta_bisect(seg.x0, xi, seg.kappa);
    return (-a - std::sqrt(disc)) / (seg.kappa * n2);
}

struct CurvePoint {
    Vec m;          // point on the segment, unit
    double beta;    // beta(lambda)
    double beta_bar;  // (1-lambda) beta
    double beta_hat;  // lambda beta
};

/// Point m(lambda) = x0/kappa + beta(lambda)(m_lambda - x0/kappa) together with
/// the barycentric weights of the representation
/// m = x0/kappa + beta_bar (m_bar - x0/kappa) + beta_hat (m_hat - x0/kappa).
inline CurvePoint curve_point(double lambda, const SphericalSegment& seg) {
    if (norm(seg.m_bar - seg.m_hat) == 0.0)
        return {seg.m_bar, 1.0, 1.0 - lambda, lambda};  // degenerate constant curve
    double beta = beta_of_lambda(lambda, seg);
    Vec m_lambda = seg.m_bar * (1.0 - lambda) + seg.m_hat * lambda;
    Vec m = seg.x0 / seg.kappa + (m_lambda - seg.x0 / seg.kappa) * beta;
    return {m, beta, (1.0 - lambda) * beta, lambda * beta};
}

/// Target-side curve [Y_bar, Y_hat]_{X0}: images of the spherical segment under
/// the scene's radial visibility function, Y(lambda) = X0 + s(m(lambda)) m(lambda).
struct TargetCurve {
    Vec X0;
    Vec Y_bar;
    Vec Y_hat;
    double kappa = 0;
    std::function<double(const Vec& X, const Vec& m)> visibility;  // scene s_X, throws NotVisible
};

inline Vec target_curve_point(double lambda, const TargetCurve& curve) {
    SphericalSegment seg{normalized(curve.X0), normalized(curve.Y_bar - curve.X0),
                         normalized(curve.Y_hat - curve.X0), curve.kappa};
    Vec m = curve_point(lambda, seg).m;
    double s;
    try {
        s = curve.visibility(curve.X0, m);
    } catch (const NotVisible& e) {
        throw VisibilityFailure(std::string("target curve leaves the visible set: ") + e.what());
    }
    return curve.X0 + m * s;
}

/// Tangent-plane chart v = T_{X0}(m) = kappa |X0| (m - <m,x0> x0) / (1 - kappa <m,x0>).
/// v is orthogonal to x0 and ranges over the disk |v|^2 <= kappa^2 |X0|^2 / (1-kappa^2).
inline Vec v_of_m(const Vec& m, const Vec& X0, double kappa) {
    Vec x0 = normalized(X0);
    double c = dot(m, x0);
    if (c < kappa - 1e-12)
        throw DomainError("v_of_m: direction outside the refraction cap");
    return (m - x0 * c) * (kappa * norm(X0) / (1.0 - kappa * c));
}

/// Radial factor t(v) = (1 - kappa <m,x0>) / (kappa |X0|), in the cancellation-free
/// form (1-kappa^2)/kappa * 1/(|X0| + sqrt(kappa^2 |X0|^2 - (1-kappa^2) |v|^2)).
inline double t_of_v(const Vec& v, const Vec& X0, double kappa) {
    double r = norm(X0);
    double disc = kappa * kappa * r * r - (1.0 - kappa * kappa) * norm2(v);
    if (disc < -1e-12 * kappa * kappa * r * r)
        throw DomainError("t_of_v: v outside the chart disk");
    return (1.0 - kappa * kappa) / (kappa * (r + std::sqrt(std::max(0.0, disc))));
}

/// Inverse chart m(v) = x0/kappa + t(v)(v - X0) for v orthogonal to x0 in the chart disk.
inline Vec m_of_v(const Vec& v, const Vec& X0, double kappa) {
    Vec x0 = normalized(X0);
    if (std::abs(dot(v, x0)) > 1e-9 * std::max(1.0, norm(v)))
        throw DomainError("m_of_v: v not orthogonal to x0");
    double t = t_of_v(v, X0, kappa);
    return x0 / kappa + (v - X0) * t;
}

/// Chart radius: |v| <= kappa |X0| / sqrt(1 - kappa^2).
inline double chart_disk_radius(const Vec& X0, double kappa) {
    return kappa * norm(X0) / std::sqrt(1.0 - kappa * kappa);
}

/// Parameter change mapping the straight chord v_gamma = (1-g) v_bar + g v_hat onto
/// the lambda-parametrization of the same spherical segment.
inline double lambda_of_gamma(double gamma, const Vec& v_bar, const Vec& v_hat, const Vec& X0,
                              double kappa) {
    double tb = t_of_v(v_bar, X0, kappa);
    double th = t_of_v(v_hat, X0, kappa);
    return gamma * tb / ((1.0 - gamma) * th + gamma * tb);
}

struct PhiConcavityReport {
    double max_second_diff = 0;  // most convex sample; concavity demands <= tolerance
    double min_second_diff = 0;
    bool passes = false;
    std::size_t samples_used = 0;
    std::size_t samples_skipped = 0;  // probes leaving the chart or the visible set
    Vec worst_v;
    Vec worst_xi;
    double worst_step = 0;
};

/// Second-difference probe of the concavity of
///   Phi(v) = (1/s(m(v)) + mu/|X0|) / t(v)
/// over the chart disk. `s_of_m` is the radial visibility function of the target
/// as seen from X0; `m_in_domain` restricts probes to its domain. Failing samples
/// are reported, never thrown.
inline PhiConcavityReport phi_concavity_check(
    const Vec& X0, double kappa, double mu, int n,
    const std::function<double(const Vec& m)>& s_of_m,
    const std::function<bool(const Vec& m)>& m_in_domain,
    std::size_t samples, std::uint64_t seed, double tolerance) {
    Vec x0 = normalized(X0);
    double rmax = chart_disk_radius(X0, kappa);
    auto basis = tangent_basis(x0, n);
    Sampler rng(seed, 0x9c2);

    auto phi = [&](const Vec& v) {
        Vec m = m_of_v(v, X0, kappa);
        return (1.0 / s_of_m(m) + mu / norm(X0)) / t_of_v(v, X0, kappa);
    };

    PhiConcavityReport rep;
    rep.max_second_diff = -1e300;
    rep.min_second_diff = 1e300;
    const double steps[] = {1e-2, 1e-3, 3e-4};
    for (std::size_t k = 0; k < samples; ++k) {
        Vec v;
        if (n == 2) {
            v = basis[0] * rng.uniform(-0.95 * rmax, 0.95 * rmax);
        } else {
            double r = 0.95 * rmax * std::sqrt(rng.uniform());
            double a = rng.uniform(0.0, 6.283185307179586476925286766559);
            v = basis[0] * (r * std::cos(a)) + basis[1] * (r * std::sin(a));
        }
        Vec xi = basis[0];
        if (n == 3) {
            double a = rng.uniform(0.0, 6.283185307179586476925286766559);
            xi = basis[0] * std::cos(a) + basis[1] * std::sin(a);
        } else if (rng.uniform() < 0.5) {
            xi = -xi;
        }
        double h = steps[k % 3] * rmax;
        Vec vm = v - xi * h, vp = v + xi * h;
        if (norm(vp) >= rmax || norm(vm) >= rmax) {
            ++rep.samples_skipped;
            continue;
        }
        try {
            if (!m_in_domain(m_of_v(v, X0, kappa)) || !m_in_domain(m_of_v(vp, X0, kappa)) ||
                !m_in_domain(m_of_v(vm, X0, kappa))) {
                ++rep.samples_skipped;
                continue;
            }
            double d2 = (phi(vp) - 2.0 * phi(v) + phi(vm)) / (h * h);
            ++rep.samples_used;
            if (d2 > rep.max_second_diff) {
                rep.max_second_diff = d2;
                rep.worst_v = v;
                rep.worst_xi = xi;
                rep.worst_step = h;
            }
            rep.min_second_diff = std::min(rep.min_second_diff, d2);
        } catch (const Error&) {
            ++rep.samples_skipped;
        }
    }
    rep.passes = rep.samples_used > 0 && rep.max_second_diff <= tolerance;
    return rep;
}

}  // namespace nfr
