#pragma once
// Shared test fixtures: finite-difference oracles and cached admissible scenes.

#include <functional>

#include <nfr/hypotheses.hpp>
#include <nfr/oval.hpp>
#include <nfr/rng.hpp>
#include <nfr/scene.hpp>

namespace testsupport {

using nfr::Mat;
using nfr::Vec;

/// Central-difference gradient, O(step^2).
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, int n,
                       double step = 1e-5) {
    Vec g;
    for (int i = 0; i < n; ++i) {
        Vec xp = x, xm = x;
        xp[static_cast<std::size_t>(i)] += step;
        xm[static_cast<std::size_t>(i)] -= step;
        g[static_cast<std::size_t>(i)] = (f(xp) - f(xm)) / (2.0 * step);
    }
    return g;
}

/// Central-difference Hessian, O(step^2).
inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, int n,
                      double step = 1e-4) {
    Mat h;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            Vec xpp = x, xpm = x, xmp = x, xmm = x;
            auto bump = [&](Vec& v, int k, double s) { v[static_cast<std::size_t>(k)] += s; };
            bump(xpp, i, step); bump(xpp, j, step);
            bump(xpm, i, step); bump(xpm, j, -step);
            bump(xmp, i, -step); bump(xmp, j, step);
            bump(xmm, i, -step); bump(xmm, j, -step);
            h(i, j) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * step * step);
        }
    }
    return h;
}

inline double rel_err(double got, double want) {
    double denom = std::max(std::abs(want), 1e-30);
    return std::abs(got - want) / denom;
}

inline double max_rel_err(const Vec& got, const Vec& want, int n) {
    double scale = std::max(nfr::norm(want), 1e-12);
    double e = 0.0;
    for (int i = 0; i < n; ++i)
        e = std::max(e, std::abs(got[static_cast<std::size_t>(i)] - want[static_cast<std::size_t>(i)]) / scale);
    return e;
}

/// Canonical admissible scene (visibility + separation hold) used by most
/// kernel tests; built once per dimension.
inline const nfr::Scene& admissible_scene(int n) {
    static const nfr::Scene s2 = [] {
        double minC = nfr::example_min_C_for_HB(0.5, 2.0, 1.0, 2);
        return nfr::build_example_scene(0.5, 2.0, 1.2 * minC, 1.0, 2).first;
    }();
    static const nfr::Scene s3 = [] {
        double minC = nfr::example_min_C_for_HB(0.5, 2.0, 1.0, 3);
        return nfr::build_example_scene(0.5, 2.0, 1.2 * minC, 1.0, 3).first;
    }();
    return n == 2 ? s2 : s3;
}

/// Random admissible (x, Y, X0) tuple drawn from the canonical scene.
struct KernelSample {
    Vec x;
    Vec Y;
    Vec X0;
};

inline KernelSample kernel_sample(nfr::Sampler& rng, int n, bool x_on_sphere = true) {
    const nfr::Scene& s = admissible_scene(n);
    KernelSample ks;
    ks.X0 = rng.cap_vector(s.omega.axis, s.omega.half_angle, n) * rng.uniform(s.c1, s.c2);
    if (s.target.kind == nfr::TargetKind::PlanarDisk) {
        if (n == 2) {
            ks.Y = Vec{rng.uniform(-s.target.R, s.target.R), s.target.M};
        } else {
            double r = s.target.R * std::sqrt(rng.uniform());
            double a = rng.uniform(0.0, 6.283185307179586476925286766559);
            ks.Y = Vec{r * std::cos(a), r * std::sin(a), s.target.M};
        }
    }
    ks.x = x_on_sphere ? rng.unit_vector(n)
                       : rng.cap_vector(s.omega.axis, s.omega.half_angle, n);
    return ks;
}

}  // namespace testsupport
