#pragma once
// Structural hypothesis checkers. Each check samples the quantifiers of one
// structural condition on the scene (visibility of the target, source-target
// separation, radial concavity, tube-measure convexity, and the tau-based
// sufficient conditions) and reports pass/fail with witnesses and empirical
// constants. Checks certify "no counterexample found", they are not proofs.
// Also provides the canonical example construction: a planar-disk target over
// a spherical source cap, with every constant in closed form.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "oval.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "scene.hpp"
#include "sphere_curves.hpp"
#include "vec.hpp"

namespace nfr {

struct SubReport {
    std::string id;
    bool passes = false;
    std::size_t samples = 0;
    double margin = 0;    // worst signed margin; >= 0 means the inequality held
    std::string witness;  // counterexample description, empty when passing
    std::map<std::string, double> constants;
};

struct HypothesisReport {
    std::vector<SubReport> subs;

    bool all_pass() const {
        for (const auto& s : subs)
            if (!s.passes) return false;
        return !subs.empty();
    }
    const SubReport* find(const std::string& id) const {
        for (const auto& s : subs)
            if (s.id == id) return &s;
        return nullptr;
    }
};

/// Separation constant C(kappa) = kappa (sqrt(1 + (1+kappa)^{-2}) - 1).
/// Satisfies C^2 + 2 kappa C = kappa^2/(1+kappa)^2.
inline double C_of_kappa(double kappa) {
    double q = 1.0 + kappa;
    return kappa * (std::sqrt(1.0 + 1.0 / (q * q)) - 1.0);
}

namespace detail {

inline Vec sample_shell_point(Sampler& rng, const Scene& s) {
    double r = rng.uniform(s.c1, s.c2);
    return rng.cap_vector(s.omega.axis, s.omega.half_angle, s.n) * r;
}

inline Vec sample_target_point(Sampler& rng, const TargetSpec& t, int n) {
    if (t.kind == TargetKind::DiscretePoints) {
        std::size_t i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(t.points.size()));
        return t.points[std::min(i, t.points.size() - 1)];
    }
    if (n == 2) {
        Vec y{rng.uniform(-t.R, t.R), 0.0};
        y[1] = t.M;
        return y;
    }
    double r = t.R * std::sqrt(rng.uniform());
    double a = rng.uniform(0.0, 6.283185307179586476925286766559);
    return {r * std::cos(a), r * std::sin(a), t.M};
}

inline std::string describe(const Vec& v, int n) {
    std::ostringstream os;
    os << "(" << v[0] << ", " << v[1];
    if (n == 3) os << ", " << v[2];
    os << ")";
    return os.str();
}

}  // namespace detail

/// Visibility hypothesis, three parts.
/// (a) every target point lies in the refraction cone of every shell point;
/// (b) the projected segments between visible directions stay visible (for
///     discrete targets only the cone containment is meaningful and checked);
/// (c) the radial visibility functions are uniformly Lipschitz; the empirical
///     constant is the sup of sampled difference quotients, with a nested
///     half-sample drift recorded as a stability indicator.
inline SubReport check_HA(const Scene& scene, std::size_t samples, std::uint64_t seed) {
    validate_scene(scene);
    SubReport rep;
    rep.id = "HA";
    rep.samples = samples;
    Sampler rng(seed, 0xA);
    double min_cone_margin = 1e300;
    std::size_t segment_failures = 0;
    double lip_half = 0.0, lip_full = 0.0;
    bool discrete = scene.target.kind == TargetKind::DiscretePoints;

    for (std::size_t k = 0; k < samples; ++k) {
        Vec X = detail::sample_shell_point(rng, scene);
        Vec Ybar = detail::sample_target_point(rng, scene.target, scene.n);
        Vec Yhat = detail::sample_target_point(rng, scene.target, scene.n);
        double ca = refraction_cosine(Ybar, X) - scene.kappa;
        double cb = refraction_cosine(Yhat, X) - scene.kappa;
        if (std::min(ca, cb) < min_cone_margin) {
            min_cone_margin = std::min(ca, cb);
            if (min_cone_margin < -1e-12)
                rep.witness = "cone violation at X=" + detail::describe(X, scene.n) +
                              " Y=" + detail::describe(ca < cb ? Ybar : Yhat, scene.n);
        }
        if (ca < -1e-12 || cb < -1e-12) continue;

        Vec x = normalized(X);
        Vec mbar = normalized(Ybar - X), mhat = normalized(Yhat - X);
        SphericalSegment seg{x, mbar, mhat, scene.kappa};
        for (int j = 1; j < 8; ++j) {
            Vec m = curve_point(static_cast<double>(j) / 8.0, seg).m;
            bool ok = discrete ? dot(m, x) >= scene.kappa - 1e-12
                               : direction_visible(X, m, scene.target, scene.n);
            if (!ok) {
                ++segment_failures;
                if (rep.witness.empty())
                    rep.witness = "segment left the visible set at X=" + detail::describe(X, scene.n);
                break;
            }
        }
        double dm = norm(mbar - mhat);
        if (dm > 1e-9) {
            double q = std::abs(norm(Ybar - X) - norm(Yhat - X)) / dm;
            lip_full = std::max(lip_full, q);
            if (k < samples / 2) lip_half = std::max(lip_half, q);
        }
    }
    rep.margin = min_cone_margin;
    double drift = lip_full > 0.0 ? (lip_full - lip_half) / lip_full : 0.0;
    rep.constants["C_lip"] = lip_full;
    rep.constants["C_lip_drift"] = drift;
    rep.constants["segment_failures"] = static_cast<double>(segment_failures);
    rep.passes = min_cone_margin >= -1e-12 && segment_failures == 0 && std::isfinite(lip_full);
    return rep;
}

namespace detail {

/// Deterministic upper scan of sup |X| / |Y - X| for a scene. The ratio grows
/// with |X|, so the scan runs on the outer shell r = c2 over a fine polar grid;
/// the nearest target point is closed-form for both target kinds.
inline double hb_sup_ratio(const Scene& s, std::size_t grid) {
    double worst = 0.0;
    auto tb = tangent_basis(s.omega.axis, s.n);
    for (std::size_t i = 0; i < grid; ++i) {
        double ang = s.omega.half_angle * static_cast<double>(i) / static_cast<double>(grid - 1);
        for (int side = 0; side < (s.n == 2 ? 2 : 1); ++side) {
            Vec x = geodesic_step(s.omega.axis, tb[0], side == 0 ? ang : -ang);
            Vec X = x * s.c2;
            double d = distance_to_target(X, s.target, s.n);
            if (d > 0.0) worst = std::max(worst, s.c2 / d);
        }
    }
    return worst;
}

}  // namespace detail

/// Separation hypothesis: sup |X|/|Y-X| <= C(kappa). Scanned deterministically
/// on the outer shell; also records the sufficient distance c2/C(kappa).
inline SubReport check_HB(const Scene& scene, std::size_t samples, std::uint64_t seed) {
    validate_scene(scene);
    (void)seed;
    SubReport rep;
    rep.id = "HB";
    rep.samples = samples;
    double ck = C_of_kappa(scene.kappa);
    double sup = detail::hb_sup_ratio(scene, std::max<std::size_t>(samples, 512));
    double dist = 1e300;
    // distance from the shell to the target: scan the outer shell (monotone in r)
    auto tb = tangent_basis(scene.omega.axis, scene.n);
    for (std::size_t i = 0; i < 512; ++i) {
        double ang = scene.omega.half_angle * static_cast<double>(i) / 511.0;
        for (int side = 0; side < (scene.n == 2 ? 2 : 1); ++side) {
            Vec X = geodesic_step(scene.omega.axis, tb[0], side == 0 ? ang : -ang) * scene.c2;
            dist = std::min(dist, distance_to_target(X, scene.target, scene.n));
        }
    }
    rep.margin = ck - sup;
    rep.constants["C_kappa"] = ck;
    rep.constants["sup_ratio"] = sup;
    rep.constants["dist_actual"] = dist;
    rep.constants["dist_sufficient"] = scene.c2 / ck;
    rep.passes = sup <= ck * (1.0 + 1e-9);
    if (!rep.passes) {
        std::ostringstream os;
        os << "sup |X|/|Y-X| = " << sup << " exceeds C(kappa) = " << ck;
        rep.witness = os.str();
    }
    return rep;
}

/// Single-sample margin of the radial concavity inequality
///   1/s(m(l)) + mu/|X0| >= bbar (1/s(mbar) + mu/|X0|) + bhat (1/s(mhat) + mu/|X0|).
/// `s_of_m` is the radial visibility function seen from X0.
inline double hc_margin(const Vec& X0, const Vec& Ybar, const Vec& Yhat, double lambda,
                        double kappa, double mu,
                        const std::function<double(const Vec&)>& s_of_m) {
    Vec x0 = normalized(X0);
    Vec mbar = normalized(Ybar - X0), mhat = normalized(Yhat - X0);
    SphericalSegment seg{x0, mbar, mhat, kappa};
    CurvePoint cp = curve_point(lambda, seg);
    double s_l = s_of_m(cp.m);
    double muon = mu / norm(X0);
    double lhs = 1.0 / s_l + muon;
    double rhs = cp.beta_bar * (1.0 / norm(Ybar - X0) + muon) +
                 cp.beta_hat * (1.0 / norm(Yhat - X0) + muon);
    return lhs - rhs;
}

/// Radial concavity hypothesis with parameter mu in [0, kappa).
inline SubReport check_HC(const Scene& scene, double mu, std::size_t samples, std::uint64_t seed) {
    validate_scene(scene);
    if (!(mu >= 0.0 && mu < scene.kappa))
        throw InvalidParameters("check_HC: mu must lie in [0, kappa)");
    SubReport rep;
    rep.id = "HC";
    rep.samples = samples;
    Sampler rng(seed, 0xC);
    auto s_vis = visibility_function(scene);
    double min_margin = 1e300;
    std::size_t used = 0;
    for (std::size_t k = 0; k < samples; ++k) {
        Vec X0 = detail::sample_shell_point(rng, scene);
        Vec Ybar = detail::sample_target_point(rng, scene.target, scene.n);
        Vec Yhat = detail::sample_target_point(rng, scene.target, scene.n);
        double lambda = rng.uniform();
        if (refraction_cosine(Ybar, X0) < scene.kappa || refraction_cosine(Yhat, X0) < scene.kappa)
            continue;
        try {
            auto s_of_m = [&](const Vec& m) { return s_vis(X0, m); };
            double margin = hc_margin(X0, Ybar, Yhat, lambda, scene.kappa, mu, s_of_m);
            ++used;
            if (margin < min_margin) {
                min_margin = margin;
                if (margin < -default_tolerances().hc_margin)
                    rep.witness = "concavity fails at X0=" + detail::describe(X0, scene.n) +
                                  " Ybar=" + detail::describe(Ybar, scene.n) +
                                  " Yhat=" + detail::describe(Yhat, scene.n);
            }
        } catch (const NotVisible&) {
            continue;  // visibility failures belong to HA, not HC
        }
    }
    rep.margin = min_margin;
    rep.constants["mu_used"] = mu;
    rep.constants["samples_used"] = static_cast<double>(used);
    rep.passes = used > 0 && min_margin >= -default_tolerances().hc_margin;
    return rep;
}

/// Monte Carlo estimate of the surface measure of the mu-neighborhood of a
/// polyline intersected with the target surface (area in the plane for the
/// disk, length for the n = 2 segment). Sampling is confined to the bounding
/// box of the inflated polyline. Throws QuadratureBudgetExceeded when the
/// requested relative error cannot be met within the budget.
inline double tube_measure(const std::vector<Vec>& polyline, double mu, const TargetSpec& target,
                           int n, std::uint64_t seed, std::size_t budget = 200000,
                           double rel_err_target = 0.05) {
    if (polyline.size() < 2) throw InvalidParameters("tube_measure: need a polyline");
    if (target.kind != TargetKind::PlanarDisk)
        throw InvalidParameters("tube_measure: only surface targets carry a tube measure");
    // bounding box in the horizontal coordinates of the target plane
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (const Vec& p : polyline) {
        for (int d = 0; d < n - 1; ++d) {
            lo[d] = std::min(lo[d], p[static_cast<std::size_t>(d)] - mu);
            hi[d] = std::max(hi[d], p[static_cast<std::size_t>(d)] + mu);
        }
    }
    auto dist_to_polyline = [&](const Vec& q) {
        double best = 1e300;
        for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
            Vec a = polyline[i], b = polyline[i + 1];
            Vec ab = b - a;
            double t = norm2(ab) > 0.0 ? std::clamp(dot(q - a, ab) / norm2(ab), 0.0, 1.0) : 0.0;
            best = std::min(best, norm(q - (a + ab * t)));
        }
        return best;
    };
    double box = 1.0;
    for (int d = 0; d < n - 1; ++d) box *= hi[d] - lo[d];
    Sampler rng(seed, 0xD1);
    std::size_t hits = 0, total = 0;
    std::size_t chunk = 4096;
    while (true) {
        for (std::size_t k = 0; k < chunk; ++k) {
            Vec q;
            for (int d = 0; d < n - 1; ++d) q[static_cast<std::size_t>(d)] = rng.uniform(lo[d], hi[d]);
            q[static_cast<std::size_t>(n - 1)] = target.M;
            if (horizontal_norm(q, n) <= target.R && dist_to_polyline(q) <= mu) ++hits;
        }
        total += chunk;
        double p = static_cast<double>(hits) / static_cast<double>(total);
        if (p > 0.0) {
            double rel = std::sqrt((1.0 - p) / (p * static_cast<double>(total)));
            if (rel <= rel_err_target) break;
        }
        if (total >= budget) {
            if (p <= 0.0 || std::sqrt((1.0 - p) / (p * static_cast<double>(total))) > rel_err_target)
                throw QuadratureBudgetExceeded("tube_measure: budget exhausted before target error");
            break;
        }
        chunk = std::min(chunk * 2, budget - total);
    }
    return box * static_cast<double>(hits) / static_cast<double>(total);
}

/// Discretize a target curve into the central sub-polyline lambda in [1/4, 3/4].
inline std::vector<Vec> central_curve_polyline(const TargetCurve& curve, std::size_t segments = 64) {
    std::vector<Vec> pts;
    pts.reserve(segments + 1);
    for (std::size_t i = 0; i <= segments; ++i) {
        double lambda = 0.25 + 0.5 * static_cast<double>(i) / static_cast<double>(segments);
        pts.push_back(target_curve_point(lambda, curve));
    }
    return pts;
}

struct CurveConstants {
    double M1 = 0;  // max curvature of the arclength parametrization
    double M2 = 1;  // min chord/arclength ratio
};

inline CurveConstants estimate_curve_constants(const std::vector<Vec>& polyline) {
    CurveConstants cc;
    std::vector<double> s(polyline.size(), 0.0);
    for (std::size_t i = 1; i < polyline.size(); ++i)
        s[i] = s[i - 1] + norm(polyline[i] - polyline[i - 1]);
    if (s.back() <= 0.0) return {0.0, 1.0};
    for (std::size_t i = 1; i + 1 < polyline.size(); ++i) {
        double h1 = s[i] - s[i - 1], h2 = s[i + 1] - s[i];
        if (h1 <= 0.0 || h2 <= 0.0) continue;
        Vec d2 = (polyline[i + 1] - polyline[i]) / h2 - (polyline[i] - polyline[i - 1]) / h1;
        cc.M1 = std::max(cc.M1, norm(d2) / (0.5 * (h1 + h2)));
    }
    for (std::size_t i = 0; i < polyline.size(); ++i)
        for (std::size_t j = i + 4; j < polyline.size(); j += 4)
            cc.M2 = std::min(cc.M2, norm(polyline[i] - polyline[j]) / (s[j] - s[i]));
    return cc;
}

/// Default neighborhood size for the tube-measure hypothesis: bounded by a
/// fraction of the target diameter and by the non-overlap scale of sampled
/// curves (chord ratio over curvature).
inline double default_mu0(const Scene& scene, std::size_t curve_samples, std::uint64_t seed) {
    double mu0 = 0.05 * target_diameter(scene.target, scene.n);
    Sampler rng(seed, 0xD0);
    auto vis = visibility_function(scene);
    for (std::size_t k = 0; k < curve_samples; ++k) {
        Vec X0 = detail::sample_shell_point(rng, scene);
        Vec Ybar = detail::sample_target_point(rng, scene.target, scene.n);
        Vec Yhat = detail::sample_target_point(rng, scene.target, scene.n);
        if (norm(Ybar - Yhat) < 1e-6) continue;
        try {
            TargetCurve curve{X0, Ybar, Yhat, scene.kappa, vis};
            auto cc = estimate_curve_constants(central_curve_polyline(curve));
            if (cc.M1 > 0.0) mu0 = std::min(mu0, 0.5 * cc.M2 / cc.M1);
        } catch (const Error&) {
            continue;
        }
    }
    return mu0;
}

/// Tube-measure hypothesis: the mu-neighborhood of the central part of every
/// target curve keeps measure at least C mu^{n-2} |Ybar - Yhat|. Reports the
/// infimum of the measured ratio over samples for a dyadic sweep of mu and
/// passes when the infima stay positive and stable across the sweep.
inline SubReport check_HD(const Scene& scene, double mu0, std::size_t samples,
                          std::uint64_t seed) {
    validate_scene(scene);
    SubReport rep;
    rep.id = "HD";
    rep.samples = samples;
    if (scene.target.kind != TargetKind::PlanarDisk) {
        rep.passes = true;
        rep.witness = "not applicable: discrete target carries no surface tube measure";
        return rep;
    }
    Sampler rng(seed, 0xD);
    auto vis = visibility_function(scene);
    const double mus[3] = {mu0, 0.5 * mu0, 0.25 * mu0};
    double inf_ratio[3] = {1e300, 1e300, 1e300};
    std::size_t used = 0;
    for (std::size_t k = 0; k < samples; ++k) {
        Vec X0 = detail::sample_shell_point(rng, scene);
        Vec Ybar = detail::sample_target_point(rng, scene.target, scene.n);
        Vec Yhat = detail::sample_target_point(rng, scene.target, scene.n);
        double dy = norm(Ybar - Yhat);
        if (dy < 0.05 * target_diameter(scene.target, scene.n)) continue;
        TargetCurve curve{X0, Ybar, Yhat, scene.kappa, vis};
        std::vector<Vec> poly;
        try {
            poly = central_curve_polyline(curve);
        } catch (const Error&) {
            rep.witness = "curve construction failed at X0=" + detail::describe(X0, scene.n);
            rep.passes = false;
            rep.margin = -1.0;
            return rep;
        }
        ++used;
        for (int j = 0; j < 3; ++j) {
            double measure = tube_measure(poly, mus[j], scene.target, scene.n,
                                          seed ^ (k * 3 + static_cast<std::uint64_t>(j)));
            double denom = (scene.n == 3 ? mus[j] : 1.0) * dy;
            inf_ratio[j] = std::min(inf_ratio[j], measure / denom);
        }
    }
    rep.margin = inf_ratio[2];
    rep.constants["mu0"] = mu0;
    rep.constants["C_HD"] = inf_ratio[2];
    rep.constants["ratio_mu0"] = inf_ratio[0];
    rep.constants["ratio_mu0_half"] = inf_ratio[1];
    rep.constants["ratio_mu0_quarter"] = inf_ratio[2];
    rep.constants["samples_used"] = static_cast<double>(used);
    double drift = inf_ratio[2] > 0.0 ? std::abs(inf_ratio[2] - inf_ratio[1]) / inf_ratio[2] : 1.0;
    rep.constants["drift"] = drift;
    rep.passes = used > 0 && inf_ratio[0] > 0.0 && inf_ratio[1] > 0.0 && inf_ratio[2] > 0.0 &&
                 drift < 0.5;
    if (!rep.passes && rep.witness.empty()) rep.witness = "tube ratio not positive/stable";
    return rep;
}

struct TauConstants {
    double C = 0;     // |Y| >= C |X| threshold
    double C_hat = 0;  // resulting bound on |X|/|Y-X|
};

/// Closed-form constants of the tau-based sufficient conditions.
inline TauConstants tau_constants(double tau, double kappa) {
    double kt = kappa + tau;
    if (!(kt < 1.0)) throw DomainError("tau_constants: kappa + tau must be < 1");
    double denom = kt * std::sqrt(1.0 - kappa * kappa) - kappa * std::sqrt(1.0 - kt * kt);
    if (denom <= 0.0) throw DomainError("tau_constants: degenerate cone intersection");
    double C = std::sqrt(1.0 - kappa * kappa) / denom;
    return {C, 1.0 / (C - 1.0)};
}

/// Sufficient conditions for visibility and separation: x.Y >= (kappa+tau)|Y|
/// on the source cap, and |Y| >= C_{tau,kappa} |X| on the shell.
inline SubReport check_H1H2(const Scene& scene, double tau, std::size_t samples,
                            std::uint64_t seed) {
    validate_scene(scene);
    SubReport rep;
    rep.id = "H1H2";
    rep.samples = samples;
    TauConstants tc = tau_constants(tau, scene.kappa);
    Sampler rng(seed, 0x12);
    double min_h1 = 1e300, min_ratio = 1e300, dist0 = 1e300;
    for (std::size_t k = 0; k < samples; ++k) {
        Vec x = rng.cap_vector(scene.omega.axis, scene.omega.half_angle, scene.n);
        Vec Y = detail::sample_target_point(rng, scene.target, scene.n);
        Vec X = detail::sample_shell_point(rng, scene);
        min_h1 = std::min(min_h1, dot(x, Y) - (scene.kappa + tau) * norm(Y));
        min_ratio = std::min(min_ratio, norm(Y) - tc.C * norm(X));
        dist0 = std::min(dist0, norm(Y));
    }
    rep.margin = std::min(min_h1, min_ratio);
    rep.constants["C_tau_kappa"] = tc.C;
    rep.constants["C_hat_tau_kappa"] = tc.C_hat;
    rep.constants["min_H1_margin"] = min_h1;
    rep.constants["min_scale_margin"] = min_ratio;
    rep.constants["r0_upper_bound"] = tau / (1.0 + scene.kappa) * dist0;  // informational
    rep.passes = min_h1 >= -1e-12 && min_ratio >= -1e-12;
    if (!rep.passes) rep.witness = "tau-based sufficient condition violated";
    return rep;
}

struct ExampleSceneInfo {
    double theta = 0;      // arccos kappa
    double cos_half = 0;   // cos(theta/2) = sqrt((1+kappa)/2)
    Vec Y0;                // vertex of the enclosing visibility cone
    double M = 0;          // target height
    double R = 0;          // target radius
    double R_max = 0;      // largest admissible radius for this C
    double min_C_for_HB = 0;
};

namespace detail {

inline Scene make_example_scene(double kappa, double c2, double C, double R_fraction, int n) {
    double cos_half = std::sqrt((1.0 + kappa) / 2.0);
    double M = C + 2.0 * c2 * cos_half;
    double R = R_fraction * std::sqrt((1.0 - kappa) / (1.0 + kappa)) * C;
    Scene s;
    s.n = n;
    s.kappa = kappa;
    s.c1 = 1.0;
    s.c2 = c2;
    s.omega.axis = vertical_axis(n);
    s.omega.half_angle = std::atan(R / M);
    s.density.kind = DensityKind::Uniform;
    s.target.kind = TargetKind::PlanarDisk;
    s.target.R = R;
    s.target.M = M;
    return s;
}

}  // namespace detail

/// Smallest height offset C for which the example construction satisfies the
/// separation hypothesis, located by bisection on the deterministic shell scan.
inline double example_min_C_for_HB(double kappa, double c2, double R_fraction, int n) {
    auto sup_ratio = [&](double C) {
        return detail::hb_sup_ratio(detail::make_example_scene(kappa, c2, C, R_fraction, n), 2048);
    };
    double ck = C_of_kappa(kappa);
    double lo = 1e-6, hi = 1.0;
    while (sup_ratio(hi) > ck && hi < 1e9) hi *= 2.0;
    if (hi >= 1e9) throw InvalidParameters("example_min_C_for_HB: no admissible C found");
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (sup_ratio(mid) > ck ? lo : hi) = mid;
    }
    return hi;
}

/// Canonical example: a horizontal disk target of radius R = R_fraction *
/// sqrt((1-kappa)/(1+kappa)) C at height M = C + 2 c2 sqrt((1+kappa)/2), seen
/// from the cap {|x'|/x_n <= R/M}, with c1 = 1. Satisfies the visibility,
/// concavity (mu = 0) and tube-measure hypotheses by construction; separation
/// holds iff C is at least the reported minimal value.
inline std::pair<Scene, ExampleSceneInfo> build_example_scene(double kappa, double c2, double C,
                                                              double R_fraction, int n = 3) {
    if (!(kappa > 0.0 && kappa < 1.0) || !(c2 > 1.0) || !(C > 0.0) ||
        !(R_fraction > 0.0 && R_fraction <= 1.0) || (n != 2 && n != 3))
        throw InvalidParameters("build_example_scene: bad parameters");
    Scene s = detail::make_example_scene(kappa, c2, C, R_fraction, n);
    ExampleSceneInfo info;
    info.theta = std::acos(kappa);
    info.cos_half = std::sqrt((1.0 + kappa) / 2.0);
    info.Y0 = vertical_axis(n) * (2.0 * c2 * info.cos_half);
    info.M = s.target.M;
    info.R = s.target.R;
    info.R_max = std::sqrt((1.0 - kappa) / (1.0 + kappa)) * C;
    info.min_C_for_HB = example_min_C_for_HB(kappa, c2, R_fraction, n);
    return {s, info};
}

/// Membership in the cone {Y : (Y - Y0)/|Y - Y0| . e_n >= cos(theta/2)} that
/// equals the visibility cone of the enlarged cap in the example construction.
inline bool example_cone_contains(const ExampleSceneInfo& info, const Vec& Y, int n) {
    Vec d = Y - info.Y0;
    double nd = norm(d);
    if (nd <= 0.0) return true;
    return vertical(d, n) / nd >= info.cos_half - 1e-12;
}

/// Membership in the visibility cone of a shell: min over X in Gamma of the
/// refraction cosine, scanned on an (r, polar, azimuth) grid. The polar scan is
/// carried in the plane spanned by the axis and Y, refined by a coarse azimuth
/// sweep; exact for n = 2.
inline bool visibility_cone_contains(const Vec& Y, const Cap& omega, double c1, double c2,
                                     double kappa, int n, std::size_t polar_grid = 256,
                                     std::size_t radial_grid = 9) {
    auto tb = tangent_basis(omega.axis, n);
    Vec in_plane = tb[0];
    if (n == 3) {
        Vec yh = reject(Y, omega.axis);
        if (norm(yh) > 1e-12) in_plane = normalized(yh);
    }
    std::size_t n_az = n == 2 ? 1 : 9;
    for (std::size_t ia = 0; ia < n_az; ++ia) {
        Vec t = in_plane;
        if (n == 3 && ia > 0) {
            double az = 3.14159265358979323846 * static_cast<double>(ia) / 8.0;
            Vec ortho = cross(omega.axis, in_plane);
            t = in_plane * std::cos(az) + ortho * std::sin(az);
        }
        for (std::size_t i = 0; i < polar_grid; ++i) {
            double ang = omega.half_angle *
                         (2.0 * static_cast<double>(i) / static_cast<double>(polar_grid - 1) - 1.0);
            Vec x = geodesic_step(omega.axis, t, ang);
            for (std::size_t jr = 0; jr < radial_grid; ++jr) {
                double r = c1 + (c2 - c1) * static_cast<double>(jr) /
                                    static_cast<double>(radial_grid - 1);
                if (refraction_cosine(Y, x * r) < kappa) return false;
            }
        }
    }
    return true;
}

struct DeltaRegime {
    double epsilon = 0;             // admissible extension of the direction ball
    double min_focus_distance = 0;  // |Y| threshold that guarantees the bound
    double guaranteed_bound = 0;    // resulting lower bound on the discriminant
};

/// Sufficient regime for the uniform discriminant lower bound, derived from the
/// separation structure: with epsilon below the returned value and |Y| past the
/// focus-distance threshold, delta_lower_bound_check is positive with margin.
inline DeltaRegime delta_regime(double kappa, double c1, double c2) {
    DeltaRegime r;
    double omk = 1.0 - kappa;
    r.epsilon = std::min(omk * omk / (4.0 * kappa), 0.5 * omk / kappa);
    double beta1 = 0.5 * omk * omk;
    double beta2 = (1.0 - kappa * kappa) * (1.0 + kappa) / kappa;
    r.min_focus_distance = 2.0 * beta2 / beta1 * c2;
    r.guaranteed_bound = kappa * kappa * (1.0 + kappa) * (1.0 + kappa) * c1 * c1;
    return r;
}

/// Replace a planar-disk target by a polar grid of receiver points carrying the
/// prescribed energy fractions (equal by default). Points sit at the area
/// centroids of an equal-area rings-by-sectors partition; n = 2 uses `sectors`
/// equal subsegments. The weights sum to `total_energy`.
inline Scene discretize_disk_target(const Scene& scene, std::size_t rings, std::size_t sectors,
                                    double total_energy,
                                    const std::vector<double>* fractions = nullptr) {
    if (scene.target.kind != TargetKind::PlanarDisk)
        throw InvalidParameters("discretize_disk_target: scene target is already discrete");
    Scene out = scene;
    out.target.kind = TargetKind::DiscretePoints;
    out.target.points.clear();
    out.target.weights.clear();
    double R = scene.target.R, M = scene.target.M;
    std::size_t count = 0;
    if (scene.n == 2) {
        count = sectors;
        for (std::size_t j = 0; j < sectors; ++j) {
            double y = -R + (2.0 * R) * (static_cast<double>(j) + 0.5) / static_cast<double>(sectors);
            out.target.points.push_back(Vec{y, M});
        }
    } else {
        count = rings * sectors;
        for (std::size_t i = 0; i < rings; ++i) {
            double r0 = R * std::sqrt(static_cast<double>(i) / static_cast<double>(rings));
            double r1 = R * std::sqrt(static_cast<double>(i + 1) / static_cast<double>(rings));
            double rc = (2.0 / 3.0) * (r1 * r1 * r1 - r0 * r0 * r0) / (r1 * r1 - r0 * r0);
            for (std::size_t j = 0; j < sectors; ++j) {
                double a = 6.283185307179586476925286766559 *
                           (static_cast<double>(j) + 0.5) / static_cast<double>(sectors);
                out.target.points.push_back(Vec{rc * std::cos(a), rc * std::sin(a), M});
            }
        }
    }
    if (fractions) {
        if (fractions->size() != count)
            throw InvalidParameters("discretize_disk_target: fraction count mismatch");
        for (double f : *fractions) out.target.weights.push_back(f * total_energy);
    } else {
        out.target.weights.assign(count, total_energy / static_cast<double>(count));
    }
    return out;
}

/// Run every hypothesis checker on a scene.
inline HypothesisReport check_all_hypotheses(const Scene& scene, std::size_t samples,
                                             std::uint64_t seed, double mu = 0.0,
                                             double tau = -1.0) {
    HypothesisReport rep;
    rep.subs.push_back(check_HA(scene, samples, seed));
    rep.subs.push_back(check_HB(scene, samples, seed));
    rep.subs.push_back(check_HC(scene, mu, samples, seed));
    double mu0 = default_mu0(scene, 16, seed);
    rep.subs.push_back(check_HD(scene, mu0 > 0.0 ? mu0 : 1e-3,
                                std::min<std::size_t>(samples, 48), seed ^ 0x9d));
    if (tau > 0.0) rep.subs.push_back(check_H1H2(scene, tau, samples, seed));
    return rep;
}

}  // namespace nfr
