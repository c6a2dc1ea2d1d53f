#pragma once
// Forward verification by physical ray tracing: vector Snell refraction at the
// envelope surface, ray-target intersection, and Monte Carlo irradiance
// histograms. The refracted ray of a single-oval cell must pass through that
// oval's focus; the tracer measures the miss distance so tests can assert it.

#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "refractor.hpp"
#include "rng.hpp"
#include "scene.hpp"

namespace nfr {

struct Ray {
    Vec origin;
    Vec direction;           // unit
    double medium_index = 1;  // index of the medium the ray travels in
};

struct RefractionOutcome {
    bool total_internal_reflection = false;
    Vec direction;  // unit, valid when not TIR
};

/// Vector Snell refraction from medium I (index n1) into medium II (index
/// n2 = kappa n1) across a surface with unit normal oriented into medium II
/// (incident . normal >= 0). Total internal reflection, i.e. sin(theta_i) >
/// kappa, is a value rather than an error and is detected before any square
/// root is taken.
inline RefractionOutcome refract(const Vec& incident, const Vec& normal, double kappa) {
    double c1 = dot(incident, normal);
    double eta = 1.0 / kappa;
    double k = 1.0 - eta * eta * (1.0 - c1 * c1);
    // roundoff at the exact critical angle must resolve to the tangent ray
    if (k < -1e-14) return {true, Vec{}};
    double c2 = std::sqrt(std::max(0.0, k));
    return {false, incident * eta - normal * (eta * c1 - c2)};
}

/// Outward unit normal of the envelope at the direction x, computed from the
/// active oval's implicit gradient X/|X| + kappa (X - Y)/|X - Y|. Undefined on
/// cell boundaries; a tie throws TieBoundary.
inline Vec surface_normal(const DiscreteRefractor& u, const Vec& x,
                          double tie_tol = default_tolerances().tie) {
    EnvelopeValue ev = evaluate(u, x, tie_tol);
    if (ev.ties.size() > 1)
        throw TieBoundary("surface_normal: direction lies on a cell boundary");
    const OvalParams& o = u.ovals[ev.argmax];
    Vec X = x * ev.radius;
    return normalized(x + normalized(X - o.focus) * u.kappa);
}

enum class TraceStatus { Hit, Miss, TotalInternalReflection, TieBoundary };

struct TraceResult {
    TraceStatus status = TraceStatus::Miss;
    Vec hit_surface;
    Vec refracted_direction;
    Vec hit_target;
    long assigned_target = -1;
    double focus_miss_distance = 0;  // distance of the refracted line to the active focus
    double snell_residual = 0;       // |sin(theta_i) - kappa sin(theta_t)|
};

struct TraceConfig {
    double tie_tol = default_tolerances().tie;
    double assign_tol = 1e-6;  // angular tolerance for discrete target assignment, radians
};

inline double point_line_distance(const Vec& p, const Vec& origin, const Vec& dir) {
    Vec d = p - origin;
    return norm(d - dir * dot(d, dir));
}

/// Trace one source direction through the envelope onto the target.
inline TraceResult trace(const DiscreteRefractor& u, const Scene& scene, const Vec& x,
                         const TraceConfig& cfg = {}) {
    TraceResult out;
    EnvelopeValue ev = evaluate(u, x, cfg.tie_tol);
    out.hit_surface = x * ev.radius;
    if (ev.ties.size() > 1) {
        out.status = TraceStatus::TieBoundary;
        return out;
    }
    const OvalParams& oval = u.ovals[ev.argmax];
    Vec normal = normalized(x + normalized(out.hit_surface - oval.focus) * u.kappa);
    RefractionOutcome ref = refract(x, normal, u.kappa);
    if (ref.total_internal_reflection) {
        out.status = TraceStatus::TotalInternalReflection;
        return out;
    }
    out.refracted_direction = ref.direction;
    {
        Vec ti = x - normal * dot(x, normal);
        Vec tt = ref.direction - normal * dot(ref.direction, normal);
        out.snell_residual = std::abs(norm(ti) - u.kappa * norm(tt));
    }
    out.focus_miss_distance = point_line_distance(oval.focus, out.hit_surface, ref.direction);

    if (scene.target.kind == TargetKind::PlanarDisk) {
        double dz = vertical(ref.direction, scene.n);
        if (dz <= 1e-15) return out;
        double t = (scene.target.M - vertical(out.hit_surface, scene.n)) / dz;
        if (t <= 0.0) return out;
        Vec hit = out.hit_surface + ref.direction * t;
        if (horizontal_norm(hit, scene.n) > scene.target.R * (1.0 + 1e-12)) return out;
        out.status = TraceStatus::Hit;
        out.hit_target = hit;
        return out;
    }
    long best = -1;
    double best_angle = cfg.assign_tol;
    for (std::size_t j = 0; j < scene.target.points.size(); ++j) {
        Vec d = scene.target.points[j] - out.hit_surface;
        double nd = norm(d);
        if (nd <= 0.0) continue;
        double dist = point_line_distance(scene.target.points[j], out.hit_surface, ref.direction);
        double ang = std::asin(std::min(1.0, dist / nd));
        if (dot(d, ref.direction) > 0.0 && ang < best_angle) {
            best_angle = ang;
            best = static_cast<long>(j);
        }
    }
    if (best < 0) return out;
    const Vec& Y = scene.target.points[static_cast<std::size_t>(best)];
    out.status = TraceStatus::Hit;
    out.assigned_target = best;
    out.hit_target = out.hit_surface +
                     out.refracted_direction * dot(Y - out.hit_surface, out.refracted_direction);
    return out;
}

struct Histogram {
    std::vector<std::uint64_t> counts;
    std::vector<double> fraction;
    std::vector<double> stderr_fraction;
    std::uint64_t boundary_rays = 0;
    std::uint64_t tir_rays = 0;
    std::uint64_t miss_rays = 0;
    std::uint64_t total_rays = 0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Direction sample distributed proportionally to the emission density. Each
/// ray owns a private counter stream, so results do not depend on batching.
inline Vec sample_direction(const Scene& scene, std::uint64_t seed, std::uint64_t ray) {
    Sampler rng(seed, 0x100000 + ray);
    const Cap& cap = scene.omega;
    auto tb = tangent_basis(cap.axis, scene.n);
    if (scene.n == 2) {
        double a = cap.half_angle;
        if (scene.density.kind == DensityKind::Uniform)
            return geodesic_step(cap.axis, tb[0], rng.uniform(-a, a));
        if (scene.density.kind == DensityKind::Cosine) {
            double t = std::asin((2.0 * rng.uniform() - 1.0) * std::sin(a));
            return geodesic_step(cap.axis, tb[0], t);
        }
        double fmax = scene.density.max_value();
        for (int it = 0; it < 4096; ++it) {
            double t = rng.uniform(-a, a);
            Vec x = geodesic_step(cap.axis, tb[0], t);
            if (rng.uniform() * fmax <= scene.density(x, cap)) return x;
        }
        throw QuadratureBudgetExceeded("density rejection sampling failed");
    }
    double zmin = std::cos(cap.half_angle);
    auto from_z_phi = [&](double z, double phi) {
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return cap.axis * z + tb[0] * (r * std::cos(phi)) + tb[1] * (r * std::sin(phi));
    };
    if (scene.density.kind == DensityKind::Uniform)
        return from_z_phi(rng.uniform(zmin, 1.0), rng.uniform(0.0, 6.283185307179586476925286766559));
    if (scene.density.kind == DensityKind::Cosine) {
        double z = std::sqrt(zmin * zmin + rng.uniform() * (1.0 - zmin * zmin));
        return from_z_phi(z, rng.uniform(0.0, 6.283185307179586476925286766559));
    }
    double fmax = scene.density.max_value();
    for (int it = 0; it < 4096; ++it) {
        Vec x = from_z_phi(rng.uniform(zmin, 1.0), rng.uniform(0.0, 6.283185307179586476925286766559));
        if (rng.uniform() * fmax <= scene.density(x, cap)) return x;
    }
    throw QuadratureBudgetExceeded("density rejection sampling failed");
}

}  // namespace detail

/// Monte Carlo estimate of the per-target energy fractions: importance-samples
/// directions proportionally to the emission density and bins traced rays by
/// assigned target. Tie-boundary rays go to a separate bin so histograms stay
/// unbiased; counts are integers, so the result is independent of batching.
inline Histogram irradiance_histogram(const DiscreteRefractor& u, const Scene& scene,
                                      std::uint64_t num_rays, std::uint64_t seed,
                                      int threads = 1, const TraceConfig& cfg = {}) {
    if (scene.target.kind != TargetKind::DiscretePoints)
        throw InvalidParameters("irradiance_histogram: needs a discrete target");
    std::size_t N = scene.target.points.size();
    int nb = resolve_threads(threads);
    std::vector<Histogram> partial(static_cast<std::size_t>(nb));
    for (auto& h : partial) h.counts.assign(N, 0);
    parallel_batches(num_rays, nb, [&](std::size_t batch, std::size_t lo, std::size_t hi) {
        Histogram& h = partial[batch];
        for (std::uint64_t ray = lo; ray < hi; ++ray) {
            Vec x = detail::sample_direction(scene, seed, ray);
            TraceResult tr = trace(u, scene, x, cfg);
            switch (tr.status) {
                case TraceStatus::Hit:
                    ++h.counts[static_cast<std::size_t>(tr.assigned_target)];
                    break;
                case TraceStatus::TieBoundary: ++h.boundary_rays; break;
                case TraceStatus::TotalInternalReflection: ++h.tir_rays; break;
                case TraceStatus::Miss: ++h.miss_rays; break;
            }
        }
    });
    Histogram out;
    out.counts.assign(N, 0);
    out.seed = seed;
    out.total_rays = num_rays;
    for (const auto& h : partial) {
        for (std::size_t i = 0; i < N; ++i) out.counts[i] += h.counts[i];
        out.boundary_rays += h.boundary_rays;
        out.tir_rays += h.tir_rays;
        out.miss_rays += h.miss_rays;
    }
    out.fraction.resize(N);
    out.stderr_fraction.resize(N);
    double total = static_cast<double>(num_rays);
    for (std::size_t i = 0; i < N; ++i) {
        double p = static_cast<double>(out.counts[i]) / total;
        out.fraction[i] = p;
        out.stderr_fraction[i] = std::sqrt(std::max(0.0, p * (1.0 - p) / total));
    }
    return out;
}

}  // namespace nfr
