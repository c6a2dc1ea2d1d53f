#include <catch2/catch_amalgamated.hpp>

#include <nfr/hypotheses.hpp>
#include <nfr/raytrace.hpp>

#include "support.hpp"

using namespace nfr;
using testsupport::admissible_scene;
using testsupport::rel_err;

namespace {

Scene discrete_scene_2d(std::size_t targets, const std::vector<double>* fractions) {
    const Scene& base = admissible_scene(2);
    auto grid = cap_grid(base.omega, 2, default_quad_nodes(2));
    double total = integrate_density(grid, base.density);
    return discretize_disk_target(base, 1, targets, total, fractions);
}

}  // namespace

TEST_CASE("vector refraction law", "[raytrace]") {
    double kappa = 0.5;
    // normal incidence passes through
    auto straight = refract(Vec{0, 0, 1}, Vec{0, 0, 1}, kappa);
    REQUIRE_FALSE(straight.total_internal_reflection);
    REQUIRE(norm(straight.direction - Vec{0, 0, 1}) < 1e-15);

    // 20 degrees in -> arcsin(sin 20 / 0.5) out
    double ti = 20.0 * 3.14159265358979323846 / 180.0;
    Vec n{0, 0, 1};
    Vec d{std::sin(ti), 0.0, std::cos(ti)};
    auto out = refract(d, n, kappa);
    REQUIRE_FALSE(out.total_internal_reflection);
    double tt = std::asin(std::sin(ti) / kappa);
    REQUIRE(std::acos(std::clamp(dot(out.direction, n), -1.0, 1.0)) ==
            Catch::Approx(tt).epsilon(1e-12));
    REQUIRE(tt == Catch::Approx(43.16 * 3.14159265358979323846 / 180.0).margin(2e-4));
    // coplanar with incident and normal
    REQUIRE(std::abs(dot(out.direction, cross(d, n))) < 1e-15);

    // critical angle: sin(theta_i) = kappa gives a tangent outgoing ray
    double tc = std::asin(kappa);
    auto crit = refract(Vec{std::sin(tc), 0, std::cos(tc)}, n, kappa);
    REQUIRE_FALSE(crit.total_internal_reflection);
    REQUIRE(std::abs(dot(crit.direction, n)) < 1e-7);

    // beyond: total internal reflection as a value, not an error
    auto tir = refract(Vec{std::sin(tc + 1e-3), 0, std::cos(tc + 1e-3)}, n, kappa);
    REQUIRE(tir.total_internal_reflection);

    // Snell residual and unit norm across random incidences
    Sampler rng(3, 80);
    for (int k = 0; k < 3000; ++k) {
        double kap = rng.uniform(0.2, 0.95);
        double a = rng.uniform(0.0, std::asin(kap) - 1e-9);
        Vec dd{std::sin(a), 0.0, std::cos(a)};
        auto r = refract(dd, n, kap);
        REQUIRE_FALSE(r.total_internal_reflection);
        REQUIRE(std::abs(norm(r.direction) - 1.0) < 1e-12);
        double s1 = norm(dd - n * dot(dd, n));
        double s2 = norm(r.direction - n * dot(r.direction, n));
        REQUIRE(std::abs(s1 - kap * s2) <= 1e-10);
    }
}

TEST_CASE("surface normals of the envelope", "[raytrace]") {
    const Scene& base = admissible_scene(3);
    // near-zero index ratio: the oval degenerates to a sphere, normal radial
    {
        DiscreteRefractor u;
        u.kappa = 1e-6;
        Vec y{1.0, -2.0, base.target.M};
        u.ovals.push_back(OvalParams{y, 1.4, u.kappa});
        Vec x = normalized(Vec{0.2, 0.1, 1.0});
        REQUIRE(norm(surface_normal(u, x) - x) < 1e-5);
    }
    // axisymmetric point: normal parallel to the direction
    {
        DiscreteRefractor u;
        u.kappa = base.kappa;
        Vec y{0.0, 0.0, base.target.M};
        u.ovals.push_back(OvalParams{y, 0.62 * norm(y), u.kappa});
        Vec nrm = surface_normal(u, Vec{0, 0, 1});
        REQUIRE(norm(nrm - Vec{0, 0, 1}) < 1e-14);
    }
    // generic point: orthogonal to finite-difference surface tangents
    {
        DiscreteRefractor u;
        u.kappa = base.kappa;
        Vec y{2.0, 1.0, base.target.M};
        u.ovals.push_back(OvalParams{y, 0.63 * norm(y), u.kappa});
        Sampler rng(7, 81);
        for (int k = 0; k < 200; ++k) {
            Vec x = rng.cap_vector(base.omega.axis, base.omega.half_angle, 3);
            Vec nrm = surface_normal(u, x);
            REQUIRE(dot(nrm, x) > 0.0);  // outward
            auto tb = tangent_basis(x, 3);
            for (const Vec& t : tb) {
                double eps = 1e-6;
                Vec xp = geodesic_step(x, t, eps), xm = geodesic_step(x, t, -eps);
                Vec T = (xp * evaluate(u, xp).radius - xm * evaluate(u, xm).radius) / (2.0 * eps);
                REQUIRE(std::abs(dot(nrm, T)) / norm(T) < 1e-6);
            }
        }
    }
}

TEST_CASE("single-oval tracing focuses on the target point", "[raytrace]") {
    Scene s = discrete_scene_2d(1, nullptr);
    DiscreteRefractor u;
    u.kappa = s.kappa;
    Vec y = s.target.points[0];
    u.ovals.push_back(OvalParams{y, 0.62 * norm(y), u.kappa});
    Sampler rng(11, 82);
    for (int k = 0; k < 2000; ++k) {
        Vec x = rng.cap_vector(s.omega.axis, s.omega.half_angle, 2);
        TraceResult tr = trace(u, s, x);
        REQUIRE(tr.status == TraceStatus::Hit);
        REQUIRE(tr.assigned_target == 0);
        REQUIRE(tr.snell_residual <= 1e-10);
        REQUIRE(tr.focus_miss_distance <= 1e-8 * norm(y - tr.hit_surface));
        // the two routes to the refracted direction agree: Snell at the normal
        // versus aiming at the envelope's active focus
        Vec direct = normalized(y - tr.hit_surface);
        REQUIRE(norm(tr.refracted_direction - direct) <= 1e-8);
    }
}

TEST_CASE("tie boundaries are reported, not assigned", "[raytrace]") {
    Scene s = discrete_scene_2d(2, nullptr);
    DiscreteRefractor u;
    u.kappa = s.kappa;
    for (const Vec& y : s.target.points) u.ovals.push_back(OvalParams{y, 0.62 * norm(y), u.kappa});
    // locate the boundary and trace exactly there
    auto tb = tangent_basis(s.omega.axis, 2);
    auto diff = [&](double t) {
        Vec x = geodesic_step(s.omega.axis, tb[0], t);
        return oval_radius(x, u.ovals[0]) - oval_radius(x, u.ovals[1]);
    };
    double lo = -0.8 * s.omega.half_angle, hi = 0.8 * s.omega.half_angle;
    if (diff(lo) < 0.0) std::swap(lo, hi);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (diff(mid) > 0.0 ? lo : hi) = mid;
    }
    Vec boundary = geodesic_step(s.omega.axis, tb[0], 0.5 * (lo + hi));
    TraceResult tr = trace(u, s, boundary);
    REQUIRE(tr.status == TraceStatus::TieBoundary);
    REQUIRE_THROWS_AS(surface_normal(u, boundary), TieBoundary);
}

TEST_CASE("histograms: totals, symmetry, determinism", "[raytrace]") {
    // one oval: everything lands on the only target
    {
        Scene s = discrete_scene_2d(1, nullptr);
        DiscreteRefractor u;
        u.kappa = s.kappa;
        Vec y = s.target.points[0];
        u.ovals.push_back(OvalParams{y, 0.62 * norm(y), u.kappa});
        Histogram h = irradiance_histogram(u, s, 20000, 5);
        REQUIRE(h.fraction[0] == 1.0);
        REQUIRE(h.tir_rays == 0);
        REQUIRE(h.miss_rays == 0);
    }
    // mirror-symmetric pair: equal fractions within 3 sigma
    {
        Scene s = discrete_scene_2d(2, nullptr);
        SolverConfig cfg;
        cfg.tol_energy = 1e-6;
        auto res = solve(s, cfg);
        Histogram h = irradiance_histogram(res.u, s, 200000, 5);
        double sigma = std::sqrt(h.stderr_fraction[0] * h.stderr_fraction[0] +
                                 h.stderr_fraction[1] * h.stderr_fraction[1]);
        REQUIRE(std::abs(h.fraction[0] - h.fraction[1]) <= 3.0 * sigma + 1e-12);
        // identical seeds reproduce identical counts; batching cannot matter
        Histogram h1 = irradiance_histogram(res.u, s, 50000, 9, 1);
        Histogram h2 = irradiance_histogram(res.u, s, 50000, 9, 2);
        REQUIRE(h1.counts == h2.counts);
    }
}

TEST_CASE("Monte Carlo histogram agrees with quadrature energies", "[raytrace]") {
    std::vector<double> fr{0.1, 0.2, 0.3, 0.4};
    Scene s = discrete_scene_2d(4, &fr);
    SolverConfig cfg;
    cfg.tol_energy = 1e-4;
    auto res = solve(s, cfg);
    auto ev = tracing_energy(res.u, s, cfg);
    double total = 0.0;
    for (double g : ev.G) total += g;
    Histogram h = irradiance_histogram(res.u, s, 400000, 17);
    REQUIRE(h.tir_rays == 0);  // no total internal reflection under visibility
    double assigned = static_cast<double>(h.total_rays - h.miss_rays - h.boundary_rays) /
                      static_cast<double>(h.total_rays);
    REQUIRE(assigned >= 0.999);
    for (std::size_t i = 0; i < 4; ++i) {
        double sigma = std::sqrt(h.stderr_fraction[i] * h.stderr_fraction[i] +
                                 std::pow(ev.quadrature_error / total, 2));
        REQUIRE(std::abs(h.fraction[i] - ev.G[i] / total) <= 3.0 * sigma + 1e-9);
    }
}

TEST_CASE("cosine and table densities sample correctly", "[raytrace]") {
    // check the importance sampler against quadrature for a nonuniform density
    Scene s = discrete_scene_2d(2, nullptr);
    s.density.kind = DensityKind::Cosine;
    {
        auto grid = cap_grid(s.omega, 2, default_quad_nodes(2));
        double total = integrate_density(grid, s.density);
        double wsum = 0.0;
        for (double w : s.target.weights) wsum += w;
        for (double& w : s.target.weights) w *= total / wsum;
    }
    SolverConfig cfg;
    cfg.tol_energy = 1e-5;
    auto res = solve(s, cfg);
    Histogram h = irradiance_histogram(res.u, s, 300000, 23);
    for (std::size_t i = 0; i < 2; ++i)
        REQUIRE(std::abs(h.fraction[i] - 0.5) <= 3.0 * h.stderr_fraction[i] + 2e-3);

    s.density.kind = DensityKind::Table;
    s.density.table = {1.5, 1.0, 0.7};
    {
        auto grid = cap_grid(s.omega, 2, default_quad_nodes(2));
        double total = integrate_density(grid, s.density);
        double wsum = 0.0;
        for (double w : s.target.weights) wsum += w;
        for (double& w : s.target.weights) w *= total / wsum;
    }
    auto res2 = solve(s, cfg);
    auto ev = tracing_energy(res2.u, s, cfg);
    double total = ev.G[0] + ev.G[1];
    Histogram h2 = irradiance_histogram(res2.u, s, 300000, 29);
    for (std::size_t i = 0; i < 2; ++i)
        REQUIRE(std::abs(h2.fraction[i] - ev.G[i] / total) <=
                3.0 * h2.stderr_fraction[i] + 2e-3);
}
