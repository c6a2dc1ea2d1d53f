#include <catch2/catch_amalgamated.hpp>

#include <nfr/quadrature.hpp>
#include <nfr/scene.hpp>

#include "support.hpp"

using namespace nfr;
using testsupport::admissible_scene;

TEST_CASE("planar-disk visibility: vertical ray and rim grazing", "[scene]") {
    TargetSpec disk;
    disk.kind = TargetKind::PlanarDisk;
    disk.R = 8.0;
    disk.M = 20.0;
    Vec X{0.0, 0.0, 1.5};
    REQUIRE(visibility_s(X, Vec{0, 0, 1}, disk, 3) == Catch::Approx(18.5).epsilon(1e-14));
    // ray aimed exactly at the rim
    Vec rim{8.0, 0.0, 20.0};
    Vec m = normalized(rim - X);
    double s = visibility_s(X, m, disk, 3);
    REQUIRE(std::abs(horizontal_norm(X + m * s, 3) - disk.R) <= 1e-9);
    // beyond the rim: miss
    Vec out{8.2, 0.0, 20.0};
    REQUIRE_THROWS_AS(visibility_s(X, normalized(out - X), disk, 3), NotVisible);
    REQUIRE_THROWS_AS(visibility_s(X, Vec{1, 0, 0}, disk, 3), NotVisible);
    REQUIRE_THROWS_AS(visibility_s(X, Vec{0, 0, -1}, disk, 3), NotVisible);
}

TEST_CASE("discrete visibility matches rays exactly", "[scene]") {
    TargetSpec pts;
    pts.kind = TargetKind::DiscretePoints;
    pts.points = {Vec{1.0, 2.0, 19.0}, Vec{-2.0, 0.5, 21.0}};
    pts.weights = {1.0, 1.0};
    Vec X{0.1, -0.2, 1.4};
    for (const Vec& Y : pts.points) {
        double s = visibility_s(X, normalized(Y - X), pts, 3);
        REQUIRE(s == Catch::Approx(norm(Y - X)).epsilon(1e-12));
    }
    REQUIRE_THROWS_AS(visibility_s(X, Vec{0, 0, 1}, pts, 3), NotVisible);
}

TEST_CASE("segment target in the plane", "[scene]") {
    TargetSpec seg;
    seg.kind = TargetKind::PlanarDisk;
    seg.R = 5.0;
    seg.M = 15.0;
    Vec X{0.3, 1.2};
    REQUIRE(visibility_s(X, Vec{0, 1}, seg, 2) == Catch::Approx(13.8).epsilon(1e-14));
    REQUIRE(on_target(Vec{4.9, 15.0}, seg, 2));
    REQUIRE_FALSE(on_target(Vec{5.2, 15.0}, seg, 2));
    REQUIRE(target_measure(seg, 2) == Catch::Approx(10.0));
}

TEST_CASE("cap quadrature reproduces cap measures", "[scene]") {
    Cap cap{Vec{0, 0, 1}, 0.4};
    QuadratureGrid g3 = cap_grid(cap, 3, 40960);
    double area = 0.0;
    for (double w : g3.weights) area += w;
    double want = 2.0 * 3.14159265358979323846 * (1.0 - std::cos(0.4));
    REQUIRE(area == Catch::Approx(want).epsilon(1e-12));
    for (const Vec& x : g3.nodes) {
        REQUIRE(std::abs(norm(x) - 1.0) <= 1e-12);
        REQUIRE(cap.contains(x, 1e-12));
    }

    Cap cap2{Vec{0, 1}, 0.7};
    QuadratureGrid g2 = cap_grid(cap2, 2, 4096);
    double len = 0.0;
    for (double w : g2.weights) len += w;
    REQUIRE(len == Catch::Approx(1.4).epsilon(1e-12));
}

TEST_CASE("equal-area grid integrates smooth densities accurately", "[scene]") {
    Cap cap{Vec{0, 0, 1}, 0.5};
    QuadratureGrid g = cap_grid(cap, 3, 40960);
    Density cosine{DensityKind::Cosine, {}};
    // integral of z over the cap: pi (1 - cos^2 a)
    double want = 3.14159265358979323846 * (1.0 - std::pow(std::cos(0.5), 2));
    REQUIRE(integrate_density(g, cosine) == Catch::Approx(want).epsilon(1e-6));
}

TEST_CASE("table densities interpolate linearly", "[scene]") {
    Cap cap{Vec{0, 0, 1}, 0.5};
    Density table{DensityKind::Table, {2.0, 1.0}};
    REQUIRE(table(Vec{0, 0, 1}, cap) == Catch::Approx(2.0));
    Vec mid = geodesic_step(Vec{0, 0, 1}, Vec{1, 0, 0}, 0.25);
    REQUIRE(table(mid, cap) == Catch::Approx(1.5).epsilon(1e-12));
    Vec edge = geodesic_step(Vec{0, 0, 1}, Vec{1, 0, 0}, 0.5);
    REQUIRE(table(edge, cap) == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("grid adjacency covers each interior pair once", "[scene]") {
    Cap cap{Vec{0, 0, 1}, 0.3};
    QuadratureGrid g = cap_grid(cap, 3, 2048);
    std::size_t count = 0;
    for_each_adjacent(g, [&](std::size_t a, std::size_t b) {
        REQUIRE(a != b);
        REQUIRE(a < g.size());
        REQUIRE(b < g.size());
        ++count;
    });
    // n_z * n_phi azimuthal pairs (wrapping) + (n_z - 1) * n_phi vertical pairs
    REQUIRE(count == g.n_z * g.n_phi + (g.n_z - 1) * g.n_phi);
}

TEST_CASE("scene validation rejects malformed inputs", "[scene]") {
    Scene s = admissible_scene(3);
    REQUIRE_NOTHROW(validate_scene(s));
    Scene bad = s;
    bad.n = 4;
    REQUIRE_THROWS_AS(validate_scene(bad), InvalidParameters);
    bad = s;
    bad.kappa = 1.0;
    REQUIRE_THROWS_AS(validate_scene(bad), InvalidParameters);
    bad = s;
    bad.c1 = 3.0;
    REQUIRE_THROWS_AS(validate_scene(bad), InvalidParameters);
}
