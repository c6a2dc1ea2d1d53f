#include <catch2/catch_amalgamated.hpp>

#include <nfr/oval.hpp>
#include <nfr/rng.hpp>

#include "support.hpp"

using namespace nfr;
using testsupport::admissible_scene;
using testsupport::fd_gradient;
using testsupport::fd_hessian;
using testsupport::kernel_sample;
using testsupport::max_rel_err;
using testsupport::rel_err;

TEST_CASE("oval radius reproduces the through-point and collinear cases", "[oval]") {
    // oval built through X0 passes through X0
    Sampler rng(42, 1);
    for (int k = 0; k < 200; ++k) {
        auto ks = kernel_sample(rng, k % 2 == 0 ? 3 : 2);
        double b = oval_b_through(ks.Y, ks.X0, 0.5);
        OvalParams o{ks.Y, b, 0.5};
        Vec x0 = normalized(ks.X0);
        REQUIRE(rel_err(oval_radius(x0, o), norm(ks.X0)) < 1e-10);
    }
    // collinear: r + 0.5 (10 - r) = 6 gives r = 2
    OvalParams o{Vec{0.0, 0.0, 10.0}, 6.0, 0.5};
    REQUIRE(oval_radius(Vec{0.0, 0.0, 1.0}, o) == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("oval radius satisfies the defining equation", "[oval]") {
    Sampler rng(7, 2);
    for (int k = 0; k < 10000; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        double kappa = rng.uniform(0.05, 0.95);
        Vec y = rng.unit_vector(n) * rng.uniform(2.0, 30.0);
        double ay = norm(y);
        double b = rng.uniform(kappa * ay * 1.0001, ay * 0.9999);
        OvalParams o{y, b, kappa};
        Vec x = rng.unit_vector(n);
        double rho = oval_radius(x, o);
        REQUIRE(rho > 0.0);
        double residual = std::abs(rho + kappa * norm(x * rho - y) - b);
        REQUIRE(residual <= 1e-10 * b);
    }
}

TEST_CASE("oval radius is strictly increasing in b", "[oval]") {
    Sampler rng(11, 3);
    for (int k = 0; k < 2000; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        double kappa = rng.uniform(0.1, 0.9);
        Vec y = rng.unit_vector(n) * rng.uniform(3.0, 20.0);
        double ay = norm(y);
        double b1 = rng.uniform(kappa * ay * 1.001, ay * 0.995);
        double b2 = rng.uniform(b1, ay * 0.999);
        if (b2 <= b1) continue;
        Vec x = rng.unit_vector(n);
        REQUIRE(oval_radius(x, OvalParams{y, b2, kappa}) >
                oval_radius(x, OvalParams{y, b1, kappa}));
    }
}

TEST_CASE("oval parameter validation", "[oval]") {
    Vec y{0.0, 0.0, 10.0};
    REQUIRE_THROWS_AS(oval_radius(Vec{0, 0, 1}, OvalParams{y, 6.0, 1.2}), InvalidOval);
    REQUIRE_THROWS_AS(oval_radius(Vec{0, 0, 1}, OvalParams{y, 4.0, 0.5}), InvalidOval);   // b < kappa|Y|
    REQUIRE_THROWS_AS(oval_radius(Vec{0, 0, 1}, OvalParams{y, 11.0, 0.5}), InvalidOval);  // b > |Y|
    // discriminant goes negative only off the unit sphere (extended directions)
    REQUIRE_THROWS_AS(oval_radius(Vec{0.0, 0.0, 1.5}, OvalParams{y, 6.0, 0.5}),
                      NegativeDiscriminant);
}

TEST_CASE("h at the base direction returns |X0| and obeys the lower bound", "[oval]") {
    Sampler rng(5, 4);
    for (int k = 0; k < 2000; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        REQUIRE(rel_err(h_value(normalized(ks.X0), ks.Y, ks.X0, kappa), norm(ks.X0)) < 1e-10);
        double b = oval_b_through(ks.Y, ks.X0, kappa);
        double lower = (b - kappa * norm(ks.Y)) / (1.0 + kappa);
        REQUIRE(h_value(ks.x, ks.Y, ks.X0, kappa) >= lower - 1e-12 * b);
    }
}

TEST_CASE("x.Y = b marks the critical refraction angle on the oval", "[oval]") {
    // at directions with x.Y = b the surface point is exactly at the critical angle
    Vec Y{0.0, 0.0, 10.0};
    Vec X0{0.3, 0.0, 1.5};
    double kappa = 0.5;
    double b = oval_b_through(Y, X0, kappa);
    REQUIRE(b < norm(Y));
    double c = b / norm(Y);  // cos of the angle between x and Y
    Vec x{std::sqrt(1.0 - c * c), 0.0, c};
    REQUIRE(dot(x, Y) == Catch::Approx(b).epsilon(1e-12));
    double rho = h_value(x, Y, X0, kappa);
    REQUIRE(std::isfinite(rho));
    Vec X = x * rho;
    REQUIRE(refraction_cosine(Y, X) == Catch::Approx(kappa).margin(1e-9));
}

TEST_CASE("h requires the refraction condition at the support point", "[oval]") {
    Vec Y{10.0, 0.0, 0.0};  // sideways focus: condition fails at X0 near the pole
    Vec X0{0.0, 0.0, 1.5};
    REQUIRE(refraction_cosine(Y, X0) < 0.5);
    REQUIRE_THROWS_AS(h_value(Vec{0, 0, 1}, Y, X0, 0.5), RefractionConditionViolated);
}

TEST_CASE("B/C scalars reproduce h and the support-point identities", "[oval]") {
    Sampler rng(13, 5);
    for (int k = 0; k < 2000; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        double k2 = kappa * kappa;
        OvalScalars sc = bc_scalars(ks.x, ks.Y, ks.X0, kappa);
        double h = h_value(ks.x, ks.Y, ks.X0, kappa);
        REQUIRE(rel_err(f_BC(sc.B, sc.C), h) < 1e-10);
        REQUIRE(sc.C <= sc.B * sc.B * (1.0 + 1e-14));
        REQUIRE(rel_err(sc.Delta, (1.0 - k2) * (1.0 - k2) * (sc.B * sc.B - sc.C)) < 1e-9);

        // decomposition identities with Y = X0 + s m
        Vec m = normalized(ks.Y - ks.X0);
        double s = norm(ks.Y - ks.X0);
        Vec x0 = normalized(ks.X0);
        double b = oval_b_through(ks.Y, ks.X0, kappa);
        double lhs1 = b - k2 * dot(ks.x, ks.Y);
        double rhs1 = norm(ks.X0) * (1.0 - k2 * dot(ks.x, x0)) +
                      kappa * s * (1.0 - kappa * dot(ks.x, m));
        REQUIRE(rel_err(lhs1, rhs1) < 1e-10);
        double lhs2 = b * b - k2 * norm2(ks.Y);
        double rhs2 = (1.0 - k2) * norm2(ks.X0) +
                      2.0 * kappa * s * norm(ks.X0) * (1.0 - kappa * dot(x0, m));
        REQUIRE(rel_err(lhs2, rhs2) < 1e-10);

        // at x = x0 the square root collapses to kappa s (1 - kappa x0.m)/(1-k^2)
        OvalScalars at0 = bc_scalars(x0, ks.Y, ks.X0, kappa);
        double sq = kappa * s * (1.0 - kappa * dot(x0, m)) / (1.0 - k2);
        REQUIRE(rel_err(at0.B * at0.B - at0.C, sq * sq) < 1e-9);
    }
    REQUIRE_THROWS_AS(bc_scalars(Vec{0, 0, 1}, Vec{0, 0, 1.5}, Vec{0, 0, 1.5}, 0.5),
                      DegenerateDecomposition);
}

TEST_CASE("slack function basics and the equality manifold", "[oval]") {
    REQUIRE(f_BC(3.7, 0.0) == 0.0);
    REQUIRE(f_BC(1.0, 1.0) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE_THROWS_AS(f_BC(1.0, 1.5), DomainError);
    Sampler rng(17, 6);
    for (int k = 0; k < 5000; ++k) {
        double Bbar = rng.uniform(0.2, 5.0);
        double Cbar = rng.uniform(0.0, Bbar * Bbar);
        double fbar = f_BC(Bbar, Cbar);
        double B = rng.uniform(fbar, 6.0);
        double C = Cbar + 2.0 * (B - Bbar) * fbar;
        if (C < 0.0 || C > B * B) continue;
        REQUIRE(std::abs(f_BC(B, C) - fbar) <= 1e-10 * std::max(1.0, fbar));
    }
}

TEST_CASE("gradient of h in x matches finite differences", "[oval]") {
    Sampler rng(19, 7);
    for (int k = 0; k < 1500; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        Vec g = grad_h_x(ks.x, ks.Y, ks.X0, kappa);
        auto f = [&](const Vec& x) { return h_value(x, ks.Y, ks.X0, kappa); };
        Vec fd = fd_gradient(f, ks.x, n);
        REQUIRE(max_rel_err(g, fd, n) < 1e-6);
    }
}

TEST_CASE("gradient of h in x at the base direction: closed form and symmetry", "[oval]") {
    double kappa = 0.5;
    Vec Y{1.0, -2.0, 21.0};
    Vec X0{0.1, 0.2, 1.4};
    Vec x0 = normalized(X0);
    Vec m = normalized(Y - X0);
    double s = norm(Y - X0);
    Vec g = grad_h_x(x0, Y, X0, kappa);
    double denom = kappa * s * (1.0 - kappa * dot(x0, m));
    for (int i = 0; i < 3; ++i) {
        double want = kappa * kappa * norm(X0) * Y[static_cast<std::size_t>(i)] / denom;
        REQUIRE(rel_err(g[static_cast<std::size_t>(i)], want) < 1e-10);
    }
    // focus on the axis through x0: gradient parallel to Y
    Vec Ya{0.0, 0.0, 21.0};
    Vec X0a{0.0, 0.0, 1.4};
    Vec ga = grad_h_x(Vec{0, 0, 1}, Ya, X0a, kappa);
    REQUIRE(norm(cross(ga, Ya)) <= 1e-12 * norm(ga) * norm(Ya));
}

TEST_CASE("hessian of h in x: finite differences, symmetry, rank one", "[oval]") {
    Sampler rng(23, 8);
    for (int k = 0; k < 400; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        Mat H = hess_h_x(ks.x, ks.Y, ks.X0, kappa);
        auto f = [&](const Vec& x) { return h_value(x, ks.Y, ks.X0, kappa); };
        Mat fd = fd_hessian(f, ks.x, n);
        double scale = std::max(max_abs_entry(H), 1e-12);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                REQUIRE(std::abs(H(i, j) - fd(i, j)) / scale < 1e-4);
                REQUIRE(H(i, j) == Catch::Approx(H(j, i)).margin(1e-14 * scale));
            }
        }
        // rank-one structure: proportional to the outer product of the focus
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double lhs = H(i, j) * dot(ks.Y, ks.Y);
                double rhs = (ks.Y[static_cast<std::size_t>(i)] * ks.Y[static_cast<std::size_t>(j)]) *
                             (H(0, 0) + H(1, 1) + H(2, 2));
                REQUIRE(std::abs(lhs - rhs) <= 1e-8 * std::max(std::abs(lhs), scale));
            }
    }
    // planar case with the focus on the first axis: only the (0,0) entry
    Mat H = hess_h_x(Vec{0.8, 0.6}, Vec{30.0, 0.0}, Vec{1.2, 0.0}, 0.5);
    REQUIRE(std::abs(H(0, 1)) <= 1e-14 * std::abs(H(0, 0)));
    REQUIRE(std::abs(H(1, 1)) <= 1e-14 * std::abs(H(0, 0)));
}

TEST_CASE("gradient of h in the focus: zero at x0, finite differences", "[oval]") {
    Sampler rng(29, 9);
    for (int k = 0; k < 800; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        Vec x0 = normalized(ks.X0);
        REQUIRE(norm(grad_h_Y(x0, ks.Y, ks.X0, kappa)) <= 1e-9);
        Vec g = grad_h_Y(ks.x, ks.Y, ks.X0, kappa);
        auto f = [&](const Vec& Y) { return h_value(ks.x, Y, ks.X0, kappa); };
        Vec fd = fd_gradient(f, ks.Y, n);
        REQUIRE(max_rel_err(g, fd, n) < 1e-6);
    }
}

TEST_CASE("derivative of the oval constant in the focus", "[oval]") {
    Vec Y{0.5, -1.0, 20.0};
    Vec X0{0.2, 0.1, 1.5};
    double kappa = 0.5;
    auto b_of = [&](const Vec& y) { return oval_b_through(y, X0, kappa); };
    Vec fd = fd_gradient(b_of, Y, 3);
    Vec d = X0 - Y;
    for (int k = 0; k < 3; ++k) {
        double want = -kappa * d[static_cast<std::size_t>(k)] / norm(d);
        REQUIRE(rel_err(fd[static_cast<std::size_t>(k)], want) < 1e-8);
    }
}

TEST_CASE("mixed second derivative of h matches finite differences", "[oval]") {
    Sampler rng(31, 10);
    for (int k = 0; k < 300; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        Mat M = mixed_h_Yx(ks.x, ks.Y, ks.X0, kappa);
        double step = 1e-5;
        double scale = std::max(max_abs_entry(M), 1e-10);
        for (int kk = 0; kk < n; ++kk) {
            Vec Yp = ks.Y, Ym = ks.Y;
            Yp[static_cast<std::size_t>(kk)] += step;
            Ym[static_cast<std::size_t>(kk)] -= step;
            Vec gp = grad_h_x(ks.x, Yp, ks.X0, kappa);
            Vec gm = grad_h_x(ks.x, Ym, ks.X0, kappa);
            for (int i = 0; i < n; ++i) {
                double fd = (gp[static_cast<std::size_t>(i)] - gm[static_cast<std::size_t>(i)]) / (2.0 * step);
                REQUIRE(std::abs(M(kk, i) - fd) / scale < 1e-4);
            }
        }
    }
}

TEST_CASE("tangential gradient is orthogonal and matches the chart map", "[oval]") {
    Sampler rng(37, 11);
    for (int k = 0; k < 1000; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        Vec x0 = normalized(ks.X0);
        Vec t = tangential_grad_h(ks.x, ks.Y, ks.X0, kappa);
        REQUIRE(std::abs(dot(t, normalized(ks.x))) <= 1e-12 * std::max(1.0, norm(t)));
        // at x0 the tangential gradient equals kappa |X0| (m - <m,x0> x0)/(1 - kappa <m,x0>)
        Vec m = normalized(ks.Y - ks.X0);
        Vec want = (m - x0 * dot(m, x0)) * (kappa * norm(ks.X0) / (1.0 - kappa * dot(m, x0)));
        REQUIRE(max_rel_err(tangential_grad_h(x0, ks.Y, ks.X0, kappa), want, n) < 1e-9);
    }
    // focus parallel to the base direction: zero tangential gradient
    Vec t = tangential_grad_h(Vec{0, 0, 1}, Vec{0, 0, 25.0}, Vec{0, 0, 1.5}, 0.5);
    REQUIRE(norm(t) <= 1e-12);
}

TEST_CASE("discriminant lower bound over the extended ball", "[oval]") {
    double kappa = 0.5;
    // far focus, epsilon = 0: the minimum is exactly kappa^2 (|Y| - b)^2
    Vec Y{0.0, 0.0, 25.0};
    Vec X0{0.2, 0.0, 1.5};
    double b = oval_b_through(Y, X0, kappa);
    auto dc = delta_lower_bound_check(Y, X0, kappa, 0.0);
    REQUIRE(dc.passes);
    REQUIRE(rel_err(dc.min_value, kappa * kappa * (norm(Y) - b) * (norm(Y) - b)) < 1e-10);

    // b near the lower admissible limit kappa|Y|: still positive for small epsilon
    Vec X0small = Vec{0.0, 0.0, 0.01};
    auto dc2 = delta_lower_bound_check(Y, X0small, kappa, 1e-4);
    REQUIRE(dc2.passes);

    // |Y| = b: the minimum collapses to zero at epsilon = 0
    {
        Vec dir = normalized(Vec{0.4, 0.0, 0.9});
        double lo = 0.0, hi = norm(Y);
        for (int it = 0; it < 200; ++it) {
            double r = 0.5 * (lo + hi);
            (r + kappa * norm(dir * r - Y) < norm(Y) ? lo : hi) = r;
        }
        Vec X0eq = dir * (0.5 * (lo + hi));
        auto dc3 = delta_lower_bound_check(Y, X0eq, kappa, 0.0);
        REQUIRE(std::abs(dc3.min_value) <= 1e-15 * norm2(Y));
    }
}

TEST_CASE("ellipsoid enclosure of the supporting oval", "[oval]") {
    Sampler rng(41, 12);
    for (int k = 0; k < 3000; ++k) {
        int n = k % 2 == 0 ? 3 : 2;
        auto ks = kernel_sample(rng, n);
        double kappa = admissible_scene(n).kappa;
        Vec x0 = normalized(ks.X0);
        Vec m = normalized(ks.Y - ks.X0);
        if (dot(x0, m) < kappa) continue;
        double bound =
            norm(ks.X0) * (1.0 - kappa * dot(x0, m)) / (1.0 - kappa * dot(ks.x, m));
        REQUIRE(h_value(ks.x, ks.Y, ks.X0, kappa) <= bound + 1e-10 * norm(ks.X0));
    }
}
