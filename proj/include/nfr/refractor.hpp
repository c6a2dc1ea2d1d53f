#pragma once
// Discrete refractors: upper envelopes u(x) = max_i rho(x, Y_i, b_i) of ovals
// sharing the index ratio kappa. Every oval lies radially below the envelope
// and touches it on its cell, so u is a refractor sending each cell to the
// oval's focus. The solver adjusts the oval constants b_i by a monotone
// Gauss-Seidel sweep until each focus collects its prescribed energy.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "oval.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "scene.hpp"

namespace nfr {

struct DiscreteRefractor {
    double kappa = 0;
    std::vector<OvalParams> ovals;  // oval i focuses target i

    std::size_t size() const { return ovals.size(); }
};

namespace detail {

/// Per-oval constants of the radius formula, hoisted out of the node loops.
struct OvalEval {
    Vec Y;
    double b = 0;
    double C2 = 0;  // b^2 - k^2 |Y|^2
    double k2 = 0;

    OvalEval() = default;
    OvalEval(const OvalParams& o)
        : Y(o.focus), b(o.b), C2(o.b * o.b - o.kappa * o.kappa * norm2(o.focus)),
          k2(o.kappa * o.kappa) {}

    double radius(const Vec& x) const {
        double P = b - k2 * dot(x, Y);
        double disc = P * P - (1.0 - k2) * C2;
        if (disc < 0.0) throw NegativeDiscriminant("envelope: oval direction inadmissible");
        return C2 / (P + std::sqrt(disc));
    }
};

inline std::vector<OvalEval> make_evals(const DiscreteRefractor& u) {
    std::vector<OvalEval> e;
    e.reserve(u.ovals.size());
    for (const auto& o : u.ovals) e.emplace_back(o);
    return e;
}

/// Area fraction of {c + gx xi + gy eta > 0} over the unit cell
/// [-1/2,1/2]^2 (or the unit interval when gy = 0). Used to resolve cell
/// ownership sub-node: it makes the per-target energy continuous in the oval
/// constants, which the bisection and the symmetric-equality behavior rely on.
inline double area_fraction(double c, double gx, double gy) {
    double a = std::abs(gx), b = std::abs(gy);
    if (a + b < 1e-300) return c > 0.0 ? 1.0 : (c < 0.0 ? 0.0 : 0.5);
    double h = 0.5 * (a + b) - c;
    if (h <= 0.0) return 1.0;
    if (h >= a + b) return 0.0;
    if (a < 1e-300) return 1.0 - std::clamp(h / b, 0.0, 1.0);
    if (b < 1e-300) return 1.0 - std::clamp(h / a, 0.0, 1.0);
    auto pos2 = [](double x) { return x > 0.0 ? x * x : 0.0; };
    double F = (h * h - pos2(h - a) - pos2(h - b) + pos2(h - a - b)) / (2.0 * a * b);
    return 1.0 - std::clamp(F, 0.0, 1.0);
}

/// Central (one-sided at borders) difference stencil of a node field on the
/// cap grid, scaled to the unit cell. phi wraps for the n = 3 product grid.
struct CellGradient {
    const QuadratureGrid* grid;
    const double* field;

    void at(std::size_t q, double& gx, double& gy) const {
        if (grid->n == 2) {
            std::size_t m = grid->size();
            std::size_t left = q == 0 ? q : q - 1;
            std::size_t right = q + 1 >= m ? q : q + 1;
            gx = right == left ? 0.0 : (field[right] - field[left]) / static_cast<double>(right - left);
            gy = 0.0;
            return;
        }
        std::size_t np = grid->n_phi, nz = grid->n_z;
        std::size_t iz = q / np, ip = q % np;
        std::size_t east = iz * np + (ip + 1) % np;
        std::size_t west = iz * np + (ip + np - 1) % np;
        gx = 0.5 * (field[east] - field[west]);
        std::size_t north = iz + 1 < nz ? (iz + 1) * np + ip : q;
        std::size_t south = iz > 0 ? (iz - 1) * np + ip : q;
        int span = static_cast<int>(iz + 1 < nz) + static_cast<int>(iz > 0);
        gy = span == 0 ? 0.0 : (field[north] - field[south]) / static_cast<double>(span);
    }
};

}  // namespace detail

struct EnvelopeValue {
    double radius = 0;
    std::size_t argmax = 0;            // lowest index among exact maxima
    std::vector<std::size_t> ties;     // indices within the tie tolerance
};

/// Envelope evaluation with tie reporting (relative tie tolerance on the radius).
inline EnvelopeValue evaluate(const DiscreteRefractor& u, const Vec& x,
                              double tie_tol = default_tolerances().tie) {
    if (u.ovals.empty()) throw InvalidParameters("evaluate: empty refractor");
    auto evals = detail::make_evals(u);
    EnvelopeValue out;
    std::vector<double> radii(evals.size());
    for (std::size_t i = 0; i < evals.size(); ++i) {
        radii[i] = evals[i].radius(x);
        if (radii[i] > out.radius) {
            out.radius = radii[i];
            out.argmax = i;
        }
    }
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (out.radius - radii[i] <= tie_tol * out.radius) out.ties.push_back(i);
    return out;
}

/// Indices of targets whose ovals support the envelope at x0 up to `tol`
/// (absolute, length units). When a verification grid is supplied, the oval
/// with each returned focus raised through the envelope point X0 = u(x0) x0 is
/// checked to stay below the envelope on the grid, up to the slack induced by
/// the tie tolerance itself; larger violations indicate a corrupt refractor.
inline std::vector<std::size_t> subdifferential(const DiscreteRefractor& u, const Vec& x0,
                                                double tol,
                                                const QuadratureGrid* verify_grid = nullptr) {
    auto evals = detail::make_evals(u);
    std::vector<double> radii(evals.size());
    double top = 0.0;
    for (std::size_t i = 0; i < evals.size(); ++i) {
        radii[i] = evals[i].radius(x0);
        top = std::max(top, radii[i]);
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (top - radii[i] <= tol) out.push_back(i);
    if (verify_grid) {
        Vec X0 = normalized(x0) * top;
        // raising an oval through X0 lifts it by at most (1+kappa) tol times the
        // radius sensitivity 1/(1-kappa); anything beyond that slack is corruption
        double allowed = default_tolerances().support + (1.0 + u.kappa) / (1.0 - u.kappa) * tol;
        for (std::size_t i : out) {
            double braised = top + u.kappa * norm(X0 - u.ovals[i].focus);
            detail::OvalEval raised(OvalParams{u.ovals[i].focus, braised, u.kappa});
            for (const Vec& x : verify_grid->nodes) {
                double env = 0.0;
                for (const auto& e : evals) env = std::max(env, e.radius(x));
                if (env - raised.radius(x) < -allowed)
                    throw SupportViolation("subdifferential: supporting oval rises above the envelope");
            }
        }
    }
    return out;
}

struct EnergyVector {
    std::vector<double> G;         // energy collected per target
    double quadrature_error = 0;   // estimated mass sitting on cell boundaries
};

struct SolverConfig {
    double tol_energy = 1e-3;          // max relative energy residual
    std::size_t quad_nodes = 0;        // 0 = dimension default (4096 / 40960)
    int max_outer_iterations = 200;
    double b_bisect_rel_tol = 1e-13;   // bracket width, relative to |Y_i|
    int threads = 1;
};

inline std::size_t default_quad_nodes(int n) { return n == 2 ? 4096 : 40960; }

namespace detail {

struct GridData {
    QuadratureGrid grid;
    std::vector<double> mass;  // w_i f(x_i)
    double total = 0;
};

inline GridData make_grid_data(const Scene& scene, std::size_t nodes) {
    GridData g;
    g.grid = cap_grid(scene.omega, scene.n, nodes == 0 ? default_quad_nodes(scene.n) : nodes);
    g.mass = node_masses(g.grid, scene.density);
    for (double m : g.mass) g.total += m;
    return g;
}

}  // namespace detail

namespace detail {

/// Fractional-coverage energy split: each target is charged the sub-cell area
/// fraction of {rho_i > max_{j != i} rho_j} under a linear model of the margin
/// field, so the energies vary continuously with the oval constants and cell
/// boundaries are resolved to second order.
inline EnergyVector energy_from_radius_table(const GridData& gd, const std::vector<double>& R,
                                             std::size_t N) {
    std::size_t Q = gd.grid.size();
    std::vector<double> top1(Q), top2(Q);
    std::vector<std::size_t> arg1(Q);
    for (std::size_t q = 0; q < Q; ++q) {
        const double* row = &R[q * N];
        std::size_t best = 0;
        for (std::size_t j = 1; j < N; ++j)
            if (row[j] > row[best]) best = j;
        double second = -1e300;
        for (std::size_t j = 0; j < N; ++j)
            if (j != best) second = std::max(second, row[j]);
        top1[q] = row[best];
        top2[q] = N > 1 ? second : row[best];
        arg1[q] = best;
    }
    EnergyVector ev;
    ev.G.assign(N, 0.0);
    if (N == 1) {
        for (std::size_t q = 0; q < Q; ++q) ev.G[0] += gd.mass[q];
        return ev;
    }
    // Per cell: signed margin s = rho_owner - rho_runnerup, with the gradient
    // of the same pair difference taken from the neighboring nodes. The
    // complement of the owner's coverage goes to the runner-up; the two sides
    // of a boundary use opposite signs of the same field, so coverage sums to 1.
    std::vector<double> band(N, 0.0);
    const QuadratureGrid& grid = gd.grid;
    auto pair_diff = [&](std::size_t q, std::size_t i, std::size_t j) {
        return R[q * N + i] - R[q * N + j];
    };
    for (std::size_t q = 0; q < Q; ++q) {
        std::size_t i = arg1[q];
        const double* row = &R[q * N];
        std::size_t j = i == 0 ? 1 : 0;
        for (std::size_t k = 0; k < N; ++k)
            if (k != i && row[k] > row[j]) j = k;
        double s = top1[q] - top2[q];
        double gx = 0.0, gy = 0.0;
        if (grid.n == 2) {
            std::size_t left = q == 0 ? q : q - 1;
            std::size_t right = q + 1 >= Q ? q : q + 1;
            if (right != left)
                gx = (pair_diff(right, i, j) - pair_diff(left, i, j)) /
                     static_cast<double>(right - left);
        } else {
            std::size_t np = grid.n_phi, nz = grid.n_z;
            std::size_t iz = q / np, ip = q % np;
            gx = 0.5 * (pair_diff(iz * np + (ip + 1) % np, i, j) -
                        pair_diff(iz * np + (ip + np - 1) % np, i, j));
            std::size_t north = iz + 1 < nz ? (iz + 1) * np + ip : q;
            std::size_t south = iz > 0 ? (iz - 1) * np + ip : q;
            int span = static_cast<int>(iz + 1 < nz) + static_cast<int>(iz > 0);
            if (span > 0) gy = (pair_diff(north, i, j) - pair_diff(south, i, j)) / span;
        }
        double chi = area_fraction(s, gx, gy);
        ev.G[i] += gd.mass[q] * chi;
        if (chi < 1.0) {
            ev.G[j] += gd.mass[q] * (1.0 - chi);
            band[i] += gd.mass[q] * chi * (1.0 - chi);
            band[j] += gd.mass[q] * chi * (1.0 - chi);
        }
    }
    for (double v : band) ev.quadrature_error = std::max(ev.quadrature_error, v);
    return ev;
}

}  // namespace detail

/// Energy collected by each target: G_i = integral of f over the cell where
/// oval i realizes the envelope, with fractional sub-cell boundary resolution.
/// The quadrature error reports the largest per-target boundary-band mass.
inline EnergyVector tracing_energy(const DiscreteRefractor& u, const Scene& scene,
                                   const SolverConfig& config) {
    validate_scene(scene);
    auto gd = detail::make_grid_data(scene, config.quad_nodes);
    auto evals = detail::make_evals(u);
    std::size_t Q = gd.grid.size(), N = evals.size();
    std::vector<double> R(Q * N);
    parallel_batches(Q, config.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t q = lo; q < hi; ++q)
            for (std::size_t j = 0; j < N; ++j) R[q * N + j] = evals[j].radius(gd.grid.nodes[q]);
    });
    return detail::energy_from_radius_table(gd, R, N);
}

struct SweepRow {
    int sweep = 0;
    double max_rel_residual = 0;
    double wall_time_s = 0;
};

struct SolveResult {
    DiscreteRefractor u;
    std::vector<double> residuals;  // per-target relative residual at exit
    int sweeps = 0;
    std::vector<SweepRow> trace;
    double total_energy = 0;
    std::size_t grid_nodes = 0;
};

namespace detail {

inline double min_oval_radius(const OvalEval& e, const QuadratureGrid& grid) {
    double m = 1e300;
    for (const Vec& x : grid.nodes) m = std::min(m, e.radius(x));
    return m;
}

/// d rho / d b of an oval at a node: (1 - k^2 (b - t)/sqrt(Delta)) / (1 - k^2).
inline double radius_b_sensitivity(const OvalEval& e, const Vec& x, double b) {
    double t = dot(x, e.Y);
    double P = b - e.k2 * t;
    double disc = std::max(1e-300, P * P - (1.0 - e.k2) * e.C2);
    return (1.0 - e.k2 * (b - t) / std::sqrt(disc)) / (1.0 - e.k2);
}

/// d/dc of the coverage fraction area_fraction(c, gx, gy).
inline double area_fraction_dc(double c, double gx, double gy) {
    double a = std::abs(gx), bb = std::abs(gy);
    if (a + bb < 1e-300) return 0.0;
    double h = 0.5 * (a + bb) - c;
    if (h <= 0.0 || h >= a + bb) return 0.0;
    if (a < 1e-300) return 1.0 / bb;
    if (bb < 1e-300) return 1.0 / a;
    auto pos = [](double x) { return x > 0.0 ? x : 0.0; };
    return (h - pos(h - a) - pos(h - bb) + pos(h - a - bb)) / (a * bb);
}

/// Energy vector plus the Jacobian dG/db assembled from the boundary cells
/// (dense, row-major N x N). The Jacobian of the coverage model is exact up to
/// the frozen-gradient approximation, which is ample for damped Newton steps.
inline EnergyVector energy_and_jacobian(const GridData& gd, const std::vector<double>& R,
                                        std::size_t N, const std::vector<OvalEval>& evals,
                                        const std::vector<double>& b, std::vector<double>* J) {
    std::size_t Q = gd.grid.size();
    if (J) J->assign(N * N, 0.0);
    EnergyVector ev;
    ev.G.assign(N, 0.0);
    if (N == 1) {
        for (std::size_t q = 0; q < Q; ++q) ev.G[0] += gd.mass[q];
        return ev;
    }
    std::vector<double> band(N, 0.0);
    const QuadratureGrid& grid = gd.grid;
    auto pair_diff = [&](std::size_t q, std::size_t i, std::size_t j) {
        return R[q * N + i] - R[q * N + j];
    };
    for (std::size_t q = 0; q < Q; ++q) {
        const double* row = &R[q * N];
        std::size_t i = 0;
        for (std::size_t k = 1; k < N; ++k)
            if (row[k] > row[i]) i = k;
        std::size_t j = i == 0 ? 1 : 0;
        for (std::size_t k = 0; k < N; ++k)
            if (k != i && row[k] > row[j]) j = k;
        double s = row[i] - row[j];
        double gx = 0.0, gy = 0.0;
        if (grid.n == 2) {
            std::size_t left = q == 0 ? q : q - 1;
            std::size_t right = q + 1 >= Q ? q : q + 1;
            if (right != left)
                gx = (pair_diff(right, i, j) - pair_diff(left, i, j)) /
                     static_cast<double>(right - left);
        } else {
            std::size_t np = grid.n_phi, nz = grid.n_z;
            std::size_t iz = q / np, ip = q % np;
            gx = 0.5 * (pair_diff(iz * np + (ip + 1) % np, i, j) -
                        pair_diff(iz * np + (ip + np - 1) % np, i, j));
            std::size_t north = iz + 1 < nz ? (iz + 1) * np + ip : q;
            std::size_t south = iz > 0 ? (iz - 1) * np + ip : q;
            int span = static_cast<int>(iz + 1 < nz) + static_cast<int>(iz > 0);
            if (span > 0) gy = (pair_diff(north, i, j) - pair_diff(south, i, j)) / span;
        }
        double chi = area_fraction(s, gx, gy);
        ev.G[i] += gd.mass[q] * chi;
        if (chi < 1.0) {
            ev.G[j] += gd.mass[q] * (1.0 - chi);
            band[i] += gd.mass[q] * chi * (1.0 - chi);
            band[j] += gd.mass[q] * chi * (1.0 - chi);
        }
        if (J) {
            double ap = area_fraction_dc(s, gx, gy);
            if (ap > 0.0) {
                const Vec& x = grid.nodes[q];
                double dri = radius_b_sensitivity(evals[i], x, b[i]);
                double drj = radius_b_sensitivity(evals[j], x, b[j]);
                double mi = gd.mass[q] * ap * dri;
                double mj = gd.mass[q] * ap * drj;
                (*J)[i * N + i] += mi;
                (*J)[j * N + i] -= mi;
                (*J)[i * N + j] -= mj;
                (*J)[j * N + j] += mj;
            }
        }
    }
    for (double v : band) ev.quadrature_error = std::max(ev.quadrature_error, v);
    return ev;
}

/// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve_dense(std::vector<double>& A, std::vector<double>& rhs, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
        if (std::abs(A[piv * n + col]) < 1e-300) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(A[col * n + c], A[piv * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        double d = A[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = A[r * n + col] / d;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (std::size_t r = n; r-- > 0;) {
        double acc = rhs[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= A[r * n + c] * rhs[c];
        rhs[r] = acc / A[r * n + r];
    }
    return true;
}

}  // namespace detail

/// Prescribed-energy solve on a discrete target. The first oval is anchored so
/// the envelope's minimum radius equals c1. The remaining constants start at
/// the anchor scale and are driven toward G_i = w_i by monotone supporting-oval
/// sweeps (full-bracket bisection per target, which is well defined since G_i
/// is nondecreasing in b_i with the others frozen), accelerated by damped
/// Newton steps on the boundary-integral Jacobian once every cell holds mass.
/// Stalls trigger one quadrature refinement before giving up.
inline SolveResult solve(const Scene& scene, const SolverConfig& config) {
    validate_scene(scene);
    if (scene.target.kind != TargetKind::DiscretePoints)
        throw InvalidParameters("solve: needs a discrete target (discretize first)");
    const auto& pts = scene.target.points;
    std::vector<double> w = scene.target.weights;
    std::size_t N = pts.size();
    if (N == 0) throw InvalidParameters("solve: no targets");
    for (double wi : w)
        if (!(wi > 0.0)) throw InvalidParameters("solve: weights must be positive");

    auto gd = detail::make_grid_data(scene, config.quad_nodes);
    double wsum = 0.0;
    for (double wi : w) wsum += wi;
    if (std::abs(wsum - gd.total) > 1e-6 * gd.total)
        throw InvalidParameters("solve: weights violate energy conservation");
    for (double& wi : w) wi *= gd.total / wsum;

    const double kappa = scene.kappa;
    std::vector<double> blo(N), bhi(N), b(N);
    for (std::size_t i = 0; i < N; ++i) {
        double ay = norm(pts[i]);
        blo[i] = kappa * ay * (1.0 + 1e-9);
        bhi[i] = ay * (1.0 - 1e-9);
    }

    // anchor: first oval's minimum radius equals c1
    {
        auto min_r = [&](double bb) {
            return detail::min_oval_radius(detail::OvalEval(OvalParams{pts[0], bb, kappa}), gd.grid);
        };
        if (min_r(bhi[0]) < scene.c1)
            throw InfeasibleRadialBounds("solve: cannot reach c1 with the first oval");
        double lo = blo[0], hi = bhi[0];
        for (int it = 0; it < 200 && hi - lo > 1e-14 * norm(pts[0]); ++it) {
            double mid = 0.5 * (lo + hi);
            (min_r(mid) < scene.c1 ? lo : hi) = mid;
        }
        b[0] = hi;
    }
    // start every movable oval tangent to the anchor envelope from below: its
    // constant is the smallest b whose oval still touches the anchor surface.
    // All cells start empty, so the expanding sweep is monotone from scratch.
    {
        detail::OvalEval anchor(OvalParams{pts[0], b[0], kappa});
        for (std::size_t i = 1; i < N; ++i) {
            double btan = 1e300;
            for (const Vec& x : gd.grid.nodes) {
                Vec X = x * anchor.radius(x);
                btan = std::min(btan, norm(X) + kappa * norm(X - pts[i]));
            }
            b[i] = std::clamp(btan, blo[i], bhi[i]);
        }
    }

    std::size_t Q = gd.grid.size();
    std::vector<double> R(Q * N);
    auto fill_column = [&](std::size_t i) {
        detail::OvalEval e(OvalParams{pts[i], b[i], kappa});
        parallel_batches(Q, config.threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
            for (std::size_t q = lo; q < hi; ++q) R[q * N + i] = e.radius(gd.grid.nodes[q]);
        });
    };
    for (std::size_t i = 0; i < N; ++i) fill_column(i);

    std::vector<double> other_max(Q);
    std::vector<double> margin(Q);
    SolveResult res;
    res.total_energy = gd.total;
    res.grid_nodes = Q;
    auto t0 = std::chrono::steady_clock::now();
    bool refined = false;
    double max_res = 1e300;

    auto evals_now = [&]() {
        std::vector<detail::OvalEval> e;
        e.reserve(N);
        for (std::size_t i = 0; i < N; ++i) e.emplace_back(OvalParams{pts[i], b[i], kappa});
        return e;
    };

    // cached per-node maximum and runner-up over the radius table; refreshed
    // once per sweep and patched incrementally after each column update
    std::vector<double> top1(Q), top2(Q);
    std::vector<std::size_t> arg1(Q);
    auto rebuild_tops = [&]() {
        parallel_batches(Q, config.threads, [&](std::size_t, std::size_t lo_, std::size_t hi_) {
            for (std::size_t q = lo_; q < hi_; ++q) {
                const double* row = &R[q * N];
                std::size_t best = 0;
                for (std::size_t j = 1; j < N; ++j)
                    if (row[j] > row[best]) best = j;
                double second = -1e300;
                for (std::size_t j = 0; j < N; ++j)
                    if (j != best) second = std::max(second, row[j]);
                top1[q] = row[best];
                top2[q] = second;
                arg1[q] = best;
            }
        });
    };
    auto patch_tops = [&](std::size_t i) {
        for (std::size_t q = 0; q < Q; ++q) {
            double v = R[q * N + i];
            if (arg1[q] == i) {
                if (v >= top2[q]) {
                    top1[q] = v;
                } else {  // owner dethroned; rescan the row
                    const double* row = &R[q * N];
                    std::size_t best = 0;
                    for (std::size_t j = 1; j < N; ++j)
                        if (row[j] > row[best]) best = j;
                    double second = -1e300;
                    for (std::size_t j = 0; j < N; ++j)
                        if (j != best) second = std::max(second, row[j]);
                    top1[q] = row[best];
                    top2[q] = second;
                    arg1[q] = best;
                }
            } else if (v > top1[q]) {
                top2[q] = top1[q];
                top1[q] = v;
                arg1[q] = i;
            } else if (v > top2[q]) {
                top2[q] = v;
            }
        }
    };

    // Expanding sweep: raise under-served ovals to G_i = w_i with the others
    // frozen and never lower any. Constants ascend monotonically, the anchor
    // absorbs exactly the remaining share in the limit, and no circulation
    // can starve a cell.
    auto gauss_seidel_sweep = [&](const EnergyVector& ev_now) {
        rebuild_tops();
        for (std::size_t i = 1; i < N; ++i) {
            if (ev_now.G[i] >= w[i] * (1.0 - 0.25 * config.tol_energy)) continue;
            for (std::size_t q = 0; q < Q; ++q)
                other_max[q] = arg1[q] == i ? top2[q] : top1[q];
            // G_i as a function of b_i: fractional cell coverage of
            // {rho_i > max_others}, continuous and nondecreasing in b
            auto G_of_b = [&](double bb) {
                detail::OvalEval e(OvalParams{pts[i], bb, kappa});
                parallel_batches(Q, config.threads, [&](std::size_t, std::size_t lo_, std::size_t hi_) {
                    for (std::size_t q = lo_; q < hi_; ++q)
                        margin[q] = e.radius(gd.grid.nodes[q]) - other_max[q];
                });
                detail::CellGradient grad{&gd.grid, margin.data()};
                double sum = 0.0;
                for (std::size_t q = 0; q < Q; ++q) {
                    double gx, gy;
                    grad.at(q, gx, gy);
                    sum += gd.mass[q] * detail::area_fraction(margin[q], gx, gy);
                }
                return sum;
            };
            double lo = b[i], hi = bhi[i];
            if (G_of_b(lo) >= w[i]) continue;
            if (G_of_b(hi) < w[i]) {
                b[i] = hi;  // even the largest admissible oval is under-served
            } else {
                while (hi - lo > config.b_bisect_rel_tol * norm(pts[i])) {
                    double mid = 0.5 * (lo + hi);
                    (G_of_b(mid) < w[i] ? lo : hi) = mid;
                }
                b[i] = 0.5 * (lo + hi);
            }
            fill_column(i);
            patch_tops(i);
        }
    };

    auto max_residual_of = [&](const EnergyVector& ev) {
        double m = 0.0;
        for (std::size_t i = 0; i < N; ++i) m = std::max(m, std::abs(ev.G[i] - w[i]) / w[i]);
        return m;
    };

    std::vector<double> jac;
    // Damped Newton step on the active cells (those already holding mass; the
    // anchor fixes the gauge, empty cells are left to the expanding sweep).
    // Returns false when the Jacobian is singular or no damping descends.
    auto newton_step = [&](const EnergyVector& ev, double current_res) {
        std::vector<std::size_t> act;
        for (std::size_t i = 1; i < N; ++i)
            if (ev.G[i] > 1e-6 * w[i]) act.push_back(i);
        std::size_t m = act.size();
        if (m == 0) return false;
        auto evals = evals_now();
        (void)detail::energy_and_jacobian(gd, R, N, evals, b, &jac);
        std::vector<double> A(m * m), rhs(m);
        for (std::size_t r = 0; r < m; ++r) {
            rhs[r] = w[act[r]] - ev.G[act[r]];
            for (std::size_t c = 0; c < m; ++c) A[r * m + c] = jac[act[r] * N + act[c]];
        }
        if (!detail::solve_dense(A, rhs, m)) return false;
        std::vector<double> b_old = b;
        const char* dbg = std::getenv("NFR_SOLVE_DEBUG");
        for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
            for (std::size_t r = 0; r < m; ++r)
                b[act[r]] = std::clamp(b_old[act[r]] + alpha * rhs[r], blo[act[r]], bhi[act[r]]);
            for (std::size_t r = 0; r < m; ++r) fill_column(act[r]);
            EnergyVector trial = detail::energy_from_radius_table(gd, R, N);
            double tr = max_residual_of(trial);
            if (dbg)
                std::fprintf(stderr, "    newton m=%zu alpha=%.4g residual %.6g -> %.6g\n", m,
                             alpha, current_res, tr);
            if (tr < current_res * (1.0 - 0.05 * alpha)) return true;
        }
        b = b_old;
        for (std::size_t r = 0; r < m; ++r) fill_column(act[r]);
        return false;
    };

    for (int sweep = 1; sweep <= config.max_outer_iterations; ++sweep) {
        EnergyVector ev = detail::energy_from_radius_table(gd, R, N);
        double res_before = max_residual_of(ev);
        bool newton_moved = sweep > 1 && newton_step(ev, res_before);
        if (newton_moved) ev = detail::energy_from_radius_table(gd, R, N);
        // the expanding sweep serves whatever Newton left under-served (it
        // skips satisfied cells, so it is cheap near convergence)
        gauss_seidel_sweep(ev);

        ev = detail::energy_from_radius_table(gd, R, N);
        std::vector<double> r(N);
        for (std::size_t i = 0; i < N; ++i) r[i] = std::abs(ev.G[i] - w[i]) / w[i];
        max_res = *std::max_element(r.begin(), r.end());
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.trace.push_back({sweep, max_res, secs});
        res.sweeps = sweep;
        res.residuals = r;
        if (max_res <= config.tol_energy) break;
        // stall: no 1% progress over the last 5 sweeps -> refine quadrature once
        if (!refined && res.trace.size() >= 6) {
            double old = res.trace[res.trace.size() - 6].max_rel_residual;
            if (max_res > 0.99 * old) {
                refined = true;
                gd = detail::make_grid_data(
                    scene, 2 * (config.quad_nodes == 0 ? default_quad_nodes(scene.n)
                                                       : config.quad_nodes));
                Q = gd.grid.size();
                res.grid_nodes = Q;
                res.total_energy = gd.total;
                wsum = 0.0;
                for (double wi : w) wsum += wi;
                for (double& wi : w) wi *= gd.total / wsum;
                R.assign(Q * N, 0.0);
                for (std::size_t i = 0; i < N; ++i) fill_column(i);
                other_max.resize(Q);
                margin.resize(Q);
            }
        }
    }
    if (max_res > config.tol_energy) {
        std::vector<double> hist;
        for (const auto& row : res.trace) hist.push_back(row.max_rel_residual);
        throw NotConverged("solve: residuals above tolerance after max sweeps", hist);
    }

    res.u.kappa = kappa;
    for (std::size_t i = 0; i < N; ++i) res.u.ovals.push_back(OvalParams{pts[i], b[i], kappa});
    double umin = 1e300, umax = 0.0;
    auto evals = detail::make_evals(res.u);
    for (const Vec& x : gd.grid.nodes) {
        double top = 0.0;
        for (const auto& e : evals) top = std::max(top, e.radius(x));
        umin = std::min(umin, top);
        umax = std::max(umax, top);
    }
    if (umin < scene.c1 - 1e-9 || umax > scene.c2 + 1e-9)
        throw InfeasibleRadialBounds("solve: envelope leaves the radial shell [c1, c2]");
    return res;
}

/// Max over partition cells of |mu(T_u(B)) - nu(B)| / nu(Sigma). The partition
/// lists groups of target indices; indices absent from every group are ignored.
inline double weak_solution_residual(const DiscreteRefractor& u, const Scene& scene,
                                     const std::vector<std::vector<std::size_t>>& partition,
                                     const SolverConfig& config) {
    if (scene.target.kind != TargetKind::DiscretePoints)
        throw InvalidParameters("weak_solution_residual: needs a discrete target");
    EnergyVector ev = tracing_energy(u, scene, config);
    double nu_total = 0.0;
    for (double wi : scene.target.weights) nu_total += wi;
    double worst = 0.0;
    for (const auto& cell : partition) {
        double mu = 0.0, nu = 0.0;
        for (std::size_t i : cell) {
            mu += ev.G[i];
            nu += scene.target.weights[i];
        }
        worst = std::max(worst, std::abs(mu - nu) / nu_total);
    }
    return worst;
}

struct MeasureConditionRow {
    double sigma = 0;
    double measure = 0;  // summed cell-area surrogate of the reached targets
    double ratio = 0;    // measure / sigma^{n-1}
};

struct MeasureConditionReport {
    std::vector<MeasureConditionRow> rows;
    double sup_ratio = 0;
    bool passes = false;
};

/// Dyadic check of the subdifferential-image measure growth around `center`:
/// the targets reachable from the spherical ball of radius sigma are charged
/// their share of the target surface measure, and the ratio to sigma^{n-1}
/// must stay within `stability_factor` of its value at the coarsest scale.
/// Below the source-cell scale the surrogate saturates at one cell's area,
/// which is the expected quantization floor for a discrete target.
inline MeasureConditionReport measure_condition_check(const DiscreteRefractor& u,
                                                      const Scene& scene, const Vec& center,
                                                      const std::vector<double>& sigma_list,
                                                      double target_surface_measure,
                                                      const SolverConfig& config,
                                                      double stability_factor = 10.0) {
    if (scene.target.kind != TargetKind::DiscretePoints)
        throw InvalidParameters("measure_condition_check: needs a discrete target");
    auto gd = detail::make_grid_data(scene, config.quad_nodes);
    auto evals = detail::make_evals(u);
    std::size_t N = evals.size();
    double wtot = 0.0;
    for (double wi : scene.target.weights) wtot += wi;

    MeasureConditionReport rep;
    for (double sigma : sigma_list) {
        std::vector<char> hit(N, 0);
        auto mark = [&](const Vec& x) {
            std::size_t best = 0;
            double top = evals[0].radius(x);
            for (std::size_t j = 1; j < N; ++j) {
                double r = evals[j].radius(x);
                if (r > top) { top = r; best = j; }
            }
            hit[best] = 1;
        };
        mark(normalized(center));  // the sigma -> 0 limit is the center's own cell
        for (const Vec& x : gd.grid.nodes)
            if (norm(x - center) <= sigma) mark(x);
        double measure = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            if (hit[i]) measure += scene.target.weights[i] / wtot * target_surface_measure;
        double ratio = measure / std::pow(sigma, scene.n - 1);
        rep.rows.push_back({sigma, measure, ratio});
        rep.sup_ratio = std::max(rep.sup_ratio, ratio);
    }
    rep.passes = !rep.rows.empty() && std::isfinite(rep.sup_ratio);
    if (rep.passes) {
        double base = rep.rows.front().ratio;
        for (const auto& row : rep.rows)
            if (!(row.ratio <= stability_factor * std::max(base, 1e-300))) rep.passes = false;
    }
    return rep;
}

}  // namespace nfr
