#pragma once
// Quadrature on spherical caps. n = 2 uses composite trapezoid over the arc
// angle; n = 3 uses an equal-area product grid in (z, phi) coordinates about
// the cap axis (area element on the unit sphere is dz dphi, so every cell
// carries exactly the same weight).

#include <cstddef>
#include <vector>

#include "scene.hpp"
#include "vec.hpp"

namespace nfr {

struct QuadratureGrid {
    int n = 3;
    Cap cap;
    std::vector<Vec> nodes;
    std::vector<double> weights;  // surface-measure weights, no density factor
    std::size_t n_z = 0;          // n = 3 layout: node index = iz * n_phi + iphi
    std::size_t n_phi = 0;

    std::size_t size() const { return nodes.size(); }
};

inline QuadratureGrid cap_grid(const Cap& cap, int n, std::size_t target_nodes) {
    QuadratureGrid g;
    g.n = n;
    g.cap = cap;
    if (n == 2) {
        std::size_t m = std::max<std::size_t>(target_nodes, 3);
        double a = cap.half_angle;
        double dt = 2.0 * a / static_cast<double>(m - 1);
        auto tb = tangent_basis(cap.axis, 2);
        g.nodes.reserve(m);
        g.weights.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            double t = -a + dt * static_cast<double>(j);
            g.nodes.push_back(geodesic_step(cap.axis, tb[0], t));
            g.weights.push_back((j == 0 || j == m - 1) ? 0.5 * dt : dt);
        }
        return g;
    }
    double zmin = std::cos(cap.half_angle);
    std::size_t n_phi = 32;
    while (n_phi * n_phi < 2 * target_nodes) n_phi += 32;
    std::size_t n_z = std::max<std::size_t>(1, (target_nodes + n_phi - 1) / n_phi);
    double dz = (1.0 - zmin) / static_cast<double>(n_z);
    double dphi = 6.283185307179586476925286766559 / static_cast<double>(n_phi);
    auto tb = tangent_basis(cap.axis, 3);
    g.n_z = n_z;
    g.n_phi = n_phi;
    g.nodes.reserve(n_z * n_phi);
    g.weights.assign(n_z * n_phi, dz * dphi);
    for (std::size_t iz = 0; iz < n_z; ++iz) {
        double z = zmin + (static_cast<double>(iz) + 0.5) * dz;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        for (std::size_t ip = 0; ip < n_phi; ++ip) {
            double phi = (static_cast<double>(ip) + 0.5) * dphi;
            g.nodes.push_back(cap.axis * z + tb[0] * (r * std::cos(phi)) +
                              tb[1] * (r * std::sin(phi)));
        }
    }
    return g;
}

/// Per-node masses w_i f(x_i) and their total.
inline std::vector<double> node_masses(const QuadratureGrid& g, const Density& f) {
    std::vector<double> m(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = g.weights[i] * f(g.nodes[i], g.cap);
    return m;
}

inline double integrate_density(const QuadratureGrid& g, const Density& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * f(g.nodes[i], g.cap);
    return s;
}

/// Visit each interior adjacency (a, b) of the grid once. Used to estimate the
/// mass sitting on argmax-cell boundaries.
template <class F>
inline void for_each_adjacent(const QuadratureGrid& g, F&& fn) {
    if (g.n == 2) {
        for (std::size_t i = 0; i + 1 < g.size(); ++i) fn(i, i + 1);
        return;
    }
    for (std::size_t iz = 0; iz < g.n_z; ++iz) {
        for (std::size_t ip = 0; ip < g.n_phi; ++ip) {
            std::size_t a = iz * g.n_phi + ip;
            fn(a, iz * g.n_phi + (ip + 1) % g.n_phi);
            if (iz + 1 < g.n_z) fn(a, (iz + 1) * g.n_phi + ip);
        }
    }
}

}  // namespace nfr
