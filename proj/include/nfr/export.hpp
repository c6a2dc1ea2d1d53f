#pragma once
// Surface and table exporters: Wavefront OBJ mesh of the radial graph (n = 3),
// polyline CSV (n = 2), and the CSV reports consumed by external plotters.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "quadrature.hpp"
#include "raytrace.hpp"
#include "refractor.hpp"
#include "scene.hpp"

namespace nfr {

namespace detail {

inline std::ofstream open_text(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidParameters("cannot open for writing: " + path);
    out << std::setprecision(17);
    return out;
}

}  // namespace detail

/// Triangulated radial graph u(x) x over the quadrature grid, with a pole fan
/// closing the cap. Faces wrap in the azimuthal direction.
inline void write_obj(const std::string& path, const DiscreteRefractor& u, const Scene& scene,
                      std::size_t mesh_nodes = 4096) {
    if (scene.n != 3) throw InvalidParameters("OBJ export needs a 3-d scene");
    QuadratureGrid g = cap_grid(scene.omega, 3, mesh_nodes);
    auto evals = detail::make_evals(u);
    auto radius_at = [&](const Vec& x) {
        double top = 0.0;
        for (const auto& e : evals) top = std::max(top, e.radius(x));
        return top;
    };
    std::ofstream out = detail::open_text(path);
    out << "# radial graph of a discrete refractor envelope\n";
    for (const Vec& x : g.nodes) {
        Vec p = x * radius_at(x);
        out << "v " << p[0] << " " << p[1] << " " << p[2] << "\n";
    }
    Vec apex = scene.omega.axis * radius_at(scene.omega.axis);
    out << "v " << apex[0] << " " << apex[1] << " " << apex[2] << "\n";
    auto idx = [&](std::size_t iz, std::size_t ip) {
        return iz * g.n_phi + (ip % g.n_phi) + 1;  // OBJ indices are 1-based
    };
    for (std::size_t iz = 0; iz + 1 < g.n_z; ++iz) {
        for (std::size_t ip = 0; ip < g.n_phi; ++ip) {
            out << "f " << idx(iz, ip) << " " << idx(iz, ip + 1) << " " << idx(iz + 1, ip + 1) << "\n";
            out << "f " << idx(iz, ip) << " " << idx(iz + 1, ip + 1) << " " << idx(iz + 1, ip) << "\n";
        }
    }
    std::size_t apex_index = g.size() + 1;
    for (std::size_t ip = 0; ip < g.n_phi; ++ip)
        out << "f " << idx(g.n_z - 1, ip) << " " << idx(g.n_z - 1, ip + 1) << " " << apex_index << "\n";
}

/// Polyline CSV of the n = 2 envelope: angle from the cap axis and the point.
inline void write_polyline_csv(const std::string& path, const DiscreteRefractor& u,
                               const Scene& scene, std::size_t nodes = 2048) {
    if (scene.n != 2) throw InvalidParameters("polyline export needs a 2-d scene");
    QuadratureGrid g = cap_grid(scene.omega, 2, nodes);
    auto evals = detail::make_evals(u);
    std::ofstream out = detail::open_text(path);
    out << "theta,x0,x1\n";
    auto tb = tangent_basis(scene.omega.axis, 2);
    for (const Vec& x : g.nodes) {
        double top = 0.0;
        for (const auto& e : evals) top = std::max(top, e.radius(x));
        double theta = std::atan2(dot(x, tb[0]), dot(x, scene.omega.axis));
        Vec p = x * top;
        out << theta << "," << p[0] << "," << p[1] << "\n";
    }
}

inline void write_convergence_csv(const std::string& path, const std::vector<SweepRow>& trace) {
    std::ofstream out = detail::open_text(path);
    out << "sweep,max_rel_residual,wall_time_s\n";
    for (const auto& row : trace)
        out << row.sweep << "," << row.max_rel_residual << "," << row.wall_time_s << "\n";
}

inline void write_histogram_csv(const std::string& path, const Histogram& h,
                                const std::vector<double>& target_weights) {
    double wtot = 0.0;
    for (double w : target_weights) wtot += w;
    std::ofstream out = detail::open_text(path);
    out << "target_index,estimated_fraction,target_weight_fraction,stderr\n";
    for (std::size_t i = 0; i < h.fraction.size(); ++i)
        out << i << "," << h.fraction[i] << "," << target_weights[i] / wtot << ","
            << h.stderr_fraction[i] << "\n";
}

inline void write_holder_csv(const std::string& path, const HolderReport& rep) {
    std::ofstream out = detail::open_text(path);
    out << "scale,modulus,ratio\n";
    for (const auto& row : rep.rows) out << row.t << "," << row.omega << "," << row.ratio << "\n";
}

/// Per-ray dump for debugging histograms.
inline void write_ray_dump_csv(const std::string& path, const DiscreteRefractor& u,
                               const Scene& scene, std::uint64_t num_rays, std::uint64_t seed) {
    std::ofstream out = detail::open_text(path);
    out << "ray,dir0,dir1,dir2,status,target,focus_miss\n";
    for (std::uint64_t r = 0; r < num_rays; ++r) {
        Vec x = detail::sample_direction(scene, seed, r);
        TraceResult tr = trace(u, scene, x);
        int status = static_cast<int>(tr.status);
        out << r << "," << x[0] << "," << x[1] << "," << x[2] << "," << status << ","
            << tr.assigned_target << "," << tr.focus_miss_distance << "\n";
    }
}

}  // namespace nfr
