#pragma once
// Scene description: source cap with emission density, radial shell bounds, and
// the illumination target. Two target kinds are supported, matching what the
// checkers and the solver exercise: a horizontal planar disk at fixed height,
// and a discrete point set with prescribed energies.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"
#include "vec.hpp"

namespace nfr {

struct Cap {
    Vec axis{0.0, 0.0, 1.0};
    double half_angle = 0;

    bool contains(const Vec& x, double tol = 0.0) const {
        return dot(normalized(x), axis) >= std::cos(half_angle) - tol;
    }
};

enum class DensityKind { Uniform, Cosine, Table };

/// Emission density f on the source cap. `Table` is an axisymmetric profile
/// sampled at equally spaced polar angles in [0, half_angle], linearly
/// interpolated.
struct Density {
    DensityKind kind = DensityKind::Uniform;
    std::vector<double> table;

    double operator()(const Vec& x, const Cap& cap) const {
        switch (kind) {
            case DensityKind::Uniform: return 1.0;
            case DensityKind::Cosine: return std::max(0.0, dot(normalized(x), cap.axis));
            case DensityKind::Table: {
                if (table.size() < 2)
                    throw InvalidParameters("table density needs at least two samples");
                double ang = std::acos(std::clamp(dot(normalized(x), cap.axis), -1.0, 1.0));
                double u = std::clamp(ang / cap.half_angle, 0.0, 1.0) *
                           static_cast<double>(table.size() - 1);
                std::size_t i = std::min(static_cast<std::size_t>(u), table.size() - 2);
                double w = u - static_cast<double>(i);
                return table[i] * (1.0 - w) + table[i + 1] * w;
            }
        }
        return 1.0;
    }

    double max_value() const {
        if (kind != DensityKind::Table) return 1.0;
        double m = 0.0;
        for (double v : table) m = std::max(m, v);
        return m;
    }
};

enum class TargetKind { PlanarDisk, DiscretePoints };

struct TargetSpec {
    TargetKind kind = TargetKind::PlanarDisk;
    // PlanarDisk: {(Y', M) : |Y'| <= R}, the horizontal disk (segment when n = 2).
    double R = 0;
    double M = 0;
    // DiscretePoints: receiver points with prescribed energies.
    std::vector<Vec> points;
    std::vector<double> weights;
};

struct Scene {
    int n = 3;  // ambient dimension, 2 or 3
    double kappa = 0.5;
    double c1 = 1.0;
    double c2 = 2.0;
    Cap omega;
    Density density;
    TargetSpec target;
    std::uint64_t seed = 0;
};

inline void validate_scene(const Scene& s) {
    if (s.n != 2 && s.n != 3) throw InvalidParameters("scene dimension must be 2 or 3");
    if (!(s.kappa > 0.0 && s.kappa < 1.0)) throw InvalidParameters("kappa must lie in (0,1)");
    if (!(0.0 < s.c1 && s.c1 < s.c2)) throw InvalidParameters("need 0 < c1 < c2");
    if (!(s.omega.half_angle > 0.0)) throw InvalidParameters("empty source cap");
    if (s.target.kind == TargetKind::DiscretePoints &&
        s.target.points.size() != s.target.weights.size())
        throw InvalidParameters("discrete target: points/weights size mismatch");
}

/// Smallest s > 0 with X + s m on the target. For the planar disk this is the
/// closed-form plane hit (M - X_n)/m_n, accepted when the hit lies inside the
/// disk; for discrete points it is exact ray-to-point matching within the
/// angular tolerance. Throws NotVisible when the ray misses.
inline double visibility_s(const Vec& X, const Vec& m, const TargetSpec& target, int n,
                           const Tolerances& tol = default_tolerances()) {
    if (target.kind == TargetKind::PlanarDisk) {
        double mz = vertical(m, n);
        if (mz <= 1e-15) throw NotVisible("ray does not ascend toward the target plane");
        double s = (target.M - vertical(X, n)) / mz;
        if (s <= 0.0) throw NotVisible("target plane behind the ray origin");
        Vec hit = X + m * s;
        if (horizontal_norm(hit, n) > target.R * (1.0 + 1e-12) + 1e-12)
            throw NotVisible("ray misses the disk");
        return s;
    }
    double best_s = -1.0;
    double best_angle = tol.angular_match;
    for (const Vec& Y : target.points) {
        Vec d = Y - X;
        double nd = norm(d);
        if (nd <= 0.0) continue;
        // chord between unit vectors; equals the angle to first order and is
        // accurate where acos of a near-unit dot product is not
        double ang = norm(m - d / nd);
        if (dot(m, d) > 0.0 && ang <= best_angle) {
            best_angle = ang;
            best_s = nd;
        }
    }
    if (best_s < 0.0) throw NotVisible("no target point along the ray");
    return best_s;
}

inline bool direction_visible(const Vec& X, const Vec& m, const TargetSpec& target, int n) {
    try {
        (void)visibility_s(X, m, target, n);
        return true;
    } catch (const NotVisible&) {
        return false;
    }
}

/// The scene's s_X as a callable, for the curve and concavity machinery.
inline std::function<double(const Vec&, const Vec&)> visibility_function(const Scene& scene) {
    TargetSpec target = scene.target;
    int n = scene.n;
    return [target, n](const Vec& X, const Vec& m) { return visibility_s(X, m, target, n); };
}

inline bool on_target(const Vec& Y, const TargetSpec& target, int n, double tol = 1e-9) {
    if (target.kind == TargetKind::PlanarDisk)
        return std::abs(vertical(Y, n) - target.M) <= tol &&
               horizontal_norm(Y, n) <= target.R + tol;
    for (const Vec& P : target.points)
        if (norm(P - Y) <= tol) return true;
    return false;
}

inline double target_diameter(const TargetSpec& target, int n) {
    if (target.kind == TargetKind::PlanarDisk) return 2.0 * target.R;
    double d = 0.0;
    for (std::size_t i = 0; i < target.points.size(); ++i)
        for (std::size_t j = i + 1; j < target.points.size(); ++j)
            d = std::max(d, norm(target.points[i] - target.points[j]));
    (void)n;
    return d;
}

/// Surface measure of the target: disk area for n = 3, segment length for n = 2,
/// total prescribed energy for discrete targets.
inline double target_measure(const TargetSpec& target, int n) {
    if (target.kind == TargetKind::PlanarDisk)
        return n == 3 ? 3.14159265358979323846 * target.R * target.R : 2.0 * target.R;
    double w = 0.0;
    for (double wi : target.weights) w += wi;
    return w;
}

inline double distance_to_target(const Vec& X, const TargetSpec& target, int n) {
    if (target.kind == TargetKind::PlanarDisk) {
        double dz = target.M - vertical(X, n);
        double dr = std::max(0.0, horizontal_norm(X, n) - target.R);
        return std::sqrt(dz * dz + dr * dr);
    }
    double d = 1e300;
    for (const Vec& P : target.points) d = std::min(d, norm(P - X));
    return d;
}

}  // namespace nfr
