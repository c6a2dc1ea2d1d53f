#pragma once
// Centralized tolerance constants. All numerical thresholds used across the
// library live here so they can be audited and overridden in one place.

namespace nfr {

struct Tolerances {
    double residual = 1e-10;           // defining-equation residuals, relative
    double gradient_check = 1e-6;      // first derivatives vs finite differences, relative
    double hessian_check = 1e-4;       // second derivatives vs finite differences, relative
    double orthogonality = 1e-12;      // tangential projections, absolute
    double unit_norm = 1e-12;          // |x| = 1 checks, absolute
    double tie = 1e-12;                // envelope tie detection, relative to radius
    double support = 1e-9;             // envelope support violations, absolute
    double inverse_map = 1e-10;        // round trips of coordinate transforms
    double concavity = 1e-8;           // second-difference concavity margin
    double hc_margin = 1e-10;          // slack allowed in the radial concavity inequality
    double tiny_delta = 1e-14;         // discriminants below this are flagged as near-degenerate
    double angular_match = 1e-9;       // ray-to-point matching for discrete targets, radians
    double fd_step = 1e-5;             // finite-difference step for derivative checks
};

inline const Tolerances& default_tolerances() {
    static const Tolerances t{};
    return t;
}

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nfr
