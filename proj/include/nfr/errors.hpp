#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nfr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidOval : Error { using Error::Error; };
struct NegativeDiscriminant : Error { using Error::Error; };
struct RefractionConditionViolated : Error { using Error::Error; };
struct DegenerateDecomposition : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ComplexRoot : Error { using Error::Error; };
struct NotVisible : Error { using Error::Error; };
struct VisibilityFailure : Error { using Error::Error; };
struct QuadratureBudgetExceeded : Error { using Error::Error; };
struct SupportViolation : Error { using Error::Error; };
struct TieBoundary : Error { using Error::Error; };
struct MissedTarget : Error { using Error::Error; };
struct InfeasibleRadialBounds : Error { using Error::Error; };
struct HypothesisNotSatisfied : Error { using Error::Error; };
struct InvalidParameters : Error { using Error::Error; };

/// Solver failure carrying the residual history for diagnostics.
struct NotConverged : Error {
    std::vector<double> residual_trace;
    NotConverged(const std::string& msg, std::vector<double> trace)
        : Error(msg), residual_trace(std::move(trace)) {}
};

}  // namespace nfr
