#pragma once
// Counter-based random number generation. Every draw is a pure function of
// (seed, stream, counter), so sample sets are reproducible bit-for-bit, can be
// regenerated for multi-pass statistics, and admit nested budgets (the first N
// counters of a stream are a prefix of the first 4N).

#include <cstdint>

#include "vec.hpp"

namespace nfr {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Random-access SplitMix64 stream: value(k) is the k-th output of a SplitMix64
/// generator whose initial state is derived from (seed, stream).
struct RngStream {
    std::uint64_t origin = 0;

    constexpr RngStream() = default;
    constexpr RngStream(std::uint64_t seed, std::uint64_t stream)
        : origin(detail::mix64(seed + detail::kGolden * (stream + 1)) ^ detail::mix64(~stream)) {}

    constexpr std::uint64_t value(std::uint64_t counter) const {
        return detail::mix64(origin + detail::kGolden * (counter + 1));
    }

    constexpr double uniform(std::uint64_t counter) const {
        return static_cast<double>(value(counter) >> 11) * 0x1.0p-53;
    }
};

/// Sequential convenience wrapper over RngStream.
class Sampler {
  public:
    Sampler(std::uint64_t seed, std::uint64_t stream) : stream_(seed, stream) {}
    explicit Sampler(RngStream s) : stream_(s) {}

    std::uint64_t next_u64() { return stream_.value(counter_++); }
    double uniform() { return stream_.uniform(counter_++); }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::uint64_t counter() const { return counter_; }
    void seek(std::uint64_t counter) { counter_ = counter; }

    /// Uniform point on the unit sphere S^{n-1}, n in {2,3}.
    Vec unit_vector(int n) {
        if (n == 2) {
            double t = uniform(0.0, 6.283185307179586476925286766559);
            return {std::cos(t), std::sin(t)};
        }
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 6.283185307179586476925286766559);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    /// Uniform direction in the spherical cap {x . axis >= cos(half_angle)}.
    Vec cap_vector(const Vec& axis, double half_angle, int n) {
        if (n == 2) {
            double t = uniform(-half_angle, half_angle);
            auto tb = tangent_basis(axis, 2);
            return geodesic_step(axis, tb[0], t);
        }
        double zmin = std::cos(half_angle);
        double z = uniform(zmin, 1.0);
        double phi = uniform(0.0, 6.283185307179586476925286766559);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        auto tb = tangent_basis(axis, 3);
        return axis * z + tb[0] * (r * std::cos(phi)) + tb[1] * (r * std::sin(phi));
    }

  private:
    RngStream stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace nfr
