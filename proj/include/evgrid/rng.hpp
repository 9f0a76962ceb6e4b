#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace evgrid {

/// FNV-1a 64-bit. Used for stable id hashing and artifact fingerprints;
/// not cryptographic.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic per-id unit score in [0, 1). Same (seed, id) -> same value
/// on every platform.
inline double hash_unit(std::uint64_t seed, std::string_view id) {
    return static_cast<double>(mix64(seed ^ fnv1a64(id)) >> 11) * 0x1.0p-53;
}

/// mt19937_64 with hand-rolled samplers. The std engine is bit-portable but
/// std distributions are not, so sampling stays in-house to keep generated
/// corpora byte-identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Closed range [lo, hi].
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    /// Box-Muller; consumes exactly two draws per call.
    double normal(double mean, double sd) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(6.283185307179586 * u2);
    }

    /// Index into `weights` proportional to weight. Weights need not sum to 1.
    std::size_t pick_weighted(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) return 0;
        double x = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            x -= weights[i];
            if (x < 0.0) return i;
        }
        return weights.size() - 1;
    }

  private:
    std::mt19937_64 eng_;
};

} // namespace evgrid
