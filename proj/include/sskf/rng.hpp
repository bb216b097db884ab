#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sskf {

using Engine = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Named random stream. Children are derived by appending to the label, so a
/// stream's draws depend only on (seed, label) and never on scheduling.
struct RngSeed {
    std::uint64_t seed = 0;
    std::string label;

    RngSeed() = default;
    explicit RngSeed(std::uint64_t s, std::string l = {}) : seed(s), label(std::move(l)) {}

    RngSeed child(std::string_view name) const {
        if (label.empty()) return RngSeed(seed, std::string(name));
        std::string l = label;
        l += '/';
        l += name;
        return RngSeed(seed, std::move(l));
    }

    RngSeed child(std::string_view name, std::size_t index) const {
        return child(std::string(name) + "/" + std::to_string(index));
    }

    std::uint64_t derived() const {
        return detail::splitmix64(detail::splitmix64(seed) ^ detail::fnv1a(label));
    }

    Engine engine() const { return Engine(derived()); }

    bool operator==(const RngSeed&) const = default;
};

/// Uniform draw on [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Engine& eng, double prob) { return uniform01(eng) < prob; }

inline double standard_normal(Engine& eng) {
    // Box-Muller keeps the stream layout fixed across standard libraries.
    double u1 = uniform01(eng);
    while (u1 <= 0.0) u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform integer in [0, bound).
inline std::size_t uniform_index(Engine& eng, std::size_t bound) {
    return static_cast<std::size_t>(uniform01(eng) * static_cast<double>(bound)) % bound;
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> permutation(Engine& eng, std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t k = uniform_index(eng, i);
        std::swap(perm[i - 1], perm[k]);
    }
    return perm;
}

}  // namespace sskf
