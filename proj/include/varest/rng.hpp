#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace varest {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Key for a counter-based stream: (seed, purpose, index...). Streams keyed by
// different tuples are independent of each other and of the order in which
// they are consumed.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose,
                                   std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    std::uint64_t k = mix64(seed ^ 0x5851f42d4c957f2dULL);
    k = mix64(k ^ fnv1a(purpose));
    k = mix64(k ^ (a * 0xd6e8feb86659fd93ULL));
    k = mix64(k ^ (b * 0xa0761d6478bd642fULL));
    return k;
}

// Counter-based generator: the i-th draw is mix64(key + i * gamma).
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}
    CounterRng(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0,
               std::uint64_t b = 0) noexcept
        : key_(derive_key(seed, purpose, a, b)) {}

    constexpr std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) (Lemire's method).
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller (one value per call, two draws consumed).
    double normal() noexcept {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Stateless uniform draw addressed by (key, index).
inline double uniform_at(std::uint64_t key, std::uint64_t index) noexcept {
    return static_cast<double>(mix64(key + (index + 1) * 0x9e3779b97f4a7c15ULL) >> 11) *
           0x1.0p-53;
}

}  // namespace varest
