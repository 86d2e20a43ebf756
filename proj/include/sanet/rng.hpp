#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace sanet {

/// Counter-based deterministic generator (SplitMix64 finalizer over a
/// key/counter pair). Streams are derived from a master seed plus a path
/// string, so every operation owns an independent sequence whose output is
/// identical across platforms and thread schedules.
class Rng {
public:
    explicit Rng(std::uint64_t key = 0) : key_(key) {}

    /// New independent stream for a sub-operation. Derivation depends only
    /// on the current key and the path text.
    [[nodiscard]] Rng derive(std::string_view path) const {
        std::uint64_t h = key_ ^ 0x9e3779b97f4a7c15ULL;
        for (unsigned char c : path) {
            h = mix(h ^ static_cast<std::uint64_t>(c));
        }
        return Rng(mix(h));
    }

    [[nodiscard]] Rng derive(std::string_view path, std::uint64_t index) const {
        return derive(std::string(path) + "#" + std::to_string(index));
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n) {
        // multiply-shift; bias is negligible for the n used here (n << 2^64)
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (avoids stdlib distribution
    /// implementation differences).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace sanet
