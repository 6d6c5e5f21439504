#pragma once

#include <cstdint>
#include <cmath>

namespace kcore {

// splitmix64, used for seeding and for deriving substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with explicit 64-bit seeding. All sampling goes through this
// class so that results are bit-reproducible across platforms (no
// std::uniform_*_distribution, whose output is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // Deterministic substream keyed by (this stream's seed, key).
    Rng split(std::uint64_t key) const {
        std::uint64_t sm = s_[0] ^ (0x632be59bd9b4e019ULL * (key + 1));
        Rng child(0);
        for (auto& w : child.s_) w = splitmix64(sm);
        return child;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform integer in [0, bound), bound >= 1. Lemire's rejection method.
    std::uint64_t next_below(std::uint64_t bound) {
        using u128 = unsigned __int128;
        std::uint64_t x = next_u64();
        u128 m = u128(x) * u128(bound);
        auto lo = std::uint64_t(m);
        if (lo < bound) {
            std::uint64_t t = -bound % bound;
            while (lo < t) {
                x = next_u64();
                m = u128(x) * u128(bound);
                lo = std::uint64_t(m);
            }
        }
        return std::uint64_t(m >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace kcore
