#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace hoi {

// PCG32: deterministic across platforms, unlike std:: distributions.
class Rng {
public:
    explicit Rng(uint64_t seed = 0, uint64_t stream = 1) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 1) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
        have_spare_ = false;
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0,1), 32 bits of precision.
    double uniform() { return next_u32() * 0x1.0p-32; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Rejection-free modulo bias is fine at our scales,
    // but use Lemire reduction anyway for exactness.
    uint32_t uniform_int(uint32_t n) {
        uint64_t m = static_cast<uint64_t>(next_u32()) * n;
        uint32_t l = static_cast<uint32_t>(m);
        if (l < n) {
            uint32_t t = (-n) % n;
            while (l < t) {
                m = static_cast<uint64_t>(next_u32()) * n;
                l = static_cast<uint32_t>(m);
            }
        }
        return static_cast<uint32_t>(m >> 32);
    }

    int uniform_int(int lo, int hi) {  // inclusive range [lo, hi]
        return lo + static_cast<int>(uniform_int(static_cast<uint32_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return mean + stddev * u * f;
    }

    // Child RNG with an independent stream, stable under call-site reordering.
    Rng fork(uint64_t tag) const { return Rng(state_ ^ (tag * 0x9e3779b97f4a7c15ULL), tag + 2); }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 1;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline uint64_t hash_str64(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace hoi
