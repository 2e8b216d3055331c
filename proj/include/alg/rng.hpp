#pragma once

#include <cmath>
#include <cstdint>

#include "alg/tensor.hpp"

namespace alg {

// splitmix64: tiny, fast, and the stream is bit-identical on every platform,
// which std::normal_distribution does not guarantee.  Gaussians come from an
// explicit Box-Muller transform for the same reason.
struct Rng {
    uint64_t state;
    double spare = 0.0;
    bool has_spare = false;

    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u1 = uniform(), u2 = uniform();
        // Guard against log(0).
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(a);
        has_spare = true;
        return r * std::cos(a);
    }

    template <typename T>
    Video<T> normal_video(int f, int c, int h, int w) {
        Video<T> out(f, c, h, w);
        for (auto& v : out.data) v = static_cast<T>(normal());
        return out;
    }
};

// Derives an independent stream from (seed, stream id), so per-clip / per-batch
// generators can be created in any order yet stay reproducible.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    Rng r(seed ^ (0x632be59bd9b4e019ull * (stream + 1)));
    return r.next_u64();
}

inline Rng fork_rng(uint64_t seed, uint64_t stream) { return Rng(mix_seed(seed, stream)); }

}  // namespace alg
