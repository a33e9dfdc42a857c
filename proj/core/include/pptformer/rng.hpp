#pragma once

#include <cstdint>

#include "pptformer/tensor.hpp"

namespace ppt {

// Counter-free SplitMix64 stream. The integer stream is bit-exact across
// platforms; derived doubles are pure arithmetic on those integers.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) { return (int)(next_u64() % (uint64_t)n); }

    // Box-Muller; draws two uniforms per call, second value discarded so the
    // call sequence maps 1:1 onto the integer stream.
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Independent stream derived from this seed and a stream tag.
    Rng fork(uint64_t stream) const {
        Rng r(state_ ^ (0xA0761D6478BD642FULL * (stream + 1)));
        r.next_u64();
        return r;
    }

    Tensor normal_tensor(std::vector<int> shape, double stddev) {
        Tensor t(std::move(shape));
        for (long long i = 0; i < t.size(); ++i) t[i] = normal() * stddev;
        return t;
    }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

// Stable FNV-1a over bytes; used for config hashing and seed derivation.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = 0xCBF29CE484222325ULL) {
    const unsigned char* p = (const unsigned char*)bytes;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace ppt
