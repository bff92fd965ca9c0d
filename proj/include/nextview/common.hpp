// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbv {

// Error hierarchy mirrored by the CLI exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 2;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 3;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 4;
};

// Cheap counter-free stream RNG used for per-pixel jitter and Monte-Carlo
// sampling where constructing a mt19937 per stream would dominate.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

// Deterministic seed derivation for independent sub-streams.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    SplitMix64 rng(a ^ (0x632be59bd9b4e019ULL + (b << 1)));
    rng.next();
    return rng.next();
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

// Unbiased draw from [0, n) via rejection; stable across platforms, unlike
// std::uniform_int_distribution.
inline uint64_t bounded_rand(std::mt19937_64& rng, uint64_t n) {
    if (n == 0) throw ConfigError("bounded_rand: empty range");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = rng();
    while (v >= limit) v = rng();
    return v % n;
}

// Fisher-Yates permutation of 0..n-1.
inline std::vector<int> shuffled_indices(int n, std::mt19937_64& rng) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(bounded_rand(rng, static_cast<uint64_t>(i) + 1));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

// Static-chunked parallel map over [0, n). Each index must write only to its
// own output slot so the result is identical for any worker count.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t, int64_t)>& body);

// Shortest decimal text that round-trips the value; keeps CSV output
// byte-stable across runs and platforms.
std::string format_number(double value);

}  // namespace nbv
