#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>

namespace fakeclr {

// Deterministic counter-based generator (splitmix64). Value type: copying an
// Rng snapshots the stream, which the replay tests rely on. Identical seed and
// call sequence give an identical stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Standard normal via Box-Muller; the spare keeps draws paired and cheap.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Uniform integer in [0, n). Fixed-point multiply keeps it branch-free and
    // bit-reproducible; the modulo bias at n << 2^64 is immaterial here.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Derive an independent stream from a base seed. Streams with distinct ids
    // never collide in practice because mix64 is a bijection over the keyed sum.
    static Rng derive(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(mix64(seed + 0xBF58476D1CE4E5B9ULL * (stream_id + 1)));
    }

    std::uint64_t state() const { return state_; }

private:
    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace fakeclr
