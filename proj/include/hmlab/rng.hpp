// rng.hpp — seeded, splittable random number generation.
//
// Generator algorithm (documented so runs are reproducible):
//   * Base stream: splitmix64. State advances by the 64-bit golden-gamma
//     constant 0x9E3779B97F4A7C15 and each output is the murmur-style
//     finalizer of the state. The u64 stream is bit-exact across platforms.
//   * Splitting: stream (seed, stream_id) starts from the finalizer-mixed
//     combination of seed and stream_id, so disjoint blocks of a dataset
//     can be generated independently and in any order.
//   * Uniform doubles take the top 53 bits -> [0,1); gaussians use the
//     Marsaglia polar method (pairwise, with a cached spare). Given the
//     same libm the double streams are bit-for-bit reproducible; across
//     libms they agree to rounding of log/sqrt.
#pragma once

#include <cmath>
#include <cstdint>

namespace hmlab {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}
} // namespace detail

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent substream for (seed, stream_id), e.g. one per data block.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(detail::mix64(seed + 0x632BE59BD9B4E019ull * (stream_id + 1)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::mix64(state_);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1], safe as a log() argument.
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal, Marsaglia polar method.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    void fill_gaussian(double* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = next_gaussian();
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace hmlab
