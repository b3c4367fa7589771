#pragma once

// Counter-based random numbers. Every stream is a pure function of its 64-bit
// seed, so results are reproducible across runs and independent of thread
// scheduling as long as each worker owns its own seed.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace rproj {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed from a master seed and a tuple of integers.
///
/// h0 = mix64(master), h_{i+1} = mix64(h_i ^ (p_i + 0x9e3779b97f4a7c15 + (h_i << 6) + (h_i >> 2))).
/// Adding new tuples never changes the seeds of existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = mix64(master);
    for (std::uint64_t p : parts) {
        h = mix64(h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
    }
    return h;
}

/// Philox4x32-10 keyed by a 64-bit seed, with a 128-bit block counter.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (lane_ == 2) {
            refill();
        }
        return buffer_[lane_++];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal by the Marsaglia polar (rejection) method.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Uniform integer in [0, n) by rejection, n >= 1.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = (*this)();
        } while (r >= limit);
        return r % n;
    }

  private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void refill() noexcept {
        std::array<std::uint32_t, 4> c = counter_;
        std::array<std::uint32_t, 2> k = key_;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, c[0], hi0, lo0);
            mulhilo(0xCD9E8D57u, c[2], hi1, lo1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        buffer_[0] = (static_cast<std::uint64_t>(c[1]) << 32) | c[0];
        buffer_[1] = (static_cast<std::uint64_t>(c[3]) << 32) | c[2];
        lane_ = 0;
        for (auto& word : counter_) {
            if (++word != 0) {
                break;
            }
        }
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint64_t, 2> buffer_{};
    int lane_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace rproj
