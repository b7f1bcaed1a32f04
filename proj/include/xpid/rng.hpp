#pragma once

// Counter-based normal variates. Every draw is a pure function of
// (seed, path, step, component), so paths can be simulated in any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace xpid {

/// Philox4x64-10 block function (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
class Philox4x64 {
public:
    using Counter = std::array<std::uint64_t, 4>;
    using Key = std::array<std::uint64_t, 2>;

    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

    static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
        const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
        hi = static_cast<std::uint64_t>(p >> 64);
        lo = static_cast<std::uint64_t>(p);
    }

    static Counter single_round(const Counter& c, const Key& k) {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Maps 64 random bits to a double in (0, 1].
inline double to_unit_open_closed(std::uint64_t bits) {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Standard normals for one Monte Carlo path. Variate index i = step * m + component;
/// four variates come from one Philox block via Box-Muller.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path, int components)
        : key_{seed, 0x5851F42D4C957F2DULL}, path_(path), m_(static_cast<std::uint64_t>(components)) {}

    double operator()(std::uint64_t step, int component) {
        const std::uint64_t index = step * m_ + static_cast<std::uint64_t>(component);
        const std::uint64_t blk = index / 4;
        if (!cached_ || blk != cached_block_) fill(blk);
        return cache_[index % 4];
    }

private:
    void fill(std::uint64_t blk) {
        const auto bits = Philox4x64::block({path_, blk, 0, 0}, key_);
        for (int pair = 0; pair < 2; ++pair) {
            const double u1 = to_unit_open_closed(bits[static_cast<std::size_t>(2 * pair)]);
            const double u2 = to_unit_open_closed(bits[static_cast<std::size_t>(2 * pair + 1)]);
            const double r = std::sqrt(-2.0 * std::log(u1));
            const double theta = 2.0 * std::numbers::pi * u2;
            cache_[static_cast<std::size_t>(2 * pair)] = r * std::cos(theta);
            cache_[static_cast<std::size_t>(2 * pair + 1)] = r * std::sin(theta);
        }
        cached_block_ = blk;
        cached_ = true;
    }

    Philox4x64::Key key_;
    std::uint64_t path_;
    std::uint64_t m_;
    std::array<double, 4> cache_{};
    std::uint64_t cached_block_ = 0;
    bool cached_ = false;
};

}  // namespace xpid
