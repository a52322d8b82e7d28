#pragma once

// Counter-based random streams.
//
// Every Monte Carlo sample is a pure function of (seed, stream, counter), so
// estimates do not depend on evaluation order or on how many workers run.

#include <array>
#include <cstdint>
#include <initializer_list>

namespace hyperkernel {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
public:
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static constexpr counter_type apply(counter_type ctr, key_type key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Sequential generator over one (seed, stream) pair. Cheap to construct.
class StreamEngine {
public:
    using result_type = std::uint64_t;

    constexpr StreamEngine(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream)
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept
    {
        if (lane_ == 2) {
            refill();
        }
        return buffer_[lane_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n), n > 0. Lemire's multiply-shift with rejection.
    constexpr std::uint64_t below(std::uint64_t n) noexcept
    {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    constexpr std::uint64_t blocks_used() const noexcept { return counter_; }

private:
    constexpr void refill() noexcept
    {
        const Philox4x32::counter_type ctr{
            static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        const auto out = Philox4x32::apply(ctr, key_);
        buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        ++counter_;
        lane_ = 0;
    }

    Philox4x32::key_type key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int lane_ = 2;
};

/// A seed plus a counter-based substream key.
struct RandomStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    StreamEngine engine() const noexcept { return StreamEngine{seed, stream}; }

    /// Child stream keyed by logical indices (row id, grid index, ...), never by
    /// scheduling order.
    RandomStream substream(std::initializer_list<std::uint64_t> keys) const noexcept
    {
        std::uint64_t h = splitmix64(stream ^ 0x6A09E667F3BCC909ull);
        for (const auto k : keys) {
            h = splitmix64(h ^ splitmix64(k + 0x3C6EF372FE94F82Bull));
        }
        return RandomStream{seed, h};
    }

    friend bool operator==(const RandomStream&, const RandomStream&) = default;
};

} // namespace hyperkernel
