#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace pptree {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
//
// A stream is identified by (master_seed, stream_index). The 128-bit counter is
// split into a 64-bit lane and a 64-bit position, so any draw can be addressed
// directly as (lane, position) without generating its predecessors. Simulators
// use the lane for the tree node a draw belongs to; sequential consumers use
// lane 0 and advance the position.
namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) noexcept
{
    constexpr std::uint32_t kM0 = 0xD2511F53U;
    constexpr std::uint32_t kM1 = 0xCD9E8D57U;
    constexpr std::uint32_t kW0 = 0x9E3779B9U;
    constexpr std::uint32_t kW1 = 0xBB67AE85U;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

// 53-bit mantissa mapped to the open interval (0, 1).
constexpr double open_unit(std::uint64_t bits) noexcept
{
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

/// Identifier of a tree node inside one replicate's randomness.
using NodeKey = std::uint64_t;

inline constexpr NodeKey kRootKey = 0x243F6A8885A308D3ULL;

/// Ulam-Harris style label hash: the key of the `index`-th child of `parent`.
constexpr NodeKey child_key(NodeKey parent, std::uint64_t index) noexcept
{
    return detail::splitmix64(parent ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class RngStream
{
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
        : master_seed_(master_seed),
          stream_index_(stream_index)
    {
        const std::uint64_t k =
            detail::splitmix64(master_seed ^ detail::splitmix64(stream_index ^ 0xA0761D6478BD642FULL));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }

    /// 64 random bits at an absolute (lane, position) address; stateless.
    std::uint64_t bits_at(std::uint64_t lane, std::uint64_t position) const noexcept
    {
        const auto out = detail::philox4x32_10(
            {static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32),
             static_cast<std::uint32_t>(lane), static_cast<std::uint32_t>(lane >> 32)},
            key_);
        return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    }

    double uniform_at(std::uint64_t lane, std::uint64_t position) const noexcept
    {
        return detail::open_unit(bits_at(lane, position));
    }

    /// Sequential draws on lane 0. Each Philox block yields two outputs.
    std::uint64_t next_u64() noexcept
    {
        if (buffered_) {
            buffered_ = false;
            return spare_;
        }
        const auto out = detail::philox4x32_10(
            {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0U,
             0x80000000U},
            key_);
        ++counter_;
        spare_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        buffered_ = true;
        return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return detail::open_unit(next_u64()); }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    std::array<std::uint32_t, 2> key_{};
    std::uint64_t counter_ = 0;
    std::uint64_t spare_ = 0;
    bool buffered_ = false;
};

inline RngStream make_stream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
{
    return RngStream(master_seed, stream_index);
}

/// Inverse transform: -ln(u)/rate. Decreasing in rate for fixed u.
inline double exponential_from_uniform(double u, double rate) noexcept
{
    return -std::log(u) / rate;
}

inline double sample_exponential(RngStream& stream, double rate)
{
    if (!(rate > 0.0))
        throw std::invalid_argument("exponential rate must be positive");
    return exponential_from_uniform(stream.uniform(), rate);
}

} // namespace pptree
