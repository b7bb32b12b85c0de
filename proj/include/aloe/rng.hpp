#pragma once

#include <array>
#include <concepts>
#include <cstdint>

#include "normal.hpp"

namespace aloe {

/// Anything that can hand out open-interval uniforms and standard normals.
template <class R>
concept RandomSource = requires(R r) {
    { r.uniform() } -> std::convertible_to<double>;
    { r.normal() } -> std::convertible_to<double>;
};

namespace detail {

/// Philox4x32-10 block function. Counter-based: each 128-bit counter/64-bit
/// key pair maps to four independent 32-bit words, so streams can be split
/// by label without coordination and replayed from any position.
struct Philox4x32 {
    static constexpr std::uint32_t mult_a = 0xD2511F53u;
    static constexpr std::uint32_t mult_b = 0xCD9E8D57u;
    static constexpr std::uint32_t bump_a = 0x9E3779B9u;
    static constexpr std::uint32_t bump_b = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += bump_a;
                key[1] += bump_b;
            }
            const std::uint64_t p0 = std::uint64_t(mult_a) * ctr[0];
            const std::uint64_t p1 = std::uint64_t(mult_b) * ctr[2];
            ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0],
                   std::uint32_t(p1),
                   std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
                   std::uint32_t(p0)};
        }
        return ctr;
    }
};

} // namespace detail

/// Deterministic random stream, value type. (seed, label) fixes the whole
/// sequence; distinct labels give statistically independent streams under
/// the same seed with no state shared between them.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t label)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          label_(label) {}

    /// Uniform on the open interval (0,1); zero outputs are resampled so
    /// downstream log/quantile calls never see an endpoint.
    double uniform() {
        for (;;) {
            const double u = double(next_u64() >> 11) * 0x1.0p-53;
            if (u > 0.0) {
                return u;
            }
        }
    }

    /// Standard normal via the inverse CDF: one uniform in, monotone out.
    double normal() {
        return std_normal_quantile(uniform());
    }

    /// Stateless mix of (seed, index) into a fresh seed. Lives in a label
    /// region no stream uses, so child sequences never collide with draw
    /// sequences under the parent seed.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
        const auto out = detail::Philox4x32::block(
            {std::uint32_t(index), std::uint32_t(index >> 32), 0xFFFFFFFFu, 0xFFFFFFFFu},
            {std::uint32_t(seed), std::uint32_t(seed >> 32)});
        return std::uint64_t(out[0]) | (std::uint64_t(out[1]) << 32);
    }

private:
    std::uint64_t next_u64() {
        if (have_ == 0) {
            const auto out = detail::Philox4x32::block(
                {std::uint32_t(block_), std::uint32_t(block_ >> 32),
                 std::uint32_t(label_), std::uint32_t(label_ >> 32)},
                key_);
            ++block_;
            buffer_[0] = std::uint64_t(out[0]) | (std::uint64_t(out[1]) << 32);
            buffer_[1] = std::uint64_t(out[2]) | (std::uint64_t(out[3]) << 32);
            have_ = 2;
        }
        return buffer_[--have_];
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t label_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int have_ = 0;
};

static_assert(RandomSource<RngStream>);

} // namespace aloe
