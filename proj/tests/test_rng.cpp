#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <catch_amalgamated.hpp>

#include "aloe/normal.hpp"
#include "aloe/rng.hpp"
#include "oracles.hpp"

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using aloe::detail::Philox4x32;
    // Reference vectors for the 10-round philox4x32 block function.
    CHECK(Philox4x32::block({0u, 0u, 0u, 0u}, {0u, 0u}) ==
          std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu}) ==
          std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u}) ==
          std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("same seed and label replay the identical sequence") {
    aloe::RngStream a(0x1234abcd5678ef01ull, 42);
    aloe::RngStream b(0x1234abcd5678ef01ull, 42);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.uniform() == b.uniform());
    }
}

TEST_CASE("distinct labels and seeds give distinct sequences") {
    aloe::RngStream a(7, 0);
    aloe::RngStream b(7, 1);
    aloe::RngStream c(8, 0);
    int diff_label = 0, diff_seed = 0;
    for (int i = 0; i < 64; ++i) {
        const double ua = a.uniform();
        diff_label += ua != b.uniform();
        diff_seed += ua != c.uniform();
    }
    CHECK(diff_label > 60);
    CHECK(diff_seed > 60);
}

TEST_CASE("uniform stays inside the open unit interval") {
    aloe::RngStream rng(99, 7);
    double mean = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        mean += u;
    }
    mean /= n;
    // 5 sigma band around 1/2, sigma = 1/sqrt(12 n).
    CHECK(std::abs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal draws pass a KS test against the standard CDF") {
    aloe::RngStream rng(2024, 11);
    const std::size_t n = 20000;
    std::vector<double> xs(n);
    for (auto& x : xs) {
        x = rng.normal();
    }
    const double d = oracle::ks_statistic(
        std::move(xs), [](double t) { return double(oracle::phi(t)); });
    CHECK(d < oracle::ks_crit_001(n));
}

TEST_CASE("normal is the quantile of the uniform stream") {
    aloe::RngStream a(5, 3);
    aloe::RngStream b(5, 3);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.normal() == aloe::std_normal_quantile(b.uniform()));
    }
}

TEST_CASE("derived seeds are deterministic and collision-free") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 512; ++i) {
        const std::uint64_t s = aloe::RngStream::derive_seed(0xfeedfacecafebeefull, i);
        CHECK(s == aloe::RngStream::derive_seed(0xfeedfacecafebeefull, i));
        seen.insert(s);
    }
    CHECK(seen.size() == 512);
    CHECK(aloe::RngStream::derive_seed(1, 0) != aloe::RngStream::derive_seed(2, 0));
}

TEST_CASE("a derived child stream differs from its parent") {
    const std::uint64_t child_seed = aloe::RngStream::derive_seed(31337, 0);
    aloe::RngStream parent(31337, 0);
    aloe::RngStream child(child_seed, 0);
    int diff = 0;
    for (int i = 0; i < 64; ++i) {
        diff += parent.uniform() != child.uniform();
    }
    CHECK(diff > 60);
}
