#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <vector>

#include <catch_amalgamated.hpp>

#include "aloe/harness.hpp"
#include "oracles.hpp"

namespace {

/// Library-independent QAM SER: average the per-symbol rectangle
/// complement probabilities over the grid.
double oracle_qam_ser(std::size_t m, double sigma) {
    const auto c = aloe::build_qam(m);
    const auto side = std::size_t(std::lround(std::sqrt(double(m))));
    const double scale = std::sqrt(3.0 / (2.0 * double(m - 1)));
    const double inf = std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (const auto& s : c.symbols) {
        const double hi = double(side - 1) * scale;   // outermost level
        const double lo_x = std::abs(s.re + hi) < 1e-12 ? -inf : s.re - scale;
        const double hi_x = std::abs(s.re - hi) < 1e-12 ? inf : s.re + scale;
        const double lo_y = std::abs(s.im + hi) < 1e-12 ? -inf : s.im - scale;
        const double hi_y = std::abs(s.im - hi) < 1e-12 ? inf : s.im + scale;
        acc += oracle::rect_cell_error_prob(lo_x, hi_x, lo_y, hi_y, s, sigma);
    }
    return acc / double(m);
}

aloe::LinkConfig base_config(std::size_t m = 4) {
    aloe::LinkConfig cfg;
    cfg.constellation = aloe::build_qam(m);
    cfg.kind = aloe::ConstellationKind::qam;
    cfg.ebn0_db = {4.0};
    cfg.per_symbol_n = 2000;
    cfg.methods = {aloe::Method::mc, aloe::Method::is, aloe::Method::aloe};
    cfg.threads = 1;
    return cfg;
}

bool same_results(const std::vector<aloe::SerResult>& a,
                  const std::vector<aloe::SerResult>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].p_e != b[i].p_e || a[i].std_error != b[i].std_error ||
            a[i].method != b[i].method || a[i].ebn0_db != b[i].ebn0_db ||
            a[i].var_bound != b[i].var_bound || a[i].p_bar_mean != b[i].p_bar_mean) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("Eb/N0 to sigma conversion") {
    CHECK(aloe::snr_to_sigma(0.0, 4) == 0.5);
    CHECK(std::abs(aloe::snr_to_sigma(10.0, 64) - std::sqrt(1.0 / 120.0)) < 1e-16);
    CHECK(aloe::snr_to_sigma(60.0, 4) < 1e-3);
    CHECK_THROWS_AS(aloe::snr_to_sigma(0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(aloe::snr_to_sigma(0.0, 4, 0.0), std::invalid_argument);
}

TEST_CASE("closed-form QAM SER equals the per-symbol oracle") {
    for (std::size_t m : {std::size_t(4), std::size_t(16), std::size_t(64)}) {
        for (double sigma : {0.4, 0.2, 0.1, 0.05}) {
            CAPTURE(m, sigma);
            const double fast = aloe::closed_form_qam_ser(m, sigma);
            const double slow = oracle_qam_ser(m, sigma);
            REQUIRE(std::abs(fast - slow) <= 1e-12 * slow);
        }
    }
    CHECK_THROWS_AS(aloe::closed_form_qam_ser(9, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(aloe::closed_form_qam_ser(4, 0.0), std::invalid_argument);
}

TEST_CASE("ser_curve rows are grouped by grid point in method order") {
    auto cfg = base_config();
    cfg.ebn0_db = {0.0, 4.0};
    cfg.per_symbol_n = 50;
    const auto rows = aloe::ser_curve(cfg, 7);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].ebn0_db == 0.0);
    CHECK(rows[0].method == aloe::Method::mc);
    CHECK(rows[1].method == aloe::Method::is);
    CHECK(rows[2].method == aloe::Method::aloe);
    CHECK(rows[3].ebn0_db == 4.0);
    CHECK(rows[1].alpha.has_value());
    CHECK_FALSE(rows[0].alpha.has_value());
    CHECK(rows[2].var_bound.has_value());
    CHECK(rows[2].p_bar_mean.has_value());
    CHECK_FALSE(rows[0].var_bound.has_value());
    CHECK(rows[2].certified);
}

TEST_CASE("every estimator tracks the closed-form curve") {
    auto cfg = base_config();
    cfg.ebn0_db = {2.0, 6.0};
    cfg.per_symbol_n = 20000;
    const auto rows = aloe::ser_curve(cfg, 12345);
    for (const auto& r : rows) {
        const double want =
            aloe::closed_form_qam_ser(4, aloe::snr_to_sigma(r.ebn0_db, 4));
        CAPTURE(r.ebn0_db, aloe::to_string(r.method));
        CHECK(std::abs(r.p_e - want) < 4.0 * r.std_error);
    }
}

TEST_CASE("aloe standard error beats Monte Carlo on the same budget") {
    auto cfg = base_config();
    cfg.ebn0_db = {6.0};
    cfg.per_symbol_n = 5000;
    const auto rows = aloe::ser_curve(cfg, 99);
    REQUIRE(rows.size() == 3);
    CHECK(rows[2].std_error < rows[0].std_error);
}

TEST_CASE("aggregate variance bound has the documented exact shape") {
    auto cfg = base_config(16);
    cfg.ebn0_db = {6.0};
    cfg.methods = {aloe::Method::aloe};
    cfg.per_symbol_n = 500;
    const auto rows = aloe::ser_curve(cfg, 31);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].var_bound.has_value());
    // Recompute from per-symbol runs with the same seed and labels.
    const auto cells = aloe::detail::build_cells(cfg.constellation, false, 1);
    const double sigma = aloe::snr_to_sigma(6.0, 16);
    double num = 0.0;
    double p_sum = 0.0;
    for (std::size_t sym = 0; sym < 16; ++sym) {
        aloe::RngStream rng(31, aloe::detail::stream_label(
                                    aloe::detail::StreamPurpose::estimate, 0,
                                    aloe::Method::aloe, 0, sym));
        const auto e = aloe::estimate_aloe(cells[sym], {cfg.constellation.symbols[sym], sigma},
                                           500, rng);
        num += e.value * (*e.union_bound - e.value);
        p_sum += e.value;
    }
    CHECK(rows[0].var_bound == num / (16.0 * 16.0 * 500.0));
    CHECK(rows[0].p_e == p_sum / 16.0);
}

TEST_CASE("identical results for any thread count and repeated calls") {
    auto cfg = base_config(16);
    cfg.ebn0_db = {0.0, 8.0};
    cfg.per_symbol_n = 200;
    cfg.threads = 1;
    const auto serial = aloe::ser_curve(cfg, 777);
    const auto serial_again = aloe::ser_curve(cfg, 777);
    cfg.threads = 4;
    const auto parallel = aloe::ser_curve(cfg, 777);
    CHECK(same_results(serial, serial_again));
    CHECK(same_results(serial, parallel));
    cfg.threads = 3;
    CHECK(same_results(serial, aloe::ser_curve(cfg, 777)));
}

TEST_CASE("different seeds move the estimates") {
    auto cfg = base_config();
    cfg.per_symbol_n = 100;
    const auto a = aloe::ser_curve(cfg, 1);
    const auto b = aloe::ser_curve(cfg, 2);
    CHECK_FALSE(same_results(a, b));
}

TEST_CASE("estimated SER is monotone in Eb/N0 within error bars") {
    auto cfg = base_config(16);
    cfg.ebn0_db = {0.0, 4.0, 8.0, 12.0, 16.0};
    cfg.methods = {aloe::Method::aloe};
    cfg.per_symbol_n = 2000;
    const auto rows = aloe::ser_curve(cfg, 2027);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].p_e <= rows[i - 1].p_e +
                                 3.0 * (rows[i].std_error + rows[i - 1].std_error));
    }
}

TEST_CASE("degenerate cells at extreme SNR are flagged, not faked") {
    auto cfg = base_config();
    cfg.ebn0_db = {60.0};   // tau ~ 700: every tail mass underflows
    cfg.methods = {aloe::Method::aloe, aloe::Method::mc};
    cfg.per_symbol_n = 10;
    const auto rows = aloe::ser_curve(cfg, 5);
    REQUIRE(rows.size() == 2);
    const auto& aloe_row = rows[1].method == aloe::Method::aloe ? rows[1] : rows[0];
    CHECK(aloe_row.degenerate_symbols == 4);
    CHECK(aloe_row.p_e == 0.0);
    CHECK_FALSE(aloe_row.certified);
}

TEST_CASE("config validation rejects broken setups") {
    aloe::LinkConfig cfg;
    cfg.kind = aloe::ConstellationKind::qam;
    cfg.ebn0_db = {1.0};
    CHECK_THROWS_AS(aloe::ser_curve(cfg, 0), std::invalid_argument);   // empty constellation
    cfg = base_config();
    cfg.ebn0_db.clear();
    CHECK_THROWS_AS(aloe::ser_curve(cfg, 0), std::invalid_argument);
    cfg = base_config();
    cfg.per_symbol_n = 0;
    CHECK_THROWS_AS(aloe::ser_curve(cfg, 0), std::invalid_argument);
    cfg = base_config();
    cfg.methods.clear();
    CHECK_THROWS_AS(aloe::ser_curve(cfg, 0), std::invalid_argument);
    cfg = base_config();
    cfg.is_alpha = 0.5;
    CHECK_THROWS_AS(aloe::ser_curve(cfg, 0), std::invalid_argument);
    cfg = base_config();
    CHECK_THROWS_AS(aloe::rrmse_study(cfg, 1, 0), std::invalid_argument);
    cfg.is_alpha_grid = {0.5};
    CHECK_THROWS_AS(aloe::rrmse_study(cfg, 4, 0), std::invalid_argument);
}

TEST_CASE("stream labels are unique across the runable label space") {
    std::set<std::uint64_t> seen;
    std::size_t count = 0;
    for (auto purpose : {aloe::detail::StreamPurpose::estimate,
                         aloe::detail::StreamPurpose::reference}) {
        for (std::uint64_t alpha = 0; alpha < 3; ++alpha) {
            for (auto m : {aloe::Method::mc, aloe::Method::is, aloe::Method::aloe}) {
                for (std::uint64_t snr = 0; snr < 5; ++snr) {
                    for (std::uint64_t sym = 0; sym < 7; ++sym) {
                        seen.insert(aloe::detail::stream_label(purpose, alpha, m, snr, sym));
                        ++count;
                    }
                }
            }
        }
    }
    CHECK(seen.size() == count);
}

TEST_CASE("rrmse study against the analytic QAM reference") {
    auto cfg = base_config();
    cfg.ebn0_db = {4.0, 8.0};
    cfg.per_symbol_n = 100;
    cfg.methods = {aloe::Method::mc, aloe::Method::is, aloe::Method::aloe};
    cfg.is_alpha_grid = {1.0, 2.0, 3.0};
    const auto rows = aloe::rrmse_study(cfg, 60, 4242);
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        CAPTURE(r.ebn0_db, aloe::to_string(r.method));
        REQUIRE(r.p_ref.has_value());
        const double want =
            aloe::closed_form_qam_ser(4, aloe::snr_to_sigma(r.ebn0_db, 4));
        CHECK(*r.p_ref == want);
        REQUIRE(r.rrmse.has_value());
        CHECK(*r.rrmse >= 0.0);
        REQUIRE(r.mc_rrmse_analytic.has_value());
        CHECK(r.repeats == 60);
        if (r.method == aloe::Method::is) {
            REQUIRE(r.alpha.has_value());
            CHECK(*r.alpha >= 1.0);
        }
    }
    // The mixture estimator dominates plain MC at the rarer point, and
    // empirical MC error tracks the analytic law.
    const auto& mc_row = rows[3];
    const auto& aloe_row = rows[5];
    REQUIRE(mc_row.method == aloe::Method::mc);
    REQUIRE(aloe_row.method == aloe::Method::aloe);
    CHECK(*aloe_row.rrmse < *mc_row.rrmse);
    CHECK(*mc_row.rrmse > 0.5 * *mc_row.mc_rrmse_analytic);
    CHECK(*mc_row.rrmse < 2.0 * *mc_row.mc_rrmse_analytic);
}

TEST_CASE("rrmse study uses a simulated reference off the QAM family") {
    const auto c = aloe::Constellation::make({{-1.0, 0.0}, {1.0, 0.0}});
    aloe::LinkConfig cfg;
    cfg.constellation = c;
    cfg.kind = aloe::ConstellationKind::custom;
    cfg.ebn0_db = {6.0};
    cfg.per_symbol_n = 100;
    cfg.methods = {aloe::Method::aloe};
    cfg.threads = 1;
    const auto rows = aloe::rrmse_study(cfg, 10, 31337);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].p_ref.has_value());
    // Two antipodal symbols: exact SER = Phi(-1/sigma).
    const double sigma = aloe::snr_to_sigma(6.0, 2);
    const double exact = aloe::std_normal_cdf(-1.0 / sigma);
    CHECK(std::abs(*rows[0].p_ref - exact) < 0.05 * exact);
    CHECK(rows[0].flags.empty());
}

TEST_CASE("rrmse study repeats differ but share the reference") {
    auto cfg = base_config();
    cfg.ebn0_db = {6.0};
    cfg.methods = {aloe::Method::aloe};
    cfg.per_symbol_n = 50;
    const auto a = aloe::rrmse_study(cfg, 8, 1);
    const auto b = aloe::rrmse_study(cfg, 8, 1);
    REQUIRE(a.size() == b.size());
    CHECK(*a[0].rrmse == *b[0].rrmse);
    cfg.threads = 4;
    const auto c4 = aloe::rrmse_study(cfg, 8, 1);
    CHECK(*a[0].rrmse == *c4[0].rrmse);
}
