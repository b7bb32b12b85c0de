#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "estimators.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace aloe {

/// Per-dimension noise standard deviation for a unit-energy constellation
/// at a given Eb/N0 in dB: Eb = Es / log2(M), sigma^2 = N0 / 2.
inline double snr_to_sigma(double ebn0_db, std::size_t m, double es = 1.0) {
    if (m < 2 || !(es > 0.0)) {
        throw std::invalid_argument("snr_to_sigma: need M >= 2 and positive symbol energy");
    }
    const double eb = es / std::log2(double(m));
    const double n0 = eb / std::pow(10.0, ebn0_db / 10.0);
    return std::sqrt(0.5 * n0);
}

/// Exact symbol error rate of unit-energy square QAM under isotropic
/// Gaussian noise: per-axis error 2 (1 - 1/sqrt(M)) Phi(-d/sigma) with
/// half-spacing d = sqrt(3 / (2 (M - 1))), combined over both axes.
inline double closed_form_qam_ser(std::size_t m, double sigma) {
    const auto side = std::size_t(std::lround(std::sqrt(double(m))));
    if (side * side != m || side < 2 || side % 2 != 0) {
        throw std::invalid_argument("closed_form_qam_ser: M must be an even perfect square");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("closed_form_qam_ser: sigma must be positive");
    }
    const double d = std::sqrt(3.0 / (2.0 * double(m - 1)));
    const double p_axis = 2.0 * (1.0 - 1.0 / double(side)) * std_normal_cdf(-d / sigma);
    // p_axis (2 - p_axis), kept in this form so small probabilities do
    // not cancel against 1.
    return p_axis * (2.0 - p_axis);
}

enum class ConstellationKind { qam, hex, improper, custom };

inline const char* to_string(ConstellationKind k) {
    switch (k) {
        case ConstellationKind::qam: return "qam";
        case ConstellationKind::hex: return "hex";
        case ConstellationKind::improper: return "improper";
        case ConstellationKind::custom: return "custom";
    }
    return "?";
}

struct LinkConfig {
    Constellation constellation;
    ConstellationKind kind = ConstellationKind::custom;
    std::vector<double> ebn0_db;
    std::size_t per_symbol_n = 20;
    std::vector<Method> methods{Method::aloe};
    /// Proposal width multiplier used when methods include Method::is.
    double is_alpha = 2.0;
    /// Widths swept by rrmse_study for Method::is; the best one is kept.
    std::vector<double> is_alpha_grid{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
    MixtureAllocation allocation = MixtureAllocation::categorical;
    /// Keep all bisector half-spaces instead of the minimal facet set.
    bool all_bisectors = false;
    /// Worker thread cap; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// One (Eb/N0, method) row of a symbol error rate curve, averaged over
/// equiprobable symbols.
struct SerResult {
    double ebn0_db = 0.0;
    Method method = Method::mc;
    std::optional<double> alpha;          // set for Method::is
    std::size_t per_symbol_n = 0;
    std::size_t degenerate_symbols = 0;   // tail mass underflowed, counted as 0
    double p_e = 0.0;
    double std_error = 0.0;
    std::optional<double> var_bound;      // aggregate variance certificate
    std::optional<double> p_bar_mean;     // mean union bound over symbols
    /// True when every symbol produced a usable variance certificate.
    bool certified = false;
    double wall_time_s = 0.0;
};

namespace detail {

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Run body(i) for i in [0, count) on up to `threads` workers. Work is
/// claimed through a shared counter; callers keep determinism by writing
/// results into index i of a preallocated buffer, never by accumulation
/// order. The first exception is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    threads = std::min<std::size_t>(resolve_threads(threads), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

enum class StreamPurpose : std::uint64_t { estimate = 0, reference = 1 };

/// Stream label for one estimator run: every (purpose, alpha slot,
/// method, Eb/N0 index, symbol) tuple gets its own Philox stream, so
/// results do not depend on scheduling and never reuse draws.
inline std::uint64_t stream_label(StreamPurpose purpose, std::uint64_t alpha_idx,
                                  Method method, std::uint64_t snr_idx,
                                  std::uint64_t symbol) {
    return (std::uint64_t(purpose) << 44) | (alpha_idx << 36) |
           (std::uint64_t(method) << 32) | (snr_idx << 20) | symbol;
}

/// Symbol-averaged estimate at one noise level for one method. Per-symbol
/// work runs in parallel; the reduction walks symbol order, so the output
/// is identical for any thread count.
struct PointEstimate {
    double p_e = 0.0;
    double std_error = 0.0;
    double var_bound = 0.0;      // (1 / M^2 n) sum_m p_m (p_bar_m - p_m)
    double p_bar_mean = 0.0;
    std::size_t degenerate = 0;
};

inline PointEstimate estimate_point(const Constellation& c,
                                    const std::vector<VoronoiCell>& cells, double sigma,
                                    Method method, double alpha, MixtureAllocation allocation,
                                    std::size_t n, std::uint64_t seed,
                                    std::uint64_t label_base, unsigned threads) {
    const std::size_t m = c.size();
    struct PerSymbol {
        double value = 0.0;
        double se = 0.0;
        double p_bar = 0.0;
        bool degenerate = false;
    };
    std::vector<PerSymbol> rows(m);
    parallel_for(m, threads, [&](std::size_t sym) {
        RngStream rng(seed, label_base | sym);
        const NoiseModel noise{c.symbols[sym], sigma};
        PerSymbol& out = rows[sym];
        try {
            Estimate e;
            switch (method) {
                case Method::mc:
                    e = estimate_mc(cells[sym], noise, n, rng);
                    break;
                case Method::is:
                    e = estimate_is(cells[sym], noise, n, alpha, rng);
                    break;
                case Method::aloe:
                    e = estimate_aloe(cells[sym], noise, n, rng, allocation);
                    break;
            }
            out.value = e.value;
            out.se = std::isnan(e.std_error) ? 0.0 : e.std_error;
            out.p_bar = e.union_bound.value_or(0.0);
        } catch (const degenerate_proposal_error&) {
            out.degenerate = true;
        }
    });
    PointEstimate agg;
    double se_sq = 0.0;
    double bound_num = 0.0;
    for (const auto& row : rows) {
        agg.p_e += row.value;
        se_sq += row.se * row.se;
        bound_num += row.value * std::max(0.0, row.p_bar - row.value);
        agg.p_bar_mean += row.p_bar;
        agg.degenerate += row.degenerate ? 1 : 0;
    }
    const double dm = double(m);
    agg.p_e /= dm;
    agg.std_error = std::sqrt(se_sq) / dm;
    agg.var_bound = bound_num / (dm * dm * double(n));
    agg.p_bar_mean /= dm;
    return agg;
}

inline std::vector<VoronoiCell> build_cells(const Constellation& c, bool all_bisectors,
                                            unsigned threads) {
    std::vector<VoronoiCell> cells(c.size());
    parallel_for(c.size(), threads, [&](std::size_t i) {
        cells[i] = all_bisectors ? full_bisector_cell(c, i) : voronoi_cell(c, i);
    });
    return cells;
}

inline void validate_config(const LinkConfig& cfg) {
    if (cfg.constellation.size() < 2) {
        throw std::invalid_argument("LinkConfig: constellation must hold at least 2 symbols");
    }
    if (cfg.constellation.size() >= (std::size_t(1) << 20)) {
        throw std::invalid_argument("LinkConfig: constellation too large for stream labels");
    }
    if (cfg.ebn0_db.empty() || cfg.ebn0_db.size() >= (std::size_t(1) << 12)) {
        throw std::invalid_argument("LinkConfig: Eb/N0 grid must hold 1 to 4095 points");
    }
    if (cfg.per_symbol_n == 0) {
        throw std::invalid_argument("LinkConfig: per-symbol sample count must be positive");
    }
    if (cfg.methods.empty()) {
        throw std::invalid_argument("LinkConfig: no methods selected");
    }
    if (!(cfg.is_alpha >= 1.0)) {
        throw std::invalid_argument("LinkConfig: is_alpha must be >= 1");
    }
}

} // namespace detail

/// Symbol error rate curve: one row per (Eb/N0, method), rows grouped by
/// Eb/N0 in grid order, methods in the configured order. Deterministic in
/// (config, seed); the thread count changes timing only.
inline std::vector<SerResult> ser_curve(const LinkConfig& cfg, std::uint64_t seed) {
    detail::validate_config(cfg);
    const auto cells = detail::build_cells(cfg.constellation, cfg.all_bisectors, cfg.threads);
    std::vector<SerResult> out;
    out.reserve(cfg.ebn0_db.size() * cfg.methods.size());
    for (std::size_t s = 0; s < cfg.ebn0_db.size(); ++s) {
        const double sigma = snr_to_sigma(cfg.ebn0_db[s], cfg.constellation.size());
        for (const Method method : cfg.methods) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::uint64_t base = detail::stream_label(
                detail::StreamPurpose::estimate, 0, method, s, 0);
            const auto pt = detail::estimate_point(
                cfg.constellation, cells, sigma, method, cfg.is_alpha, cfg.allocation,
                cfg.per_symbol_n, seed, base, cfg.threads);
            const auto t1 = std::chrono::steady_clock::now();
            SerResult row;
            row.ebn0_db = cfg.ebn0_db[s];
            row.method = method;
            if (method == Method::is) {
                row.alpha = cfg.is_alpha;
            }
            row.per_symbol_n = cfg.per_symbol_n;
            row.degenerate_symbols = pt.degenerate;
            row.p_e = pt.p_e;
            row.std_error = pt.std_error;
            if (method == Method::aloe) {
                row.var_bound = pt.var_bound;
                row.p_bar_mean = pt.p_bar_mean;
                row.certified = pt.degenerate == 0;
            }
            row.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
            out.push_back(row);
        }
    }
    return out;
}

/// One row of the repeat-based accuracy study: the relative RMSE of a
/// method against a reference value, at a matched sample budget.
struct RrmseResult {
    double ebn0_db = 0.0;
    Method method = Method::mc;
    std::optional<double> alpha;              // winning width for Method::is
    std::optional<double> rrmse;              // empty when no usable reference
    std::optional<double> p_ref;
    std::optional<double> mc_rrmse_analytic;  // plain-MC law at the same budget
    std::size_t repeats = 0;
    std::string flags;
};

/// Repeat the whole estimate `repeats` times under derived seeds and
/// report RRMSE = RMS(p_hat - p_ref) / p_ref per (Eb/N0, method). For
/// Method::is every width in cfg.is_alpha_grid is tried and the best kept.
/// The reference is the exact closed form for square QAM, otherwise an
/// independent mixture run at 100x the per-symbol budget.
inline std::vector<RrmseResult> rrmse_study(const LinkConfig& cfg, std::size_t repeats,
                                            std::uint64_t seed) {
    detail::validate_config(cfg);
    if (repeats < 2) {
        throw std::invalid_argument("rrmse_study: need at least 2 repeats");
    }
    if (cfg.is_alpha_grid.empty() ||
        cfg.is_alpha_grid.size() >= (std::size_t(1) << 8)) {
        throw std::invalid_argument("rrmse_study: alpha grid must hold 1 to 255 widths");
    }
    for (double a : cfg.is_alpha_grid) {
        if (!(a >= 1.0)) {
            throw std::invalid_argument("rrmse_study: alpha grid entries must be >= 1");
        }
    }
    const auto cells = detail::build_cells(cfg.constellation, cfg.all_bisectors, cfg.threads);
    const std::size_t n_snr = cfg.ebn0_db.size();

    // Slot layout per Eb/N0 point: one per method, except is expands to
    // one per grid width.
    struct Slot {
        Method method;
        double alpha;
        std::uint64_t alpha_idx;
    };
    std::vector<Slot> slots;
    for (const Method method : cfg.methods) {
        if (method == Method::is) {
            for (std::size_t a = 0; a < cfg.is_alpha_grid.size(); ++a) {
                slots.push_back({method, cfg.is_alpha_grid[a], a});
            }
        } else {
            slots.push_back({method, cfg.is_alpha, 0});
        }
    }

    // The reference is exact for square QAM; otherwise every repeat also
    // runs the mixture estimator at 100x its own budget and the repeats'
    // reference values are averaged.
    const bool analytic_ref = cfg.kind == ConstellationKind::qam;

    // All repeats, every slot, every noise level. Estimates land in flat
    // [repeat][snr][slot] buffers indexed up front, so the parallel
    // schedule cannot reorder anything visible.
    std::vector<double> est(repeats * n_snr * slots.size(), 0.0);
    std::vector<std::size_t> degen(repeats * n_snr * slots.size(), 0);
    std::vector<double> ref_est(analytic_ref ? 0 : repeats * n_snr, 0.0);
    std::vector<std::size_t> ref_degen(analytic_ref ? 0 : repeats * n_snr, 0);
    detail::parallel_for(repeats, cfg.threads, [&](std::size_t r) {
        const std::uint64_t child = RngStream::derive_seed(seed, r);
        for (std::size_t s = 0; s < n_snr; ++s) {
            const double sigma = snr_to_sigma(cfg.ebn0_db[s], cfg.constellation.size());
            for (std::size_t q = 0; q < slots.size(); ++q) {
                const auto pt = detail::estimate_point(
                    cfg.constellation, cells, sigma, slots[q].method, slots[q].alpha,
                    cfg.allocation, cfg.per_symbol_n, child,
                    detail::stream_label(detail::StreamPurpose::estimate, slots[q].alpha_idx,
                                         slots[q].method, s, 0),
                    1);
                est[(r * n_snr + s) * slots.size() + q] = pt.p_e;
                degen[(r * n_snr + s) * slots.size() + q] = pt.degenerate;
            }
            if (!analytic_ref) {
                const auto pt = detail::estimate_point(
                    cfg.constellation, cells, sigma, Method::aloe, cfg.is_alpha,
                    cfg.allocation, cfg.per_symbol_n * 100, child,
                    detail::stream_label(detail::StreamPurpose::reference, 0, Method::aloe,
                                         s, 0),
                    1);
                ref_est[r * n_snr + s] = pt.p_e;
                ref_degen[r * n_snr + s] = pt.degenerate;
            }
        }
    });

    std::vector<double> p_ref(n_snr, 0.0);
    std::vector<std::size_t> ref_degenerate(n_snr, 0);
    for (std::size_t s = 0; s < n_snr; ++s) {
        if (analytic_ref) {
            p_ref[s] = closed_form_qam_ser(
                cfg.constellation.size(),
                snr_to_sigma(cfg.ebn0_db[s], cfg.constellation.size()));
        } else {
            for (std::size_t r = 0; r < repeats; ++r) {
                p_ref[s] += ref_est[r * n_snr + s];
                ref_degenerate[s] += ref_degen[r * n_snr + s];
            }
            p_ref[s] /= double(repeats);
        }
    }

    const std::size_t budget = cfg.constellation.size() * cfg.per_symbol_n;
    std::vector<RrmseResult> out;
    for (std::size_t s = 0; s < n_snr; ++s) {
        const bool ref_ok = p_ref[s] > 0.0;
        // Per-slot RRMSE at this noise level.
        std::vector<double> rrmse(slots.size(), 0.0);
        std::vector<bool> any_degen(slots.size(), false);
        for (std::size_t q = 0; q < slots.size(); ++q) {
            double acc = 0.0;
            for (std::size_t r = 0; r < repeats; ++r) {
                const double d = est[(r * n_snr + s) * slots.size() + q] - p_ref[s];
                acc += d * d;
                any_degen[q] = any_degen[q] || degen[(r * n_snr + s) * slots.size() + q] > 0;
            }
            rrmse[q] = ref_ok ? std::sqrt(acc / double(repeats)) / p_ref[s] : 0.0;
        }
        for (const Method method : cfg.methods) {
            RrmseResult row;
            row.ebn0_db = cfg.ebn0_db[s];
            row.method = method;
            row.repeats = repeats;
            std::string flags;
            auto add_flag = [&flags](const std::string& f) {
                if (!flags.empty()) flags += ';';
                flags += f;
            };
            std::size_t q_sel = slots.size();
            if (method == Method::is) {
                for (std::size_t q = 0; q < slots.size(); ++q) {
                    if (slots[q].method != Method::is) {
                        continue;
                    }
                    if (q_sel == slots.size() || rrmse[q] < rrmse[q_sel]) {
                        q_sel = q;
                    }
                }
                row.alpha = slots[q_sel].alpha;
            } else {
                for (std::size_t q = 0; q < slots.size(); ++q) {
                    if (slots[q].method == method) {
                        q_sel = q;
                        break;
                    }
                }
            }
            if (ref_ok) {
                row.rrmse = rrmse[q_sel];
                row.p_ref = p_ref[s];
                row.mc_rrmse_analytic =
                    (p_ref[s] < 1.0) ? std::optional<double>(rrmse_mc_analytic(p_ref[s], budget))
                                     : std::nullopt;
            } else {
                add_flag("no_reference");
            }
            if (any_degen[q_sel]) {
                add_flag("degenerate");
            }
            if (ref_degenerate[s] > 0) {
                add_flag("degenerate_reference");
            }
            row.flags = flags;
            out.push_back(row);
        }
    }
    return out;
}

} // namespace aloe
