#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "normal.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace aloe {

enum class Method { mc, is, aloe };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::mc: return "mc";
        case Method::is: return "is";
        case Method::aloe: return "aloe";
    }
    return "?";
}

inline Method parse_method(const std::string& name) {
    if (name == "mc") return Method::mc;
    if (name == "is") return Method::is;
    if (name == "aloe") return Method::aloe;
    throw std::invalid_argument("parse_method: unknown method '" + name + "'");
}

/// How mixture components are assigned to samples: a categorical draw per
/// sample, or deterministic per-component counts proportional to the
/// component weights (largest-remainder rounding, every positive-weight
/// component sampled at least once).
enum class MixtureAllocation { categorical, proportional };

/// Every component tail mass underflowed: the proposal cannot produce a
/// sample and the error probability is below ~1e-300 at this noise level.
struct degenerate_proposal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Estimate {
    Method method = Method::mc;
    double value = 0.0;
    std::size_t n = 0;
    double std_error = std::numeric_limits<double>::quiet_NaN();
    /// Analytic bound on the estimator variance, when the method has one.
    std::optional<double> var_bound;
    /// Sum of facet tail masses (union bound on the true probability).
    std::optional<double> union_bound;
};

/// p (1 - p) / n >= Var[p_hat] is loose for the mixture estimator; its
/// sharper bound uses the union bound p_bar in place of 1.
inline double variance_bound_aloe(double p, double p_bar, std::size_t n) {
    if (!(p >= 0.0 && p <= p_bar) || n == 0) {
        throw std::invalid_argument("variance_bound_aloe: need 0 <= p <= p_bar, n >= 1");
    }
    return p * (p_bar - p) / double(n);
}

/// Relative RMSE of plain Monte Carlo with n samples at event probability
/// p: sqrt((1/p - 1) / n). Grows like 1/sqrt(p n) for rare events.
inline double rrmse_mc_analytic(double p, std::size_t n) {
    if (!(p > 0.0 && p < 1.0) || n == 0) {
        throw std::invalid_argument("rrmse_mc_analytic: need p in (0,1), n >= 1");
    }
    return std::sqrt((1.0 - p) / (p * double(n)));
}

/// Mixture of the target Gaussian truncated to each facet half-space,
/// weighted by the facet tail masses. Sampling from it lands every draw
/// inside the error event, and the density ratio target/proposal is
/// p_bar / C(x) with C the facet membership count.
struct MixtureProposal {
    VoronoiCell cell;
    NoiseModel noise;
    std::vector<CanonicalHalfSpace> canonical;
    std::vector<TailMass> tails;
    std::vector<double> weights;      // alpha_k = P_k / p_bar
    std::vector<double> cum_weights;  // running sums, last entry 1
    double union_bound = 0.0;         // p_bar = sum_k P_k

    std::size_t component_count() const { return canonical.size(); }
};

inline MixtureProposal build_mixture(VoronoiCell cell, const NoiseModel& noise) {
    MixtureProposal mix;
    mix.noise = noise;
    mix.canonical.reserve(cell.facet_count());
    mix.tails.reserve(cell.facet_count());
    for (const auto& facet : cell.facets) {
        const CanonicalHalfSpace ch = canonicalize(facet, noise);
        mix.canonical.push_back(ch);
        mix.tails.push_back(half_space_prob(ch));
        mix.union_bound += mix.tails.back().value;
    }
    mix.cell = std::move(cell);
    if (!(mix.union_bound >= 1e-300)) {
        throw degenerate_proposal_error(
            "build_mixture: all facet tail masses underflowed; the error "
            "probability is below representable range at this noise level");
    }
    mix.weights.reserve(mix.tails.size());
    mix.cum_weights.reserve(mix.tails.size());
    double cum = 0.0;
    for (const auto& t : mix.tails) {
        const double w = t.value / mix.union_bound;
        mix.weights.push_back(w);
        cum += w;
        mix.cum_weights.push_back(cum);
    }
    mix.cum_weights.back() = 1.0;
    return mix;
}

/// Index of the component owning cumulative coordinate u in (0,1).
/// Zero-weight components are skipped even when rounding makes their
/// cumulative boundary collide with a neighbor's.
inline std::size_t pick_component(const MixtureProposal& mix, double u) {
    std::size_t last_positive = 0;
    bool seen_positive = false;
    for (std::size_t k = 0; k < mix.weights.size(); ++k) {
        if (mix.weights[k] <= 0.0) {
            continue;
        }
        last_positive = k;
        seen_positive = true;
        if (u <= mix.cum_weights[k]) {
            return k;
        }
    }
    if (!seen_positive) {
        throw degenerate_proposal_error("pick_component: no component has positive weight");
    }
    return last_positive;
}

/// One draw from the mixture: returns the point and the component index.
template <RandomSource R>
std::pair<Point2, std::size_t> sample_mixture(const MixtureProposal& mix, R& rng) {
    const std::size_t k = pick_component(mix, rng.uniform());
    const CanonicalHalfSpace& ch = mix.canonical[k];
    const Point2 p = sample_truncated_std(ch, rng);
    Point2 x = mix.noise.mean + mix.noise.sigma * p;
    const HalfSpace& h = mix.cell.facets[k];
    const double slack = dot(x, h.gamma) - h.beta;
    if (slack < 0.0) {
        x = x + (-slack) * h.gamma;
    }
    return {x, k};
}

namespace detail {

/// Streaming mean and standard error. Values here are bounded (indicators
/// and likelihood ratios), so plain sum / sum-of-squares accumulation
/// holds full precision at any realistic n.
struct RunningMean {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++n;
    }

    double mean() const {
        return n > 0 ? sum / double(n) : std::numeric_limits<double>::quiet_NaN();
    }

    /// Standard error of the mean; NaN until two samples exist.
    double std_error() const {
        if (n < 2) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        const double m = mean();
        const double var = std::max(0.0, sum_sq - double(n) * m * m) / double(n - 1);
        return std::sqrt(var / double(n));
    }
};

/// Largest-remainder apportionment of n into counts proportional to
/// weights, then adjusted so every positive-weight index gets at least
/// one. Deterministic: ties break toward lower index.
inline std::vector<std::size_t> proportional_counts(const std::vector<double>& weights,
                                                    std::size_t n) {
    std::size_t positive = 0;
    for (double w : weights) {
        positive += (w > 0.0) ? 1 : 0;
    }
    if (positive == 0) {
        throw degenerate_proposal_error("proportional_counts: no positive weights");
    }
    if (n < positive) {
        throw std::invalid_argument(
            "proportional_counts: need at least one sample per positive-weight component");
    }
    std::vector<std::size_t> counts(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) {
            continue;
        }
        const double ideal = double(n) * weights[k];
        counts[k] = std::size_t(std::floor(ideal));
        assigned += counts[k];
        frac.push_back({ideal - std::floor(ideal), k});
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < n; ++i) {
        counts[frac[i % frac.size()].second] += 1;
        ++assigned;
    }
    // Guarantee coverage: move samples from the largest stacks to any
    // positive-weight component left empty.
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] > 0.0 && counts[k] == 0) {
            std::size_t donor = k;
            for (std::size_t l = 0; l < counts.size(); ++l) {
                if (counts[l] > counts[donor]) {
                    donor = l;
                }
            }
            counts[donor] -= 1;
            counts[k] += 1;
        }
    }
    return counts;
}

} // namespace detail

/// Plain Monte Carlo: draw from the noise, count decoding errors.
template <RandomSource R>
Estimate estimate_mc(const VoronoiCell& cell, const NoiseModel& noise, std::size_t n, R& rng) {
    if (n == 0) {
        throw std::invalid_argument("estimate_mc: n must be positive");
    }
    detail::RunningMean acc;
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const Point2 x = noise.mean + noise.sigma * Point2{z1, z2};
        acc.add(cell.membership_count(x) >= 1 ? 1.0 : 0.0);
    }
    return {Method::mc, acc.mean(), n, acc.std_error(), std::nullopt, std::nullopt};
}

/// log of the density ratio N(0, sigma^2 I) / N(0, (alpha sigma)^2 I)
/// at squared radius r_sq from the common mean.
inline double importance_log_weight(double r_sq, double sigma, double alpha) {
    return 2.0 * std::log(alpha) - r_sq * (1.0 - 1.0 / (alpha * alpha)) / (2.0 * sigma * sigma);
}

/// Overdispersed importance sampling: propose from N(mean, (alpha
/// sigma)^2 I), alpha >= 1, and reweight. alpha = 1 reproduces plain
/// Monte Carlo draw for draw.
template <RandomSource R>
Estimate estimate_is(const VoronoiCell& cell, const NoiseModel& noise, std::size_t n,
                     double alpha, R& rng) {
    if (n == 0) {
        throw std::invalid_argument("estimate_is: n must be positive");
    }
    if (!(alpha >= 1.0)) {
        throw std::invalid_argument("estimate_is: alpha must be >= 1");
    }
    const double s = noise.sigma * alpha;
    detail::RunningMean acc;
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const Point2 v{s * z1, s * z2};
        const Point2 x = noise.mean + v;
        if (cell.membership_count(x) >= 1) {
            acc.add(std::exp(importance_log_weight(norm_sq(v), noise.sigma, alpha)));
        } else {
            acc.add(0.0);
        }
    }
    return {Method::is, acc.mean(), n, acc.std_error(), std::nullopt, std::nullopt};
}

/// Mixture estimator over a prebuilt proposal: every draw lands in the
/// error event, the integrand is p_bar / C(x), and the variance is
/// bounded by p (p_bar - p) / n.
template <RandomSource R>
Estimate estimate_aloe(const MixtureProposal& mix, std::size_t n, R& rng,
                       MixtureAllocation allocation = MixtureAllocation::categorical) {
    if (n == 0) {
        throw std::invalid_argument("estimate_aloe: n must be positive");
    }
    const double p_bar = mix.union_bound;
    double value;
    double std_error;
    if (allocation == MixtureAllocation::categorical) {
        detail::RunningMean acc;
        for (std::size_t i = 0; i < n; ++i) {
            const auto [x, k] = sample_mixture(mix, rng);
            acc.add(1.0 / double(mix.cell.membership_count(x)));
        }
        value = p_bar * acc.mean();
        std_error = p_bar * acc.std_error();
    } else {
        const auto counts = detail::proportional_counts(mix.weights, n);
        // Per-component strata, recombined with the exact weights so the
        // count rounding cannot bias the estimate.
        value = 0.0;
        double var = 0.0;
        bool se_defined = true;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] == 0) {
                continue;
            }
            detail::RunningMean acc;
            for (std::size_t i = 0; i < counts[k]; ++i) {
                const CanonicalHalfSpace& ch = mix.canonical[k];
                const Point2 p = sample_truncated_std(ch, rng);
                Point2 x = mix.noise.mean + mix.noise.sigma * p;
                const HalfSpace& h = mix.cell.facets[k];
                const double slack = dot(x, h.gamma) - h.beta;
                if (slack < 0.0) {
                    x = x + (-slack) * h.gamma;
                }
                acc.add(1.0 / double(mix.cell.membership_count(x)));
            }
            value += mix.weights[k] * p_bar * acc.mean();
            const double se_k = acc.std_error();
            if (std::isnan(se_k)) {
                se_defined = false;
            } else {
                var += mix.weights[k] * mix.weights[k] * p_bar * p_bar * se_k * se_k;
            }
        }
        std_error = se_defined ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
    }
    Estimate e{Method::aloe, value, n, std_error, std::nullopt, p_bar};
    e.var_bound = variance_bound_aloe(std::min(value, p_bar), p_bar, n);
    return e;
}

/// Convenience wrapper building the proposal in place.
template <RandomSource R>
Estimate estimate_aloe(const VoronoiCell& cell, const NoiseModel& noise, std::size_t n, R& rng,
                       MixtureAllocation allocation = MixtureAllocation::categorical) {
    const MixtureProposal mix = build_mixture(cell, noise);
    return estimate_aloe(mix, n, rng, allocation);
}

} // namespace aloe
