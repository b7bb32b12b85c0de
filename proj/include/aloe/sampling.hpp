#pragma once

#include <cmath>
#include <stdexcept>

#include "geometry.hpp"
#include "normal.hpp"
#include "rng.hpp"

namespace aloe {

/// Isotropic complex Gaussian noise around a transmitted symbol:
/// x ~ N(mean, sigma^2 I) in the plane (sigma per real dimension).
struct NoiseModel {
    Point2 mean{0.0, 0.0};
    double sigma = 1.0;
};

/// Half-space in whitened coordinates: {p : dot(p, omega) >= tau} with
/// unit omega, for p standard normal. tau is the distance from the noise
/// mean to the boundary in noise standard deviations.
struct CanonicalHalfSpace {
    Point2 omega;
    double tau = 0.0;
};

/// Tail probability carried in both linear and log form so callers can
/// keep composing after the linear value underflows.
struct TailMass {
    double value = 0.0;
    double log_value = 0.0;
};

/// Whiten {x : dot(x, gamma) >= beta} under N(mean, sigma^2 I).
inline CanonicalHalfSpace canonicalize(const HalfSpace& h, const NoiseModel& noise) {
    if (!(noise.sigma > 0.0)) {
        throw std::invalid_argument("canonicalize: sigma must be positive");
    }
    return {h.gamma, (h.beta - dot(h.gamma, noise.mean)) / noise.sigma};
}

inline CanonicalHalfSpace canonicalize(const HalfSpace& h, Point2 mean, double sigma) {
    return canonicalize(h, NoiseModel{mean, sigma});
}

/// Full covariance Sigma = [[xx, xy], [xy, yy]], symmetric positive
/// definite.
struct Sym2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;
};

/// Whiten {x : dot(x, gamma) >= beta} under N(mean, Sigma): the direction
/// becomes Sigma^{1/2} gamma normalized and the offset is measured in
/// units of sqrt(gamma' Sigma gamma). Uses the closed-form 2x2 square
/// root (Sigma + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
inline CanonicalHalfSpace canonicalize(const HalfSpace& h, Point2 mean, const Sym2& cov) {
    const double det = cov.xx * cov.yy - cov.xy * cov.xy;
    if (!(det > 0.0) || !(cov.xx > 0.0)) {
        throw std::invalid_argument("canonicalize: covariance must be positive definite");
    }
    const double s = std::sqrt(det);
    const double t = std::sqrt(cov.xx + cov.yy + 2.0 * s);
    const Point2 root_gamma{(cov.xx + s) / t * h.gamma.re + cov.xy / t * h.gamma.im,
                            cov.xy / t * h.gamma.re + (cov.yy + s) / t * h.gamma.im};
    const double scale = norm(root_gamma);   // = sqrt(gamma' Sigma gamma)
    return {(1.0 / scale) * root_gamma, (h.beta - dot(h.gamma, mean)) / scale};
}

/// P(dot(p, omega) >= tau) for standard normal p, i.e. Phi(-tau).
inline TailMass half_space_prob(const CanonicalHalfSpace& h) {
    return {std_normal_cdf(-h.tau), std_normal_log_cdf(-h.tau)};
}

/// Draw a standard normal conditioned on {p : dot(p, omega) >= tau}.
/// Decomposes into the component along omega, which is an inverse-CDF
/// draw from the truncated marginal, and the untouched orthogonal
/// component. Exact, no rejection, one (z1, z2, u) triple per sample.
template <RandomSource R>
Point2 sample_truncated_std(const CanonicalHalfSpace& h, R& rng) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double u = rng.uniform();
    // y ~ lower tail of N(0,1) below -tau: y = Phi^{-1}(u Phi(-tau)).
    // Compose in the log domain once the tail mass is too small for the
    // product to stay in range.
    double y;
    if (h.tau > 8.0) {
        y = std_normal_quantile_log(std::log(u) + std_normal_log_cdf(-h.tau));
    } else {
        y = std_normal_quantile(u * std_normal_cdf(-h.tau));
    }
    y = std::min(y, -h.tau);   // guard the constraint against rounding at u ~ 1
    const Point2 z{z1, z2};
    // x = omega y + (I - omega omega') z, then flip: the flipped point has
    // component -y >= tau along omega.
    const Point2 x = y * h.omega + (z - dot(h.omega, z) * h.omega);
    return {-x.re, -x.im};
}

/// Draw from N(mean, sigma^2 I) conditioned on the half-space h. Maps
/// the standard draw back through the noise model and nudges onto the
/// constraint if the affine map rounds the point just outside.
template <RandomSource R>
Point2 sample_truncated(const HalfSpace& h, const NoiseModel& noise, R& rng) {
    const CanonicalHalfSpace ch = canonicalize(h, noise);
    const Point2 p = sample_truncated_std(ch, rng);
    Point2 x = noise.mean + noise.sigma * p;
    const double slack = dot(x, h.gamma) - h.beta;
    if (slack < 0.0) {
        x = x + (-slack) * h.gamma;
    }
    return x;
}

} // namespace aloe
