#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace aloe {

struct Point2 {
    double re = 0.0;
    double im = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.re + b.re, a.im + b.im}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.re - b.re, a.im - b.im}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.re, s * a.im}; }
};

inline double dot(Point2 a, Point2 b) { return a.re * b.re + a.im * b.im; }
inline double norm_sq(Point2 a) { return dot(a, a); }
inline double norm(Point2 a) { return std::hypot(a.re, a.im); }

/// 90-degree counterclockwise rotation; spans the line {x : x.gamma = beta}
/// together with any point on it.
inline Point2 perp(Point2 a) { return {-a.im, a.re}; }

/// Closed half-plane {x : dot(x, gamma) >= beta} with unit gamma.
struct HalfSpace {
    Point2 gamma;
    double beta = 0.0;

    bool contains(Point2 x) const { return dot(x, gamma) >= beta; }
};

/// Finite set of signal points. Factory-validated: use make() so every
/// instance satisfies M >= 2 and pairwise-distinct symbols.
struct Constellation {
    std::vector<Point2> symbols;

    std::size_t size() const { return symbols.size(); }

    static Constellation make(std::vector<Point2> symbols, bool normalize_energy = true) {
        if (symbols.size() < 2) {
            throw std::invalid_argument("Constellation: need at least 2 symbols");
        }
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            for (std::size_t j = i + 1; j < symbols.size(); ++j) {
                if (norm(symbols[i] - symbols[j]) <= 1e-9) {
                    throw std::invalid_argument(
                        "Constellation: symbols " + std::to_string(i) + " and " +
                        std::to_string(j) + " coincide");
                }
            }
        }
        Constellation c{std::move(symbols)};
        if (normalize_energy) {
            double es = 0.0;
            for (const auto& s : c.symbols) {
                es += norm_sq(s);
            }
            es /= double(c.size());
            if (es <= 0.0) {
                throw std::invalid_argument("Constellation: zero average energy");
            }
            const double scale = 1.0 / std::sqrt(es);
            for (auto& s : c.symbols) {
                s = scale * s;
            }
        }
        return c;
    }

    /// Mean symbol energy; 1 after normalization, up to rounding.
    double average_energy() const {
        double es = 0.0;
        for (const auto& s : symbols) {
            es += norm_sq(s);
        }
        return es / double(size());
    }
};

/// |E[d^2]| / E[|d|^2] over mean-centered symbols d. Zero for proper
/// (circularly symmetric) sets, approaching 1 as the set collapses
/// toward a line.
inline double circularity(const Constellation& c) {
    Point2 mean{0.0, 0.0};
    for (const auto& s : c.symbols) {
        mean = mean + s;
    }
    mean = (1.0 / double(c.size())) * mean;
    double pseudo_re = 0.0;
    double pseudo_im = 0.0;
    double energy = 0.0;
    for (const auto& s : c.symbols) {
        const Point2 d = s - mean;
        pseudo_re += d.re * d.re - d.im * d.im;   // Re d^2
        pseudo_im += 2.0 * d.re * d.im;           // Im d^2
        energy += norm_sq(d);
    }
    if (energy <= 0.0) {
        throw std::invalid_argument("circularity: degenerate constellation");
    }
    return std::hypot(pseudo_re, pseudo_im) / energy;
}

/// Square QAM with an even number of points per side (4, 16, 64, ...),
/// unit average energy. Odd squares put a symbol at the origin and are
/// not part of the family this builder covers.
inline Constellation build_qam(std::size_t m) {
    const auto side = std::size_t(std::lround(std::sqrt(double(m))));
    if (side * side != m || side < 2 || side % 2 != 0) {
        throw std::invalid_argument(
            "build_qam: M must be an even perfect square (4, 16, 36, 64, ...)");
    }
    std::vector<Point2> pts;
    pts.reserve(m);
    for (std::size_t i = 0; i < side; ++i) {
        for (std::size_t j = 0; j < side; ++j) {
            pts.push_back({double(2 * i + 1) - double(side), double(2 * j + 1) - double(side)});
        }
    }
    return Constellation::make(std::move(pts));
}

/// First M points of the triangular lattice spiralling out from the
/// origin, unit average energy. Ties in radius break by angle so the set
/// is independent of enumeration order.
inline Constellation build_hex(std::size_t m) {
    if (m < 2) {
        throw std::invalid_argument("build_hex: need at least 2 symbols");
    }
    struct Site {
        long a;
        long b;
        long r2;      // exact squared radius a^2 + ab + b^2
        double angle; // atan2 mapped to [0, 2 pi)
    };
    long radius = 1;
    std::vector<Site> sites;
    for (;;) {
        sites.clear();
        for (long a = -radius; a <= radius; ++a) {
            for (long b = -radius; b <= radius; ++b) {
                const long r2 = a * a + a * b + b * b;
                if (r2 > radius * radius) {
                    continue;
                }
                const double x = double(a) + 0.5 * double(b);
                const double y = 0.86602540378443864676 * double(b);
                double angle = std::atan2(y, x);
                if (angle < 0.0) {
                    angle += 6.283185307179586477;
                }
                sites.push_back({a, b, r2, angle});
            }
        }
        if (sites.size() >= m) {
            break;
        }
        ++radius;
    }
    std::sort(sites.begin(), sites.end(), [](const Site& s, const Site& t) {
        if (s.r2 != t.r2) return s.r2 < t.r2;
        if (s.angle != t.angle) return s.angle < t.angle;
        if (s.a != t.a) return s.a < t.a;
        return s.b < t.b;
    });
    std::vector<Point2> pts;
    pts.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = double(sites[i].a) + 0.5 * double(sites[i].b);
        const double y = 0.86602540378443864676 * double(sites[i].b);
        pts.push_back({x, y});
    }
    return Constellation::make(std::move(pts));
}

/// Square QAM stretched along the real axis so the centered second-moment
/// circularity equals kappa exactly: scale x by sqrt(1+kappa), y by
/// sqrt(1-kappa), then renormalize energy.
inline Constellation build_improper(std::size_t m, double kappa) {
    if (!(kappa >= 0.0 && kappa < 1.0)) {
        throw std::invalid_argument("build_improper: kappa must lie in [0,1)");
    }
    Constellation base = build_qam(m);
    const double ax = std::sqrt(1.0 + kappa);
    const double ay = std::sqrt(1.0 - kappa);
    for (auto& s : base.symbols) {
        s = {ax * s.re, ay * s.im};
    }
    return Constellation::make(std::move(base.symbols));
}

/// Perpendicular bisector between distinct symbols, oriented so that
/// contains(x) means "x is at least as close to sj as to si".
inline HalfSpace bisector(Point2 si, Point2 sj) {
    const Point2 d = sj - si;
    const double len = norm(d);
    if (len <= 1e-9) {
        throw std::invalid_argument("bisector: coincident symbols");
    }
    const Point2 gamma = (1.0 / len) * d;
    return {gamma, dot(gamma, 0.5 * (si + sj))};
}

/// Half-spaces whose union is the complement of symbol i's nearest-
/// neighbor cell. Keeps only facets that actually bound the cell, so the
/// count K equals the number of Voronoi neighbors of symbol i.
struct VoronoiCell {
    std::size_t symbol_index = 0;
    std::vector<HalfSpace> facets;
    /// Index of the rival symbol behind each facet, parallel to facets.
    std::vector<std::size_t> rivals;

    std::size_t facet_count() const { return facets.size(); }

    /// Number of facet half-spaces containing x: 0 inside the cell,
    /// >= 1 once x decodes to some other symbol.
    std::size_t membership_count(Point2 x) const {
        std::size_t c = 0;
        for (const auto& h : facets) {
            c += h.contains(x) ? 1 : 0;
        }
        return c;
    }
};

/// C(x) over the cell's facets; free-function spelling of
/// VoronoiCell::membership_count.
inline std::size_t count_membership(const VoronoiCell& cell, Point2 x) {
    return cell.membership_count(x);
}

namespace detail {

/// Does the boundary line of `facet` carry a segment of positive length
/// that satisfies every constraint dot(x, gamma_j) <= beta_j? Clips the
/// line's parameter interval against each constraint.
inline bool facet_line_feasible(const HalfSpace& facet,
                                const std::vector<HalfSpace>& others,
                                double min_length) {
    const Point2 p0 = facet.beta * facet.gamma;   // foot of the boundary line
    const Point2 dir = perp(facet.gamma);
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
    for (const auto& h : others) {
        // Need dot(p0 + t dir, gamma_j) <= beta_j.
        const double a = dot(dir, h.gamma);
        const double b = h.beta - dot(p0, h.gamma);
        if (std::abs(a) < 1e-12) {
            if (b < 0.0) {
                return false;   // line parallel to j, entirely on the far side
            }
            continue;
        }
        if (a > 0.0) {
            t_hi = std::min(t_hi, b / a);
        } else {
            t_lo = std::max(t_lo, b / a);
        }
        if (t_hi - t_lo <= min_length) {
            return false;
        }
    }
    return t_hi - t_lo > min_length;
}

} // namespace detail

/// Voronoi cell of symbol i as the minimal facet set: one bisector per
/// actual neighbor, redundant bisectors dropped. Facets shorter than the
/// 1e-9 feasibility tolerance are treated as redundant.
inline VoronoiCell voronoi_cell(const Constellation& c, std::size_t i) {
    if (i >= c.size()) {
        throw std::invalid_argument("voronoi_cell: symbol index out of range");
    }
    std::vector<HalfSpace> all;
    std::vector<std::size_t> owner;
    all.reserve(c.size() - 1);
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (j == i) {
            continue;
        }
        all.push_back(bisector(c.symbols[i], c.symbols[j]));
        owner.push_back(j);
    }
    VoronoiCell cell{i, {}, {}};
    for (std::size_t k = 0; k < all.size(); ++k) {
        std::vector<HalfSpace> others;
        others.reserve(all.size() - 1);
        for (std::size_t l = 0; l < all.size(); ++l) {
            if (l != k) {
                others.push_back(all[l]);
            }
        }
        if (detail::facet_line_feasible(all[k], others, 1e-9)) {
            cell.facets.push_back(all[k]);
            cell.rivals.push_back(owner[k]);
        }
    }
    return cell;
}

/// All M-1 bisectors with no redundancy pruning. Same error event as
/// voronoi_cell (a union over a superset of half-spaces covering the same
/// region); useful for cross-checking the pruned representation.
inline VoronoiCell full_bisector_cell(const Constellation& c, std::size_t i) {
    if (i >= c.size()) {
        throw std::invalid_argument("full_bisector_cell: symbol index out of range");
    }
    VoronoiCell cell{i, {}, {}};
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (j == i) {
            continue;
        }
        cell.facets.push_back(bisector(c.symbols[i], c.symbols[j]));
        cell.rivals.push_back(j);
    }
    return cell;
}

} // namespace aloe
