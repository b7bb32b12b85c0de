#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace aloe {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shortest decimal form that round-trips a double (17 significant
/// digits); empty string for non-finite values so they show up as
/// missing cells rather than "nan"/"inf" tokens.
inline std::string format_g17(double x) {
    if (!std::isfinite(x)) {
        return {};
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Parse "start:step:stop" (inclusive, fuzz-tolerant endpoint), a
/// comma-separated list, or a single number into a grid of values.
inline std::vector<double> parse_grid(const std::string& text) {
    auto parse_one = [](const std::string& s) {
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("parse_grid: bad number '" + s + "'");
        }
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) {
            ++used;
        }
        if (used != s.size()) {
            throw std::invalid_argument("parse_grid: bad number '" + s + "'");
        }
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ':')) {
            parts.push_back(item);
        }
        if (parts.size() != 3) {
            throw std::invalid_argument("parse_grid: expected start:step:stop in '" + text + "'");
        }
        const double start = parse_one(parts[0]);
        const double step = parse_one(parts[1]);
        const double stop = parse_one(parts[2]);
        if (!(step > 0.0) || stop < start) {
            throw std::invalid_argument("parse_grid: need step > 0 and stop >= start");
        }
        const auto count = std::size_t(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count >= 4096) {
            throw std::invalid_argument("parse_grid: grid too large");
        }
        std::vector<double> grid;
        grid.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            grid.push_back(start + double(i) * step);
        }
        return grid;
    }
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        grid.push_back(parse_one(item));
    }
    if (grid.empty()) {
        throw std::invalid_argument("parse_grid: empty grid '" + text + "'");
    }
    return grid;
}

/// Read a point file: one "re im" pair per line, blank lines and
/// #-comments skipped.
inline std::vector<Point2> load_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("load_points: cannot open '" + path + "'");
    }
    std::vector<Point2> pts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        std::istringstream ls(line);
        double re, im;
        if (!(ls >> re)) {
            continue;   // blank or comment-only line
        }
        if (!(ls >> im)) {
            throw io_error("load_points: line " + std::to_string(line_no) + " of '" + path +
                           "' has no imaginary part");
        }
        std::string rest;
        if (ls >> rest) {
            throw io_error("load_points: line " + std::to_string(line_no) + " of '" + path +
                           "' has trailing data");
        }
        if (!std::isfinite(re) || !std::isfinite(im)) {
            throw io_error("load_points: line " + std::to_string(line_no) + " of '" + path +
                           "' is not finite");
        }
        pts.push_back({re, im});
    }
    if (pts.empty()) {
        throw io_error("load_points: no points in '" + path + "'");
    }
    return pts;
}

/// Write points in the same "re im" format load_points reads.
inline void save_points(const std::string& path, const std::vector<Point2>& pts) {
    std::ofstream out(path);
    if (!out) {
        throw io_error("save_points: cannot open '" + path + "' for writing");
    }
    for (const auto& p : pts) {
        out << format_g17(p.re) << ' ' << format_g17(p.im) << '\n';
    }
    if (!out.good()) {
        throw io_error("save_points: write to '" + path + "' failed");
    }
}

} // namespace aloe
