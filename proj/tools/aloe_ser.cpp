// aloe_ser: symbol error rate estimation for 2-D constellations under
// Gaussian noise. Subcommands:
//   ser      SER curve over an Eb/N0 grid (mc / is / aloe estimators)
//   compare  repeat-based relative RMSE study against a reference
//   cell     facet geometry and tail masses for one symbol's decision cell
//   sample   draws from the error-event mixture proposal for one symbol
//
// Output is CSV (default) or JSON, with a provenance header. For a fixed
// seed the output bytes are independent of the thread count; timing is
// only emitted on request (--timing) to keep that property by default.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aloe/aloe.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using MetaList = std::vector<std::pair<std::string, std::string>>;
using ordered_json = nlohmann::ordered_json;

struct CommonOpts {
    std::string constellation = "qam";
    std::size_t m = 64;
    double kappa = 0.8;
    std::string points_file;
    bool no_normalize = false;
    std::string out;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    unsigned threads_flag = 0;
    bool threads_given = false;
    std::string allocation = "categorical";
    bool all_bisectors = false;
    std::string dump_points;
};

void add_common_options(CLI::App& cmd, CommonOpts& o, bool needs_seed) {
    cmd.add_option("--const", o.constellation, "Constellation family")
        ->check(CLI::IsMember({"qam", "hex", "improper", "custom"}))
        ->capture_default_str();
    cmd.add_option("-M,--M", o.m, "Constellation size")->capture_default_str();
    cmd.add_option("--kappa", o.kappa, "Circularity of the improper family")
        ->capture_default_str();
    cmd.add_option("--points", o.points_file,
                   "Point file for --const custom, one 're im' pair per line");
    cmd.add_flag("--no-normalize", o.no_normalize,
                 "Keep custom points as given instead of normalizing energy");
    cmd.add_option("-o,--out", o.out, "Output path, or - for stdout")->required();
    cmd.add_option("--format", o.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    if (needs_seed) {
        cmd.add_option("--seed", o.seed, "RNG seed; drawn from the OS when omitted");
    }
    auto* threads = cmd.add_option("--threads", o.threads_flag, "Worker thread count")
                        ->check(CLI::Range(1u, 65536u));
    threads->each([&o](const std::string&) { o.threads_given = true; });
    cmd.add_option("--allocation", o.allocation, "Mixture sample allocation")
        ->check(CLI::IsMember({"categorical", "proportional"}))
        ->capture_default_str();
    cmd.add_flag("--all-bisectors", o.all_bisectors,
                 "Keep every bisector half-space instead of the minimal facet set");
    cmd.add_option("--dump-points", o.dump_points,
                   "Also write the constellation points to this file");
}

unsigned resolve_threads(const CommonOpts& o) {
    if (o.threads_given) {
        return o.threads_flag;
    }
    if (const char* env = std::getenv("ALOE_SER_THREADS")) {
        const std::string text(env);
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(text, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("ALOE_SER_THREADS is not a number: '" + text + "'");
        }
        if (used != text.size() || v == 0 || v > 65536) {
            throw std::invalid_argument("ALOE_SER_THREADS must be an integer in [1, 65536]");
        }
        return unsigned(v);
    }
    return 0;
}

std::uint64_t resolve_seed(const CommonOpts& o) {
    if (o.seed) {
        return *o.seed;
    }
    std::random_device rd;
    return (std::uint64_t(rd()) << 32) ^ std::uint64_t(rd());
}

std::pair<aloe::Constellation, aloe::ConstellationKind> build_constellation(const CommonOpts& o) {
    if (o.constellation == "qam") {
        return {aloe::build_qam(o.m), aloe::ConstellationKind::qam};
    }
    if (o.constellation == "hex") {
        return {aloe::build_hex(o.m), aloe::ConstellationKind::hex};
    }
    if (o.constellation == "improper") {
        return {aloe::build_improper(o.m, o.kappa), aloe::ConstellationKind::improper};
    }
    if (o.points_file.empty()) {
        throw std::invalid_argument("--const custom requires --points");
    }
    auto pts = aloe::load_points(o.points_file);
    return {aloe::Constellation::make(std::move(pts), !o.no_normalize),
            aloe::ConstellationKind::custom};
}

aloe::MixtureAllocation parse_allocation(const std::string& name) {
    return name == "proportional" ? aloe::MixtureAllocation::proportional
                                  : aloe::MixtureAllocation::categorical;
}

std::vector<aloe::Method> parse_methods(const std::string& list) {
    bool want[3] = {false, false, false};
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        want[std::size_t(aloe::parse_method(item))] = true;
    }
    std::vector<aloe::Method> methods;
    for (const aloe::Method m : {aloe::Method::mc, aloe::Method::is, aloe::Method::aloe}) {
        if (want[std::size_t(m)]) {
            methods.push_back(m);
        }
    }
    if (methods.empty()) {
        throw std::invalid_argument("no methods selected");
    }
    return methods;
}

std::string join_methods(const std::vector<aloe::Method>& methods) {
    std::string s;
    for (const aloe::Method m : methods) {
        if (!s.empty()) s += ',';
        s += aloe::to_string(m);
    }
    return s;
}

MetaList common_meta(const std::string& command, const CommonOpts& o) {
    MetaList meta;
    meta.push_back({"tool", "aloe_ser"});
    meta.push_back({"version", kVersion});
    meta.push_back({"command", command});
    meta.push_back({"constellation", o.constellation});
    meta.push_back({"M", std::to_string(o.m)});
    if (o.constellation == "improper") {
        meta.push_back({"kappa", aloe::format_g17(o.kappa)});
    }
    if (o.constellation == "custom") {
        meta.push_back({"points", o.points_file});
        meta.push_back({"normalize", o.no_normalize ? "false" : "true"});
    }
    meta.push_back({"allocation", o.allocation});
    meta.push_back({"all_bisectors", o.all_bisectors ? "true" : "false"});
    return meta;
}

ordered_json json_cell(const std::optional<double>& v) {
    if (v && std::isfinite(*v)) {
        return *v;
    }
    return nullptr;
}

struct Table {
    MetaList meta;
    std::vector<std::string> columns;
    // Cells are pre-rendered for CSV; JSON re-renders numbers natively.
    std::vector<std::vector<std::pair<std::string, ordered_json>>> rows;

    void add_row(std::vector<std::pair<std::string, ordered_json>> row) {
        rows.push_back(std::move(row));
    }
};

std::string render_csv_value(const ordered_json& v) {
    if (v.is_null()) {
        return {};
    }
    if (v.is_number_float()) {
        return aloe::format_g17(v.get<double>());
    }
    if (v.is_number_unsigned()) {
        return std::to_string(v.get<std::uint64_t>());
    }
    if (v.is_string()) {
        return v.get<std::string>();
    }
    return v.dump();
}

void write_table(const Table& t, const std::string& path, const std::string& format) {
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (path != "-") {
        file.open(path, std::ios::binary);
        if (!file) {
            throw aloe::io_error("cannot open '" + path + "' for writing");
        }
        os = &file;
    }
    if (format == "json") {
        ordered_json doc;
        ordered_json meta = ordered_json::object();
        for (const auto& [k, v] : t.meta) {
            meta[k] = v;
        }
        doc["meta"] = std::move(meta);
        doc["rows"] = ordered_json::array();
        for (const auto& row : t.rows) {
            ordered_json obj = ordered_json::object();
            for (const auto& [k, v] : row) {
                obj[k] = v;
            }
            doc["rows"].push_back(std::move(obj));
        }
        *os << doc.dump(2) << '\n';
    } else {
        for (const auto& [k, v] : t.meta) {
            *os << "# " << k << '=' << v << '\n';
        }
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            *os << (i ? "," : "") << t.columns[i];
        }
        *os << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                *os << (i ? "," : "") << render_csv_value(row[i].second);
            }
            *os << '\n';
        }
    }
    os->flush();
    if (!os->good()) {
        throw aloe::io_error("write to '" + path + "' failed");
    }
}

void maybe_dump_points(const CommonOpts& o, const aloe::Constellation& c) {
    if (!o.dump_points.empty()) {
        aloe::save_points(o.dump_points, c.symbols);
    }
}

struct SerOpts {
    CommonOpts common;
    std::string snr = "0:2:24";
    std::size_t n = 20;
    std::string methods = "aloe";
    double alpha = 2.0;
    bool timing = false;
};

int run_ser(const SerOpts& o) {
    auto [constellation, kind] = build_constellation(o.common);
    maybe_dump_points(o.common, constellation);
    aloe::LinkConfig cfg;
    cfg.constellation = std::move(constellation);
    cfg.kind = kind;
    cfg.ebn0_db = aloe::parse_grid(o.snr);
    cfg.per_symbol_n = o.n;
    cfg.methods = parse_methods(o.methods);
    cfg.is_alpha = o.alpha;
    cfg.allocation = parse_allocation(o.common.allocation);
    cfg.all_bisectors = o.common.all_bisectors;
    cfg.threads = resolve_threads(o.common);
    const std::uint64_t seed = resolve_seed(o.common);

    const auto results = aloe::ser_curve(cfg, seed);

    Table t;
    t.meta = common_meta("ser", o.common);
    t.meta.push_back({"snr", o.snr});
    t.meta.push_back({"n", std::to_string(o.n)});
    t.meta.push_back({"methods", join_methods(cfg.methods)});
    t.meta.push_back({"alpha", aloe::format_g17(o.alpha)});
    t.meta.push_back({"seed", std::to_string(seed)});
    t.columns = {"ebn0_db", "method", "p_e", "se", "var_bound", "p_bar_mean",
                 "wall_time_s", "flags"};
    for (const auto& r : results) {
        std::string flags;
        if (r.degenerate_symbols > 0) {
            flags = "degenerate=" + std::to_string(r.degenerate_symbols);
        }
        t.add_row({{"ebn0_db", r.ebn0_db},
                   {"method", aloe::to_string(r.method)},
                   {"p_e", r.p_e},
                   {"se", json_cell(std::isfinite(r.std_error)
                                        ? std::optional<double>(r.std_error)
                                        : std::nullopt)},
                   {"var_bound", json_cell(r.var_bound)},
                   {"p_bar_mean", json_cell(r.p_bar_mean)},
                   {"wall_time_s", o.timing ? ordered_json(r.wall_time_s) : ordered_json(nullptr)},
                   {"flags", flags}});
    }
    write_table(t, o.common.out, o.common.format);
    return 0;
}

struct CompareOpts {
    CommonOpts common;
    std::string snr = "0:4:20";
    std::size_t n = 20;
    std::string methods = "mc,is,aloe";
    std::string alpha_grid = "1:0.5:5";
    std::size_t repeats = 50;
};

int run_compare(const CompareOpts& o) {
    auto [constellation, kind] = build_constellation(o.common);
    maybe_dump_points(o.common, constellation);
    aloe::LinkConfig cfg;
    cfg.constellation = std::move(constellation);
    cfg.kind = kind;
    cfg.ebn0_db = aloe::parse_grid(o.snr);
    cfg.per_symbol_n = o.n;
    cfg.methods = parse_methods(o.methods);
    cfg.is_alpha_grid = aloe::parse_grid(o.alpha_grid);
    cfg.allocation = parse_allocation(o.common.allocation);
    cfg.all_bisectors = o.common.all_bisectors;
    cfg.threads = resolve_threads(o.common);
    const std::uint64_t seed = resolve_seed(o.common);

    const auto results = aloe::rrmse_study(cfg, o.repeats, seed);

    Table t;
    t.meta = common_meta("compare", o.common);
    t.meta.push_back({"snr", o.snr});
    t.meta.push_back({"n", std::to_string(o.n)});
    t.meta.push_back({"methods", join_methods(cfg.methods)});
    t.meta.push_back({"alpha_grid", o.alpha_grid});
    t.meta.push_back({"repeats", std::to_string(o.repeats)});
    t.meta.push_back({"seed", std::to_string(seed)});
    t.columns = {"ebn0_db", "method", "rrmse", "alpha", "p_ref", "mc_rrmse_analytic", "flags"};
    for (const auto& r : results) {
        t.add_row({{"ebn0_db", r.ebn0_db},
                   {"method", aloe::to_string(r.method)},
                   {"rrmse", json_cell(r.rrmse)},
                   {"alpha", json_cell(r.alpha)},
                   {"p_ref", json_cell(r.p_ref)},
                   {"mc_rrmse_analytic", json_cell(r.mc_rrmse_analytic)},
                   {"flags", r.flags}});
    }
    write_table(t, o.common.out, o.common.format);
    return 0;
}

struct CellOpts {
    CommonOpts common;
    std::size_t symbol = 0;
    double snr = 10.0;
};

int run_cell(const CellOpts& o) {
    auto [constellation, kind] = build_constellation(o.common);
    (void)kind;
    maybe_dump_points(o.common, constellation);
    if (o.symbol >= constellation.size()) {
        throw std::invalid_argument("--symbol out of range");
    }
    const double sigma = aloe::snr_to_sigma(o.snr, constellation.size());
    const aloe::VoronoiCell cell = o.common.all_bisectors
                                       ? aloe::full_bisector_cell(constellation, o.symbol)
                                       : aloe::voronoi_cell(constellation, o.symbol);
    const aloe::NoiseModel noise{constellation.symbols[o.symbol], sigma};

    double p_bar = 0.0;
    std::vector<aloe::CanonicalHalfSpace> canonical;
    std::vector<double> tails;
    for (const auto& facet : cell.facets) {
        const auto ch = aloe::canonicalize(facet, noise);
        canonical.push_back(ch);
        tails.push_back(aloe::half_space_prob(ch).value);
        p_bar += tails.back();
    }

    Table t;
    t.meta = common_meta("cell", o.common);
    t.meta.push_back({"symbol", std::to_string(o.symbol)});
    t.meta.push_back({"snr", aloe::format_g17(o.snr)});
    t.meta.push_back({"sigma", aloe::format_g17(sigma)});
    t.meta.push_back({"facets", std::to_string(cell.facet_count())});
    t.meta.push_back({"p_bar", aloe::format_g17(p_bar)});
    t.columns = {"k", "gamma_x", "gamma_y", "beta", "tau", "p_k", "alpha_k"};
    for (std::size_t k = 0; k < cell.facet_count(); ++k) {
        t.add_row({{"k", std::uint64_t(k)},
                   {"gamma_x", cell.facets[k].gamma.re},
                   {"gamma_y", cell.facets[k].gamma.im},
                   {"beta", cell.facets[k].beta},
                   {"tau", canonical[k].tau},
                   {"p_k", tails[k]},
                   {"alpha_k", p_bar > 0.0 ? ordered_json(tails[k] / p_bar)
                                           : ordered_json(nullptr)}});
    }
    write_table(t, o.common.out, o.common.format);
    return 0;
}

struct SampleOpts {
    CommonOpts common;
    std::size_t symbol = 0;
    double snr = 10.0;
    std::size_t n = 1000;
};

int run_sample(const SampleOpts& o) {
    auto [constellation, kind] = build_constellation(o.common);
    (void)kind;
    maybe_dump_points(o.common, constellation);
    if (o.symbol >= constellation.size()) {
        throw std::invalid_argument("--symbol out of range");
    }
    if (o.n == 0) {
        throw std::invalid_argument("--n must be positive");
    }
    const double sigma = aloe::snr_to_sigma(o.snr, constellation.size());
    const aloe::VoronoiCell cell = o.common.all_bisectors
                                       ? aloe::full_bisector_cell(constellation, o.symbol)
                                       : aloe::voronoi_cell(constellation, o.symbol);
    const aloe::NoiseModel noise{constellation.symbols[o.symbol], sigma};
    const aloe::MixtureProposal mix = aloe::build_mixture(cell, noise);
    const std::uint64_t seed = resolve_seed(o.common);
    aloe::RngStream rng(seed, o.symbol);

    Table t;
    t.meta = common_meta("sample", o.common);
    t.meta.push_back({"symbol", std::to_string(o.symbol)});
    t.meta.push_back({"snr", aloe::format_g17(o.snr)});
    t.meta.push_back({"sigma", aloe::format_g17(sigma)});
    t.meta.push_back({"n", std::to_string(o.n)});
    t.meta.push_back({"p_bar", aloe::format_g17(mix.union_bound)});
    t.meta.push_back({"seed", std::to_string(seed)});
    t.columns = {"x", "y", "component", "c"};
    for (std::size_t i = 0; i < o.n; ++i) {
        const auto [x, k] = aloe::sample_mixture(mix, rng);
        t.add_row({{"x", x.re},
                   {"y", x.im},
                   {"component", std::uint64_t(k)},
                   {"c", std::uint64_t(mix.cell.membership_count(x))}});
    }
    write_table(t, o.common.out, o.common.format);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Symbol error rate estimation for 2-D constellations under Gaussian noise"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SerOpts ser;
    auto* ser_cmd = app.add_subcommand("ser", "Estimate a symbol error rate curve");
    add_common_options(*ser_cmd, ser.common, true);
    ser_cmd->add_option("--snr", ser.snr, "Eb/N0 grid in dB: start:step:stop or a,b,c")
        ->capture_default_str();
    ser_cmd->add_option("-n,--n", ser.n, "Samples per symbol")->capture_default_str();
    ser_cmd->add_option("--methods,--method", ser.methods, "Comma list of mc, is, aloe")
        ->capture_default_str();
    ser_cmd->add_option("--alpha", ser.alpha, "Proposal width multiplier for is")
        ->capture_default_str();
    ser_cmd->add_flag("--timing", ser.timing, "Fill the wall_time_s column");

    CompareOpts compare;
    auto* compare_cmd =
        app.add_subcommand("compare", "Relative RMSE of the estimators against a reference");
    add_common_options(*compare_cmd, compare.common, true);
    compare_cmd->add_option("--snr", compare.snr, "Eb/N0 grid in dB")->capture_default_str();
    compare_cmd->add_option("-n,--n", compare.n, "Samples per symbol per repeat")
        ->capture_default_str();
    compare_cmd->add_option("--methods,--method", compare.methods, "Comma list of mc, is, aloe")
        ->capture_default_str();
    compare_cmd->add_option("--alpha-grid", compare.alpha_grid, "Widths swept for is")
        ->capture_default_str();
    compare_cmd->add_option("--repeats", compare.repeats, "Independent repetitions")
        ->check(CLI::Range(std::size_t(2), std::size_t(100000)))
        ->capture_default_str();

    CellOpts cell;
    auto* cell_cmd = app.add_subcommand("cell", "Facet geometry for one symbol's decision cell");
    add_common_options(*cell_cmd, cell.common, false);
    cell_cmd->add_option("--symbol", cell.symbol, "Symbol index")->capture_default_str();
    cell_cmd->add_option("--snr", cell.snr, "Eb/N0 in dB")->capture_default_str();

    SampleOpts sample;
    auto* sample_cmd =
        app.add_subcommand("sample", "Draw from the error-event mixture for one symbol");
    add_common_options(*sample_cmd, sample.common, true);
    sample_cmd->add_option("--symbol", sample.symbol, "Symbol index")->capture_default_str();
    sample_cmd->add_option("--snr", sample.snr, "Eb/N0 in dB")->capture_default_str();
    sample_cmd->add_option("-n,--n", sample.n, "Number of draws")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ser_cmd->parsed()) {
            return run_ser(ser);
        }
        if (compare_cmd->parsed()) {
            return run_compare(compare);
        }
        if (cell_cmd->parsed()) {
            return run_cell(cell);
        }
        return run_sample(sample);
    } catch (const aloe::degenerate_proposal_error& e) {
        std::cerr << "aloe_ser: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "aloe_ser: " << e.what() << '\n';
        return 2;
    } catch (const aloe::io_error& e) {
        std::cerr << "aloe_ser: " << e.what() << '\n';
        // Input files are opened while the run is being configured;
        // anything later is an output failure.
        const std::string what = e.what();
        return what.find("load_points") != std::string::npos ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "aloe_ser: " << e.what() << '\n';
        return 1;
    }
}
