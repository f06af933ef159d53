#pragma once

// File formats:
//   z-matrix TSV   id, z_1..z_K
//   truth TSV      id, h_1..h_K, alt
//   results TSV    id, z_1..z_K, lfdr, rejected
//   parameters     JSON document (K, variant, rho, M, mu, pi, loglik trace)
//   scenario       key=value lines, '#' starts a comment
// Floating values in the TSV files are written with 17 significant digits,
// which round-trips every double exactly.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "data.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "inference.hpp"
#include "model.hpp"
#include "simulation.hpp"

namespace csmgmm {

namespace io {

inline std::string format_double(double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    double v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        return std::nullopt;
    }
    return v;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path + "' for reading");
    }
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    return out;
}

}  // namespace io

/// Parses a z-matrix: one header line (id, z_1..z_K), then one row per set.
inline ZMatrix read_zmatrix(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(source + ": empty file, expected a header line");
    }
    std::vector<std::string> header;
    for (auto f : io::split_tabs(io::trim(line))) {
        header.emplace_back(f);
    }
    if (header.size() < 2) {
        throw Error(source + ": malformed header, expected 'id' followed by at least one z column");
    }
    const std::size_t K = header.size() - 1;

    std::vector<std::string> ids;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = io::trim(line);
        if (trimmed.empty()) {
            continue;
        }
        const auto fields = io::split_tabs(trimmed);
        if (fields.size() != K + 1) {
            throw Error(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(K + 1));
        }
        ids.emplace_back(fields[0]);
        for (std::size_t k = 0; k < K; ++k) {
            const auto v = io::parse_double(fields[k + 1]);
            if (!v || !std::isfinite(*v)) {
                throw Error(source + ": line " + std::to_string(line_no) + ", column " +
                            header[k + 1] + ": '" + std::string(fields[k + 1]) +
                            "' is not a finite number");
            }
            values.push_back(*v);
        }
    }
    if (ids.empty()) {
        throw Error(source + ": no data rows");
    }
    return ZMatrix(K, std::move(ids), std::move(values));
}

inline ZMatrix read_zmatrix(const std::string& path) {
    auto in = io::open_in(path);
    return read_zmatrix(in, path);
}

inline void write_zmatrix(std::ostream& out, const ZMatrix& Z) {
    out << "id";
    for (std::size_t k = 0; k < Z.cols(); ++k) {
        out << "\tz_" << k + 1;
    }
    out << '\n';
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        out << Z.id(j);
        for (std::size_t k = 0; k < Z.cols(); ++k) {
            out << '\t' << io::format_double(Z(j, k));
        }
        out << '\n';
    }
}

inline void write_zmatrix(const std::string& path, const ZMatrix& Z) {
    auto out = io::open_out(path);
    write_zmatrix(out, Z);
}

inline void write_truth(std::ostream& out, const ZMatrix& Z, const TruthLabels& truth) {
    out << "id";
    for (std::size_t k = 0; k < truth.K; ++k) {
        out << "\th_" << k + 1;
    }
    out << "\talt\n";
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        out << Z.id(j);
        for (int h : truth.config(j)) {
            out << '\t' << h;
        }
        out << '\t' << (truth.alt[j] ? 1 : 0) << '\n';
    }
}

inline void write_truth(const std::string& path, const ZMatrix& Z, const TruthLabels& truth) {
    auto out = io::open_out(path);
    write_truth(out, Z, truth);
}

inline void write_results(std::ostream& out, const ZMatrix& Z, std::span<const double> lfdrs,
                          const std::vector<bool>& rejected) {
    if (lfdrs.size() != Z.rows() || rejected.size() != Z.rows()) {
        throw Error("results columns do not match the z-matrix");
    }
    out << "id";
    for (std::size_t k = 0; k < Z.cols(); ++k) {
        out << "\tz_" << k + 1;
    }
    out << "\tlfdr\trejected\n";
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        out << Z.id(j);
        for (std::size_t k = 0; k < Z.cols(); ++k) {
            out << '\t' << io::format_double(Z(j, k));
        }
        out << '\t' << io::format_double(lfdrs[j]) << '\t' << (rejected[j] ? 1 : 0) << '\n';
    }
}

inline void write_results(const std::string& path, const ZMatrix& Z, std::span<const double> lfdrs,
                          const std::vector<bool>& rejected) {
    auto out = io::open_out(path);
    write_results(out, Z, lfdrs, rejected);
}

struct ResultsTable {
    ZMatrix z;
    std::vector<double> lfdr;
    std::vector<bool> rejected;
};

/// Reads a results table back; the trailing lfdr and rejected columns are
/// split off from the z columns.
inline ResultsTable read_results(const std::string& path) {
    auto in = io::open_in(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(path + ": empty results file");
    }
    std::vector<std::string> header;
    for (auto f : io::split_tabs(io::trim(line))) {
        header.emplace_back(f);
    }
    if (header.size() < 4 || header[header.size() - 2] != "lfdr" || header.back() != "rejected") {
        throw Error(path + ": results header must end with 'lfdr' and 'rejected'");
    }
    const std::size_t K = header.size() - 3;
    std::vector<std::string> ids;
    std::vector<double> values;
    ResultsTable out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = io::trim(line);
        if (trimmed.empty()) {
            continue;
        }
        const auto fields = io::split_tabs(trimmed);
        if (fields.size() != K + 3) {
            throw Error(path + ": line " + std::to_string(line_no) + " has the wrong number of fields");
        }
        ids.emplace_back(fields[0]);
        for (std::size_t c = 1; c <= K + 1; ++c) {
            const auto v = io::parse_double(fields[c]);
            if (!v || !std::isfinite(*v)) {
                throw Error(path + ": line " + std::to_string(line_no) + ", column " + header[c] +
                            ": not a finite number");
            }
            (c <= K ? values : out.lfdr).push_back(*v);
        }
        out.rejected.push_back(io::trim(fields[K + 2]) == "1");
    }
    out.z = ZMatrix(K, std::move(ids), std::move(values));
    return out;
}

/// Structured parameter document. Doubles are emitted by the JSON library
/// in shortest round-trip form, so reading back is lossless.
inline nlohmann::json params_to_json(const ModelSpec& spec, const ModelParams& params,
                                     const FitResult* fit = nullptr) {
    nlohmann::json doc;
    doc["K"] = spec.K;
    doc["variant"] = std::string(to_string(spec.variant));
    doc["rho"] = spec.rho ? nlohmann::json(*spec.rho) : nlohmann::json(nullptr);
    doc["M"] = spec.M;
    doc["mu"] = params.mu;
    doc["pi"] = params.pi;
    if (fit) {
        doc["loglik_trace"] = fit->loglik_trace;
        doc["converged"] = fit->converged;
        doc["iterations"] = fit->iterations;
        doc["projection_applied"] = fit->projection_applied;
        nlohmann::json empty = nlohmann::json::array();
        for (const auto& e : fit->empty_components) {
            empty.push_back({{"b", e.rep}, {"m", e.component}});
        }
        doc["empty_components"] = empty;
    }
    return doc;
}

struct ParamsDocument {
    ModelSpec spec;
    ModelParams params;
    std::vector<double> loglik_trace;
};

inline ParamsDocument params_from_json(const nlohmann::json& doc) {
    try {
        ParamsDocument out;
        out.spec.K = doc.at("K").get<int>();
        out.spec.variant = parse_variant(doc.at("variant").get<std::string>());
        if (doc.contains("rho") && !doc.at("rho").is_null()) {
            out.spec.rho = doc.at("rho").get<double>();
        }
        out.spec.M = doc.at("M").get<std::vector<int>>();
        check_spec(out.spec);
        out.params.mu = doc.at("mu").get<std::vector<std::vector<std::vector<double>>>>();
        out.params.pi = doc.at("pi").get<std::vector<std::vector<double>>>();
        if (doc.contains("loglik_trace")) {
            out.loglik_trace = doc.at("loglik_trace").get<std::vector<double>>();
        }
        require_valid(out.spec, out.params);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed parameter document: ") + e.what());
    }
}

inline void write_json(const std::string& path, const nlohmann::json& doc) {
    auto out = io::open_out(path);
    out << doc.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
    auto in = io::open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

inline void write_params(const std::string& path, const ModelSpec& spec, const ModelParams& params,
                         const FitResult* fit = nullptr) {
    write_json(path, params_to_json(spec, params, fit));
}

inline ParamsDocument read_params(const std::string& path) {
    return params_from_json(read_json(path));
}

/// Reads key=value lines. Blank lines and text after '#' are ignored.
inline std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& source = "<stream>") {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = io::trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw Error(source + ": line " + std::to_string(line_no) + " is not key=value");
        }
        out[std::string(io::trim(view.substr(0, eq)))] = std::string(io::trim(view.substr(eq + 1)));
    }
    return out;
}

namespace io {

inline double to_double(const std::string& key, const std::string& value) {
    const auto v = parse_double(value);
    if (!v || !std::isfinite(*v)) {
        throw Error("scenario key '" + key + "': '" + value + "' is not a number");
    }
    return *v;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw Error("scenario key '" + key + "': '" + value + "' is not a non-negative integer");
    }
    return v;
}

inline bool to_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    throw Error("scenario key '" + key + "': '" + value + "' is not a boolean");
}

}  // namespace io

/// Applies one scenario key to `spec`. Returns false for unknown keys.
inline bool apply_scenario_key(ScenarioSpec& spec, const std::string& key, const std::string& value) {
    using namespace io;
    if (key == "kind") spec.kind = parse_scenario_kind(value);
    else if (key == "J") spec.J = to_uint(key, value);
    else if (key == "n") spec.n = static_cast<int>(to_uint(key, value));
    else if (key == "maf") spec.maf = to_double(key, value);
    else if (key == "tau1") spec.tau1 = to_double(key, value);
    else if (key == "tau2") spec.tau2 = to_double(key, value);
    else if (key == "tau3") spec.tau3 = to_double(key, value);
    else if (key == "effect_window_low") spec.effect_window_low = to_double(key, value);
    else if (key == "window_length") spec.window_length = to_double(key, value);
    else if (key == "beta_offset") spec.beta_offset = to_double(key, value);
    else if (key == "rho_outcomes") spec.rho_outcomes = to_double(key, value);
    else if (key == "sign_mix") spec.sign_mix = to_double(key, value);
    else if (key == "mode") spec.mode = parse_generation_mode(value);
    else if (key == "multinomial_assignment") spec.multinomial_assignment = to_bool(key, value);
    else if (key == "seed") spec.seed = to_uint(key, value);
    else return false;
    return true;
}

inline std::map<std::string, std::string> scenario_to_key_values(const ScenarioSpec& s) {
    return {
        {"kind", std::string(to_string(s.kind))},
        {"J", std::to_string(s.J)},
        {"n", std::to_string(s.n)},
        {"maf", io::format_double(s.maf)},
        {"tau1", io::format_double(s.tau1)},
        {"tau2", io::format_double(s.tau2)},
        {"tau3", io::format_double(s.tau3)},
        {"effect_window_low", io::format_double(s.effect_window_low)},
        {"window_length", io::format_double(s.window_length)},
        {"beta_offset", io::format_double(s.beta_offset)},
        {"rho_outcomes", io::format_double(s.rho_outcomes)},
        {"sign_mix", io::format_double(s.sign_mix)},
        {"mode", std::string(to_string(s.mode))},
        {"multinomial_assignment", s.multinomial_assignment ? "1" : "0"},
        {"seed", std::to_string(s.seed)},
    };
}

/// Parameter sweep for the replicate runner: one scenario key varied over
/// a list of values.
struct ScenarioGrid {
    std::string parameter;
    std::vector<double> values;
    std::size_t replicates = 1;
    /// When true, tau2 follows 3 * tau1^2 (and tau3 = tau2 / 2 in 3-d) at
    /// every grid point.
    bool tau2_from_tau1 = false;
};

struct ScenarioConfig {
    ScenarioSpec spec;
    std::optional<ScenarioGrid> grid;
};

/// Scenario file: ScenarioSpec keys plus optional grid keys
/// (grid_param, grid_values as a comma list, replicates, tau2_rule=quadratic).
inline ScenarioConfig read_scenario_config(std::istream& in, const std::string& source = "<stream>") {
    ScenarioConfig cfg;
    ScenarioGrid grid;
    bool has_grid = false;
    for (const auto& [key, value] : read_key_values(in, source)) {
        if (apply_scenario_key(cfg.spec, key, value)) {
            continue;
        }
        if (key == "grid_param") {
            if (value != "effect_window_low" && value != "tau1") {
                throw Error(source + ": grid_param must be effect_window_low or tau1");
            }
            grid.parameter = value;
            has_grid = true;
        } else if (key == "grid_values") {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                grid.values.push_back(io::to_double(key, std::string(io::trim(item))));
            }
        } else if (key == "replicates") {
            grid.replicates = io::to_uint(key, value);
        } else if (key == "tau2_rule") {
            if (value != "quadratic" && value != "fixed") {
                throw Error(source + ": tau2_rule must be quadratic or fixed");
            }
            grid.tau2_from_tau1 = value == "quadratic";
        } else {
            throw Error(source + ": unknown scenario key '" + key + "'");
        }
    }
    if (has_grid || !grid.values.empty()) {
        if (grid.parameter.empty() || grid.values.empty()) {
            throw Error(source + ": a grid needs both grid_param and grid_values");
        }
        cfg.grid = grid;
    } else if (grid.tau2_from_tau1 || grid.replicates != 1) {
        grid.parameter = "tau1";
        grid.values = {cfg.spec.tau1};
        cfg.grid = grid;
    }
    check_scenario(cfg.spec);
    return cfg;
}

inline ScenarioConfig read_scenario_config(const std::string& path) {
    auto in = io::open_in(path);
    return read_scenario_config(in, path);
}

}  // namespace csmgmm
