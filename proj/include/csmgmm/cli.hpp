#pragma once

// Batch commands behind the command-line tool. Every command writes its
// data to files under the output directory, records the options it ran
// with in manifest.json, and prints a single summary line.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "model.hpp"
#include "simulation.hpp"
#include "version.hpp"

namespace csmgmm {

struct RunConfig {
    std::string subcommand;
    std::string input;
    /// Previously fitted parameter document; `test` fits inline when empty.
    std::string params;
    std::string scenario_config;
    std::string out_dir;
    /// 0 means "infer from the input".
    int K = 0;
    std::optional<Variant> variant;
    std::vector<int> m_counts;
    std::optional<double> rho;
    bool estimate_rho = false;
    double q = 0.1;
    /// Unset means 1, except that simulate and replicate then keep the
    /// scenario file's own seed.
    std::optional<std::uint64_t> seed;
    bool symmetrize = false;
    int max_iter = 10000;
    double tol = 1e-8;
    /// Scenario stored in a manifest; takes precedence over scenario_config.
    std::optional<nlohmann::json> embedded_scenario;
};

/// Error in the command-line arguments (exit status 2).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(message) {}
};

inline void validate(const RunConfig& cfg) {
    static const std::vector<std::string> known = {"fit", "test", "simulate", "audit", "replicate"};
    if (std::find(known.begin(), known.end(), cfg.subcommand) == known.end()) {
        throw UsageError("unknown subcommand '" + cfg.subcommand + "'");
    }
    if (cfg.out_dir.empty()) {
        throw UsageError("--out-dir is required");
    }
    const bool needs_input = cfg.subcommand == "fit" || cfg.subcommand == "test" || cfg.subcommand == "audit";
    if (needs_input && cfg.input.empty()) {
        throw UsageError("--input is required for '" + cfg.subcommand + "'");
    }
    const bool needs_scenario = cfg.subcommand == "simulate" || cfg.subcommand == "replicate";
    if (needs_scenario && cfg.scenario_config.empty() && !cfg.embedded_scenario) {
        throw UsageError("--scenario-config is required for '" + cfg.subcommand + "'");
    }
    if (!(cfg.q > 0 && cfg.q < 1)) {
        throw UsageError("--q must lie in (0, 1)");
    }
    if (cfg.max_iter < 1) {
        throw UsageError("--max-iter must be at least 1");
    }
    if (!(cfg.tol > 0)) {
        throw UsageError("--tol must be positive");
    }
    if (cfg.K != 0 && (cfg.K < 2 || cfg.K > max_dimension)) {
        throw UsageError("--k must lie in [2, 12]");
    }
    if (cfg.rho && cfg.estimate_rho) {
        throw UsageError("--rho and --estimate-rho are mutually exclusive");
    }
}

inline nlohmann::json to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["subcommand"] = cfg.subcommand;
    j["input"] = cfg.input;
    j["params"] = cfg.params;
    j["scenario_config"] = cfg.scenario_config;
    j["k"] = cfg.K;
    j["variant"] = cfg.variant ? nlohmann::json(std::string(to_string(*cfg.variant))) : nlohmann::json(nullptr);
    j["m_counts"] = cfg.m_counts;
    j["rho"] = cfg.rho ? nlohmann::json(*cfg.rho) : nlohmann::json(nullptr);
    j["estimate_rho"] = cfg.estimate_rho;
    j["q"] = cfg.q;
    j["seed"] = cfg.seed ? nlohmann::json(*cfg.seed) : nlohmann::json(nullptr);
    j["symmetrize"] = cfg.symmetrize;
    j["max_iter"] = cfg.max_iter;
    j["tol"] = cfg.tol;
    return j;
}

inline RunConfig run_config_from_manifest(const nlohmann::json& manifest) {
    try {
        const auto& j = manifest.at("options");
        RunConfig cfg;
        cfg.subcommand = j.at("subcommand").get<std::string>();
        cfg.input = j.at("input").get<std::string>();
        cfg.params = j.at("params").get<std::string>();
        cfg.scenario_config = j.at("scenario_config").get<std::string>();
        cfg.K = j.at("k").get<int>();
        if (!j.at("variant").is_null()) {
            cfg.variant = parse_variant(j.at("variant").get<std::string>());
        }
        cfg.m_counts = j.at("m_counts").get<std::vector<int>>();
        if (!j.at("rho").is_null()) {
            cfg.rho = j.at("rho").get<double>();
        }
        cfg.estimate_rho = j.at("estimate_rho").get<bool>();
        cfg.q = j.at("q").get<double>();
        if (!j.at("seed").is_null()) {
            cfg.seed = j.at("seed").get<std::uint64_t>();
        }
        cfg.symmetrize = j.at("symmetrize").get<bool>();
        cfg.max_iter = j.at("max_iter").get<int>();
        cfg.tol = j.at("tol").get<double>();
        if (manifest.contains("scenario")) {
            cfg.embedded_scenario = manifest.at("scenario");
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed manifest: ") + e.what());
    }
}

namespace detail {

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline void prepare_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) {
        throw Error("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    }
}

inline void write_manifest(const RunConfig& cfg, const std::optional<nlohmann::json>& scenario = std::nullopt) {
    nlohmann::json m;
    m["tool"] = "csmgmm";
    m["version"] = version;
    m["options"] = to_json(cfg);
    if (scenario) {
        m["scenario"] = *scenario;
    }
    write_json(out_path(cfg, "manifest.json"), m);
}

inline ModelSpec model_spec_for(const RunConfig& cfg, int K, Variant fallback) {
    ModelSpec spec;
    spec.K = K;
    spec.variant = cfg.variant.value_or(fallback);
    spec.M = cfg.m_counts.empty() ? std::vector<int>(std::size_t{1} << K, 1) : cfg.m_counts;
    spec.rho = cfg.rho;
    return spec;
}

struct Prepared {
    ZMatrix original;
    ZMatrix z;
    ModelSpec spec;
};

/// Reads the input, applies symmetrization and settles rho.
inline Prepared prepare_input(const RunConfig& cfg) {
    Prepared p;
    p.original = read_zmatrix(cfg.input);
    const int K = static_cast<int>(p.original.cols());
    if (cfg.K != 0 && cfg.K != K) {
        throw UsageError("--k " + std::to_string(cfg.K) + " does not match the input's " + std::to_string(K) +
                         " columns");
    }
    p.z = cfg.symmetrize ? symmetrize(p.original, cfg.seed.value_or(1)).z : p.original;
    p.spec = model_spec_for(cfg, K, Variant::base);
    if (p.spec.variant == Variant::correlated && !p.spec.rho) {
        if (!cfg.estimate_rho) {
            throw UsageError("the correlated variant needs --rho or --estimate-rho");
        }
        p.spec.rho = estimate_correlation(p.z);
    }
    if (p.spec.variant != Variant::correlated && (p.spec.rho || cfg.estimate_rho)) {
        throw UsageError("--rho/--estimate-rho require --variant correlated");
    }
    check_spec(p.spec);
    return p;
}

inline FitOptions fit_options_for(const RunConfig& cfg) {
    FitOptions o;
    o.max_iterations = cfg.max_iter;
    o.tolerance = cfg.tol;
    o.seed = cfg.seed.value_or(1);
    return o;
}

inline void write_lfdr_curve(const std::string& path, std::span<const double> lfdrs) {
    std::vector<double> sorted(lfdrs.begin(), lfdrs.end());
    std::sort(sorted.begin(), sorted.end());
    auto out = io::open_out(path);
    out << "rank\tlfdr\trunning_mean\n";
    double sum = 0;
    for (std::size_t r = 0; r < sorted.size(); ++r) {
        sum += sorted[r];
        out << r + 1 << '\t' << io::format_double(sorted[r]) << '\t'
            << io::format_double(sum / static_cast<double>(r + 1)) << '\n';
    }
}

/// lfdr on a regular K = 2 grid over [-6, 6]^2, for contour plots.
inline void write_lfdr_grid(const std::string& path, const Mixture& mixture) {
    auto out = io::open_out(path);
    out << "z_1\tz_2\tlfdr\n";
    std::vector<double> scratch;
    for (int a = -60; a <= 60; ++a) {
        for (int b = -60; b <= 60; ++b) {
            const double z[2] = {a / 10.0, b / 10.0};
            out << io::format_double(z[0]) << '\t' << io::format_double(z[1]) << '\t'
                << io::format_double(mixture.lfdr(z, scratch)) << '\n';
        }
    }
}

inline ScenarioConfig scenario_for(const RunConfig& cfg) {
    ScenarioConfig sc;
    if (!cfg.embedded_scenario) {
        sc = read_scenario_config(cfg.scenario_config);
    } else {
        std::stringstream ss;
        for (const auto& [key, value] : cfg.embedded_scenario->items()) {
            ss << key << '=' << value.get<std::string>() << '\n';
        }
        sc = read_scenario_config(ss, "manifest scenario");
    }
    if (cfg.seed) {
        sc.spec.seed = *cfg.seed;
    }
    return sc;
}

inline nlohmann::json scenario_json(const ScenarioConfig& sc) {
    nlohmann::json j;
    for (const auto& [k, v] : scenario_to_key_values(sc.spec)) {
        j[k] = v;
    }
    if (sc.grid) {
        j["grid_param"] = sc.grid->parameter;
        std::string vals;
        for (std::size_t i = 0; i < sc.grid->values.size(); ++i) {
            vals += (i ? "," : "") + io::format_double(sc.grid->values[i]);
        }
        j["grid_values"] = vals;
        j["replicates"] = std::to_string(sc.grid->replicates);
        j["tau2_rule"] = sc.grid->tau2_from_tau1 ? "quadratic" : "fixed";
    }
    return j;
}

inline Variant default_variant(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::correlated2d: return Variant::correlated;
        case ScenarioKind::replication2d: return Variant::replication;
        default: return Variant::base;
    }
}

}  // namespace detail

inline int cmd_fit(const RunConfig& cfg, std::ostream& log = std::cout) {
    auto p = detail::prepare_input(cfg);
    detail::prepare_out_dir(cfg);
    const auto fit = em_fit(p.z, p.spec, detail::fit_options_for(cfg));
    write_params(detail::out_path(cfg, "params.json"), p.spec, fit.params, &fit);
    detail::write_manifest(cfg);
    log << "fit: J=" << p.z.rows() << " K=" << p.spec.K << " iterations=" << fit.iterations
        << " converged=" << (fit.converged ? "yes" : "no") << '\n';
    return 0;
}

inline int cmd_test(const RunConfig& cfg, std::ostream& log = std::cout) {
    auto p = detail::prepare_input(cfg);
    detail::prepare_out_dir(cfg);

    ModelSpec spec = p.spec;
    ModelParams params;
    std::optional<FitResult> fit;
    if (!cfg.params.empty()) {
        auto doc = read_params(cfg.params);
        if (doc.spec.K != spec.K) {
            throw Error("parameter file dimension does not match the input");
        }
        spec = doc.spec;
        params = doc.params;
    } else {
        fit = em_fit(p.z, spec, detail::fit_options_for(cfg));
        params = fit->params;
    }
    const auto configs = enumerate_configurations(spec.K, spec.variant);
    const Mixture mixture(spec, params, configs);
    const auto lfdrs = lfdr_batch(p.z, mixture);
    const auto rej = reject(lfdrs, cfg.q);

    write_results(detail::out_path(cfg, "results.tsv"), p.original, lfdrs, rej.rejected);
    write_params(detail::out_path(cfg, "params.json"), spec, params, fit ? &*fit : nullptr);
    detail::write_lfdr_curve(detail::out_path(cfg, "lfdr_curve.tsv"), lfdrs);
    if (spec.K == 2) {
        detail::write_lfdr_grid(detail::out_path(cfg, "lfdr_grid.tsv"), mixture);
    }
    detail::write_manifest(cfg);
    log << "test: J=" << p.z.rows() << " rejected=" << rej.num_rejected() << " q=" << cfg.q << '\n';
    return 0;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& log = std::cout) {
    auto sc = detail::scenario_for(cfg);
    detail::prepare_out_dir(cfg);
    const auto sim = simulate(sc.spec);
    write_zmatrix(detail::out_path(cfg, "z.tsv"), sim.z);
    write_truth(detail::out_path(cfg, "truth.tsv"), sim.z, sim.truth);
    detail::write_manifest(cfg, detail::scenario_json(sc));
    log << "simulate: J=" << sim.z.rows() << " K=" << sim.z.cols() << " regenerated=" << sim.regenerated_rows << '\n';
    return 0;
}

inline int cmd_audit(const RunConfig& cfg, std::ostream& log = std::cout) {
    const auto results = read_results(cfg.input);
    detail::prepare_out_dir(cfg);
    AuditOptions opts;
    opts.seed = cfg.seed.value_or(1);
    const auto report = incongruence_audit(results.z, results.lfdr, opts);
    nlohmann::json doc;
    doc["incongruous_count"] = report.incongruous_count;
    doc["sampled"] = report.sampled;
    doc["rows_examined"] = report.rows_examined;
    auto pairs = nlohmann::json::array();
    for (const auto& w : report.witness_pairs) {
        pairs.push_back({{"dominating_id", results.z.id(w.j)},
                         {"dominated_id", results.z.id(w.j_prime)},
                         {"lfdr_dominating", w.lfdr_j},
                         {"lfdr_dominated", w.lfdr_j_prime}});
    }
    doc["witness_pairs"] = pairs;
    write_json(detail::out_path(cfg, "audit.json"), doc);
    detail::write_manifest(cfg);
    log << "audit: rows=" << report.rows_examined << " incongruous=" << report.incongruous_count << '\n';
    return 0;
}

inline int cmd_replicate(const RunConfig& cfg, std::ostream& log = std::cout) {
    auto sc = detail::scenario_for(cfg);
    ScenarioGrid grid = sc.grid.value_or(ScenarioGrid{"tau1", {sc.spec.tau1}, 1, false});
    if (cfg.K != 0 && cfg.K != sc.spec.dimension()) {
        throw UsageError("--k does not match the scenario dimension");
    }
    detail::prepare_out_dir(cfg);

    ReplicateOptions opts;
    opts.model = detail::model_spec_for(cfg, sc.spec.dimension(), detail::default_variant(sc.spec.kind));
    if (opts.model.variant != Variant::correlated && opts.model.rho) {
        throw UsageError("--rho requires the correlated variant");
    }
    opts.fit = detail::fit_options_for(cfg);
    opts.q = cfg.q;
    opts.replicates = grid.replicates;
    opts.symmetrize = cfg.symmetrize;

    auto metrics = io::open_out(detail::out_path(cfg, "metrics.tsv"));
    auto summary = io::open_out(detail::out_path(cfg, "summary.tsv"));
    metrics << "grid_param\tgrid_value\treplicate\tseed\tfailed\tfdp\tpower\trejections\tincongruous\tconverged\t"
               "iterations\talt_mass\trho\n";
    summary << "grid_param\tgrid_value\tcompleted\tfailed\tmean_fdp\tmean_power\tmean_rejections\tmean_incongruous\n";

    std::size_t total_rows = 0;
    double worst_fdp = 0;
    for (double value : grid.values) {
        ScenarioSpec spec = sc.spec;
        if (grid.parameter == "tau1") {
            spec.tau1 = value;
        } else {
            spec.effect_window_low = value;
        }
        if (grid.tau2_from_tau1) {
            spec.tau2 = 3 * spec.tau1 * spec.tau1;
            if (spec.kind == ScenarioKind::pleiotropy3d) {
                spec.tau3 = spec.tau2 / 2;
            }
        }
        const auto table = run_replicates(spec, opts);
        for (const auto& r : table.rows) {
            metrics << grid.parameter << '\t' << io::format_double(value) << '\t' << r.replicate << '\t' << r.seed
                    << '\t' << (r.failed ? 1 : 0) << '\t' << io::format_double(r.metrics.fdp) << '\t'
                    << io::format_double(r.metrics.power) << '\t' << r.metrics.rejections << '\t' << r.incongruous
                    << '\t' << (r.converged ? 1 : 0) << '\t' << r.iterations << '\t' << io::format_double(r.alt_mass)
                    << '\t' << io::format_double(r.rho) << '\n';
            ++total_rows;
        }
        const auto& s = table.summary;
        summary << grid.parameter << '\t' << io::format_double(value) << '\t' << s.completed << '\t' << s.failed
                << '\t' << io::format_double(s.mean_fdp) << '\t' << io::format_double(s.mean_power) << '\t'
                << io::format_double(s.mean_rejections) << '\t' << io::format_double(s.mean_incongruous) << '\n';
        worst_fdp = std::max(worst_fdp, s.mean_fdp);
    }
    detail::write_manifest(cfg, detail::scenario_json(sc));
    log << "replicate: grid_points=" << grid.values.size() << " rows=" << total_rows
        << " max_mean_fdp=" << worst_fdp << '\n';
    return 0;
}

/// Runs the configured subcommand. Returns 0 on success, 2 on a usage
/// error and 1 on any other failure; messages go to `err`.
inline int run(const RunConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        validate(cfg);
        if (cfg.subcommand == "fit") return cmd_fit(cfg, log);
        if (cfg.subcommand == "test") return cmd_test(cfg, log);
        if (cfg.subcommand == "simulate") return cmd_simulate(cfg, log);
        if (cfg.subcommand == "audit") return cmd_audit(cfg, log);
        return cmd_replicate(cfg, log);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

/// Re-runs the command recorded in a manifest, writing into `out_dir`.
inline int rerun_from_manifest(const std::string& manifest_path, const std::string& out_dir,
                               std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        auto cfg = run_config_from_manifest(read_json(manifest_path));
        cfg.out_dir = out_dir;
        return run(cfg, log, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace csmgmm
