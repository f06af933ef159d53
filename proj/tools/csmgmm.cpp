#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "csmgmm/cli.hpp"

namespace {

void add_common(CLI::App* sub, csmgmm::RunConfig& cfg) {
    sub->add_option("--out-dir", cfg.out_dir, "Directory for all output files")->required();
    sub->add_option("--seed", cfg.seed, "Random seed");
}

void add_model(CLI::App* sub, csmgmm::RunConfig& cfg, std::string& variant, std::string& m_counts) {
    sub->add_option("--k", cfg.K, "Dimension of each set (checked against the input)");
    sub->add_option("--variant", variant, "Model variant")->check(CLI::IsMember({"base", "correlated", "replication"}));
    sub->add_option("--m-counts", m_counts, "Comma-separated component counts indexed by binary representation");
    sub->add_option("--rho", cfg.rho, "Known correlation for the correlated variant");
    sub->add_flag("--estimate-rho", cfg.estimate_rho, "Estimate rho as the sample correlation");
    sub->add_flag("--symmetrize", cfg.symmetrize, "Randomly switch effect alleles when signs are skewed");
    sub->add_option("--max-iter", cfg.max_iter, "Maximum EM iterations");
    sub->add_option("--tol", cfg.tol, "Relative log-likelihood tolerance");
}

std::vector<int> parse_counts(const std::string& text) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw csmgmm::UsageError("--m-counts: '" + item + "' is not an integer");
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Composite null testing with conditionally symmetric Gaussian mixtures"};
    app.set_version_flag("--version", csmgmm::version);
    app.require_subcommand(1);

    csmgmm::RunConfig cfg;
    std::string variant, m_counts, manifest;

    auto* fit = app.add_subcommand("fit", "Fit the mixture to a z-matrix and write the parameters");
    fit->add_option("--input", cfg.input, "z-matrix TSV")->required();
    add_common(fit, cfg);
    add_model(fit, cfg, variant, m_counts);

    auto* test = app.add_subcommand("test", "Compute lfdr-values and reject at FDR level q");
    test->add_option("--input", cfg.input, "z-matrix TSV")->required();
    test->add_option("--params", cfg.params, "Fitted parameter document (fit inline when omitted)");
    test->add_option("--q", cfg.q, "Nominal false discovery rate");
    add_common(test, cfg);
    add_model(test, cfg, variant, m_counts);

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic z-matrix and truth labels");
    simulate->add_option("--scenario-config", cfg.scenario_config, "key=value scenario file")->required();
    add_common(simulate, cfg);

    auto* audit = app.add_subcommand("audit", "Count incongruous lfdr orderings in a results table");
    audit->add_option("--input", cfg.input, "Results TSV from 'test'")->required();
    add_common(audit, cfg);

    auto* replicate = app.add_subcommand("replicate", "Run simulation replicates over a scenario grid");
    replicate->add_option("--scenario-config", cfg.scenario_config, "key=value scenario file")->required();
    replicate->add_option("--q", cfg.q, "Nominal false discovery rate");
    add_common(replicate, cfg);
    add_model(replicate, cfg, variant, m_counts);

    std::string rerun_out;
    auto* rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
    rerun->add_option("--manifest", manifest, "manifest.json from an earlier run")->required();
    rerun->add_option("--out-dir", rerun_out, "Directory for all output files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (rerun->parsed()) {
        return csmgmm::rerun_from_manifest(manifest, rerun_out);
    }
    cfg.subcommand = app.get_subcommands().front()->get_name();
    try {
        if (!variant.empty()) {
            cfg.variant = csmgmm::parse_variant(variant);
        }
        if (!m_counts.empty()) {
            cfg.m_counts = parse_counts(m_counts);
        }
    } catch (const csmgmm::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }
    return csmgmm::run(cfg);
}
