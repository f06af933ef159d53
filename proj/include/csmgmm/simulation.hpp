#pragma once

// Synthetic z-statistic generation for mediation, three-trait pleiotropy,
// correlated pleiotropy and replication designs, and a replicate runner
// that pushes each dataset through fit -> lfdr -> reject -> evaluate.
//
// Regression mode simulates individual-level data and computes score
// statistics. Asymptotic mode draws z directly around the large-sample mean
// implied by the same effect sizes:
//   linear slope a:         sqrt(n) a sd(G) / sqrt(1 + a^2 Var(G))
//   logistic slope b on G:  sqrt(n) Cov(G, expit(-1 + b G)) / sqrt(pbar (1 - pbar) Var(G))
//   mediator slope b on M:  sqrt(n) E[e expit(-1 + b M)] / sqrt(E[p0(G) (1 - p0(G))])
// with M = a G + e and p0(G) = E[expit(-1 + b M) | G].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "inference.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "regression.hpp"

namespace csmgmm {

enum class ScenarioKind { mediation2d, pleiotropy3d, correlated2d, replication2d };
enum class GenerationMode { regression, asymptotic };

inline std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::mediation2d: return "mediation2d";
        case ScenarioKind::pleiotropy3d: return "pleiotropy3d";
        case ScenarioKind::correlated2d: return "correlated2d";
        case ScenarioKind::replication2d: return "replication2d";
    }
    return "mediation2d";
}

inline ScenarioKind parse_scenario_kind(std::string_view s) {
    if (s == "mediation2d") return ScenarioKind::mediation2d;
    if (s == "pleiotropy3d") return ScenarioKind::pleiotropy3d;
    if (s == "correlated2d") return ScenarioKind::correlated2d;
    if (s == "replication2d") return ScenarioKind::replication2d;
    throw Error("unknown scenario kind '" + std::string(s) + "'");
}

inline std::string_view to_string(GenerationMode m) {
    return m == GenerationMode::regression ? "regression" : "asymptotic";
}

inline GenerationMode parse_generation_mode(std::string_view s) {
    if (s == "regression") return GenerationMode::regression;
    if (s == "asymptotic") return GenerationMode::asymptotic;
    throw Error("unknown generation mode '" + std::string(s) + "'");
}

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::mediation2d;
    std::size_t J = 10000;
    int n = 1000;
    double maf = 0.3;
    /// Proportion of each single-association case.
    double tau1 = 0;
    /// Proportion of each double-association case.
    double tau2 = 0;
    /// Proportion of the triple-association case (pleiotropy3d only).
    double tau3 = 0;
    double effect_window_low = 0.1;
    double window_length = 0.1;
    /// Added to effect magnitudes in the second dimension.
    double beta_offset = 0.04;
    double rho_outcomes = 0.1;
    /// Probability that a non-zero effect is positive.
    double sign_mix = 0.5;
    GenerationMode mode = GenerationMode::regression;
    /// Per-row multinomial case draws instead of rounded quotas.
    bool multinomial_assignment = false;
    std::uint64_t seed = 1;

    int dimension() const { return kind == ScenarioKind::pleiotropy3d ? 3 : 2; }
};

/// Case probabilities keyed by binary representation; the global null
/// takes the remainder.
inline std::vector<std::pair<unsigned, double>> case_proportions(const ScenarioSpec& spec) {
    if (spec.kind == ScenarioKind::pleiotropy3d) {
        return {{4, spec.tau1}, {2, spec.tau1}, {1, spec.tau1}, {6, spec.tau2},
                {5, spec.tau2}, {3, spec.tau2}, {7, spec.tau3}};
    }
    return {{2, spec.tau1}, {1, spec.tau1}, {3, spec.tau2}};
}

inline void check_scenario(const ScenarioSpec& spec) {
    auto in_unit = [](double v) { return v >= 0 && v <= 1; };
    if (spec.J < 1) {
        throw Error("scenario needs J >= 1");
    }
    if (!in_unit(spec.tau1) || !in_unit(spec.tau2) || !in_unit(spec.tau3)) {
        throw Error("scenario proportions must lie in [0, 1]");
    }
    if (spec.kind != ScenarioKind::pleiotropy3d && spec.tau3 != 0) {
        throw Error("tau3 is only used by pleiotropy3d");
    }
    double total = 0;
    for (const auto& [b, p] : case_proportions(spec)) {
        total += p;
    }
    if (total > 1 + 1e-12) {
        throw Error("scenario proportions sum to more than 1");
    }
    if (!(spec.maf > 0 && spec.maf <= 0.5)) {
        throw Error("minor allele frequency must lie in (0, 0.5]");
    }
    if (spec.mode == GenerationMode::regression && spec.n < 50) {
        throw Error("regression mode needs n >= 50");
    }
    if (spec.n < 1) {
        throw Error("sample size must be positive");
    }
    if (!(spec.effect_window_low >= 0) || !(spec.window_length >= 0) || !std::isfinite(spec.beta_offset)) {
        throw Error("effect window must be non-negative");
    }
    if (!in_unit(spec.sign_mix)) {
        throw Error("sign_mix must lie in [0, 1]");
    }
    if (spec.kind == ScenarioKind::correlated2d && !(std::abs(spec.rho_outcomes) < 0.95)) {
        throw Error("rho_outcomes must satisfy |rho| < 0.95");
    }
}

/// Mixes (seed, stream, index) into an independent 64-bit seed so every row
/// owns its random stream regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(seed) ^ stream) ^ (index * 0xd1342543de82ef95ULL + 1));
}

template <class Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Rng>
std::vector<int> draw_genotypes(std::size_t n, double maf, Rng& rng) {
    std::vector<int> g(n);
    for (auto& v : g) {
        v = (uniform01(rng) < maf) + (uniform01(rng) < maf);
    }
    return g;
}

/// Independent Binomial(2, maf) genotypes.
inline std::vector<int> draw_genotypes(std::size_t n, double maf, std::uint64_t seed) {
    if (!(maf > 0 && maf <= 0.5)) {
        throw Error("minor allele frequency must lie in (0, 0.5]");
    }
    std::mt19937_64 rng(seed);
    return draw_genotypes(n, maf, rng);
}

inline double linear_z_mean(double alpha, int n, double maf) {
    const double var_g = 2 * maf * (1 - maf);
    return std::sqrt(static_cast<double>(n)) * alpha * std::sqrt(var_g) / std::sqrt(1 + alpha * alpha * var_g);
}

inline double logistic_z_mean(double beta, int n, double maf, double intercept = -1) {
    const std::array<double, 3> pg = {(1 - maf) * (1 - maf), 2 * maf * (1 - maf), maf * maf};
    double eg = 0, pbar = 0, egm = 0;
    for (int g = 0; g < 3; ++g) {
        const double mu = expit(intercept + beta * g);
        eg += pg[g] * g;
        pbar += pg[g] * mu;
        egm += pg[g] * g * mu;
    }
    const double var_g = 2 * maf * (1 - maf);
    return std::sqrt(static_cast<double>(n)) * (egm - eg * pbar) / std::sqrt(pbar * (1 - pbar) * var_g);
}

inline double mediator_z_mean(double beta, double alpha, int n, double maf, double intercept = -1) {
    using boost::math::quadrature::gauss_kronrod;
    const std::array<double, 3> pg = {(1 - maf) * (1 - maf), 2 * maf * (1 - maf), maf * maf};
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    double numer = 0, info = 0;
    for (int g = 0; g < 3; ++g) {
        auto phi = [](double e) { return inv_sqrt_2pi * std::exp(-0.5 * e * e); };
        const double p0 = gauss_kronrod<double, 61>::integrate(
            [&](double e) { return phi(e) * expit(intercept + beta * (alpha * g + e)); }, -12.0, 12.0);
        const double ey = gauss_kronrod<double, 61>::integrate(
            [&](double e) { return e * phi(e) * expit(intercept + beta * (alpha * g + e)); }, -12.0, 12.0);
        numer += pg[g] * ey;
        info += pg[g] * p0 * (1 - p0);
    }
    return std::sqrt(static_cast<double>(n)) * numer / std::sqrt(info);
}

/// Correlation of two threshold indicators 1{e_k <= t} with P = p each when
/// (e_1, e_2) is standard bivariate normal with correlation r.
inline double threshold_indicator_correlation(double r, double p) {
    using boost::math::quadrature::gauss_kronrod;
    const double t = boost::math::quantile(boost::math::normal(), p);
    constexpr double two_pi = 6.283185307179586477;
    const double joint_minus_indep = gauss_kronrod<double, 61>::integrate(
        [&](double s) { return std::exp(-t * t / (1 + s)) / (two_pi * std::sqrt(1 - s * s)); }, 0.0, r);
    return joint_minus_indep / (p * (1 - p));
}

/// Latent correlation that makes null outcomes (success probability
/// expit(-1)) correlated at `target`.
inline double latent_correlation_for(double target, double p = expit(-1.0)) {
    if (target == 0) {
        return 0;
    }
    double lo = -0.999, hi = 0.999;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (threshold_indicator_correlation(mid, p) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct TruthLabels {
    std::size_t K = 0;
    /// Row-major J x K ground-truth configurations.
    std::vector<int> configs;
    std::vector<bool> alt;

    std::span<const int> config(std::size_t j) const { return {configs.data() + j * K, K}; }
};

struct SimOutput {
    ZMatrix z;
    TruthLabels truth;
    ScenarioSpec spec;
    /// Rows regenerated after a degenerate regression fit.
    std::size_t regenerated_rows = 0;
};

/// Whether configuration h lies in the scenario's composite alternative.
inline bool is_alternative(ScenarioKind kind, std::span<const int> h) {
    bool all_nonzero = true, all_pos = true, all_neg = true;
    for (int s : h) {
        all_nonzero = all_nonzero && s != 0;
        all_pos = all_pos && s == 1;
        all_neg = all_neg && s == -1;
    }
    return kind == ScenarioKind::replication2d ? (all_pos || all_neg) : all_nonzero;
}

namespace detail {

inline constexpr int max_regeneration_attempts = 100;

struct RowDraw {
    std::array<double, 3> z{};
    std::size_t regenerated = 0;
};

template <class Rng>
double standard_normal(Rng& rng) {
    std::normal_distribution<double> nd;
    return nd(rng);
}

/// One row's statistics in regression mode; `effects` are signed slopes.
inline std::array<double, 3> regression_row(const ScenarioSpec& spec, std::span<const double> effects,
                                            double latent_r, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(spec.n);
    std::array<double, 3> z{};
    std::normal_distribution<double> nd;
    std::vector<double> gd(n), y(n), m(n);

    auto genotype = [&]() {
        auto g = draw_genotypes(n, spec.maf, rng);
        for (std::size_t i = 0; i < n; ++i) {
            gd[i] = g[i];
        }
    };

    switch (spec.kind) {
        case ScenarioKind::mediation2d: {
            // M = alpha G + e; logit P(Y) = -1 + beta M.
            genotype();
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = effects[0] * gd[i] + nd(rng);
                y[i] = uniform01(rng) < expit(-1.0 + effects[1] * m[i]) ? 1.0 : 0.0;
            }
            z[0] = linear_score_stat(m, gd);
            Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), 1);
            for (std::size_t i = 0; i < n; ++i) {
                cov(static_cast<Eigen::Index>(i), 0) = gd[i];
            }
            z[1] = logistic_score_stat(y, m, cov);
            break;
        }
        case ScenarioKind::pleiotropy3d:
        case ScenarioKind::replication2d: {
            // Independent cohorts: logit P(Y_k) = -1 + theta_k G_k.
            for (int k = 0; k < spec.dimension(); ++k) {
                genotype();
                for (std::size_t i = 0; i < n; ++i) {
                    y[i] = uniform01(rng) < expit(-1.0 + effects[k] * gd[i]) ? 1.0 : 0.0;
                }
                z[k] = logistic_score_stat(y, gd);
            }
            break;
        }
        case ScenarioKind::correlated2d: {
            // Shared genotype; Y_k = 1{e_k <= Phi^-1(expit(-1 + theta_k G))}
            // with latent (e_1, e_2) correlated at latent_r.
            genotype();
            const boost::math::normal normal;
            std::array<std::array<double, 3>, 2> thresh{};
            for (int k = 0; k < 2; ++k) {
                for (int g = 0; g < 3; ++g) {
                    thresh[k][g] = boost::math::quantile(normal, expit(-1.0 + effects[k] * g));
                }
            }
            std::vector<double> y2(n);
            const double tail = std::sqrt(1 - latent_r * latent_r);
            for (std::size_t i = 0; i < n; ++i) {
                const double e1 = nd(rng);
                const double e2 = latent_r * e1 + tail * nd(rng);
                const auto g = static_cast<int>(gd[i]);
                y[i] = e1 <= thresh[0][g] ? 1.0 : 0.0;
                y2[i] = e2 <= thresh[1][g] ? 1.0 : 0.0;
            }
            z[0] = logistic_score_stat(y, gd);
            z[1] = logistic_score_stat(y2, gd);
            break;
        }
    }
    return z;
}

inline std::array<double, 3> asymptotic_means(const ScenarioSpec& spec, std::span<const double> effects) {
    std::array<double, 3> mean{};
    switch (spec.kind) {
        case ScenarioKind::mediation2d:
            mean[0] = linear_z_mean(effects[0], spec.n, spec.maf);
            mean[1] = mediator_z_mean(effects[1], effects[0], spec.n, spec.maf);
            break;
        default:
            for (int k = 0; k < spec.dimension(); ++k) {
                mean[k] = logistic_z_mean(effects[k], spec.n, spec.maf);
            }
            break;
    }
    return mean;
}

}  // namespace detail

/// Generates one dataset. Case labels come from rounded quotas (or
/// multinomial draws) shuffled with the master seed; each row then uses its
/// own derived random stream for effects and data.
inline SimOutput simulate(const ScenarioSpec& spec) {
    check_scenario(spec);
    const std::size_t J = spec.J;
    const auto K = static_cast<std::size_t>(spec.dimension());
    const auto cases = case_proportions(spec);

    std::vector<unsigned> reps(J, 0);
    {
        std::mt19937_64 rng(derive_seed(spec.seed, 0, 0));
        if (spec.multinomial_assignment) {
            for (auto& b : reps) {
                double u = uniform01(rng), acc = 0;
                for (const auto& [rep, p] : cases) {
                    acc += p;
                    if (u < acc) {
                        b = rep;
                        break;
                    }
                }
            }
        } else {
            std::size_t pos = 0;
            for (const auto& [rep, p] : cases) {
                const auto count = static_cast<std::size_t>(std::llround(p * static_cast<double>(J)));
                if (pos + count > J) {
                    throw Error("scenario case quotas exceed J");
                }
                std::fill(reps.begin() + static_cast<std::ptrdiff_t>(pos),
                          reps.begin() + static_cast<std::ptrdiff_t>(pos + count), rep);
                pos += count;
            }
            std::shuffle(reps.begin(), reps.end(), rng);
        }
    }

    SimOutput out;
    out.spec = spec;
    out.truth.K = K;
    out.truth.configs.assign(J * K, 0);
    out.truth.alt.assign(J, false);
    std::vector<double> values(J * K);
    std::vector<std::size_t> regenerated(J, 0);
    const double latent_r = spec.kind == ScenarioKind::correlated2d ? latent_correlation_for(spec.rho_outcomes) : 0.0;

    parallel_for(J, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            std::mt19937_64 effect_rng(derive_seed(spec.seed, 1, j));
            std::array<double, 3> effects{};
            int* h = out.truth.configs.data() + j * K;
            const bool same_sign = spec.kind == ScenarioKind::replication2d && reps[j] == 3;
            const int shared_sign = uniform01(effect_rng) < spec.sign_mix ? 1 : -1;
            for (std::size_t k = 0; k < K; ++k) {
                const double u_sign = uniform01(effect_rng);
                const double u_mag = uniform01(effect_rng);
                if (!has_dimension(reps[j], k, K)) {
                    continue;
                }
                h[k] = same_sign ? shared_sign : (u_sign < spec.sign_mix ? 1 : -1);
                const double mag = spec.effect_window_low + spec.window_length * u_mag + (k == 1 ? spec.beta_offset : 0.0);
                effects[k] = h[k] * mag;
            }
            out.truth.alt[j] = is_alternative(spec.kind, std::span<const int>(h, K));

            std::array<double, 3> z{};
            if (spec.mode == GenerationMode::asymptotic) {
                std::mt19937_64 rng(derive_seed(spec.seed, 2, j));
                const auto mean = detail::asymptotic_means(spec, effects);
                std::array<double, 3> noise{};
                for (std::size_t k = 0; k < K; ++k) {
                    noise[k] = detail::standard_normal(rng);
                }
                if (spec.kind == ScenarioKind::correlated2d) {
                    const double r = spec.rho_outcomes;
                    noise[1] = r * noise[0] + std::sqrt(1 - r * r) * noise[1];
                }
                for (std::size_t k = 0; k < K; ++k) {
                    z[k] = mean[k] + noise[k];
                }
            } else {
                bool done = false;
                for (int attempt = 0; attempt < detail::max_regeneration_attempts && !done; ++attempt) {
                    std::mt19937_64 rng(derive_seed(spec.seed, 2 + static_cast<std::uint64_t>(attempt), j));
                    try {
                        z = detail::regression_row(spec, effects, latent_r, rng);
                        done = true;
                    } catch (const DegenerateDataError&) {
                        ++regenerated[j];
                    }
                }
                if (!done) {
                    throw Error("row " + std::to_string(j + 1) + " could not be generated without a degenerate fit");
                }
            }
            for (std::size_t k = 0; k < K; ++k) {
                values[j * K + k] = z[k];
            }
        }
    });

    for (auto r : regenerated) {
        out.regenerated_rows += r > 0;
    }
    std::vector<std::string> ids;
    ids.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
        ids.push_back("set" + std::to_string(j + 1));
    }
    out.z = ZMatrix(K, std::move(ids), std::move(values));
    return out;
}

struct ReplicateRecord {
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    EvalMetrics metrics;
    std::size_t incongruous = 0;
    bool converged = false;
    int iterations = 0;
    /// Estimated total probability of the composite alternative.
    double alt_mass = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    std::size_t regenerated_rows = 0;
};

struct ReplicateSummary {
    std::size_t completed = 0;
    std::size_t failed = 0;
    double mean_fdp = 0;
    double mean_power = 0;
    double mean_rejections = 0;
    double mean_incongruous = 0;
};

struct ReplicateTable {
    std::vector<ReplicateRecord> rows;
    ReplicateSummary summary;
};

inline ReplicateSummary summarize(const std::vector<ReplicateRecord>& rows) {
    ReplicateSummary s;
    for (const auto& r : rows) {
        if (r.failed) {
            ++s.failed;
            continue;
        }
        ++s.completed;
        s.mean_fdp += r.metrics.fdp;
        s.mean_power += r.metrics.power;
        s.mean_rejections += static_cast<double>(r.metrics.rejections);
        s.mean_incongruous += static_cast<double>(r.incongruous);
    }
    if (s.completed > 0) {
        const auto c = static_cast<double>(s.completed);
        s.mean_fdp /= c;
        s.mean_power /= c;
        s.mean_rejections /= c;
        s.mean_incongruous /= c;
    }
    return s;
}

/// Total fitted probability of the composite alternative configurations.
inline double alternative_mass(const ModelSpec& spec, const ModelParams& params) {
    const auto configs = enumerate_configurations(spec.K, spec.variant);
    double s = 0;
    for (auto l : configs.alt_indices) {
        for (double p : params.pi[configs.configs[l].binary_rep]) {
            s += p;
        }
    }
    return s;
}

struct ReplicateOptions {
    /// For the correlated variant an empty rho means "estimate from the data".
    ModelSpec model;
    FitOptions fit;
    double q = 0.1;
    std::size_t replicates = 1;
    bool symmetrize = false;
};

/// Runs simulate -> (symmetrize) -> em_fit -> lfdr -> reject -> fdp/power ->
/// audit for each replicate, seeding replicate r with scenario.seed + r.
/// A replicate whose fit throws is recorded as failed.
inline ReplicateTable run_replicates(const ScenarioSpec& scenario, const ReplicateOptions& options) {
    if (options.replicates < 1) {
        throw Error("replicate count must be at least 1");
    }
    if (options.model.K != scenario.dimension()) {
        throw Error("model dimension does not match the scenario");
    }
    ReplicateTable table;
    for (std::size_t r = 0; r < options.replicates; ++r) {
        ReplicateRecord rec;
        rec.replicate = r;
        rec.seed = scenario.seed + r;
        try {
            ScenarioSpec spec = scenario;
            spec.seed = rec.seed;
            auto sim = simulate(spec);
            rec.regenerated_rows = sim.regenerated_rows;
            ZMatrix z = sim.z;
            if (options.symmetrize) {
                z = symmetrize(z, derive_seed(rec.seed, 7, 0)).z;
            }
            ModelSpec model = options.model;
            if (model.variant == Variant::correlated && !model.rho) {
                model.rho = estimate_correlation(z);
            }
            if (model.rho) {
                rec.rho = *model.rho;
            }
            FitOptions fit_opts = options.fit;
            fit_opts.seed = rec.seed;
            const auto fit = em_fit(z, model, fit_opts);
            rec.converged = fit.converged;
            rec.iterations = fit.iterations;
            rec.alt_mass = alternative_mass(model, fit.params);
            const auto configs = enumerate_configurations(model.K, model.variant);
            const auto lfdrs = lfdr_batch(z, model, fit.params, configs);
            const auto rej = reject(lfdrs, options.q);
            rec.metrics = fdp_power(rej.rejected, sim.truth.alt);
            AuditOptions audit;
            audit.seed = rec.seed;
            rec.incongruous = incongruence_audit(z, lfdrs, audit).incongruous_count;
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        table.rows.push_back(std::move(rec));
    }
    table.summary = summarize(table.rows);
    return table;
}

}  // namespace csmgmm
