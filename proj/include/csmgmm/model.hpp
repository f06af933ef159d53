#pragma once

// Conditionally symmetric multidimensional Gaussian mixture: parameter
// containers, validation, component densities and local false discovery
// rates for the base, correlated and replication variants.
//
// Every density is evaluated in log space and combined with log-sum-exp, so
// lfdr stays well defined far into the tails (the raw products of normal
// densities underflow once |z| approaches 38).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace csmgmm {

/// Largest |rho| accepted for the correlated variant.
inline constexpr double max_abs_rho = 0.999;

struct ModelSpec {
    int K = 2;
    Variant variant = Variant::base;
    /// M[b] is the number of mean-magnitude vectors for representation b.
    std::vector<int> M;
    std::optional<double> rho;

    std::size_t num_reps() const { return std::size_t{1} << K; }
    unsigned full_rep() const { return static_cast<unsigned>(num_reps() - 1); }
};

/// Throws if a ModelSpec is internally inconsistent.
inline void check_spec(const ModelSpec& spec) {
    if (spec.K < 2 || spec.K > max_dimension) {
        throw Error("dimension K must lie in [2, " + std::to_string(max_dimension) + "], got " + std::to_string(spec.K));
    }
    if (spec.M.size() != spec.num_reps()) {
        throw Error("component counts must have 2^K = " + std::to_string(spec.num_reps()) + " entries, got " +
                    std::to_string(spec.M.size()));
    }
    if (spec.M[0] != 1) {
        throw Error("the global-null representation must have exactly one component");
    }
    for (std::size_t b = 0; b < spec.M.size(); ++b) {
        if (spec.M[b] < 1) {
            throw Error("component count for b=" + std::to_string(b) + " must be at least 1");
        }
    }
    if (spec.variant == Variant::correlated) {
        if (spec.K != 2) {
            throw Error("the correlated variant requires K = 2");
        }
        for (int m : spec.M) {
            if (m != 1) {
                throw Error("the correlated variant requires one component per representation");
            }
        }
        if (!spec.rho) {
            throw Error("the correlated variant requires a correlation rho");
        }
        if (!std::isfinite(*spec.rho) || std::abs(*spec.rho) >= max_abs_rho) {
            throw Error("correlation rho must satisfy |rho| < 0.999, got " + std::to_string(*spec.rho));
        }
    } else if (spec.rho) {
        throw Error("a correlation rho is only meaningful for the correlated variant");
    }
    if (spec.variant == Variant::replication && spec.M[spec.full_rep()] != 1) {
        throw Error("the replication variant requires one component for the all-association representation");
    }
}

/// Spec with M_b = 1 for every b unless overridden.
inline ModelSpec make_spec(int K, Variant variant, std::vector<int> M = {}, std::optional<double> rho = std::nullopt) {
    ModelSpec spec;
    spec.K = K;
    spec.variant = variant;
    spec.rho = rho;
    if (M.empty()) {
        M.assign(std::size_t{1} << std::clamp(K, 0, max_dimension), 1);
    }
    spec.M = std::move(M);
    check_spec(spec);
    return spec;
}

/// Mean magnitudes mu[b][m][k] and per-configuration mixing proportions
/// pi[b][m]. Every configuration with representation b carries weight
/// pi[b][m] for component m, so the total mass of b is n_b * sum_m pi[b][m].
struct ModelParams {
    std::vector<std::vector<std::vector<double>>> mu;
    std::vector<std::vector<double>> pi;

    /// Total probability of representation b across its configurations.
    double rep_mass(unsigned b) const {
        double s = 0;
        for (double p : pi[b]) {
            s += p;
        }
        return s * static_cast<double>(configurations_per_rep(b));
    }
};

/// Lists every violated parameter constraint; empty when `params` is valid
/// for `spec`.
inline std::vector<std::string> validate_params(const ModelSpec& spec, const ModelParams& params) {
    std::vector<std::string> issues;
    try {
        check_spec(spec);
    } catch (const Error& e) {
        issues.push_back(std::string("spec: ") + e.what());
        return issues;
    }

    const std::size_t K = static_cast<std::size_t>(spec.K);
    const std::size_t R = spec.num_reps();
    if (params.mu.size() != R || params.pi.size() != R) {
        issues.push_back("shape: expected " + std::to_string(R) + " representations");
        return issues;
    }
    for (std::size_t b = 0; b < R; ++b) {
        const auto M = static_cast<std::size_t>(spec.M[b]);
        if (params.mu[b].size() != M || params.pi[b].size() != M) {
            issues.push_back("shape: representation b=" + std::to_string(b) + " must have " + std::to_string(M) +
                             " components");
            return issues;
        }
        for (std::size_t m = 0; m < M; ++m) {
            if (params.mu[b][m].size() != K) {
                issues.push_back("shape: mu[" + std::to_string(b) + "][" + std::to_string(m) + "] must have length " +
                                 std::to_string(K));
                return issues;
            }
        }
    }

    double total = 0;
    for (std::size_t b = 0; b < R; ++b) {
        const auto nb = static_cast<double>(configurations_per_rep(static_cast<unsigned>(b)));
        for (std::size_t m = 0; m < params.pi[b].size(); ++m) {
            const double p = params.pi[b][m];
            if (!(p >= 0) || !std::isfinite(p)) {
                issues.push_back("nonnegativity: pi[" + std::to_string(b) + "][" + std::to_string(m) + "] = " +
                                 std::to_string(p));
            }
            total += nb * p;
        }
    }
    if (!(std::abs(total - 1.0) <= 1e-12)) {
        issues.push_back("simplex: mixing proportions sum to " + std::to_string(total) + " instead of 1");
    }

    for (std::size_t b = 0; b < R; ++b) {
        for (std::size_t m = 0; m < params.mu[b].size(); ++m) {
            for (std::size_t k = 0; k < K; ++k) {
                const double v = params.mu[b][m][k];
                const std::string where = "mu[" + std::to_string(b) + "][" + std::to_string(m) + "][" +
                                          std::to_string(k) + "]";
                if (has_dimension(static_cast<unsigned>(b), k, K)) {
                    if (!(v > 0) || !std::isfinite(v)) {
                        issues.push_back("positivity: " + where + " = " + std::to_string(v));
                    }
                } else if (v != 0) {
                    issues.push_back("zero-pattern: " + where + " must be 0, got " + std::to_string(v));
                }
            }
        }
    }

    const unsigned full = spec.full_rep();
    for (std::size_t k = 0; k < K; ++k) {
        for (unsigned b = 1; b < full; ++b) {
            if (!has_dimension(b, k, K)) {
                continue;
            }
            for (std::size_t mf = 0; mf < params.mu[full].size(); ++mf) {
                for (std::size_t m = 0; m < params.mu[b].size(); ++m) {
                    if (params.mu[full][mf][k] < params.mu[b][m][k]) {
                        issues.push_back("ordering: mu[" + std::to_string(full) + "][" + std::to_string(mf) + "][" +
                                         std::to_string(k) + "] = " + std::to_string(params.mu[full][mf][k]) +
                                         " is below mu[" + std::to_string(b) + "][" + std::to_string(m) + "][" +
                                         std::to_string(k) + "] = " + std::to_string(params.mu[b][m][k]));
                    }
                }
            }
        }
    }
    return issues;
}

inline void require_valid(const ModelSpec& spec, const ModelParams& params) {
    auto issues = validate_params(spec, params);
    if (!issues.empty()) {
        std::string msg = "invalid model parameters:";
        for (const auto& i : issues) {
            msg += "\n  " + i;
        }
        throw Error(msg);
    }
}

namespace detail {

inline constexpr double log_two_pi = 1.8378770664093454835606594728112;

inline double log_sum_exp(std::span<const double> values) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : values) {
        mx = std::max(mx, v);
    }
    if (!std::isfinite(mx)) {
        return mx;
    }
    double s = 0;
    for (double v : values) {
        s += std::exp(v - mx);
    }
    return mx + std::log(s);
}

inline double safe_log(double x) {
    return x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

inline void require_finite(std::span<const double> z) {
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (!std::isfinite(z[k])) {
            throw Error("non-finite z-statistic in dimension " + std::to_string(k + 1));
        }
    }
}

}  // namespace detail

/// Log density of the Gaussian with mean diag(signs) * mu and covariance
/// I_K, or the unit-variance 2x2 covariance with off-diagonal rho.
inline double component_log_density(std::span<const double> z, std::span<const int> signs, std::span<const double> mu,
                                    std::optional<double> rho = std::nullopt) {
    const std::size_t K = z.size();
    if (signs.size() != K || mu.size() != K) {
        throw Error("dimension mismatch in component density");
    }
    if (!rho) {
        double out = -0.5 * detail::log_two_pi * static_cast<double>(K);
        for (std::size_t k = 0; k < K; ++k) {
            const double d = z[k] - signs[k] * mu[k];
            out -= 0.5 * d * d;
        }
        return out;
    }
    if (K != 2) {
        throw Error("correlated component density requires K = 2");
    }
    const double r = *rho;
    if (!(std::abs(r) < 1)) {
        throw Error("correlation must satisfy |rho| < 1");
    }
    const double d1 = z[0] - signs[0] * mu[0];
    const double d2 = z[1] - signs[1] * mu[1];
    const double one_minus = 1 - r * r;
    const double quad = (d1 * d1 - 2 * r * d1 * d2 + d2 * d2) / one_minus;
    return -detail::log_two_pi - 0.5 * std::log(one_minus) - 0.5 * quad;
}

/// Flattened (configuration, component) index. Column c of a
/// responsibility matrix refers to terms()[c].
struct MixtureTerm {
    std::size_t config = 0;
    unsigned rep = 0;
    std::size_t component = 0;
    bool null = false;
};

inline std::vector<MixtureTerm> mixture_terms(const ModelSpec& spec, const ConfigSet& configs) {
    std::vector<MixtureTerm> out;
    for (const auto& c : configs.configs) {
        for (int m = 0; m < spec.M[c.binary_rep]; ++m) {
            out.push_back({c.index, c.binary_rep, static_cast<std::size_t>(m), static_cast<bool>(configs.is_null[c.index])});
        }
    }
    return out;
}

/// Immutable, precomputed view of a fitted mixture used for repeated density
/// and lfdr evaluation.
class Mixture {
public:
    Mixture(const ModelSpec& spec, const ModelParams& params, const ConfigSet& configs)
        : K_(static_cast<std::size_t>(spec.K)), terms_(mixture_terms(spec, configs)) {
        require_valid(spec, params);
        if (configs.K != K_) {
            throw Error("configuration set dimension does not match the model");
        }
        if (configs.variant != spec.variant) {
            throw Error("configuration set variant does not match the model");
        }
        if (spec.variant == Variant::correlated) {
            rho_ = *spec.rho;
        }
        log_pi_.reserve(terms_.size());
        means_.reserve(terms_.size() * K_);
        for (const auto& t : terms_) {
            log_pi_.push_back(detail::safe_log(params.pi[t.rep][t.component]));
            const auto& signs = configs.configs[t.config].signs;
            for (std::size_t k = 0; k < K_; ++k) {
                means_.push_back(signs[k] * params.mu[t.rep][t.component][k]);
            }
        }
    }

    std::size_t dimension() const { return K_; }
    std::size_t num_terms() const { return terms_.size(); }
    const std::vector<MixtureTerm>& terms() const { return terms_; }

    /// out[c] = log pi_c + log f(z | c) for every term c.
    void log_weighted_densities(std::span<const double> z, std::span<double> out) const {
        if (z.size() != K_) {
            throw Error("z has " + std::to_string(z.size()) + " entries, model expects " + std::to_string(K_));
        }
        detail::require_finite(z);
        const double* mean = means_.data();
        if (!rho_) {
            const double base = -0.5 * detail::log_two_pi * static_cast<double>(K_);
            for (std::size_t c = 0; c < terms_.size(); ++c, mean += K_) {
                double q = 0;
                for (std::size_t k = 0; k < K_; ++k) {
                    const double d = z[k] - mean[k];
                    q += d * d;
                }
                out[c] = log_pi_[c] + base - 0.5 * q;
            }
        } else {
            const double r = *rho_;
            const double one_minus = 1 - r * r;
            const double base = -detail::log_two_pi - 0.5 * std::log(one_minus);
            for (std::size_t c = 0; c < terms_.size(); ++c, mean += 2) {
                const double d1 = z[0] - mean[0];
                const double d2 = z[1] - mean[1];
                out[c] = log_pi_[c] + base - 0.5 * (d1 * d1 - 2 * r * d1 * d2 + d2 * d2) / one_minus;
            }
        }
    }

    /// Posterior probability of the null space given z. `scratch` is resized
    /// as needed and may be reused across calls.
    double lfdr(std::span<const double> z, std::vector<double>& scratch) const {
        scratch.resize(terms_.size());
        log_weighted_densities(z, scratch);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : scratch) {
            mx = std::max(mx, v);
        }
        if (!std::isfinite(mx)) {
            return 1.0;
        }
        double null_sum = 0, all_sum = 0;
        for (std::size_t c = 0; c < terms_.size(); ++c) {
            const double w = std::exp(scratch[c] - mx);
            all_sum += w;
            if (terms_[c].null) {
                null_sum += w;
            }
        }
        if (!(all_sum > 0)) {
            return 1.0;
        }
        return std::clamp(null_sum / all_sum, 0.0, 1.0);
    }

    double lfdr(std::span<const double> z) const {
        std::vector<double> scratch;
        return lfdr(z, scratch);
    }

    /// Posterior probability of each configuration l given z.
    std::vector<double> configuration_posterior(std::span<const double> z, std::size_t num_configs) const {
        std::vector<double> logs(terms_.size());
        log_weighted_densities(z, logs);
        const double total = detail::log_sum_exp(logs);
        std::vector<double> post(num_configs, 0.0);
        if (!std::isfinite(total)) {
            return post;
        }
        for (std::size_t c = 0; c < terms_.size(); ++c) {
            post[terms_[c].config] += std::exp(logs[c] - total);
        }
        return post;
    }

private:
    std::size_t K_;
    std::vector<MixtureTerm> terms_;
    std::vector<double> log_pi_;
    std::vector<double> means_;
    std::optional<double> rho_;
};

inline double lfdr(std::span<const double> z, const ModelSpec& spec, const ModelParams& params, const ConfigSet& configs) {
    return Mixture(spec, params, configs).lfdr(z);
}

/// lfdr for every row of Z, in row order. Rows are independent, so the
/// output does not depend on how the work is partitioned.
inline std::vector<double> lfdr_batch(const ZMatrix& Z, const Mixture& mixture) {
    if (Z.cols() != mixture.dimension()) {
        throw Error("z-matrix has " + std::to_string(Z.cols()) + " columns, model expects " +
                    std::to_string(mixture.dimension()));
    }
    std::vector<double> out(Z.rows());
    parallel_for(Z.rows(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch;
        for (std::size_t j = begin; j < end; ++j) {
            out[j] = mixture.lfdr(Z.row(j), scratch);
        }
    });
    return out;
}

inline std::vector<double> lfdr_batch(const ZMatrix& Z, const ModelSpec& spec, const ModelParams& params,
                                      const ConfigSet& configs) {
    return lfdr_batch(Z, Mixture(spec, params, configs));
}

}  // namespace csmgmm
