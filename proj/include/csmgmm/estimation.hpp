#pragma once

// Composite-likelihood EM for the mixing proportions and mean magnitudes,
// plus the two preprocessing helpers used before fitting: the sample
// correlation for the correlated variant and random sign switching of rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "error.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace csmgmm {

/// Means are clipped below at this value to stay strictly positive.
inline constexpr double mean_floor = 1e-6;

/// Responsibility mass below this marks a component as empty.
inline constexpr double empty_mass = 1e-12;

struct FitOptions {
    int max_iterations = 10000;
    double tolerance = 1e-8;
    /// Starting point; the default quantile-based scheme is used when empty.
    std::optional<ModelParams> initial;
    std::uint64_t seed = 0;
    bool enforce_ordering = true;
};

struct ComponentRef {
    unsigned rep = 0;
    std::size_t component = 0;
    bool operator==(const ComponentRef&) const = default;
};

struct FitResult {
    ModelParams params;
    std::vector<double> loglik_trace;
    /// projected[t] is true when the M-step that produced the parameters
    /// evaluated at loglik_trace[t] moved a mean through the ordering
    /// projection. Entry 0 is always false.
    std::vector<bool> projected;
    bool converged = false;
    int iterations = 0;
    bool projection_applied = false;
    /// Components that received (numerically) zero responsibility at some
    /// iteration. Their means are frozen at the previous value.
    std::vector<ComponentRef> empty_components;
};

/// J x C matrix of posterior component probabilities; column c refers to
/// terms[c].
struct Responsibilities {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<MixtureTerm> terms;

    double operator()(std::size_t j, std::size_t c) const { return values[j * cols + c]; }
    double& operator()(std::size_t j, std::size_t c) { return values[j * cols + c]; }
};

struct EStepResult {
    Responsibilities responsibilities;
    double loglik = 0;
};

inline EStepResult e_step(const ZMatrix& Z, const ModelSpec& spec, const ModelParams& params, const ConfigSet& configs) {
    const Mixture mixture(spec, params, configs);
    if (Z.cols() != mixture.dimension()) {
        throw Error("z-matrix has " + std::to_string(Z.cols()) + " columns, model expects " + std::to_string(spec.K));
    }
    const std::size_t J = Z.rows();
    const std::size_t C = mixture.num_terms();

    EStepResult out;
    auto& R = out.responsibilities;
    R.rows = J;
    R.cols = C;
    R.values.resize(J * C);
    R.terms = mixture.terms();

    std::vector<double> row_loglik(J);
    parallel_for(J, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            std::span<double> row(R.values.data() + j * C, C);
            mixture.log_weighted_densities(Z.row(j), row);
            const double total = detail::log_sum_exp(row);
            row_loglik[j] = total;
            if (!std::isfinite(total)) {
                continue;
            }
            for (auto& v : row) {
                v = std::exp(v - total);
            }
        }
    });

    double ll = 0;
    for (std::size_t j = 0; j < J; ++j) {
        if (!std::isfinite(row_loglik[j])) {
            throw Error("non-finite likelihood at row " + std::to_string(j + 1));
        }
        ll += row_loglik[j];
    }
    out.loglik = ll;
    return out;
}

struct MStepResult {
    ModelParams params;
    bool projection_applied = false;
    std::vector<ComponentRef> empty_components;
};

namespace detail {

/// Raises every all-association mean to at least the largest
/// composite-null mean in the same dimension. Returns true if anything moved.
inline bool project_ordering(const ModelSpec& spec, ModelParams& params) {
    const auto K = static_cast<std::size_t>(spec.K);
    const unsigned full = spec.full_rep();
    bool moved = false;
    for (std::size_t k = 0; k < K; ++k) {
        double floor = -std::numeric_limits<double>::infinity();
        for (unsigned b = 1; b < full; ++b) {
            if (!has_dimension(b, k, K)) {
                continue;
            }
            for (const auto& mu : params.mu[b]) {
                floor = std::max(floor, mu[k]);
            }
        }
        for (auto& mu : params.mu[full]) {
            if (mu[k] < floor) {
                mu[k] = floor;
                moved = true;
            }
        }
    }
    return moved;
}

inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        return 0;
    }
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Maximizes the expected complete-data log-likelihood given the
/// responsibilities.
///
/// Mixing proportions are shared by all configurations with the same binary
/// representation, so pi[b][m] = sum_{l: b_l = b} R_{l,m} / (J * n_b).
/// Means are responsibility-weighted averages of the sign-folded statistics
/// h_k z_k (identity covariance) or the solution of the 1- or 2-dimensional
/// weighted least-squares system under the correlated covariance. Means are
/// clipped at `mean_floor`; with `enforce_ordering` the all-association
/// means are then projected above the composite-null means.
///
/// Components with no responsibility keep their mean from `previous`, or
/// sit at `mean_floor` when no previous parameters are given; they are
/// listed in the result.
inline MStepResult m_step(const ZMatrix& Z, const Responsibilities& resp, const ModelSpec& spec,
                          const ConfigSet& configs, bool enforce_ordering, const ModelParams* previous = nullptr) {
    check_spec(spec);
    const auto K = static_cast<std::size_t>(spec.K);
    const std::size_t J = Z.rows();
    const std::size_t C = resp.cols;
    if (resp.rows != J || Z.cols() != K) {
        throw Error("responsibilities do not match the z-matrix");
    }
    if (resp.terms.size() != C) {
        throw Error("responsibility columns do not match their term list");
    }

    // Per-term totals R_c and first moments S_{c,k} = sum_j r_jc z_jk.
    std::vector<double> mass(C, 0.0);
    std::vector<double> moment(C * K, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        const double* r = resp.values.data() + j * C;
        const auto z = Z.row(j);
        for (std::size_t c = 0; c < C; ++c) {
            const double w = r[c];
            mass[c] += w;
            double* s = moment.data() + c * K;
            for (std::size_t k = 0; k < K; ++k) {
                s[k] += w * z[k];
            }
        }
    }

    const std::size_t R = spec.num_reps();
    MStepResult out;
    auto& params = out.params;
    params.mu.resize(R);
    params.pi.resize(R);
    std::vector<std::vector<double>> rep_mass(R);
    for (std::size_t b = 0; b < R; ++b) {
        const auto M = static_cast<std::size_t>(spec.M[b]);
        params.mu[b].assign(M, std::vector<double>(K, 0.0));
        params.pi[b].assign(M, 0.0);
        rep_mass[b].assign(M, 0.0);
    }
    for (std::size_t c = 0; c < C; ++c) {
        rep_mass[resp.terms[c].rep][resp.terms[c].component] += mass[c];
    }
    for (std::size_t b = 0; b < R; ++b) {
        const double denom = static_cast<double>(J) * static_cast<double>(configurations_per_rep(static_cast<unsigned>(b)));
        for (std::size_t m = 0; m < rep_mass[b].size(); ++m) {
            params.pi[b][m] = rep_mass[b][m] / denom;
        }
    }

    const bool correlated = spec.variant == Variant::correlated;
    const double rho = correlated ? *spec.rho : 0.0;

    for (unsigned b = 1; b < R; ++b) {
        for (std::size_t m = 0; m < params.mu[b].size(); ++m) {
            auto& mu = params.mu[b][m];
            if (rep_mass[b][m] < empty_mass) {
                out.empty_components.push_back({b, m});
                for (std::size_t k = 0; k < K; ++k) {
                    if (has_dimension(b, k, K)) {
                        mu[k] = previous ? previous->mu[b][m][k] : mean_floor;
                    }
                }
                continue;
            }

            if (!correlated) {
                for (std::size_t k = 0; k < K; ++k) {
                    if (!has_dimension(b, k, K)) {
                        continue;
                    }
                    double num = 0;
                    for (std::size_t c = 0; c < C; ++c) {
                        const auto& t = resp.terms[c];
                        if (t.rep == b && t.component == m) {
                            num += configs.configs[t.config].signs[k] * moment[c * K + k];
                        }
                    }
                    mu[k] = std::max(num / rep_mass[b][m], mean_floor);
                }
                continue;
            }

            // Correlated, K = 2. The common 1 / (1 - rho^2) factor cancels.
            double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
            for (std::size_t c = 0; c < C; ++c) {
                const auto& t = resp.terms[c];
                if (t.rep != b || t.component != m) {
                    continue;
                }
                const auto& h = configs.configs[t.config].signs;
                const double s1 = moment[c * 2], s2 = moment[c * 2 + 1];
                a11 += mass[c] * h[0] * h[0];
                a22 += mass[c] * h[1] * h[1];
                a12 -= rho * mass[c] * h[0] * h[1];
                r1 += h[0] * (s1 - rho * s2);
                r2 += h[1] * (s2 - rho * s1);
            }
            if (b == 1) {
                mu[1] = std::max(r2 / a22, mean_floor);
            } else if (b == 2) {
                mu[0] = std::max(r1 / a11, mean_floor);
            } else {
                const double det = a11 * a22 - a12 * a12;
                double m1 = (a22 * r1 - a12 * r2) / det;
                double m2 = (a11 * r2 - a12 * r1) / det;
                if (m1 < mean_floor) {
                    m1 = mean_floor;
                    m2 = (r2 - a12 * m1) / a22;
                }
                if (m2 < mean_floor) {
                    m2 = mean_floor;
                    m1 = std::max((r1 - a12 * m2) / a11, mean_floor);
                }
                mu[0] = m1;
                mu[1] = std::max(m2, mean_floor);
            }
        }
    }

    if (enforce_ordering) {
        out.projection_applied = detail::project_ordering(spec, params);
    }
    return out;
}

/// Default starting point: 0.90 of the mass on the global null and the rest
/// split evenly over the other (b, m) cells, then over the configurations of
/// each cell. Means start at evenly spaced upper quantiles of |z_k| (the
/// midpoints of M_b equal slices of [0.85, 0.999]), floored at 1.0, then
/// ordering-projected. The scheme uses no randomness; `seed` is accepted
/// for interface stability.
inline ModelParams initialize_params(const ZMatrix& Z, const ModelSpec& spec, std::uint64_t seed = 0) {
    (void)seed;
    check_spec(spec);
    const auto K = static_cast<std::size_t>(spec.K);
    if (Z.cols() != K) {
        throw Error("z-matrix has " + std::to_string(Z.cols()) + " columns, model expects " + std::to_string(K));
    }
    const std::size_t R = spec.num_reps();

    std::vector<std::vector<double>> abs_sorted(K);
    for (std::size_t k = 0; k < K; ++k) {
        abs_sorted[k].reserve(Z.rows());
        for (std::size_t j = 0; j < Z.rows(); ++j) {
            abs_sorted[k].push_back(std::abs(Z(j, k)));
        }
        std::sort(abs_sorted[k].begin(), abs_sorted[k].end());
    }

    std::size_t cells = 0;
    for (std::size_t b = 1; b < R; ++b) {
        cells += static_cast<std::size_t>(spec.M[b]);
    }

    ModelParams params;
    params.mu.resize(R);
    params.pi.resize(R);
    params.mu[0] = {std::vector<double>(K, 0.0)};
    params.pi[0] = {0.9};
    for (unsigned b = 1; b < R; ++b) {
        const auto M = static_cast<std::size_t>(spec.M[b]);
        const double per_config = 0.1 / static_cast<double>(cells) / static_cast<double>(configurations_per_rep(b));
        params.pi[b].assign(M, per_config);
        params.mu[b].assign(M, std::vector<double>(K, 0.0));
        for (std::size_t m = 0; m < M; ++m) {
            const double p = 0.85 + 0.149 * (static_cast<double>(m) + 0.5) / static_cast<double>(M);
            for (std::size_t k = 0; k < K; ++k) {
                if (has_dimension(b, k, K)) {
                    params.mu[b][m][k] = std::max(1.0, detail::quantile_sorted(abs_sorted[k], p));
                }
            }
        }
    }
    detail::project_ordering(spec, params);
    return params;
}

/// Runs EM from the default or user-supplied start until the relative
/// change in composite log-likelihood, |l_t - l_{t-1}| / (|l_{t-1}| + 1),
/// drops below `options.tolerance` or the iteration budget is spent.
inline FitResult em_fit(const ZMatrix& Z, const ModelSpec& spec, const FitOptions& options = {}) {
    check_spec(spec);
    if (options.max_iterations < 1) {
        throw Error("max_iterations must be at least 1");
    }
    if (!(options.tolerance > 0)) {
        throw Error("tolerance must be positive");
    }
    if (Z.cols() != static_cast<std::size_t>(spec.K)) {
        throw Error("z-matrix has " + std::to_string(Z.cols()) + " columns, model expects " + std::to_string(spec.K));
    }
    const auto configs = enumerate_configurations(spec.K, spec.variant);
    const auto num_terms = mixture_terms(spec, configs).size();
    if (Z.rows() < num_terms) {
        throw Error("need at least as many rows (" + std::to_string(Z.rows()) + ") as mixture components (" +
                    std::to_string(num_terms) + ")");
    }

    FitResult fit;
    fit.params = options.initial ? *options.initial : initialize_params(Z, spec, options.seed);
    if (options.initial && options.enforce_ordering) {
        detail::project_ordering(spec, fit.params);
    }
    require_valid(spec, fit.params);

    bool last_projected = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        auto e = e_step(Z, spec, fit.params, configs);
        fit.loglik_trace.push_back(e.loglik);
        fit.projected.push_back(last_projected);

        const auto n = fit.loglik_trace.size();
        if (n >= 2) {
            const double prev = fit.loglik_trace[n - 2];
            if (std::abs(e.loglik - prev) / (std::abs(prev) + 1) < options.tolerance) {
                fit.converged = true;
                break;
            }
        }
        if (it == options.max_iterations) {
            break;
        }

        auto m = m_step(Z, e.responsibilities, spec, configs, options.enforce_ordering, &fit.params);
        fit.params = std::move(m.params);
        last_projected = m.projection_applied;
        fit.projection_applied = fit.projection_applied || m.projection_applied;
        for (const auto& ref : m.empty_components) {
            if (std::find(fit.empty_components.begin(), fit.empty_components.end(), ref) == fit.empty_components.end()) {
                fit.empty_components.push_back(ref);
            }
        }
    }
    fit.iterations = static_cast<int>(fit.loglik_trace.size());
    return fit;
}

/// Pearson correlation of the two columns of a K = 2 matrix, optionally
/// restricted to rows with both |z_k| <= truncation.
inline double estimate_correlation(const ZMatrix& Z, std::optional<double> truncation = std::nullopt) {
    if (Z.cols() != 2) {
        throw Error("correlation estimation requires K = 2");
    }
    double n = 0, s1 = 0, s2 = 0;
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        const double a = Z(j, 0), b = Z(j, 1);
        if (truncation && (std::abs(a) > *truncation || std::abs(b) > *truncation)) {
            continue;
        }
        n += 1;
        s1 += a;
        s2 += b;
    }
    if (n < 10) {
        throw Error("correlation estimation needs at least 10 rows");
    }
    const double m1 = s1 / n, m2 = s2 / n;
    double v1 = 0, v2 = 0, c12 = 0;
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        const double a = Z(j, 0), b = Z(j, 1);
        if (truncation && (std::abs(a) > *truncation || std::abs(b) > *truncation)) {
            continue;
        }
        v1 += (a - m1) * (a - m1);
        v2 += (b - m2) * (b - m2);
        c12 += (a - m1) * (b - m2);
    }
    if (!(v1 > 0) || !(v2 > 0)) {
        throw Error("cannot estimate correlation: a column has zero variance");
    }
    return c12 / std::sqrt(v1 * v2);
}

struct SymmetrizeResult {
    ZMatrix z;
    std::vector<bool> flipped;
    /// False when every column was already balanced and nothing was done.
    bool applied = false;
};

/// Fraction of positive entries among |z_k| > 1, per column (0.5 for
/// columns with no such entries).
inline std::vector<double> positive_fractions(const ZMatrix& Z) {
    std::vector<double> out(Z.cols(), 0.5);
    for (std::size_t k = 0; k < Z.cols(); ++k) {
        std::size_t big = 0, pos = 0;
        for (std::size_t j = 0; j < Z.rows(); ++j) {
            const double v = Z(j, k);
            if (std::abs(v) > 1) {
                ++big;
                pos += v > 0;
            }
        }
        if (big > 0) {
            out[k] = static_cast<double>(pos) / static_cast<double>(big);
        }
    }
    return out;
}

/// Negates every coordinate of the flagged rows.
inline ZMatrix apply_flips(const ZMatrix& Z, const std::vector<bool>& flipped) {
    if (flipped.size() != Z.rows()) {
        throw Error("flip flags do not match the number of rows");
    }
    auto vals = Z.values();
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        if (flipped[j]) {
            for (std::size_t k = 0; k < Z.cols(); ++k) {
                vals[j * Z.cols() + k] = -vals[j * Z.cols() + k];
            }
        }
    }
    return ZMatrix(Z.cols(), Z.ids(), std::move(vals));
}

/// Random effect-allele switching. When some column's share of positive
/// entries among |z| > 1 is more than 0.05 away from one half, each row is
/// negated as a whole with probability 0.5.
inline SymmetrizeResult symmetrize(const ZMatrix& Z, std::uint64_t seed) {
    SymmetrizeResult out;
    out.flipped.assign(Z.rows(), false);
    bool skewed = false;
    for (double f : positive_fractions(Z)) {
        skewed = skewed || std::abs(f - 0.5) > 0.05;
    }
    if (!skewed) {
        out.z = Z;
        return out;
    }
    std::mt19937_64 rng(seed);
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        out.flipped[j] = (rng() >> 63) != 0;
    }
    out.z = apply_flips(Z, out.flipped);
    out.applied = true;
    return out;
}

}  // namespace csmgmm
