#pragma once

// Test-only helpers: random valid parameter sets and independent oracles.
// The oracles deliberately avoid the library's Mixture/log-space code path.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "csmgmm/model.hpp"

namespace csmgmm_test {

/// All sign vectors in {-1, 0, 1}^K by recursion (independent of the
/// library's base-3 enumeration).
inline void all_signs(int K, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == K) {
        out.push_back(cur);
        return;
    }
    for (int s : {-1, 0, 1}) {
        cur.push_back(s);
        all_signs(K, cur, out);
        cur.pop_back();
    }
}

inline std::vector<std::vector<int>> all_signs(int K) {
    std::vector<int> cur;
    std::vector<std::vector<int>> out;
    all_signs(K, cur, out);
    return out;
}

inline unsigned rep_of(const std::vector<int>& h) {
    unsigned b = 0;
    const int K = static_cast<int>(h.size());
    for (int k = 0; k < K; ++k) {
        if (h[k] != 0) {
            b += 1u << (K - 1 - k);
        }
    }
    return b;
}

inline bool oracle_is_null(const std::vector<int>& h, csmgmm::Variant v) {
    int nonzero = 0, pos = 0, neg = 0;
    for (int s : h) {
        nonzero += s != 0;
        pos += s == 1;
        neg += s == -1;
    }
    const int K = static_cast<int>(h.size());
    if (v == csmgmm::Variant::replication) {
        return !(pos == K || neg == K);
    }
    return nonzero < K;
}

/// Dense multivariate normal density via explicit inverse and determinant.
inline long double oracle_mvn_pdf(const std::vector<double>& z, const std::vector<double>& mean,
                                  const Eigen::MatrixXd& sigma) {
    const auto K = static_cast<Eigen::Index>(z.size());
    Eigen::VectorXd d(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        d(k) = z[k] - mean[k];
    }
    const Eigen::MatrixXd inv = sigma.inverse();
    const double quad = d.transpose() * inv * d;
    const long double norm = std::pow(2 * M_PI, K / 2.0L) * std::sqrt(static_cast<long double>(sigma.determinant()));
    return std::exp(-0.5L * quad) / norm;
}

/// Explicit sum over all configurations and components with raw density
/// products (no log-sum-exp).
inline double oracle_lfdr(const std::vector<double>& z, const csmgmm::ModelSpec& spec,
                          const csmgmm::ModelParams& params) {
    const int K = spec.K;
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(K, K);
    if (spec.rho) {
        sigma(0, 1) = sigma(1, 0) = *spec.rho;
    }
    long double num = 0, den = 0;
    for (const auto& h : all_signs(K)) {
        const unsigned b = rep_of(h);
        for (std::size_t m = 0; m < params.pi[b].size(); ++m) {
            std::vector<double> mean(K);
            for (int k = 0; k < K; ++k) {
                mean[k] = h[k] * params.mu[b][m][k];
            }
            long double f = 0;
            if (spec.rho) {
                f = oracle_mvn_pdf(z, mean, sigma);
            } else {
                f = 1;
                for (int k = 0; k < K; ++k) {
                    const long double d = z[k] - mean[k];
                    f *= std::exp(-0.5L * d * d) / std::sqrt(2 * M_PIl);
                }
            }
            const long double w = params.pi[b][m] * f;
            den += w;
            if (oracle_is_null(h, spec.variant)) {
                num += w;
            }
        }
    }
    return static_cast<double>(num / den);
}

/// Random parameters satisfying every constraint: positive means, zero
/// pattern, all-association means above every other mean per dimension,
/// and proportions that sum to one under the sharing rule.
template <class Rng>
csmgmm::ModelParams random_params(const csmgmm::ModelSpec& spec, Rng& rng, double null_mass = 0.8) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int K = spec.K;
    const unsigned R = 1u << K;
    const unsigned full = R - 1;
    csmgmm::ModelParams p;
    p.mu.resize(R);
    p.pi.resize(R);

    std::vector<double> max_null(K, 0.0);
    for (unsigned b = 0; b < R; ++b) {
        p.mu[b].assign(spec.M[b], std::vector<double>(K, 0.0));
        if (b == full || b == 0) {
            continue;
        }
        for (auto& mu : p.mu[b]) {
            for (int k = 0; k < K; ++k) {
                if (csmgmm::has_dimension(b, k, K)) {
                    mu[k] = 0.5 + 3.0 * unif(rng);
                    max_null[k] = std::max(max_null[k], mu[k]);
                }
            }
        }
    }
    for (auto& mu : p.mu[full]) {
        for (int k = 0; k < K; ++k) {
            mu[k] = std::max(max_null[k], 0.5) + 2.0 * unif(rng);
        }
    }

    // Raw weights per (b, m) cell, then scale so the non-null cells carry
    // 1 - null_mass in total.
    double raw_total = 0;
    std::vector<std::vector<double>> raw(R);
    for (unsigned b = 1; b < R; ++b) {
        for (int m = 0; m < spec.M[b]; ++m) {
            raw[b].push_back(0.05 + unif(rng));
            raw_total += raw[b].back();
        }
    }
    p.pi[0] = {null_mass};
    for (unsigned b = 1; b < R; ++b) {
        for (double w : raw[b]) {
            p.pi[b].push_back((1 - null_mass) * w / raw_total / static_cast<double>(csmgmm::configurations_per_rep(b)));
        }
    }
    // Absorb rounding so the simplex check holds to 1e-12.
    double total = 0;
    for (unsigned b = 0; b < R; ++b) {
        for (double v : p.pi[b]) {
            total += v * static_cast<double>(csmgmm::configurations_per_rep(b));
        }
    }
    p.pi[0][0] += 1 - total;
    return p;
}

/// Params from case masses; the global null takes the remainder.
inline csmgmm::ModelParams params_from_case_masses(int K, const std::vector<std::vector<double>>& mu_by_rep,
                                                   const std::vector<double>& nonnull_mass) {
    const unsigned R = 1u << K;
    csmgmm::ModelParams p;
    p.mu.resize(R);
    p.pi.resize(R);
    double rest = 1;
    for (unsigned b = 0; b < R; ++b) {
        p.mu[b] = {mu_by_rep[b]};
        if (b == 0) {
            continue;
        }
        p.pi[b] = {nonnull_mass[b - 1] / static_cast<double>(csmgmm::configurations_per_rep(b))};
        rest -= nonnull_mass[b - 1];
    }
    p.pi[0] = {rest};
    return p;
}

/// Draws J rows from a csmGmm with identity (or 2x2 rho) covariance:
/// pick a configuration and component with probability pi, then add
/// noise around the signed mean.
template <class Rng>
std::vector<double> sample_from_model(const csmgmm::ModelSpec& spec, const csmgmm::ModelParams& params, std::size_t J,
                                      Rng& rng, std::vector<std::vector<int>>* truth = nullptr) {
    const int K = spec.K;
    const auto signs = all_signs(K);
    std::vector<double> weights;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t l = 0; l < signs.size(); ++l) {
        const unsigned b = rep_of(signs[l]);
        for (std::size_t m = 0; m < params.pi[b].size(); ++m) {
            weights.push_back(params.pi[b][m]);
            cells.emplace_back(l, m);
        }
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> nd(0.0, 1.0);
    const double rho = spec.rho.value_or(0.0);
    std::vector<double> out;
    out.reserve(J * K);
    for (std::size_t j = 0; j < J; ++j) {
        const auto [l, m] = cells[pick(rng)];
        const auto& h = signs[l];
        const unsigned b = rep_of(h);
        std::vector<double> e(K);
        for (auto& v : e) v = nd(rng);
        if (K == 2 && rho != 0.0) {
            e[1] = rho * e[0] + std::sqrt(1 - rho * rho) * e[1];
        }
        for (int k = 0; k < K; ++k) {
            out.push_back(h[k] * params.mu[b][m][k] + e[k]);
        }
        if (truth) truth->push_back(h);
    }
    return out;
}

}  // namespace csmgmm_test
