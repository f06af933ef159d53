#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "data.hpp"
#include "error.hpp"

namespace csmgmm {

struct RejectionResult {
    double q = 0;
    /// Largest r whose r smallest lfdr-values average at most q; 0 if none.
    std::size_t threshold_rank = 0;
    /// lfdr at rank threshold_rank (NaN when nothing is rejected).
    double threshold_value = std::nan("");
    std::vector<bool> rejected;

    std::size_t num_rejected() const {
        return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), true));
    }
};

/// Rejects every row whose lfdr is at most the lfdr at the largest rank r
/// for which the running mean of the sorted lfdr-values is <= q. All rows
/// tied with the threshold value are rejected.
inline RejectionResult reject(std::span<const double> lfdrs, double q) {
    if (!(q > 0 && q < 1)) {
        throw Error("FDR level q must lie in (0, 1)");
    }
    if (lfdrs.empty()) {
        throw Error("cannot reject from an empty lfdr vector");
    }
    std::vector<double> sorted(lfdrs.begin(), lfdrs.end());
    std::sort(sorted.begin(), sorted.end());

    RejectionResult out;
    out.q = q;
    double running = 0;
    for (std::size_t r = 1; r <= sorted.size(); ++r) {
        running += sorted[r - 1];
        if (running / static_cast<double>(r) <= q) {
            out.threshold_rank = r;
        }
    }
    out.rejected.assign(lfdrs.size(), false);
    if (out.threshold_rank > 0) {
        out.threshold_value = sorted[out.threshold_rank - 1];
        for (std::size_t j = 0; j < lfdrs.size(); ++j) {
            out.rejected[j] = lfdrs[j] <= out.threshold_value;
        }
    }
    return out;
}

struct WitnessPair {
    /// Row j dominates row j_prime yet has the larger lfdr.
    std::size_t j = 0;
    std::size_t j_prime = 0;
    double lfdr_j = 0;
    double lfdr_j_prime = 0;
};

struct AuditOptions {
    /// Above this many rows a seeded uniform subsample of this size is audited.
    std::size_t max_exact_rows = 20000;
    std::uint64_t seed = 0;
    std::size_t max_witnesses = 100;
    double slack = 1e-12;
};

struct AuditReport {
    std::size_t incongruous_count = 0;
    std::vector<WitnessPair> witness_pairs;
    bool sampled = false;
    std::size_t rows_examined = 0;
};

/// True when z_a has the same sign as z_b in every coordinate, at least the
/// same magnitude everywhere, and a strictly larger magnitude somewhere.
inline bool dominates(std::span<const double> a, std::span<const double> b) {
    bool strict = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const int sa = (a[k] > 0) - (a[k] < 0);
        const int sb = (b[k] > 0) - (b[k] < 0);
        if (sa != sb) {
            return false;
        }
        const double ma = std::abs(a[k]), mb = std::abs(b[k]);
        if (ma < mb) {
            return false;
        }
        strict = strict || ma > mb;
    }
    return strict;
}

/// Counts ordered pairs (j, j') where z_j dominates z_j' but
/// lfdr_j > lfdr_j' + slack.
inline AuditReport incongruence_audit(const ZMatrix& Z, std::span<const double> lfdrs, const AuditOptions& options = {}) {
    if (lfdrs.size() != Z.rows()) {
        throw Error("lfdr vector length does not match the number of rows");
    }
    AuditReport report;
    std::vector<std::size_t> rows(Z.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (rows.size() > options.max_exact_rows) {
        std::mt19937_64 rng(options.seed);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(options.max_exact_rows);
        std::sort(rows.begin(), rows.end());
        report.sampled = true;
    }
    report.rows_examined = rows.size();

    // Only rows in the same sign orthant can dominate each other.
    const std::size_t K = Z.cols();
    std::map<std::vector<int>, std::vector<std::size_t>> orthants;
    for (auto j : rows) {
        std::vector<int> key(K);
        for (std::size_t k = 0; k < K; ++k) {
            key[k] = (Z(j, k) > 0) - (Z(j, k) < 0);
        }
        orthants[key].push_back(j);
    }

    for (const auto& [key, members] : orthants) {
        for (auto a : members) {
            const auto za = Z.row(a);
            for (auto b : members) {
                if (a == b || !(lfdrs[a] > lfdrs[b] + options.slack)) {
                    continue;
                }
                if (dominates(za, Z.row(b))) {
                    ++report.incongruous_count;
                    if (report.witness_pairs.size() < options.max_witnesses) {
                        report.witness_pairs.push_back({a, b, lfdrs[a], lfdrs[b]});
                    }
                }
            }
        }
    }
    return report;
}

struct EvalMetrics {
    double fdp = 0;
    double power = 0;
    std::size_t rejections = 0;
};

/// False discovery proportion and power with the 0/0 = 0 convention.
inline EvalMetrics fdp_power(const std::vector<bool>& rejected, const std::vector<bool>& truth) {
    if (rejected.size() != truth.size()) {
        throw Error("rejection flags and truth labels differ in length");
    }
    std::size_t rej = 0, false_rej = 0, true_rej = 0, alts = 0;
    for (std::size_t j = 0; j < rejected.size(); ++j) {
        rej += rejected[j];
        alts += truth[j];
        false_rej += rejected[j] && !truth[j];
        true_rej += rejected[j] && truth[j];
    }
    EvalMetrics out;
    out.rejections = rej;
    out.fdp = static_cast<double>(false_rej) / static_cast<double>(std::max<std::size_t>(rej, 1));
    out.power = static_cast<double>(true_rej) / static_cast<double>(std::max<std::size_t>(alts, 1));
    return out;
}

}  // namespace csmgmm
