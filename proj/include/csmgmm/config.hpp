#pragma once

// Association configurations h in {-1, 0, 1}^K and their binary
// representations b = sum_k 2^(K-k) |h_k|. Configurations sharing b share
// mixture means and weights.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace csmgmm {

inline constexpr int max_dimension = 12;

enum class Variant { base, correlated, replication };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::base: return "base";
        case Variant::correlated: return "correlated";
        case Variant::replication: return "replication";
    }
    return "base";
}

inline Variant parse_variant(std::string_view name) {
    if (name == "base") return Variant::base;
    if (name == "correlated") return Variant::correlated;
    if (name == "replication") return Variant::replication;
    throw Error("unknown model variant '" + std::string(name) + "'");
}

struct Config {
    std::vector<int> signs;
    unsigned binary_rep = 0;
    std::size_t index = 0;
};

/// Computes sum_k 2^(K-k) |h_k| for a sign vector with entries in {-1, 0, 1}.
inline unsigned binary_representation(std::span<const int> signs) {
    unsigned b = 0;
    for (int s : signs) {
        if (s < -1 || s > 1) {
            throw Error("configuration entries must lie in {-1, 0, 1}, got " + std::to_string(s));
        }
        b = (b << 1) | static_cast<unsigned>(s != 0);
    }
    return b;
}

/// True when representation `b` has a non-zero entry in dimension `k`
/// (0-based, dimension 0 is the most significant bit).
inline bool has_dimension(unsigned b, std::size_t k, std::size_t K) {
    return ((b >> (K - 1 - k)) & 1u) != 0;
}

/// Number of configurations sharing representation b, i.e. 2^popcount(b).
inline std::size_t configurations_per_rep(unsigned b) {
    return std::size_t{1} << static_cast<unsigned>(__builtin_popcount(b));
}

struct ConfigSet {
    std::size_t K = 0;
    Variant variant = Variant::base;
    std::vector<Config> configs;
    std::vector<std::size_t> null_indices;
    std::vector<std::size_t> alt_indices;
    /// is_null[l] mirrors membership in null_indices.
    std::vector<bool> is_null;
    /// by_rep[b] lists the configuration indices with representation b.
    std::vector<std::vector<std::size_t>> by_rep;

    std::size_t num_reps() const { return std::size_t{1} << K; }
    unsigned full_rep() const { return static_cast<unsigned>(num_reps() - 1); }
};

/// Enumerates all 3^K configurations by base-3 counting over the digits
/// {0, -1, 1}, dimension 1 most significant, so the all-zero configuration
/// is index 0. The null/alternative split follows the variant: any zero
/// entry is null for base and correlated; only the all-positive and
/// all-negative configurations are alternatives for replication.
inline ConfigSet enumerate_configurations(int K, Variant variant) {
    if (K < 2 || K > max_dimension) {
        throw Error("dimension K must lie in [2, " + std::to_string(max_dimension) + "], got " + std::to_string(K));
    }
    static constexpr int digit_to_sign[3] = {0, -1, 1};

    ConfigSet out;
    out.K = static_cast<std::size_t>(K);
    out.variant = variant;
    std::size_t total = 1;
    for (int k = 0; k < K; ++k) {
        total *= 3;
    }
    out.configs.reserve(total);
    out.is_null.resize(total);
    out.by_rep.resize(out.num_reps());

    for (std::size_t l = 0; l < total; ++l) {
        Config c;
        c.index = l;
        c.signs.resize(out.K);
        std::size_t rem = l;
        for (std::size_t k = out.K; k-- > 0;) {
            c.signs[k] = digit_to_sign[rem % 3];
            rem /= 3;
        }
        c.binary_rep = binary_representation(c.signs);

        bool null = false;
        if (variant == Variant::replication) {
            bool all_pos = true, all_neg = true;
            for (int s : c.signs) {
                all_pos = all_pos && s == 1;
                all_neg = all_neg && s == -1;
            }
            null = !(all_pos || all_neg);
        } else {
            null = c.binary_rep != out.full_rep();
        }
        out.is_null[l] = null;
        (null ? out.null_indices : out.alt_indices).push_back(l);
        out.by_rep[c.binary_rep].push_back(l);
        out.configs.push_back(std::move(c));
    }
    return out;
}

}  // namespace csmgmm
