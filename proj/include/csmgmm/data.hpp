#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace csmgmm {

/// J x K matrix of test statistics, stored row-major, with one identifier
/// per row.
class ZMatrix {
public:
    ZMatrix() = default;

    ZMatrix(std::size_t K, std::vector<std::string> ids, std::vector<double> values)
        : K_(K), ids_(std::move(ids)), values_(std::move(values)) {
        if (K_ == 0) {
            throw Error("z-matrix must have at least one column");
        }
        if (values_.size() != ids_.size() * K_) {
            throw Error("z-matrix values do not match " + std::to_string(ids_.size()) + " rows x " +
                        std::to_string(K_) + " columns");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw Error("non-finite z-statistic at row " + std::to_string(i / K_ + 1) + ", column " +
                            std::to_string(i % K_ + 1));
            }
        }
    }

    /// Builds a matrix with identifiers "1", "2", ...
    static ZMatrix from_values(std::size_t K, std::vector<double> values) {
        const std::size_t J = K == 0 ? 0 : values.size() / K;
        std::vector<std::string> ids;
        ids.reserve(J);
        for (std::size_t j = 0; j < J; ++j) {
            ids.push_back(std::to_string(j + 1));
        }
        return ZMatrix(K, std::move(ids), std::move(values));
    }

    std::size_t rows() const { return ids_.size(); }
    std::size_t cols() const { return K_; }

    std::span<const double> row(std::size_t j) const { return {values_.data() + j * K_, K_}; }
    double operator()(std::size_t j, std::size_t k) const { return values_[j * K_ + k]; }

    const std::string& id(std::size_t j) const { return ids_[j]; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<double>& values() const { return values_; }

    /// Copy with the listed rows, in the given order.
    ZMatrix subset(std::span<const std::size_t> rows) const {
        std::vector<std::string> ids;
        std::vector<double> vals;
        ids.reserve(rows.size());
        vals.reserve(rows.size() * K_);
        for (auto j : rows) {
            ids.push_back(ids_[j]);
            auto r = row(j);
            vals.insert(vals.end(), r.begin(), r.end());
        }
        return ZMatrix(K_, std::move(ids), std::move(vals));
    }

    ZMatrix negated() const {
        auto vals = values_;
        for (auto& v : vals) {
            v = -v;
        }
        return ZMatrix(K_, ids_, std::move(vals));
    }

private:
    std::size_t K_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> values_;
};

}  // namespace csmgmm
