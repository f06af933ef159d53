#pragma once

// Score statistics for a single tested covariate in linear and logistic
// regression. Both are standardized to be asymptotically N(0, 1) under the
// null.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "error.hpp"

namespace csmgmm {

inline double expit(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Score statistic for the slope of g in y = a + b g + e:
/// sum (g - gbar)(y - ybar) / (sigma0 * sqrt(sum (g - gbar)^2)), where sigma0
/// is the residual standard deviation of the intercept-only null model.
inline double linear_score_stat(std::span<const double> y, std::span<const double> g) {
    const std::size_t n = y.size();
    if (g.size() != n) {
        throw Error("outcome and covariate lengths differ");
    }
    if (n < 3) {
        throw Error("linear score test needs at least 3 observations");
    }
    double ybar = 0, gbar = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ybar += y[i];
        gbar += g[i];
    }
    ybar /= static_cast<double>(n);
    gbar /= static_cast<double>(n);
    double sgg = 0, sgy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dg = g[i] - gbar, dy = y[i] - ybar;
        sgg += dg * dg;
        sgy += dg * dy;
        syy += dy * dy;
    }
    if (!(sgg > 0)) {
        throw DegenerateDataError("linear score test: covariate is constant");
    }
    if (!(syy > 0)) {
        throw DegenerateDataError("linear score test: outcome is constant");
    }
    const double sigma0 = std::sqrt(syy / static_cast<double>(n - 1));
    return sgy / (sigma0 * std::sqrt(sgg));
}

struct LogisticFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd fitted;
    int iterations = 0;
};

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. Stops when the largest coefficient change is below `tol`.
inline LogisticFit fit_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double tol = 1e-10,
                                int max_iter = 100) {
    const auto n = X.rows();
    const auto p = X.cols();
    const double ybar = y.mean();
    if (!(ybar > 0 && ybar < 1)) {
        throw DegenerateDataError("logistic regression: outcome has a single class");
    }

    LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(p);
    fit.coef(0) = std::log(ybar / (1 - ybar));
    Eigen::VectorXd eta(n), w(n), work(n);
    fit.fitted.resize(n);
    for (int it = 1; it <= max_iter; ++it) {
        eta = X * fit.coef;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu = expit(eta(i));
            fit.fitted(i) = mu;
            w(i) = mu * (1 - mu);
            if (!(w(i) > 1e-300)) {
                throw DegenerateDataError("logistic regression: fitted probabilities reached 0 or 1 (separation)");
            }
            work(i) = eta(i) + (y(i) - mu) / w(i);
        }
        const Eigen::MatrixXd XtWX = X.transpose() * w.asDiagonal() * X;
        const Eigen::VectorXd XtWz = X.transpose() * (w.asDiagonal() * work);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(XtWX);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw DegenerateDataError("logistic regression: singular information matrix");
        }
        const Eigen::VectorXd next = ldlt.solve(XtWz);
        if (!next.allFinite()) {
            throw DegenerateDataError("logistic regression: non-finite coefficients");
        }
        const double change = (next - fit.coef).cwiseAbs().maxCoeff();
        fit.coef = next;
        fit.iterations = it;
        if (change < tol) {
            eta = X * fit.coef;
            for (Eigen::Index i = 0; i < n; ++i) {
                fit.fitted(i) = expit(eta(i));
            }
            return fit;
        }
    }
    throw DegenerateDataError("logistic regression: IRLS did not converge in " + std::to_string(max_iter) +
                              " iterations");
}

/// Efficient score statistic for x in logit P(y = 1) = a + c' covariates + b x.
/// The null model (intercept plus covariates) is fitted by IRLS; x is then
/// residualized against the null design under the working weights and the
/// score is standardized by the resulting efficient information.
inline double logistic_score_stat(std::span<const double> y, std::span<const double> x,
                                  const std::optional<Eigen::MatrixXd>& covariates = std::nullopt) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (x.size() != y.size()) {
        throw Error("outcome and covariate lengths differ");
    }
    if (covariates && covariates->rows() != n) {
        throw Error("covariate matrix has the wrong number of rows");
    }
    Eigen::VectorXd yv(n), xv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0 && y[i] != 1) {
            throw Error("logistic outcome must be 0/1");
        }
        yv(i) = y[i];
        xv(i) = x[i];
    }
    const Eigen::Index extra = covariates ? covariates->cols() : 0;
    Eigen::MatrixXd X(n, 1 + extra);
    X.col(0).setOnes();
    if (covariates) {
        X.rightCols(extra) = *covariates;
    }

    Eigen::VectorXd fitted;
    if (extra == 0) {
        const double ybar = yv.mean();
        if (!(ybar > 0 && ybar < 1)) {
            throw DegenerateDataError("logistic score test: outcome has a single class");
        }
        fitted = Eigen::VectorXd::Constant(n, ybar);
    } else {
        fitted = fit_logistic(yv, X).fitted;
    }

    const Eigen::VectorXd w = fitted.array() * (1 - fitted.array());
    const Eigen::MatrixXd XtWX = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd XtWx = X.transpose() * (w.asDiagonal() * xv);
    const Eigen::VectorXd proj = XtWX.ldlt().solve(XtWx);
    const Eigen::VectorXd resid = xv - X * proj;
    const double info = (w.array() * resid.array().square()).sum();
    const double scale = (w.array() * xv.array().square()).sum();
    if (!(info > 1e-12 * std::max(scale, 1.0))) {
        throw DegenerateDataError("logistic score test: tested covariate carries no information");
    }
    const double score = resid.dot(yv - fitted);
    return score / std::sqrt(info);
}

}  // namespace csmgmm
