#include <gtest/gtest.h>

#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <random>

#include "csmgmm/estimation.hpp"
#include "support.hpp"

using namespace csmgmm;

namespace {

std::size_t column_of(const Responsibilities& r, const ConfigSet& cs, std::vector<int> signs, std::size_t m = 0) {
    for (std::size_t c = 0; c < r.terms.size(); ++c) {
        if (cs.configs[r.terms[c].config].signs == signs && r.terms[c].component == m) {
            return c;
        }
    }
    throw std::logic_error("no such column");
}

Responsibilities hard_assign(const ConfigSet& cs, const ModelSpec& spec, std::size_t J,
                             const std::vector<std::vector<int>>& assign) {
    Responsibilities r;
    r.terms = mixture_terms(spec, cs);
    r.rows = J;
    r.cols = r.terms.size();
    r.values.assign(J * r.cols, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        r.values[j * r.cols + column_of(r, cs, assign[j])] = 1.0;
    }
    return r;
}

Responsibilities random_resp(const ConfigSet& cs, const ModelSpec& spec, std::size_t J, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Responsibilities r;
    r.terms = mixture_terms(spec, cs);
    r.rows = J;
    r.cols = r.terms.size();
    r.values.resize(J * r.cols);
    for (std::size_t j = 0; j < J; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < r.cols; ++c) s += r.values[j * r.cols + c] = u(rng);
        for (std::size_t c = 0; c < r.cols; ++c) r.values[j * r.cols + c] /= s;
    }
    return r;
}

// Expected complete-data log-likelihood, written from scratch.
double q_function(const ZMatrix& Z, const Responsibilities& r, const ModelSpec& spec, const ConfigSet& cs,
                  const ModelParams& p) {
    double total = 0;
    const int K = spec.K;
    const double rho = spec.rho.value_or(0.0);
    for (std::size_t j = 0; j < Z.rows(); ++j) {
        for (std::size_t c = 0; c < r.cols; ++c) {
            const double w = r.values[j * r.cols + c];
            const auto& t = r.terms[c];
            const auto& h = cs.configs[t.config].signs;
            std::vector<double> d(K);
            for (int k = 0; k < K; ++k) d[k] = Z(j, k) - h[k] * p.mu[t.rep][t.component][k];
            double quad = 0;
            if (K == 2 && rho != 0) {
                quad = (d[0] * d[0] - 2 * rho * d[0] * d[1] + d[1] * d[1]) / (1 - rho * rho);
            } else {
                for (double v : d) quad += v * v;
            }
            total += w * (std::log(p.pi[t.rep][t.component]) - 0.5 * quad);
        }
    }
    return total;
}

}  // namespace

TEST(EStep, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd(0, 3);
    const auto spec = make_spec(2, Variant::base, {1, 2, 1, 2});
    const auto cs = enumerate_configurations(2, Variant::base);
    const auto params = csmgmm_test::random_params(spec, rng);
    std::vector<double> vals(40);
    for (auto& v : vals) v = nd(rng);
    const auto Z = ZMatrix::from_values(2, vals);
    const auto e = e_step(Z, spec, params, cs);
    ASSERT_EQ(e.responsibilities.rows, 20u);

    double ll = 0;
    for (std::size_t j = 0; j < 20; ++j) {
        std::vector<long double> w(e.responsibilities.cols);
        long double den = 0;
        for (std::size_t c = 0; c < w.size(); ++c) {
            const auto& t = e.responsibilities.terms[c];
            const auto& h = cs.configs[t.config].signs;
            long double f = params.pi[t.rep][t.component];
            for (int k = 0; k < 2; ++k) {
                const long double d = Z(j, k) - h[k] * params.mu[t.rep][t.component][k];
                f *= std::exp(-0.5L * d * d) / std::sqrt(2 * M_PIl);
            }
            w[c] = f;
            den += f;
        }
        double row_sum = 0;
        for (std::size_t c = 0; c < w.size(); ++c) {
            const double got = e.responsibilities.values[j * w.size() + c];
            EXPECT_NEAR(got, static_cast<double>(w[c] / den), 1e-12);
            row_sum += got;
        }
        EXPECT_NEAR(row_sum, 1.0, 1e-10);
        ll += static_cast<double>(std::log(den));
    }
    EXPECT_NEAR(e.loglik, ll, 1e-9);
}

TEST(EStep, DegeneratePriorPutsEverythingOnGlobalNull) {
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    auto params = csmgmm_test::params_from_case_masses(2, {{0, 0}, {0, 2}, {2, 0}, {3, 3}}, {0, 0, 0});
    const auto Z = ZMatrix::from_values(2, {1.3, -0.4});
    const auto e = e_step(Z, spec, params, cs);
    const std::size_t c0 = column_of(e.responsibilities, cs, {0, 0});
    for (std::size_t c = 0; c < e.responsibilities.cols; ++c) {
        EXPECT_EQ(e.responsibilities.values[c], c == c0 ? 1.0 : 0.0);
    }
}

TEST(EStep, MirroredConfigurationsTieAtOrigin) {
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    ModelParams p;
    p.mu = {{{0, 0}}, {{0, 2}}, {{2, 0}}, {{2, 2}}};
    p.pi = {{1.0 / 9}, {1.0 / 9}, {1.0 / 9}, {1.0 / 9}};
    const auto Z = ZMatrix::from_values(2, {0.0, 0.0});
    const auto e = e_step(Z, spec, p, cs);
    const auto& r = e.responsibilities;
    for (const auto& c : cs.configs) {
        std::vector<int> mirror = c.signs;
        for (auto& s : mirror) s = -s;
        EXPECT_DOUBLE_EQ(r.values[column_of(r, cs, c.signs)], r.values[column_of(r, cs, mirror)]);
    }
}

TEST(MStep, HandComputedHardAssignments) {
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    const auto Z = ZMatrix::from_values(2, {0.1, -0.2, 0.3, 2.0, -0.5, -3.0, 2.5, 0.2, 3.0, 4.0, -2.0, -5.0});
    const auto r = hard_assign(cs, spec, 6, {{0, 0}, {0, 1}, {0, -1}, {1, 0}, {1, 1}, {-1, -1}});
    const auto out = m_step(Z, r, spec, cs, true);
    const auto& p = out.params;
    EXPECT_DOUBLE_EQ(p.pi[0][0], 1.0 / 6);
    EXPECT_DOUBLE_EQ(p.pi[1][0], 1.0 / 6);
    EXPECT_DOUBLE_EQ(p.pi[2][0], 1.0 / 12);
    EXPECT_DOUBLE_EQ(p.pi[3][0], 1.0 / 12);
    EXPECT_DOUBLE_EQ(p.mu[1][0][1], 2.5);
    EXPECT_DOUBLE_EQ(p.mu[2][0][0], 2.5);
    EXPECT_DOUBLE_EQ(p.mu[3][0][0], 2.5);
    EXPECT_DOUBLE_EQ(p.mu[3][0][1], 4.5);
    EXPECT_EQ(p.mu[1][0][0], 0.0);
    EXPECT_EQ(p.mu[2][0][1], 0.0);
    EXPECT_FALSE(out.projection_applied);
    EXPECT_TRUE(out.empty_components.empty());
    EXPECT_TRUE(validate_params(spec, p).empty());
}

TEST(MStep, AllMassOnGlobalNull) {
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    const auto Z = ZMatrix::from_values(2, {0.1, -0.2, 0.3, 2.0, -0.5, -3.0});
    const auto r = hard_assign(cs, spec, 3, {{0, 0}, {0, 0}, {0, 0}});
    const auto out = m_step(Z, r, spec, cs, true);
    EXPECT_DOUBLE_EQ(out.params.pi[0][0], 1.0);
    for (unsigned b = 1; b < 4; ++b) {
        EXPECT_EQ(out.params.pi[b][0], 0.0);
        for (int k = 0; k < 2; ++k) {
            if (has_dimension(b, k, 2)) {
                EXPECT_EQ(out.params.mu[b][0][k], mean_floor);
            }
        }
    }
    EXPECT_EQ(out.empty_components.size(), 3u);

    const auto prev = csmgmm_test::params_from_case_masses(2, {{0, 0}, {0, 2}, {3, 0}, {4, 4}}, {0.1, 0.1, 0.1});
    const auto kept = m_step(Z, r, spec, cs, true, &prev);
    EXPECT_EQ(kept.params.mu[1][0][1], 2.0);
    EXPECT_EQ(kept.params.mu[2][0][0], 3.0);
    EXPECT_EQ(kept.params.mu[3][0], (std::vector<double>{4, 4}));
}

TEST(MStep, SignFoldingOfDuplicatedData) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0, 3);
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    const std::size_t J = 30;
    std::vector<double> vals(2 * J);
    for (auto& v : vals) v = nd(rng);
    const auto Z = ZMatrix::from_values(2, vals);
    const auto r = random_resp(cs, spec, J, rng);

    std::vector<double> both = vals;
    for (double v : vals) both.push_back(-v);
    const auto Z2 = ZMatrix::from_values(2, both);
    Responsibilities r2 = r;
    r2.rows = 2 * J;
    r2.values.resize(2 * J * r.cols, 0.0);
    // Fill the mirrored block: row J + j, column of -h gets r[j][h].
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t c = 0; c < r.cols; ++c) {
            const auto& t = r.terms[c];
            auto mirror = cs.configs[t.config].signs;
            for (auto& s : mirror) s = -s;
            r2.values[(J + j) * r.cols + column_of(r, cs, mirror, t.component)] = r.values[j * r.cols + c];
        }
    }
    const auto one = m_step(Z, r, spec, cs, false);
    const auto two = m_step(Z2, r2, spec, cs, false);
    for (unsigned b = 0; b < 4; ++b) {
        EXPECT_NEAR(one.params.pi[b][0], two.params.pi[b][0], 1e-14);
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(one.params.mu[b][0][k], two.params.mu[b][0][k], 1e-12);
    }
}

TEST(MStep, MatchesNumericalMaximizer) {
    using boost::math::tools::brent_find_minima;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0, 2.5);
    struct Case {
        Variant v;
        std::vector<int> M;
        std::optional<double> rho;
    };
    for (const auto& cse : {Case{Variant::base, {1, 1, 1, 1}, {}}, Case{Variant::base, {1, 2, 1, 2}, {}},
                            Case{Variant::correlated, {1, 1, 1, 1}, 0.3}}) {
        const auto spec = make_spec(2, cse.v, cse.M, cse.rho);
        const auto cs = enumerate_configurations(2, cse.v);
        const std::size_t J = 40;
        std::vector<double> vals(2 * J);
        for (auto& v : vals) v = nd(rng);
        const auto Z = ZMatrix::from_values(2, vals);
        const auto r = random_resp(cs, spec, J, rng);
        const auto got = m_step(Z, r, spec, cs, false).params;

        // Coordinate ascent on the means, then on softmax logits for pi.
        auto p = csmgmm_test::random_params(spec, rng);
        for (int sweep = 0; sweep < 60; ++sweep) {
            for (unsigned b = 1; b < 4; ++b) {
                for (std::size_t m = 0; m < p.mu[b].size(); ++m) {
                    for (int k = 0; k < 2; ++k) {
                        if (!has_dimension(b, k, 2)) continue;
                        auto f = [&](double x) {
                            auto t = p;
                            t.mu[b][m][k] = x;
                            return -q_function(Z, r, spec, cs, t);
                        };
                        p.mu[b][m][k] = brent_find_minima(f, mean_floor, 20.0, 52).first;
                    }
                }
            }
        }
        std::vector<std::pair<unsigned, std::size_t>> cells;
        for (unsigned b = 0; b < 4; ++b)
            for (std::size_t m = 0; m < p.pi[b].size(); ++m) cells.emplace_back(b, m);
        std::vector<double> theta(cells.size(), 0.0);
        auto to_pi = [&](const std::vector<double>& th) {
            auto t = p;
            double s = 0;
            for (std::size_t i = 0; i < cells.size(); ++i)
                s += configurations_per_rep(cells[i].first) * std::exp(th[i]);
            for (std::size_t i = 0; i < cells.size(); ++i) t.pi[cells[i].first][cells[i].second] = std::exp(th[i]) / s;
            return t;
        };
        for (int sweep = 0; sweep < 200; ++sweep) {
            for (std::size_t i = 1; i < cells.size(); ++i) {
                auto f = [&](double x) {
                    auto th = theta;
                    th[i] = x;
                    return -q_function(Z, r, spec, cs, to_pi(th));
                };
                theta[i] = brent_find_minima(f, -15.0, 15.0, 52).first;
            }
        }
        p = to_pi(theta);
        for (unsigned b = 0; b < 4; ++b) {
            for (std::size_t m = 0; m < p.pi[b].size(); ++m) {
                EXPECT_NEAR(got.pi[b][m], p.pi[b][m], 1e-4) << "pi b=" << b << " m=" << m;
                for (int k = 0; k < 2; ++k) {
                    EXPECT_NEAR(got.mu[b][m][k], p.mu[b][m][k], 1e-4) << "mu b=" << b << " m=" << m << " k=" << k;
                }
            }
        }
    }
}

TEST(MStep, OrderingProjectionIsFlagged) {
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    // The full-association row sits below the b = 1 row in dimension 2.
    const auto Z = ZMatrix::from_values(2, {0.0, 5.0, 3.0, 1.0, 4.0, 0.1});
    const auto r = hard_assign(cs, spec, 3, {{0, 1}, {1, 1}, {1, 0}});
    const auto out = m_step(Z, r, spec, cs, true);
    EXPECT_TRUE(out.projection_applied);
    EXPECT_DOUBLE_EQ(out.params.mu[3][0][1], 5.0);
    EXPECT_DOUBLE_EQ(out.params.mu[3][0][0], 4.0);
    EXPECT_TRUE(validate_params(spec, out.params).empty());
    EXPECT_FALSE(m_step(Z, r, spec, cs, false).projection_applied);
}

TEST(Initialize, Examples) {
    const auto spec = make_spec(2, Variant::base);
    std::vector<double> vals;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0, 2);
    for (int j = 0; j < 500; ++j) {
        vals.push_back(nd(rng));
        vals.push_back(0.0);
    }
    const auto Z = ZMatrix::from_values(2, vals);
    const auto p = initialize_params(Z, spec, 9);
    EXPECT_EQ(p.mu[1][0][1], 1.0);
    EXPECT_EQ(p.mu[3][0][1], 1.0);
    EXPECT_GT(p.mu[2][0][0], 1.0);
    std::size_t cells = 0;
    for (const auto& row : p.pi) cells += row.size();
    EXPECT_EQ(cells, 4u);
    EXPECT_DOUBLE_EQ(p.pi[0][0], 0.9);
    EXPECT_TRUE(validate_params(spec, p).empty());

    const auto again = initialize_params(Z, spec, 9);
    EXPECT_EQ(p.mu, again.mu);
    EXPECT_EQ(p.pi, again.pi);
}

TEST(EmFit, AscentRecoveryAndSharing) {
    std::mt19937_64 rng(31);
    const auto spec = make_spec(2, Variant::base);
    const auto truth = csmgmm_test::params_from_case_masses(2, {{0, 0}, {0, 4}, {4, 0}, {4, 4}}, {0.03, 0.03, 0.01});
    const auto Z = ZMatrix::from_values(2, csmgmm_test::sample_from_model(spec, truth, 100000, rng));
    const auto fit = em_fit(Z, spec);
    EXPECT_TRUE(fit.converged);
    ASSERT_EQ(fit.projected.size(), fit.loglik_trace.size());
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
        if (!fit.projected[t]) {
            EXPECT_GE(fit.loglik_trace[t], fit.loglik_trace[t - 1] - 1e-8) << "iteration " << t;
        }
    }
    EXPECT_TRUE(validate_params(spec, fit.params).empty());
    for (unsigned b = 1; b < 4; ++b) {
        for (int k = 0; k < 2; ++k) {
            EXPECT_NEAR(fit.params.mu[b][0][k], truth.mu[b][0][k], 0.1) << "b=" << b << " k=" << k;
        }
    }
    for (unsigned b = 0; b < 4; ++b) {
        EXPECT_NEAR(fit.params.rep_mass(b), truth.rep_mass(b), 0.02) << "b=" << b;
    }
}

TEST(EmFit, PureNullGivesLittleAlternativeMass) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> vals(20000);
    for (auto& v : vals) v = nd(rng);
    const auto spec = make_spec(2, Variant::base);
    const auto fit = em_fit(ZMatrix::from_values(2, vals), spec);
    EXPECT_LT(1.0 - fit.params.rep_mass(0), 0.05);
}

TEST(EmFit, SignFlipEquivariance) {
    std::mt19937_64 rng(5);
    const auto spec = make_spec(2, Variant::base);
    const auto truth = csmgmm_test::params_from_case_masses(2, {{0, 0}, {0, 3}, {3, 0}, {3.5, 3.5}}, {0.05, 0.05, 0.02});
    const auto Z = ZMatrix::from_values(2, csmgmm_test::sample_from_model(spec, truth, 5000, rng));
    FitOptions opt;
    opt.seed = 3;
    const auto a = em_fit(Z, spec, opt);
    const auto b = em_fit(Z.negated(), spec, opt);
    for (unsigned r = 0; r < 4; ++r) {
        EXPECT_NEAR(a.params.pi[r][0], b.params.pi[r][0], 1e-6);
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(a.params.mu[r][0][k], b.params.mu[r][0][k], 1e-6);
    }
}

TEST(EmFit, CorrelatedAndReplicationVariantsRun) {
    std::mt19937_64 rng(6);
    const auto corr = make_spec(2, Variant::correlated, {}, 0.3);
    const auto truth = csmgmm_test::params_from_case_masses(2, {{0, 0}, {0, 3}, {3, 0}, {4, 4}}, {0.05, 0.05, 0.03});
    const auto Z = ZMatrix::from_values(2, csmgmm_test::sample_from_model(corr, truth, 20000, rng));
    const auto fit = em_fit(Z, corr);
    EXPECT_TRUE(fit.converged);
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
        if (!fit.projected[t]) {
            EXPECT_GE(fit.loglik_trace[t], fit.loglik_trace[t - 1] - 1e-8);
        }
    }
    EXPECT_NEAR(fit.params.mu[3][0][0], 4.0, 0.3);

    const auto rep = make_spec(2, Variant::replication);
    const auto rfit = em_fit(ZMatrix::from_values(2, csmgmm_test::sample_from_model(rep, truth, 20000, rng)), rep);
    EXPECT_TRUE(validate_params(rep, rfit.params).empty());
}

TEST(EmFit, OptionAndShapeErrors) {
    const auto spec = make_spec(2, Variant::base);
    const auto small = ZMatrix::from_values(2, {1, 2, 3, 4});
    EXPECT_THROW(em_fit(small, spec), Error);
    FitOptions bad;
    bad.tolerance = 0;
    std::vector<double> vals(200, 0.5);
    EXPECT_THROW(em_fit(ZMatrix::from_values(2, vals), spec, bad), Error);
    bad = {};
    bad.max_iterations = 0;
    EXPECT_THROW(em_fit(ZMatrix::from_values(2, vals), spec, bad), Error);
    EXPECT_THROW(em_fit(ZMatrix::from_values(4, vals), spec), Error);
}

TEST(EmFit, BudgetExhaustionIsNotAnError) {
    std::mt19937_64 rng(8);
    const auto spec = make_spec(2, Variant::base);
    const auto truth = csmgmm_test::params_from_case_masses(2, {{0, 0}, {0, 3}, {3, 0}, {4, 4}}, {0.05, 0.05, 0.03});
    const auto Z = ZMatrix::from_values(2, csmgmm_test::sample_from_model(spec, truth, 2000, rng));
    FitOptions opt;
    opt.max_iterations = 3;
    const auto fit = em_fit(Z, spec, opt);
    EXPECT_FALSE(fit.converged);
    EXPECT_EQ(fit.iterations, 3);
    EXPECT_EQ(fit.loglik_trace.size(), 3u);
}

TEST(Correlation, Examples) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> same, indep, corr;
    for (int j = 0; j < 100000; ++j) {
        const double a = nd(rng), b = nd(rng);
        if (j < 50) {
            same.push_back(a);
            same.push_back(a);
        }
        indep.push_back(a);
        indep.push_back(b);
        corr.push_back(a);
        corr.push_back(0.1 * a + std::sqrt(1 - 0.01) * b);
    }
    EXPECT_NEAR(estimate_correlation(ZMatrix::from_values(2, same)), 1.0, 1e-12);
    EXPECT_LT(std::abs(estimate_correlation(ZMatrix::from_values(2, indep))), 0.02);
    const auto C = ZMatrix::from_values(2, corr);
    const double r = estimate_correlation(C);
    EXPECT_GE(r, 0.08);
    EXPECT_LE(r, 0.12);

    std::vector<double> swapped(corr.size());
    for (std::size_t j = 0; j < corr.size() / 2; ++j) {
        swapped[2 * j] = corr[2 * j + 1];
        swapped[2 * j + 1] = corr[2 * j];
    }
    EXPECT_NEAR(estimate_correlation(ZMatrix::from_values(2, swapped)), r, 1e-12);
    EXPECT_NEAR(estimate_correlation(C.negated()), r, 1e-12);

    const double truncated = estimate_correlation(C, 2.0);
    EXPECT_TRUE(std::isfinite(truncated));
    EXPECT_NE(truncated, r);
}

TEST(Correlation, Errors) {
    std::vector<double> flat;
    for (int j = 0; j < 20; ++j) {
        flat.push_back(j);
        flat.push_back(1.0);
    }
    EXPECT_THROW(estimate_correlation(ZMatrix::from_values(2, flat)), Error);
    EXPECT_THROW(estimate_correlation(ZMatrix::from_values(2, {1, 2, 3, 4})), Error);
    std::vector<double> three(60, 1.0);
    EXPECT_THROW(estimate_correlation(ZMatrix::from_values(3, three)), Error);
}

TEST(Symmetrize, NoOpOnBalancedInput) {
    const auto Z = ZMatrix::from_values(2, {2, -2, -2, 2, 0.5, 0.1, -3, 3, 3, -3});
    const auto s = symmetrize(Z, 1);
    EXPECT_FALSE(s.applied);
    EXPECT_EQ(s.z.values(), Z.values());
    for (bool f : s.flipped) EXPECT_FALSE(f);
}

TEST(Symmetrize, BalancesOneSidedInput) {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(1.1, 6.0);
    std::vector<double> vals(20000);
    for (auto& v : vals) v = u(rng);
    const auto Z = ZMatrix::from_values(2, vals);
    const auto s = symmetrize(Z, 99);
    EXPECT_TRUE(s.applied);
    for (double f : positive_fractions(s.z)) {
        EXPECT_GE(f, 0.45);
        EXPECT_LE(f, 0.55);
    }
    EXPECT_EQ(apply_flips(s.z, s.flipped).values(), Z.values());
    const auto again = symmetrize(Z, 99);
    EXPECT_EQ(again.flipped, s.flipped);
}

TEST(Symmetrize, BaseLikelihoodIsUnaffected) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-1.0, 5.0);
    std::vector<double> vals(4000);
    for (auto& v : vals) v = u(rng);
    const auto Z = ZMatrix::from_values(2, vals);
    const auto s = symmetrize(Z, 3);
    ASSERT_TRUE(s.applied);
    const auto spec = make_spec(2, Variant::base);
    const auto cs = enumerate_configurations(2, Variant::base);
    const auto p = initialize_params(Z, spec);
    EXPECT_NEAR(e_step(Z, spec, p, cs).loglik, e_step(s.z, spec, p, cs).loglik, 1e-8);
}
