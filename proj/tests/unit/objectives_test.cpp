#include <gscd/errors.hpp>
#include <gscd/objectives.hpp>
#include <gscd/oracles.hpp>
#include <gscd/solver.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gscd;

namespace {

SparseColMatrix eye(std::size_t n)
{
    std::vector<Triplet> e;
    for (std::size_t i = 0; i < n; ++i) e.push_back({i, i, 1.0});
    return SparseColMatrix::from_triplets(n, n, e);
}

SparseColMatrix unit_columns(std::size_t d, std::size_t n, std::mt19937_64& rng)
{
    auto m = fixtures::random_matrix(d, n, rng, 1.0);
    DenseVector L(n);
    for (std::size_t j = 0; j < n; ++j) L[j] = m.col_sq_norm(j);
    return rescale_columns(m, L).matrix;
}

double residual_drift(const CompositeProblem& p, const IterateState& s)
{
    const auto v = multiply(p.matrix(), s.alpha);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(v[i] - s.residual[i]));
    return worst / (1.0 + norm_inf(v));
}

} // namespace

TEST(CompositeProblem, ValidatesInputs)
{
    EXPECT_THROW(make_lasso(eye(2), {1.0}, 0.1), UsageError);
    EXPECT_THROW(make_lasso(eye(2), {1.0, 1.0}, -0.1), UsageError);
    EXPECT_THROW(make_dual_svm(eye(2), 0.0), UsageError);
    EXPECT_THROW(make_elastic_net(eye(2), {1.0, 1.0}, 0.1, -1.0), UsageError);
}

TEST(CoordGrad, Examples)
{
    const auto p = make_lasso(eye(2), {3.0, 1.0}, 0.0);
    const auto s = IterateState::zeros(p);
    EXPECT_DOUBLE_EQ(coord_grad(p, s, 0), -3.0);
    EXPECT_DOUBLE_EQ(coord_grad(p, s, 1), -1.0);

    const auto m = SparseColMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
    const auto q = make_lasso(m, {2.0, 5.0}, 0.1);
    EXPECT_DOUBLE_EQ(coord_grad(q, IterateState::zeros(q), 1), 0.0);
    EXPECT_THROW(coord_grad(p, s, 2), UsageError);
}

TEST(CoordGrad, MatchesFiniteDifferencesForAllLosses)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<CompositeProblem> problems{
            fixtures::random_lasso(5, 5, rng), fixtures::random_elastic(6, 5, rng), fixtures::random_svm(6, 7, rng),
            fixtures::random_logistic(8, 5, rng)};
        for (const auto& p : problems) {
            const auto alpha = p.is_box() ? fixtures::random_box_alpha(p.n_cols(), rng)
                                          : fixtures::random_l1_alpha(p.n_cols(), rng);
            const auto s = IterateState::from_alpha(p, alpha);
            const auto fd = oracles::fd_gradient(p, s);
            for (std::size_t j = 0; j < p.n_cols(); ++j) {
                EXPECT_LE(fixtures::rel_err(coord_grad(p, s, j), fd[j]), 1e-6) << loss_name(p.loss());
            }
        }
    }
}

TEST(GradL, Examples)
{
    const DenseVector b{1.0, -2.0};
    const auto p = make_lasso(eye(2), b, 0.1);
    const auto s = IterateState::from_alpha(p, b);
    for (double g : grad_l(p, s)) EXPECT_DOUBLE_EQ(g, 0.0);

    const auto svm = make_dual_svm(eye(2), 1.0);
    const auto t = IterateState::from_alpha(svm, {4.0, 0.0});
    EXPECT_EQ(grad_l(svm, t), (DenseVector{1.0, 0.0}));

    const auto lg = make_logistic(eye(3), 0.1);
    for (double g : grad_l(lg, IterateState::zeros(lg))) EXPECT_DOUBLE_EQ(g, -0.5);
}

TEST(SubgradScore, Examples)
{
    // 1x1 identity with b chosen so that grad = alpha - b gives the listed gradient.
    auto score = [](double alpha, double grad, double lambda) {
        const auto p = make_lasso(eye(1), {alpha - grad}, lambda);
        return subgrad_score(p, IterateState::from_alpha(p, {alpha}))[0];
    };
    EXPECT_DOUBLE_EQ(score(0.0, 2.0, 0.5), 1.5);
    EXPECT_DOUBLE_EQ(score(1.0, 2.0, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(score(0.0, 0.3, 0.5), 0.0);

    const auto box = make_dual_svm(eye(2), 1.0);
    EXPECT_THROW(subgrad_score(box, IterateState::zeros(box)), UsageError);
}

TEST(SmoothnessL, Examples)
{
    std::mt19937_64 rng(12);
    const auto unit = unit_columns(6, 4, rng);
    EXPECT_NEAR(make_lasso(unit, DenseVector(6, 1.0), 0.1).smoothness(), 1.0, 1e-12);
    EXPECT_NEAR(make_dual_svm(unit, 1.0 / 4.0).smoothness(), 1.0 / 4.0, 1e-12);
    EXPECT_NEAR(make_elastic_net(unit, DenseVector(6, 1.0), 0.1, 0.5).smoothness(), 1.5, 1e-12);
    EXPECT_NEAR(make_logistic(unit, 0.1).smoothness(), 0.25, 1e-12);

    const SparseColMatrix zero(2, 2, {0, 0, 0}, {}, {});
    EXPECT_THROW(make_lasso(zero, {1.0, 1.0}, 0.1), UsageError);
}

TEST(ObjectiveValue, Examples)
{
    const auto p = make_lasso(eye(2), {3.0, 1.0}, 0.5);
    EXPECT_DOUBLE_EQ(objective_value(p, IterateState::zeros(p)), 5.0);

    const auto q = make_lasso(eye(2), {0.0, 0.0}, 1.0);
    EXPECT_DOUBLE_EQ(objective_value(q, IterateState::from_alpha(q, {2.0, 0.0})), 4.0);

    const auto svm = make_dual_svm(eye(2), 0.5);
    EXPECT_DOUBLE_EQ(objective_value(svm, IterateState::zeros(svm)), 0.0);
    auto bad = IterateState::zeros(svm);
    bad.alpha[0] = 1.5;
    EXPECT_THROW(objective_value(svm, bad), UsageError);
}

TEST(ObjectiveValue, MatchesDenseOracle)
{
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const std::vector<CompositeProblem> problems{
            fixtures::random_lasso(7, 6, rng), fixtures::random_elastic(5, 6, rng), fixtures::random_svm(5, 6, rng),
            fixtures::random_logistic(7, 4, rng)};
        for (const auto& p : problems) {
            const auto alpha = p.is_box() ? fixtures::random_box_alpha(p.n_cols(), rng)
                                          : fixtures::random_l1_alpha(p.n_cols(), rng);
            const auto s = IterateState::from_alpha(p, alpha);
            EXPECT_LE(fixtures::rel_err(objective_value(p, s), oracles::dense_objective(p, alpha)), 1e-12);
        }
    }
}

TEST(ApplyCoordDelta, Examples)
{
    std::mt19937_64 rng(14);
    const auto p = fixtures::random_lasso(8, 6, rng);
    auto s = IterateState::from_alpha(p, fixtures::random_l1_alpha(6, rng));
    const auto before = s;
    apply_coord_delta(p, s, 2, 0.0);
    EXPECT_EQ(s.alpha, before.alpha);
    EXPECT_EQ(s.residual, before.residual);

    apply_coord_delta(p, s, 3, 0.37);
    apply_coord_delta(p, s, 3, -0.37);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(s.alpha[j], before.alpha[j], 1e-12);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(s.residual[i], before.residual[i], 1e-12);
}

TEST(ApplyCoordDelta, NnzTracksNonzeros)
{
    const auto p = make_lasso(eye(3), {1.0, 1.0, 1.0}, 0.1);
    auto s = IterateState::zeros(p);
    EXPECT_EQ(s.nnz, 0u);
    apply_coord_delta(p, s, 0, 1.0);
    apply_coord_delta(p, s, 2, -2.0);
    EXPECT_EQ(s.nnz, 2u);
    set_coord(p, s, 0, 0.0);
    EXPECT_EQ(s.nnz, 1u);
    EXPECT_EQ(s.alpha[0], 0.0);
}

TEST(ApplyCoordDelta, ResidualIntegrityOverLongSequences)
{
    std::mt19937_64 rng(15);
    const auto p = fixtures::random_lasso(20, 15, rng);
    auto s = IterateState::zeros(p);
    std::uniform_int_distribution<std::size_t> pick(0, 14);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 5000; ++k) {
        if (k % 7 == 0) {
            set_coord(p, s, pick(rng), 0.0);
        } else {
            apply_coord_delta(p, s, pick(rng), g(rng));
        }
        if (k % 500 == 0) {
            EXPECT_LE(residual_drift(p, s), 1e-9);
        }
    }
    EXPECT_LE(residual_drift(p, s), 1e-9);
    std::size_t nz = 0;
    for (double a : s.alpha) nz += a != 0.0;
    EXPECT_EQ(s.nnz, nz);
}

TEST(DualityGap, Examples)
{
    std::mt19937_64 rng(16);
    const auto p = fixtures::random_svm(5, 8, rng);
    EXPECT_NEAR(duality_gap(p, IterateState::zeros(p)), 1.0, 1e-15);

    const auto lasso = fixtures::random_lasso(3, 3, rng);
    EXPECT_THROW(duality_gap(lasso, IterateState::zeros(lasso)), UsageError);
}

TEST(DualityGap, WeakDuality)
{
    std::mt19937_64 rng(17);
    for (int k = 0; k < 1000; ++k) {
        const auto p = fixtures::random_svm(4, 6, rng);
        const auto s = IterateState::from_alpha(p, fixtures::random_box_alpha(6, rng));
        EXPECT_GE(duality_gap(p, s), -1e-10);
    }
}

TEST(DualityGap, SmallAtOptimum)
{
    std::mt19937_64 rng(18);
    const auto p = fixtures::random_svm(4, 10, rng);
    SolverConfig cfg;
    cfg.max_iters = 200000;
    cfg.tol = 1e-10;
    cfg.trace_every = 1000;
    const auto t = solve_box(p, cfg);
    EXPECT_LE(duality_gap(p, t.final_state), 1e-6);
}

TEST(SubgradScore, SmallAtLassoOptimum)
{
    std::mt19937_64 rng(19);
    const auto p = fixtures::random_lasso(15, 10, rng, 0.3);
    SolverConfig cfg;
    cfg.max_iters = 100000;
    cfg.tol = 1e-9;
    cfg.trace_every = 1000;
    const auto t = solve_l1(p, cfg);
    EXPECT_EQ(t.stop, StopReason::kTolerance);
    EXPECT_LE(norm_inf(subgrad_score(p, t.final_state)), 10 * cfg.tol);
}

TEST(RescaleColumns, Examples)
{
    std::mt19937_64 rng(20);
    const auto m = fixtures::random_matrix(4, 3, rng);
    EXPECT_EQ(rescale_columns(m, DenseVector(3, 1.0)).matrix, m);

    const auto col = SparseColMatrix::from_triplets(2, 1, {{0, 0, 2.0}});
    const auto r = rescale_columns(col, DenseVector{4.0});
    EXPECT_NEAR(r.matrix.col_sq_norm(0), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(r.scales[0], 0.5);

    DenseVector L(3);
    for (std::size_t j = 0; j < 3; ++j) L[j] = m.col_sq_norm(j);
    const auto u = rescale_columns(m, L);
    EXPECT_NEAR(make_lasso(u.matrix, DenseVector(4, 0.0), 0.1).smoothness(), 1.0, 1e-12);

    EXPECT_THROW(rescale_columns(m, DenseVector{1.0, 0.0, 1.0}), UsageError);
}
