#include <gscd/errors.hpp>
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

void expect_monotone(const Trace& t)
{
    double prev = t.f_initial;
    for (const auto& r : t.records) {
        EXPECT_LE(r.f_value, prev + 1e-12 * (1.0 + std::abs(prev))) << "iter " << r.iter;
        prev = r.f_value;
    }
}

} // namespace

TEST(ClassifyStep, L1Examples)
{
    EXPECT_EQ(classify_step_l1(0.0, 3.0), StepKind::kGood);
    EXPECT_EQ(classify_step_l1(0.0, -3.0), StepKind::kGood);
    EXPECT_EQ(classify_step_l1(1.0, 0.5), StepKind::kGood);
    EXPECT_EQ(classify_step_l1(1.0, -0.2), StepKind::kBad);
    EXPECT_EQ(classify_step_l1(-1.0, 0.0), StepKind::kBad);
}

TEST(ClassifyStep, BoxExamples)
{
    EXPECT_EQ(classify_step_box(0.5, 0.7), StepKind::kGood);
    EXPECT_EQ(classify_step_box(0.5, 1.3), StepKind::kBad);
    EXPECT_EQ(classify_step_box(0.5, -1.5), StepKind::kBad);
    EXPECT_EQ(classify_step_box(0.0, 1.4), StepKind::kCross);
    EXPECT_EQ(classify_step_box(1.0, -0.1), StepKind::kCross);
    EXPECT_EQ(classify_step_box(0.0, 0.3), StepKind::kGood);
}

TEST(SolveL1, OneDimensionalProx)
{
    const auto p = make_lasso(eye(1), {3.0}, 1.0);
    SolverConfig cfg;
    const auto t = solve_l1(p, cfg);
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_DOUBLE_EQ(t.final_state.alpha[0], 2.0);
    EXPECT_EQ(t.records[0].kind, StepKind::kGood);
    EXPECT_EQ(t.stop, StopReason::kTolerance);
    EXPECT_DOUBLE_EQ(subgrad_score(p, t.final_state)[0], 0.0);
}

TEST(SolveL1, RejectsWrongRegularizer)
{
    const auto svm = make_dual_svm(eye(2), 1.0);
    EXPECT_THROW(solve_l1(svm, SolverConfig{}), UsageError);
    const auto lasso = make_lasso(eye(2), {1.0, 1.0}, 0.1);
    EXPECT_THROW(solve_box(lasso, SolverConfig{}), UsageError);
    SolverConfig bad;
    bad.max_iters = 0;
    EXPECT_THROW(solve(lasso, bad), UsageError);
    SolverConfig smips_gsr;
    smips_gsr.engine = SmipsEngine{};
    smips_gsr.rule = Rule::kGsr;
    EXPECT_THROW(solve(lasso, smips_gsr), UsageError);
}

TEST(SolveL1, CrossingStepIsBadAndZeroes)
{
    // Record the coordinate value after each step and check the post-processing rule.
    std::mt19937_64 rng(51);
    int bad_seen = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const auto p = fixtures::random_lasso(6, 8, rng, 0.05);
        SolverConfig cfg;
        cfg.rule = inst % 2 ? Rule::kUniform : Rule::kGss;
        cfg.seed = inst;
        cfg.max_iters = 300;
        DenseVector prev(8, 0.0);
        std::vector<char> after_bad(8, 0);
        cfg.on_record = [&](const IterateState& s, StepRecord& r) {
            const std::size_t j = r.coord;
            if (after_bad[j]) {
                EXPECT_EQ(r.kind, StepKind::kGood);
                after_bad[j] = 0;
            }
            if (r.kind == StepKind::kBad) {
                EXPECT_EQ(s.alpha[j], 0.0);
                EXPECT_NE(prev[j], 0.0);
                after_bad[j] = 1;
                ++bad_seen;
            } else {
                EXPECT_TRUE(s.alpha[j] == 0.0 || prev[j] == 0.0 || s.alpha[j] * prev[j] > 0.0);
            }
            prev = s.alpha;
        };
        solve_l1(p, cfg);
    }
    EXPECT_GT(bad_seen, 0);
}

TEST(SolveBox, EmptyActiveSetAtStart)
{
    // Squared loss with b <= 0 on the identity: grad at 0 is -b >= 0, so nothing is active.
    const CompositeProblem p(eye(2), SquaredResidual{{-1.0, -2.0}}, Box{});
    const auto t = solve_box(p, SolverConfig{});
    EXPECT_EQ(t.stop, StopReason::kActiveSetEmpty);
    EXPECT_EQ(t.counters.total(), 0u);
    EXPECT_TRUE(t.records.empty());
}

TEST(SolveBox, ClippedStepFromInteriorIsBad)
{
    // One good step reaches 0.5; a gradient of 2 there would clip back to 0.
    const CompositeProblem p(eye(1), SquaredResidual{{0.5}}, Box{});
    const auto t = solve_box(p, SolverConfig{});
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_DOUBLE_EQ(t.final_state.alpha[0], 0.5);
    EXPECT_EQ(t.records[0].kind, StepKind::kGood);

    const double raw = 0.5 - 2.0 / 1.0;
    EXPECT_EQ(classify_step_box(0.5, raw), StepKind::kBad);
    EXPECT_EQ(std::clamp(raw, 0.0, 1.0), 0.0);
}

TEST(SolveBox, SvmConvergesAndGapStaysNonnegative)
{
    std::mt19937_64 rng(52);
    for (int inst = 0; inst < 20; ++inst) {
        const auto p = fixtures::random_svm(5, 12, rng);
        SolverConfig cfg;
        cfg.max_iters = 20000;
        cfg.tol = 1e-8;
        cfg.on_record = [&](const IterateState& s, StepRecord& r) {
            r.gap = duality_gap(p, s);
            EXPECT_GE(r.gap, -1e-10);
        };
        const auto t = solve_box(p, cfg);
        EXPECT_NE(t.stop, StopReason::kMaxIters);
        EXPECT_LE(duality_gap(p, t.final_state), 1e-6);
        expect_monotone(t);
    }
}

TEST(LineSearch, LassoEqualsProxWithColumnCurvature)
{
    std::mt19937_64 rng(53);
    for (int k = 0; k < 300; ++k) {
        const auto p = fixtures::random_lasso(6, 5, rng);
        const auto s = IterateState::from_alpha(p, fixtures::random_l1_alpha(5, rng));
        for (std::size_t j = 0; j < 5; ++j) {
            const double h = p.matrix().col_sq_norm(j);
            const double expect = shrink(s.alpha[j] - coord_grad(p, s, j) / h, p.l1_weight() / h);
            EXPECT_NEAR(line_search_1d(p, s, j), expect, 1e-12 * std::max(1.0, std::abs(expect)));
        }
    }
}

TEST(LineSearch, BoxEqualsClippedNewtonStep)
{
    std::mt19937_64 rng(54);
    for (int k = 0; k < 300; ++k) {
        const auto p = fixtures::random_svm(4, 6, rng);
        const auto s = IterateState::from_alpha(p, fixtures::random_box_alpha(6, rng));
        for (std::size_t j = 0; j < 6; ++j) {
            const double h = p.coord_curvature(j);
            const double expect = std::clamp(s.alpha[j] - coord_grad(p, s, j) / h, 0.0, 1.0);
            EXPECT_NEAR(line_search_1d(p, s, j), expect, 1e-12);
        }
    }
}

TEST(LineSearch, NeverIncreasesObjective)
{
    std::mt19937_64 rng(55);
    for (int k = 0; k < 1000; ++k) {
        CompositeProblem p = [&] {
            switch (k % 4) {
            case 0: return fixtures::random_lasso(6, 5, rng);
            case 1: return fixtures::random_elastic(6, 5, rng);
            case 2: return fixtures::random_svm(6, 5, rng);
            default: return fixtures::random_logistic(6, 5, rng);
            }
        }();
        const auto alpha = p.is_box() ? fixtures::random_box_alpha(5, rng) : fixtures::random_l1_alpha(5, rng);
        auto s = IterateState::from_alpha(p, alpha);
        const std::size_t j = static_cast<std::size_t>(k) % 5;
        const double before = objective_value(p, s);
        set_coord(p, s, j, line_search_1d(p, s, j));
        EXPECT_LE(objective_value(p, s), before + 1e-12 * (1.0 + std::abs(before)));
    }
}

TEST(LineSearch, LogisticMatchesGoldenSection)
{
    std::mt19937_64 rng(56);
    for (int k = 0; k < 100; ++k) {
        const auto p = fixtures::random_logistic(8, 4, rng);
        const auto s = IterateState::from_alpha(p, fixtures::random_l1_alpha(4, rng));
        const std::size_t j = static_cast<std::size_t>(k) % 4;
        auto f = [&](double x) {
            auto a = s.alpha;
            a[j] = x;
            return oracles::dense_objective(p, a);
        };
        const double ref = oracles::golden_section(f, -50.0, 50.0);
        const double got = line_search_1d(p, s, j);
        EXPECT_LE(f(got), f(ref) + 1e-9);
    }
}

TEST(LineSearch, InertColumnLeavesValue)
{
    const auto m = SparseColMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
    const auto p = make_lasso(m, {1.0, 1.0}, 0.1);
    const auto s = IterateState::from_alpha(p, {0.0, 0.7});
    EXPECT_EQ(line_search_1d(p, s, 1), 0.7);
    EXPECT_THROW(line_search_1d(p, s, 2), UsageError);
}

TEST(RunCounters, Examples)
{
    Trace all_good;
    all_good.counters.good = 5;
    auto sum = run_counters(all_good);
    EXPECT_EQ(sum.counters.bad, 0u);
    EXPECT_TRUE(sum.lemma_holds);

    // Alternating good/bad from a good start: good = ceil(t/2) exactly.
    Trace alt;
    for (std::size_t t = 1; t <= 7; ++t) {
        StepRecord r;
        r.iter = t;
        r.kind = t % 2 ? StepKind::kGood : StepKind::kBad;
        alt.records.push_back(r);
    }
    alt.counters.good = 4;
    alt.counters.bad = 3;
    sum = run_counters(alt);
    EXPECT_TRUE(sum.lemma_holds);
    EXPECT_EQ(sum.counters.good, 4u);

    Trace broken;
    broken.counters.good = 1;
    broken.counters.bad = 2;
    EXPECT_FALSE(run_counters(broken).lemma_holds);

    Trace box;
    box.box = true;
    box.counters.bad = 3;
    box.counters.cross = 2;
    EXPECT_FALSE(run_counters(box).lemma_holds);
    box.counters.good = 1;
    EXPECT_TRUE(run_counters(box).lemma_holds);
}

TEST(Solver, MonotoneAndCountingOnRandomRuns)
{
    std::mt19937_64 rng(57);
    for (int inst = 0; inst < 40; ++inst) {
        const std::vector<CompositeProblem> problems{
            fixtures::random_lasso(10, 12, rng), fixtures::random_elastic(10, 12, rng),
            fixtures::random_logistic(12, 8, rng), fixtures::random_svm(6, 12, rng)};
        for (const auto& p : problems) {
            for (Rule r : {Rule::kGss, Rule::kGsr, Rule::kGsq, Rule::kUniform}) {
                SolverConfig cfg;
                cfg.rule = r;
                cfg.seed = inst;
                cfg.max_iters = 150;
                cfg.use_line_search = inst % 3 == 0;
                const auto t = solve(p, cfg);
                expect_monotone(t);
                const auto sum = run_counters(t);
                EXPECT_TRUE(sum.lemma_holds) << sum.message;
                EXPECT_EQ(t.counters.total(), t.records.empty() ? 0u : t.records.back().iter);
            }
        }
    }
}

TEST(Solver, DeterministicTraces)
{
    std::mt19937_64 rng(58);
    const auto p = fixtures::random_lasso(15, 20, rng);
    for (Rule r : {Rule::kGss, Rule::kUniform}) {
        SolverConfig cfg;
        cfg.rule = r;
        cfg.seed = 9;
        cfg.max_iters = 500;
        const auto a = solve(p, cfg);
        const auto b = solve(p, cfg);
        ASSERT_EQ(a.records.size(), b.records.size());
        for (std::size_t k = 0; k < a.records.size(); ++k) {
            EXPECT_EQ(a.records[k].coord, b.records[k].coord);
            EXPECT_EQ(a.records[k].f_value, b.records[k].f_value);
            EXPECT_EQ(a.records[k].kind, b.records[k].kind);
        }
        EXPECT_EQ(a.final_state.alpha, b.final_state.alpha);
    }
}

TEST(Solver, TraceEveryKeepsLastRecord)
{
    std::mt19937_64 rng(59);
    const auto p = fixtures::random_lasso(10, 10, rng);
    SolverConfig cfg;
    cfg.rule = Rule::kUniform;
    cfg.max_iters = 103;
    cfg.tol = 0.0;
    cfg.trace_every = 10;
    const auto t = solve(p, cfg);
    ASSERT_EQ(t.records.size(), 11u);
    EXPECT_EQ(t.records.back().iter, 103u);
    EXPECT_EQ(t.counters.total(), 103u);
}

TEST(Solver, ExactSmipsFollowsExactRule)
{
    std::mt19937_64 rng(60);
    for (int inst = 0; inst < 20; ++inst) {
        const std::vector<CompositeProblem> problems{
            fixtures::random_lasso(10, 15, rng), fixtures::random_elastic(10, 15, rng), fixtures::random_svm(6, 15, rng)};
        for (const auto& p : problems) {
            SolverConfig exact;
            exact.max_iters = 200;
            SolverConfig sm = exact;
            sm.engine = SmipsEngine{};
            const auto a = solve(p, exact);
            const auto b = solve(p, sm);
            EXPECT_EQ(b.counters.fallback, 0u);
            const std::size_t common = std::min(a.records.size(), b.records.size());
            std::size_t same = 0;
            while (same < common && a.records[same].coord == b.records[same].coord) ++same;
            // Rounding differences can only flip exact ties, which random data avoids early on.
            EXPECT_GE(same, std::min<std::size_t>(common, 20)) << loss_name(p.loss());
            EXPECT_NEAR(objective_value(p, a.final_state), objective_value(p, b.final_state),
                        1e-6 * (1.0 + std::abs(a.f_initial)));
        }
    }
}

TEST(Solver, LshEngineReachesTolerance)
{
    std::mt19937_64 rng(61);
    for (int inst = 0; inst < 5; ++inst) {
        // Tall, well-conditioned instance; LSH steps are mostly random fallbacks here.
        const auto p = fixtures::random_lasso(40, 20, rng, 0.5);
        for (Fallback fb : {Fallback::kRandomFromMask, Fallback::kExactScan}) {
            SolverConfig cfg;
            cfg.engine = SmipsEngine{HyperplaneLsh{0, 10, static_cast<std::uint64_t>(inst), fb}, std::nullopt};
            cfg.max_iters = 200000;
            cfg.tol = 1e-8;
            cfg.trace_every = 100;
            cfg.seed = inst;
            const auto t = solve(p, cfg);
            EXPECT_EQ(t.stop, StopReason::kTolerance);
            EXPECT_LE(norm_inf(subgrad_score(p, t.final_state)), 1e-8);
            expect_monotone(t);
        }
    }
}

TEST(Solver, InstrumentedThetaForUniform)
{
    std::mt19937_64 rng(62);
    const auto p = fixtures::random_lasso(10, 10, rng);
    SolverConfig cfg;
    cfg.rule = Rule::kUniform;
    cfg.max_iters = 50;
    cfg.instrument_theta = true;
    for (const auto& r : solve(p, cfg).records) {
        EXPECT_GE(r.theta, 0.0);
        EXPECT_LE(r.theta, 1.0);
    }
    cfg.instrument_theta = false;
    for (const auto& r : solve(p, cfg).records) EXPECT_TRUE(std::isnan(r.theta));
    cfg.rule = Rule::kGss;
    for (const auto& r : solve(p, cfg).records) EXPECT_EQ(r.theta, 1.0);
}

TEST(Solver, CustomPickerIsUsed)
{
    const auto p = make_lasso(eye(3), {1.0, 2.0, 3.0}, 0.1);
    SolverConfig cfg;
    cfg.engine = CustomEngine{[](const CompositeProblem&, const IterateState& s, std::span<const double>) {
        return s.iter % 3;
    }};
    cfg.max_iters = 3;
    const auto t = solve(p, cfg);
    ASSERT_EQ(t.records.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(t.records[k].coord, k);
}

TEST(Solver, BoxPerStepEnvelopeOnSvm)
{
    std::mt19937_64 rng(63);
    for (int inst = 0; inst < 10; ++inst) {
        // Diagonal dual problem: f is separable, so mu1 from the harmonic formula applies.
        const std::size_t n = 6;
        std::vector<Triplet> e;
        std::vector<double> spectrum(n);
        for (std::size_t j = 0; j < n; ++j) {
            spectrum[j] = std::uniform_real_distribution<double>(1.0, 10.0)(rng);
            e.push_back({j, j, std::sqrt(spectrum[j])});
        }
        DenseVector b(n);
        for (double& x : b) x = std::uniform_real_distribution<double>(-2.0, 12.0)(rng);
        const CompositeProblem p(SparseColMatrix::from_triplets(n, n, e), SquaredResidual{b}, Box{});
        SolverConfig cfg;
        cfg.max_iters = 200;
        const auto t = solve_box(p, cfg);
        SolverConfig polish = cfg;
        polish.max_iters = 100000;
        polish.tol = 0.0;
        const double f_star = objective_value(p, solve_box(p, polish).final_state);
        double inv = 0.0;
        for (double l : spectrum) inv += 1.0 / l;
        oracles::RateEnvelope env{1.0 / inv, p.smoothness(), f_star, 1.0, n};
        const auto res = oracles::envelope_check(t, env, oracles::EnvelopeKind::kPerStepBox);
        EXPECT_TRUE(res.pass) << "worst margin " << res.worst_margin << " at " << res.worst_iter;
    }
}
