#include <gscd/solver.hpp>
#include <gscd/errors.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

namespace gscd {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point since)
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
}

void validate(const SolverConfig& cfg)
{
    if (cfg.max_iters < 1) throw UsageError("max_iters must be at least 1");
    if (!(cfg.tol >= 0.0)) throw UsageError("tol must be nonnegative");
    if (cfg.trace_every < 1) throw UsageError("trace_every must be at least 1");
    if (const auto* c = std::get_if<CustomEngine>(&cfg.engine); c && !c->pick) {
        throw UsageError("custom engine has no picker");
    }
    if (std::holds_alternative<SmipsEngine>(cfg.engine) && cfg.rule != Rule::kGss) {
        throw UsageError("the SMIPS engine only implements the gs-s rule");
    }
}

// Derivative of the smooth part of F along coordinate j, evaluated at alpha_j = x.
// Only the rows touched by column j change, so this costs O(nnz(A_j)).
struct CoordinateSlice
{
    const CompositeProblem& p;
    const IterateState& s;
    std::size_t j;
    ColumnView col;
    double a0;

    CoordinateSlice(const CompositeProblem& p_, const IterateState& s_, std::size_t j_)
        : p(p_), s(s_), j(j_), col(p_.matrix().column(j_)), a0(s_.alpha[j_])
    {}

    double smooth_deriv(double x) const
    {
        const double dx = x - a0;
        double acc = 0.0;
        for (std::size_t k = 0; k < col.nnz(); ++k) {
            const double z = s.residual[col.rows[k]] + dx * col.vals[k];
            acc += col.vals[k] * (-1.0 / (1.0 + std::exp(z)));
        }
        return acc + p.linear_term()[j] + p.l2_weight() * x;
    }

    // F(alpha with alpha_j = x) - F(alpha), logistic loss only.
    double delta_value(double x) const
    {
        const double dx = x - a0;
        auto ll = [](double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0); };
        double acc = 0.0;
        for (std::size_t k = 0; k < col.nnz(); ++k) {
            const double z = s.residual[col.rows[k]];
            acc += ll(z + dx * col.vals[k]) - ll(z);
        }
        const double lam = p.l1_weight();
        acc += p.linear_term()[j] * dx + lam * (std::abs(x) - std::abs(a0));
        acc += 0.5 * p.l2_weight() * (x * x - a0 * a0);
        return acc;
    }
};

constexpr double kBisectTol = 1e-10;
constexpr int kBisectIters = 100;

// Root of a nondecreasing function on [lo, hi] with d(lo) < 0 < d(hi).
template <class D>
double bisect(D&& d, double lo, double hi)
{
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < kBisectIters; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = d(mid);
        if (std::abs(v) <= kBisectTol) break;
        (v < 0.0 ? lo : hi) = mid;
    }
    return mid;
}

// Finds x >= 0 (direction +1) or x <= 0 (direction -1) where d changes sign,
// given d(0) < 0 along the direction.
template <class D>
double bracket_and_bisect(D&& d, double direction)
{
    auto along = [&](double t) { return direction * d(direction * t); };
    double lo = 0.0;
    double hi = 1.0;
    while (along(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) return direction * hi;
    }
    return direction * bisect(along, lo, hi);
}

bool inert_column(const CompositeProblem& p, std::size_t j)
{
    return p.matrix().column(j).nnz() == 0 && p.linear_term()[j] == 0.0 && p.l2_weight() == 0.0;
}

// 1-d composite minimizer for L1-type problems (before post-processing).
double line_search_l1(const CompositeProblem& p, const IterateState& s, std::size_t j)
{
    const double a = s.alpha[j];
    if (inert_column(p, j)) return a;
    const double lam = p.l1_weight();
    if (p.is_quadratic()) {
        const double h = p.coord_curvature(j);
        if (h <= 0.0) return a;
        const double g = coord_grad(p, s, j);
        return shrink(a - g / h, lam / h);
    }
    const CoordinateSlice cs(p, s, j);
    const double d0 = cs.smooth_deriv(0.0);
    double x = 0.0;
    if (d0 < -lam) {
        x = bracket_and_bisect([&](double t) { return cs.smooth_deriv(t) + lam; }, 1.0);
    } else if (d0 > lam) {
        x = bracket_and_bisect([&](double t) { return cs.smooth_deriv(t) - lam; }, -1.0);
    }
    return cs.delta_value(x) <= 0.0 ? x : a;
}

struct BoxProposal
{
    double raw;
    double target;
};

BoxProposal line_search_box(const CompositeProblem& p, const IterateState& s, std::size_t j)
{
    const double a = s.alpha[j];
    if (inert_column(p, j)) return {a, a};
    if (p.is_quadratic()) {
        const double h = p.coord_curvature(j);
        if (h <= 0.0) return {a, a};
        const double raw = a - coord_grad(p, s, j) / h;
        return {raw, std::clamp(raw, 0.0, 1.0)};
    }
    const CoordinateSlice cs(p, s, j);
    auto d = [&](double t) { return cs.smooth_deriv(t); };
    double x;
    double raw;
    if (d(0.0) >= 0.0) {
        x = 0.0;
        raw = -1.0;
    } else if (d(1.0) <= 0.0) {
        x = 1.0;
        raw = 2.0;
    } else {
        x = bisect(d, 0.0, 1.0);
        raw = x;
    }
    if (cs.delta_value(x) > 0.0) return {a, a};
    return {raw, x};
}

struct StepOutcome
{
    std::size_t coord = 0;
    StepKind kind = StepKind::kGood;
    double old_val = 0.0;
    double new_val = 0.0;
};

struct SmipsState
{
    // Heap-allocated so the index's pointer survives moves of this struct.
    std::unique_ptr<AugmentedPointSet> points;
    std::optional<SmipsIndex> index;
    std::optional<SubsetMask> mask;
    std::optional<ProjectionCache> cache;

    const ProjectionCache* cache_ptr() const { return cache ? &*cache : nullptr; }
};

SmipsState setup_smips(const CompositeProblem& p, const SmipsEngine& eng, const IterateState& s)
{
    SmipsState st;
    const double beta = eng.beta.value_or(default_beta(p.n_cols()));
    if (p.is_box()) {
        st.points = std::make_unique<AugmentedPointSet>(build_box_points(p.matrix(), p.linear_term(), beta));
        st.mask.emplace(build_box_mask(s.alpha));
    } else if (p.l2_weight() > 0.0) {
        st.points = std::make_unique<AugmentedPointSet>(build_elastic_net_points(p.matrix(), p.linear_term(), beta));
        st.mask.emplace(build_l1_mask(s.alpha, MappingKind::kElasticNet));
    } else {
        st.points = std::make_unique<AugmentedPointSet>(build_l1_points(p.matrix(), p.linear_term(), beta));
        st.mask.emplace(build_l1_mask(s.alpha));
    }
    st.index.emplace(*st.points, eng.backend);
    if (!st.index->is_exact() && p.l2_weight() > 0.0) {
        st.cache.emplace(st.index->make_cache(2, p.l2_weight() / beta, s.alpha));
    }
    return st;
}

DenseVector smips_query_vector(const CompositeProblem& p, const IterateState& s, double beta)
{
    const DenseVector gl = grad_l(p, s);
    if (p.is_box()) {
        const double c0 = p.n_cols() > 0 ? p.linear_term()[0] : 0.0;
        return build_box_query(gl, c0, beta);
    }
    if (p.l2_weight() > 0.0) return build_elastic_net_query(gl, s.alpha, p.l1_weight(), p.l2_weight(), beta);
    return build_l1_query(gl, p.l1_weight(), beta);
}

// Shared main loop. The solver-specific parts are the stopping test on a full
// gradient, the exact rule for gs-s, and the coordinate update.
template <class StopTest, class GssSelect, class Update>
Trace run_loop(const CompositeProblem& p, const SolverConfig& cfg, bool box,
               StopTest&& stop_test, GssSelect&& gss_select, Update&& update)
{
    validate(cfg);
    Trace tr;
    tr.box = box;
    IterateState s = IterateState::zeros(p);
    tr.f_initial = objective_value(p, s);
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = p.n_cols();

    SmipsState sm;
    double beta = 0.0;
    const auto* smips_eng = std::get_if<SmipsEngine>(&cfg.engine);
    if (smips_eng) {
        const auto t0 = Clock::now();
        beta = smips_eng->beta.value_or(default_beta(n));
        sm = setup_smips(p, *smips_eng, s);
        tr.setup_ns = elapsed_ns(t0);
    }
    // Greedy rules and custom pickers read the full gradient every step. Uniform
    // only needs it for the periodic stopping test, like the LSH engine.
    const bool exact_engine = (std::holds_alternative<ExactRule>(cfg.engine) && cfg.rule != Rule::kUniform)
                              || std::holds_alternative<CustomEngine>(cfg.engine);
    const bool exact_selection = (std::holds_alternative<ExactRule>(cfg.engine) && cfg.rule != Rule::kUniform)
                                 || (smips_eng && sm.index->is_exact());

    std::int64_t wall = 0;
    StepRecord last{};
    bool last_recorded = true;
    tr.stop = StopReason::kMaxIters;

    for (std::size_t t = 0; t < cfg.max_iters; ++t) {
        const auto t0 = Clock::now();
        const bool periodic = t % n == 0;
        const bool need_grad = exact_engine || periodic || cfg.instrument_theta;
        DenseVector grad;
        if (need_grad) grad = full_gradient(p, s);

        if (exact_engine || periodic) {
            if (auto reason = stop_test(s, grad, exact_engine || periodic)) {
                tr.stop = *reason;
                wall += elapsed_ns(t0);
                break;
            }
        }

        std::size_t j = 0;
        double theta = std::numeric_limits<double>::quiet_NaN();
        bool fell_back = false;
        bool converged = false;

        if (smips_eng) {
            const DenseVector q = smips_query_vector(p, s, beta);
            const SmipsResult res = sm.index->query(q, *sm.mask, rng, sm.cache_ptr());
            if (cfg.on_smips_query) {
                cfg.on_smips_query(SmipsProbe{t, &*sm.index, q, &*sm.mask, sm.cache_ptr(), res});
            }
            j = sm.points->point_to_coordinate(res.id).coord;
            fell_back = res.fell_back;
            // The exact SMIPS value equals the gs-s score, so it doubles as the stopping test.
            if (sm.index->is_exact() && std::max(res.value, 0.0) <= cfg.tol) converged = true;
            // LSH can keep returning a candidate that does not move; the periodic
            // full gradient is already paid for, so use it to pick the step.
            if (!sm.index->is_exact() && periodic) j = gss_select(s, grad);
        } else if (const auto* custom = std::get_if<CustomEngine>(&cfg.engine)) {
            j = custom->pick(p, s, grad);
            if (j >= n) throw UsageError("custom picker returned an out-of-range coordinate");
        } else {
            switch (cfg.rule) {
            case Rule::kGss: j = gss_select(s, grad); break;
            case Rule::kGsr: j = select_gsr(p, s, grad).coord; break;
            case Rule::kGsq: j = select_gsq(p, s, grad).coord; break;
            case Rule::kUniform: j = select_uniform(n, rng).coord; break;
            }
        }
        if (converged) {
            tr.stop = StopReason::kTolerance;
            wall += elapsed_ns(t0);
            break;
        }

        if (exact_selection) {
            theta = 1.0;
        } else if (cfg.instrument_theta) {
            theta = measure_theta(j, p, s, grad);
        }

        const StepOutcome step = update(s, j, need_grad ? std::optional<double>(grad[j]) : std::nullopt);
        if (sm.mask) update_mask_after_step(*sm.mask, j, step.old_val, step.new_val);
        if (sm.cache && step.new_val != step.old_val) {
            sm.index->update_cache(*sm.cache, j, step.new_val - step.old_val);
        }
        s.iter = t + 1;

        switch (step.kind) {
        case StepKind::kGood: ++tr.counters.good; break;
        case StepKind::kBad: ++tr.counters.bad; break;
        case StepKind::kCross: ++tr.counters.cross; break;
        }
        if (fell_back) ++tr.counters.fallback;
        wall += elapsed_ns(t0);

        last = StepRecord{};
        last.iter = t + 1;
        last.coord = j;
        last.kind = step.kind;
        last.theta = theta;
        last.fell_back = fell_back;
        last.wall_ns = wall;
        last.nnz = s.nnz;
        last_recorded = false;
        if ((t + 1) % cfg.trace_every == 0) {
            last.f_value = objective_value(p, s);
            if (cfg.on_record) cfg.on_record(s, last);
            tr.records.push_back(last);
            last_recorded = true;
        }
    }
    if (!last_recorded) {
        last.f_value = objective_value(p, s);
        if (cfg.on_record) cfg.on_record(s, last);
        tr.records.push_back(last);
    }
    tr.wall_ns = wall;
    tr.final_state = std::move(s);
    return tr;
}

} // namespace

std::string engine_name(const SelectionEngine& e)
{
    if (std::holds_alternative<ExactRule>(e)) return "exact";
    if (std::holds_alternative<CustomEngine>(e)) return "custom";
    const auto& sm = std::get<SmipsEngine>(e);
    return std::holds_alternative<ExactSearch>(sm.backend) ? "smips-exact" : "smips-lsh";
}

std::string step_kind_name(StepKind k)
{
    switch (k) {
    case StepKind::kGood: return "good";
    case StepKind::kBad: return "bad";
    case StepKind::kCross: return "cross";
    }
    return "?";
}

std::string stop_reason_name(StopReason r)
{
    switch (r) {
    case StopReason::kTolerance: return "tolerance";
    case StopReason::kActiveSetEmpty: return "active_set_empty";
    case StopReason::kDualityGap: return "duality_gap";
    case StopReason::kMaxIters: return "max_iters";
    }
    return "?";
}

StepKind classify_step_l1(double alpha_i, double alpha_plus) noexcept
{
    return (alpha_i == 0.0 || alpha_i * alpha_plus > 0.0) ? StepKind::kGood : StepKind::kBad;
}

StepKind classify_step_box(double alpha_i, double raw_target) noexcept
{
    if (raw_target > 0.0 && raw_target < 1.0) return StepKind::kGood;
    if (alpha_i > 0.0 && alpha_i < 1.0) return StepKind::kBad;
    return StepKind::kCross;
}

double line_search_1d(const CompositeProblem& p, const IterateState& s, std::size_t j)
{
    if (j >= p.n_cols()) throw UsageError("line_search_1d: coordinate out of range");
    if (p.is_l1_type()) return line_search_l1(p, s, j);
    if (p.is_box()) return line_search_box(p, s, j).target;
    throw UsageError("line_search_1d: requires an L1-type or box regularizer");
}

Trace solve_l1(const CompositeProblem& p, const SolverConfig& cfg)
{
    if (!p.is_l1_type()) throw UsageError("solve_l1: requires an L1-type regularizer");
    const double L = p.smoothness();
    const double lam = p.l1_weight();

    auto stop_test = [&](const IterateState& s, const DenseVector& grad, bool) -> std::optional<StopReason> {
        if (norm_inf(subgrad_score(p, s, grad)) <= cfg.tol) return StopReason::kTolerance;
        return std::nullopt;
    };
    auto gss = [&](const IterateState& s, const DenseVector& grad) { return select_gss_l1(p, s, grad).coord; };
    auto update = [&](IterateState& s, std::size_t j, std::optional<double> g) {
        StepOutcome out;
        out.coord = j;
        out.old_val = s.alpha[j];
        double raw;
        if (cfg.use_line_search) {
            raw = line_search_l1(p, s, j);
        } else {
            const double gj = g ? *g : coord_grad(p, s, j);
            raw = shrink(out.old_val - gj / L, lam / L);
        }
        out.kind = classify_step_l1(out.old_val, raw);
        out.new_val = raw * out.old_val >= 0.0 ? raw : 0.0;
        set_coord(p, s, j, out.new_val);
        return out;
    };
    return run_loop(p, cfg, false, stop_test, gss, update);
}

Trace solve_box(const CompositeProblem& p, const SolverConfig& cfg)
{
    if (!p.is_box()) throw UsageError("solve_box: requires a box regularizer");
    const double L = p.smoothness();
    const bool svm = std::holds_alternative<DualSvm>(p.loss());

    auto stop_test = [&](const IterateState& s, const DenseVector& grad, bool) -> std::optional<StopReason> {
        const ActiveSet a = ActiveSet::compute(s.alpha, grad);
        if (a.empty()) return StopReason::kActiveSetEmpty;
        double best = 0.0;
        for (std::size_t j = 0; j < grad.size(); ++j) {
            if (a.member[j]) best = std::max(best, std::abs(grad[j]));
        }
        if (best <= cfg.tol) return StopReason::kTolerance;
        if (svm && duality_gap(p, s) <= cfg.tol) return StopReason::kDualityGap;
        return std::nullopt;
    };
    auto gss = [&](const IterateState& s, const DenseVector& grad) {
        const ActiveSet a = ActiveSet::compute(s.alpha, grad);
        // The stopping test already ran on this gradient, so the active set is non-empty.
        return select_gss_box(p, s, a, grad).value_or(SelectionOutcome{}).coord;
    };
    auto update = [&](IterateState& s, std::size_t j, std::optional<double> g) {
        StepOutcome out;
        out.coord = j;
        out.old_val = s.alpha[j];
        BoxProposal prop;
        if (cfg.use_line_search) {
            prop = line_search_box(p, s, j);
        } else {
            const double gj = g ? *g : coord_grad(p, s, j);
            prop.raw = out.old_val - gj / L;
            prop.target = std::clamp(prop.raw, 0.0, 1.0);
        }
        out.kind = classify_step_box(out.old_val, prop.raw);
        out.new_val = prop.target;
        set_coord(p, s, j, out.new_val);
        return out;
    };
    return run_loop(p, cfg, true, stop_test, gss, update);
}

Trace solve(const CompositeProblem& p, const SolverConfig& cfg)
{
    if (p.is_l1_type()) return solve_l1(p, cfg);
    if (p.is_box()) return solve_box(p, cfg);
    throw UsageError("solve: requires an L1-type or box regularizer");
}

CounterSummary run_counters(const Trace& t)
{
    CounterSummary out;
    out.counters = t.counters;
    const std::size_t total = t.counters.total();
    if (t.box) {
        out.lemma_holds = 2 * t.counters.bad <= total;
        out.message = "bad=" + std::to_string(t.counters.bad) + " <= floor(" + std::to_string(total) + "/2)";
    } else {
        out.lemma_holds = 2 * t.counters.good >= total;
        out.message = "good=" + std::to_string(t.counters.good) + " >= ceil(" + std::to_string(total) + "/2)";
    }
    if (!out.lemma_holds) out.message = "violated: " + out.message;
    return out;
}

} // namespace gscd
