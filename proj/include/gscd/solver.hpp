#pragma once
#include <gscd/objectives.hpp>
#include <gscd/selection.hpp>
#include <gscd/smips.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gscd {

struct ExactRule {};

struct SmipsEngine
{
    SmipsBackend backend = ExactSearch{};
    // Defaults to 50/sqrt(n) when unset.
    std::optional<double> beta;
};

// Picks a coordinate given the full gradient; used to force approximate selections.
using CoordinatePicker =
    std::function<std::size_t(const CompositeProblem&, const IterateState&, std::span<const double> grad)>;

struct CustomEngine
{
    CoordinatePicker pick;
};

using SelectionEngine = std::variant<ExactRule, SmipsEngine, CustomEngine>;

std::string engine_name(const SelectionEngine& e);

enum class StepKind : std::uint8_t { kGood, kBad, kCross };

std::string step_kind_name(StepKind k);

StepKind classify_step_l1(double alpha_i, double alpha_plus) noexcept;
StepKind classify_step_box(double alpha_i, double raw_target) noexcept;

struct StepRecord
{
    std::size_t iter = 0;  // 1-based: record t describes the step producing alpha^(t)
    std::size_t coord = 0;
    StepKind kind = StepKind::kGood;
    double f_value = 0.0;
    double theta = 1.0;
    bool fell_back = false;
    std::int64_t wall_ns = 0;  // cumulative, excluding objective evaluation
    std::size_t nnz = 0;
    // Filled by on_record hooks (duality gap, test accuracy); NaN otherwise.
    double gap = std::numeric_limits<double>::quiet_NaN();
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct StepCounters
{
    std::size_t good = 0;
    std::size_t bad = 0;
    std::size_t cross = 0;
    std::size_t fallback = 0;
    std::size_t total() const noexcept { return good + bad + cross; }
};

enum class StopReason : std::uint8_t { kTolerance, kActiveSetEmpty, kDualityGap, kMaxIters };

std::string stop_reason_name(StopReason r);

// Four values logged per SMIPS query for the adaptivity diagnostics.
struct SmipsProbe
{
    std::size_t iter = 0;
    const SmipsIndex* index = nullptr;
    std::span<const double> query;
    const SubsetMask* mask = nullptr;
    const ProjectionCache* cache = nullptr;
    SmipsResult result;
};

struct SolverConfig
{
    Rule rule = Rule::kGss;
    SelectionEngine engine = ExactRule{};
    bool use_line_search = false;
    std::size_t max_iters = 1000;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    // Record every trace_every-th step (and always the last one).
    std::size_t trace_every = 1;
    // Measure theta against the exact score for non-exact selections.
    bool instrument_theta = false;
    std::function<void(const IterateState&, StepRecord&)> on_record;
    std::function<void(const SmipsProbe&)> on_smips_query;
};

struct Trace
{
    bool box = false;
    double f_initial = 0.0;
    std::vector<StepRecord> records;
    StepCounters counters;
    StopReason stop = StopReason::kMaxIters;
    IterateState final_state;
    std::int64_t wall_ns = 0;
    // SMIPS point-set and hash-table construction, excluded from wall_ns.
    std::int64_t setup_ns = 0;
};

Trace solve_l1(const CompositeProblem& p, const SolverConfig& cfg);
Trace solve_box(const CompositeProblem& p, const SolverConfig& cfg);
// Dispatches on the regularizer kind.
Trace solve(const CompositeProblem& p, const SolverConfig& cfg);

// One-dimensional minimizer of F along coordinate j; never increases F.
double line_search_1d(const CompositeProblem& p, const IterateState& s, std::size_t j);

struct CounterSummary
{
    StepCounters counters;
    bool lemma_holds = true;
    std::string message;
};

// Checks good >= ceil(t/2) (L1) or bad <= floor(t/2) (box).
CounterSummary run_counters(const Trace& t);

} // namespace gscd
