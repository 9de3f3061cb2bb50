#pragma once
#include <gscd/objectives.hpp>
#include <gscd/selection.hpp>
#include <gscd/solver.hpp>

#include <cstddef>
#include <functional>

// Slow reference computations for tests. Everything here works on a dense
// copy of the data and re-derives its formulas instead of calling the
// routines it is used to check.
namespace gscd::oracles {

// Smooth part f(alpha) = l(A alpha) + c^T alpha (+ lambda2/2 ||alpha||^2), dense.
double dense_smooth_value(const CompositeProblem& p, std::span<const double> alpha);
// F = f + g, dense; +infinity outside the box.
double dense_objective(const CompositeProblem& p, std::span<const double> alpha);
// Analytic gradient of f, dense.
DenseVector dense_gradient(const CompositeProblem& p, std::span<const double> alpha);

// Central differences of f with step h.
DenseVector fd_gradient(const CompositeProblem& p, const IterateState& s, double h = 1e-6);

// Minimizer of a unimodal function on [lo, hi].
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12);

// Per-coordinate quantities the greedy rules maximize, computed by exhaustive
// scan: min-norm subgradient (gs-s), and the golden-section minimizer and
// minimum of the 1-d upper model (gs-r, gs-q).
struct RuleScores
{
    DenseVector gss;
    DenseVector gsr;
    DenseVector gsq;
    // Half-width of the golden-section search interval (L1); 0 for the box.
    double search_radius = 0.0;
};

RuleScores rule_scores(const CompositeProblem& p, const IterateState& s);

// Argmax of |score| for the given rule; Uniform is rejected.
std::size_t brute_force_rule(const CompositeProblem& p, const IterateState& s, Rule r);

struct RateEnvelope
{
    double mu1 = 0.0;
    double L = 0.0;
    double f_star = 0.0;
    double theta = 1.0;
    // Needed by the cross-step factor 1 - theta/(2n).
    std::size_t n_coords = 0;
};

enum class EnvelopeKind { kLinearL1, kPerStepBox };

struct EnvelopeResult
{
    bool pass = true;
    // Smallest (bound - observed) over all checked points; negative on failure.
    double worst_margin = 0.0;
    std::size_t worst_iter = 0;
    std::size_t checked = 0;
};

inline constexpr double kEnvelopeSlack = 1e-9;
// Absolute allowance, times (1 + |F*| + |F_0|), added to every bound.
inline constexpr double kEnvelopeFloor = 64.0 * 2.220446049250313e-16;

// kLinearL1: F_t - F* <= (1 - theta^2 mu1/L)^ceil(t/2) (F_0 - F*) (1 + slack) for every record.
// kPerStepBox: per consecutive records, good steps contract by (1 - theta^2 mu1/L),
// cross steps by (1 - theta/(2n)), bad steps only must not increase F.
// Throws UsageError when f_star exceeds the smallest recorded value by more than 1e-9.
EnvelopeResult envelope_check(const Trace& t, const RateEnvelope& env, EnvelopeKind kind);

} // namespace gscd::oracles
