#include <gscd/selection.hpp>
#include <gscd/errors.hpp>

#include <algorithm>
#include <cmath>

namespace gscd {

namespace {

void require_l1_or_box(const CompositeProblem& p, const char* who)
{
    if (!p.is_l1_type() && !p.is_box()) {
        throw UsageError(std::string(who) + ": requires an L1-type or box regularizer");
    }
}

void require_grad_len(const CompositeProblem& p, std::span<const double> grad)
{
    if (grad.size() != p.n_cols()) throw UsageError("gradient length must equal n_cols");
}

// Lowest index wins ties because only a strictly larger value replaces the incumbent.
template <class F>
SelectionOutcome argmax_abs(std::size_t n, F&& value)
{
    SelectionOutcome out;
    double best = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double v = std::abs(value(j));
        if (v > best) {
            best = v;
            out.coord = j;
        }
    }
    out.score = std::max(best, 0.0);
    return out;
}

double g_term(const CompositeProblem& p, double x)
{
    return p.is_l1_type() ? p.l1_weight() * std::abs(x) : 0.0;
}

} // namespace

std::string rule_name(Rule r)
{
    switch (r) {
    case Rule::kGss: return "gs-s";
    case Rule::kGsr: return "gs-r";
    case Rule::kGsq: return "gs-q";
    case Rule::kUniform: return "uniform";
    }
    return "unknown";
}

Rule parse_rule(const std::string& s)
{
    if (s == "gs-s" || s == "gss") return Rule::kGss;
    if (s == "gs-r" || s == "gsr") return Rule::kGsr;
    if (s == "gs-q" || s == "gsq") return Rule::kGsq;
    if (s == "uniform" || s == "ucd") return Rule::kUniform;
    throw UsageError("unknown rule '" + s + "'");
}

bool box_active(double alpha_i, double grad_i) noexcept
{
    return (alpha_i > 0.0 && alpha_i < 1.0) || (alpha_i == 0.0 && grad_i < 0.0) || (alpha_i == 1.0 && grad_i > 0.0);
}

ActiveSet ActiveSet::compute(std::span<const double> alpha, std::span<const double> grad)
{
    if (alpha.size() != grad.size()) throw UsageError("ActiveSet::compute: length mismatch");
    ActiveSet a;
    a.member.assign(alpha.size(), 0);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (box_active(alpha[i], grad[i])) {
            a.member[i] = 1;
            ++a.count;
        }
    }
    return a;
}

double gsr_step(const CompositeProblem& p, double alpha_j, double grad_j)
{
    const double L = p.smoothness();
    if (p.is_box()) return std::clamp(alpha_j - grad_j / L, 0.0, 1.0) - alpha_j;
    if (p.is_l1_type()) return shrink(alpha_j - grad_j / L, p.l1_weight() / L) - alpha_j;
    throw UsageError("gsr_step: requires an L1-type or box regularizer");
}

double gsq_value(const CompositeProblem& p, double alpha_j, double grad_j)
{
    const double gamma = gsr_step(p, alpha_j, grad_j);
    const double chi = gamma * grad_j + 0.5 * p.smoothness() * gamma * gamma
                       + g_term(p, alpha_j + gamma) - g_term(p, alpha_j);
    // gamma = 0 is always feasible, so the minimum cannot be positive.
    return std::min(chi, 0.0);
}

SelectionOutcome select_gss_l1(const CompositeProblem& p, const IterateState& s, std::span<const double> grad)
{
    require_grad_len(p, grad);
    const DenseVector score = subgrad_score(p, s, grad);
    return argmax_abs(score.size(), [&](std::size_t j) { return score[j]; });
}

SelectionOutcome select_gss_l1(const CompositeProblem& p, const IterateState& s)
{
    return select_gss_l1(p, s, full_gradient(p, s));
}

std::optional<SelectionOutcome> select_gss_box(
    const CompositeProblem& p, const IterateState& s, const ActiveSet& a, std::span<const double> grad
)
{
    if (!p.is_box()) throw UsageError("select_gss_box: requires a box regularizer");
    require_grad_len(p, grad);
    if (a.member.size() != p.n_cols()) throw UsageError("select_gss_box: active set size mismatch");
    (void)s;
    if (a.empty()) return std::nullopt;
    SelectionOutcome out;
    double best = -1.0;
    for (std::size_t j = 0; j < grad.size(); ++j) {
        if (!a.member[j]) continue;
        const double v = std::abs(grad[j]);
        if (v > best) {
            best = v;
            out.coord = j;
        }
    }
    out.score = best;
    return out;
}

std::optional<SelectionOutcome> select_gss_box(const CompositeProblem& p, const IterateState& s, const ActiveSet& a)
{
    return select_gss_box(p, s, a, full_gradient(p, s));
}

SelectionOutcome select_gsr(const CompositeProblem& p, const IterateState& s, std::span<const double> grad)
{
    require_l1_or_box(p, "select_gsr");
    require_grad_len(p, grad);
    return argmax_abs(grad.size(), [&](std::size_t j) { return gsr_step(p, s.alpha[j], grad[j]); });
}

SelectionOutcome select_gsr(const CompositeProblem& p, const IterateState& s)
{
    require_l1_or_box(p, "select_gsr");
    return select_gsr(p, s, full_gradient(p, s));
}

SelectionOutcome select_gsq(const CompositeProblem& p, const IterateState& s, std::span<const double> grad)
{
    require_l1_or_box(p, "select_gsq");
    require_grad_len(p, grad);
    return argmax_abs(grad.size(), [&](std::size_t j) { return gsq_value(p, s.alpha[j], grad[j]); });
}

SelectionOutcome select_gsq(const CompositeProblem& p, const IterateState& s)
{
    require_l1_or_box(p, "select_gsq");
    return select_gsq(p, s, full_gradient(p, s));
}

SelectionOutcome select_uniform(std::size_t n, std::mt19937_64& rng)
{
    if (n == 0) throw UsageError("select_uniform: n must be at least 1");
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    SelectionOutcome out;
    out.coord = dist(rng);
    return out;
}

double measure_theta(std::size_t chosen, const CompositeProblem& p, const IterateState& s, std::span<const double> grad)
{
    require_l1_or_box(p, "measure_theta");
    require_grad_len(p, grad);
    if (chosen >= p.n_cols()) throw UsageError("measure_theta: coordinate out of range");
    double best = 0.0;
    double mine = 0.0;
    if (p.is_l1_type()) {
        const DenseVector score = subgrad_score(p, s, grad);
        best = norm_inf(score);
        mine = std::abs(score[chosen]);
    } else {
        for (std::size_t j = 0; j < grad.size(); ++j) {
            if (box_active(s.alpha[j], grad[j])) best = std::max(best, std::abs(grad[j]));
        }
        mine = box_active(s.alpha[chosen], grad[chosen]) ? std::abs(grad[chosen]) : 0.0;
    }
    if (best == 0.0) return 1.0;
    return std::min(1.0, mine / best);
}

double measure_theta(std::size_t chosen, const CompositeProblem& p, const IterateState& s)
{
    require_l1_or_box(p, "measure_theta");
    return measure_theta(chosen, p, s, full_gradient(p, s));
}

} // namespace gscd
