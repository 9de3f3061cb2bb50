#pragma once
#include <gscd/objectives.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gscd {

enum class Rule { kGss, kGsr, kGsq, kUniform };

std::string rule_name(Rule r);
// Accepts "gs-s", "gss", "gs-r", "gsr", "gs-q", "gsq", "uniform"; throws UsageError otherwise.
Rule parse_rule(const std::string& s);

struct SelectionOutcome
{
    std::size_t coord = 0;
    double score = 0.0;
    double theta = 1.0;
};

/**
 * Box coordinates with a feasible descent direction:
 * alpha_i in (0,1), or alpha_i = 0 with grad_i < 0, or alpha_i = 1 with grad_i > 0.
 */
struct ActiveSet
{
    std::vector<char> member;
    std::size_t count = 0;

    bool contains(std::size_t i) const { return member.at(i) != 0; }
    bool empty() const noexcept { return count == 0; }

    static ActiveSet compute(std::span<const double> alpha, std::span<const double> grad);
};

bool box_active(double alpha_i, double grad_i) noexcept;

// Proximal step length for one coordinate: shrink(a - g/L, lambda/L) - a for L1,
// clip(a - g/L, 0, 1) - a for the box.
double gsr_step(const CompositeProblem& p, double alpha_j, double grad_j);
// Decrease of the quadratic upper bound at the gsr_step; always <= 0.
double gsq_value(const CompositeProblem& p, double alpha_j, double grad_j);

SelectionOutcome select_gss_l1(const CompositeProblem& p, const IterateState& s);
SelectionOutcome select_gss_l1(const CompositeProblem& p, const IterateState& s, std::span<const double> grad);

// Empty when the active set is empty, which certifies optimality.
std::optional<SelectionOutcome> select_gss_box(const CompositeProblem& p, const IterateState& s, const ActiveSet& a);
std::optional<SelectionOutcome> select_gss_box(
    const CompositeProblem& p, const IterateState& s, const ActiveSet& a, std::span<const double> grad
);

SelectionOutcome select_gsr(const CompositeProblem& p, const IterateState& s);
SelectionOutcome select_gsr(const CompositeProblem& p, const IterateState& s, std::span<const double> grad);

SelectionOutcome select_gsq(const CompositeProblem& p, const IterateState& s);
SelectionOutcome select_gsq(const CompositeProblem& p, const IterateState& s, std::span<const double> grad);

SelectionOutcome select_uniform(std::size_t n, std::mt19937_64& rng);

// |s_chosen| / max_i |s_i| for L1-type problems, or the active-set analogue with
// |grad| for the box; 1 when the maximum is 0.
double measure_theta(std::size_t chosen, const CompositeProblem& p, const IterateState& s);
double measure_theta(std::size_t chosen, const CompositeProblem& p, const IterateState& s, std::span<const double> grad);

} // namespace gscd
