#include <gscd/oracles.hpp>
#include <gscd/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gscd::oracles {

namespace {

struct DenseView
{
    std::size_t d;
    std::size_t n;
    std::vector<double> a;  // row-major d x n

    explicit DenseView(const SparseColMatrix& m) : d(m.n_rows()), n(m.n_cols()), a(m.to_dense()) {}

    DenseVector times(std::span<const double> x) const
    {
        DenseVector v(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < n; ++j) v[i] += a[i * n + j] * x[j];
        }
        return v;
    }
};

double svm_scale(const CompositeProblem& p)
{
    const double n = static_cast<double>(p.n_cols());
    return std::get<DualSvm>(p.loss()).svm_lambda * n * n;
}

double l1_lambda(const CompositeProblem& p)
{
    if (const auto* r = std::get_if<L1>(&p.reg())) return r->lambda;
    if (const auto* r = std::get_if<ElasticNetL1>(&p.reg())) return r->lambda1;
    return 0.0;
}

double l2_lambda(const CompositeProblem& p)
{
    if (const auto* r = std::get_if<ElasticNetL1>(&p.reg())) return r->lambda2;
    return 0.0;
}

double target_norm(const CompositeProblem& p)
{
    if (const auto* sq = std::get_if<SquaredResidual>(&p.loss())) {
        double s = 0.0;
        for (double x : sq->target) s += x * x;
        return std::sqrt(s);
    }
    return 0.0;
}

} // namespace

double dense_smooth_value(const CompositeProblem& p, std::span<const double> alpha)
{
    const DenseView A(p.matrix());
    const DenseVector v = A.times(alpha);
    double f = 0.0;
    if (const auto* sq = std::get_if<SquaredResidual>(&p.loss())) {
        for (std::size_t i = 0; i < v.size(); ++i) f += 0.5 * (v[i] - sq->target[i]) * (v[i] - sq->target[i]);
    } else if (std::holds_alternative<DualSvm>(p.loss())) {
        for (double x : v) f += x * x;
        f /= 2.0 * svm_scale(p);
    } else {
        for (double x : v) f += x > -30.0 ? std::log1p(std::exp(-x)) : -x;
    }
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        f += p.linear_term()[j] * alpha[j] + 0.5 * l2_lambda(p) * alpha[j] * alpha[j];
    }
    return f;
}

double dense_objective(const CompositeProblem& p, std::span<const double> alpha)
{
    double g = 0.0;
    if (std::holds_alternative<Box>(p.reg())) {
        for (double x : alpha) {
            if (x < 0.0 || x > 1.0) return std::numeric_limits<double>::infinity();
        }
    } else {
        for (double x : alpha) g += l1_lambda(p) * std::abs(x);
    }
    return dense_smooth_value(p, alpha) + g;
}

DenseVector dense_gradient(const CompositeProblem& p, std::span<const double> alpha)
{
    const DenseView A(p.matrix());
    const DenseVector v = A.times(alpha);
    DenseVector r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (const auto* sq = std::get_if<SquaredResidual>(&p.loss())) {
            r[i] = v[i] - sq->target[i];
        } else if (std::holds_alternative<DualSvm>(p.loss())) {
            r[i] = v[i] / svm_scale(p);
        } else {
            // d/dz log(1 + e^-z) = -e^-z / (1 + e^-z)
            const double e = std::exp(-std::min(v[i], 700.0));
            r[i] = std::isinf(e) ? -1.0 : -e / (1.0 + e);
        }
    }
    DenseVector g(A.n, 0.0);
    for (std::size_t j = 0; j < A.n; ++j) {
        for (std::size_t i = 0; i < A.d; ++i) g[j] += A.a[i * A.n + j] * r[i];
        g[j] += p.linear_term()[j] + l2_lambda(p) * alpha[j];
    }
    return g;
}

DenseVector fd_gradient(const CompositeProblem& p, const IterateState& s, double h)
{
    if (!(h > 0.0)) throw UsageError("fd_gradient: step must be positive");
    DenseVector x = s.alpha;
    DenseVector g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double x0 = x[j];
        x[j] = x0 + h;
        const double fp = dense_smooth_value(p, x);
        x[j] = x0 - h;
        const double fm = dense_smooth_value(p, x);
        x[j] = x0;
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol)
{
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < 500 && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    // Endpoints matter when the minimum sits on the boundary (box clipping).
    double best = 0.5 * (a + b);
    double fbest = f(best);
    for (double x : {lo, hi}) {
        const double fx = f(x);
        if (fx < fbest) {
            best = x;
            fbest = fx;
        }
    }
    return best;
}

RuleScores rule_scores(const CompositeProblem& p, const IterateState& s)
{
    const bool box = std::holds_alternative<Box>(p.reg());
    if (!box && !p.is_l1_type()) throw UsageError("rule_scores: requires an L1-type or box regularizer");
    const DenseVector g = dense_gradient(p, s.alpha);
    const double L = p.smoothness();
    const double lam = l1_lambda(p);
    const std::size_t n = g.size();

    RuleScores out;
    out.gss.resize(n);
    out.gsr.resize(n);
    out.gsq.resize(n);
    out.search_radius = box ? 0.0 : 10.0 * (target_norm(p) + 1.0);

    for (std::size_t j = 0; j < n; ++j) {
        const double a = s.alpha[j];
        // Smallest |g_j + xi| over the subdifferential xi of the regularizer at a.
        if (box) {
            if (a <= 0.0) out.gss[j] = std::max(-g[j], 0.0);
            else if (a >= 1.0) out.gss[j] = std::max(g[j], 0.0);
            else out.gss[j] = std::abs(g[j]);
        } else if (a == 0.0) {
            out.gss[j] = std::max(std::abs(g[j]) - lam, 0.0);
        } else {
            out.gss[j] = std::abs(g[j] + (a > 0.0 ? lam : -lam));
        }

        auto model = [&](double gamma) {
            const double reg = box ? 0.0 : lam * (std::abs(a + gamma) - std::abs(a));
            return gamma * g[j] + 0.5 * L * gamma * gamma + reg;
        };
        const double lo = box ? -a : -out.search_radius;
        const double hi = box ? 1.0 - a : out.search_radius;
        const double gamma = golden_section(model, lo, hi);
        out.gsr[j] = gamma;
        out.gsq[j] = std::min(model(gamma), 0.0);
    }
    return out;
}

std::size_t brute_force_rule(const CompositeProblem& p, const IterateState& s, Rule r)
{
    if (r == Rule::kUniform) throw UsageError("brute_force_rule: uniform is not a greedy rule");
    const RuleScores sc = rule_scores(p, s);
    const DenseVector& v = r == Rule::kGss ? sc.gss : (r == Rule::kGsr ? sc.gsr : sc.gsq);
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j) {
        if (std::abs(v[j]) > std::abs(v[best])) best = j;
    }
    return best;
}

EnvelopeResult envelope_check(const Trace& t, const RateEnvelope& env, EnvelopeKind kind)
{
    if (!(env.mu1 > 0.0) || !(env.L > 0.0)) throw UsageError("envelope_check: mu1 and L must be positive");
    if (!(env.theta > 0.0 && env.theta <= 1.0)) throw UsageError("envelope_check: theta must be in (0, 1]");
    double f_min = t.f_initial;
    for (const auto& r : t.records) f_min = std::min(f_min, r.f_value);
    if (env.f_star > f_min + 1e-9) throw UsageError("envelope_check: f_star is above a recorded value");

    const double good_rate = 1.0 - env.theta * env.theta * env.mu1 / env.L;
    EnvelopeResult out;
    out.worst_margin = std::numeric_limits<double>::infinity();
    auto note = [&](double bound, double observed, std::size_t iter) {
        const double margin = bound - observed;
        ++out.checked;
        if (margin < out.worst_margin) {
            out.worst_margin = margin;
            out.worst_iter = iter;
        }
        if (margin < 0.0) out.pass = false;
    };

    const double h0 = t.f_initial - env.f_star;
    // Near F* the gaps are differences of O(|F|) numbers; below this they are rounding.
    const double floor_abs = kEnvelopeFloor * (1.0 + std::abs(env.f_star) + std::abs(t.f_initial));
    if (kind == EnvelopeKind::kLinearL1) {
        for (const auto& r : t.records) {
            const double k = std::ceil(static_cast<double>(r.iter) / 2.0);
            const double bound = std::pow(good_rate, k) * h0 * (1.0 + kEnvelopeSlack) + floor_abs;
            note(bound, r.f_value - env.f_star, r.iter);
        }
    } else {
        if (env.n_coords == 0) throw UsageError("envelope_check: n_coords required for the box envelope");
        const double cross_rate = 1.0 - env.theta / (2.0 * static_cast<double>(env.n_coords));
        double prev_f = t.f_initial;
        std::size_t prev_iter = 0;
        for (const auto& r : t.records) {
            if (r.iter == prev_iter + 1) {
                const double prev_h = prev_f - env.f_star;
                const double h = r.f_value - env.f_star;
                if (r.kind == StepKind::kBad) {
                    note(prev_f + kEnvelopeSlack * (1.0 + std::abs(prev_f)) + floor_abs, r.f_value, r.iter);
                } else {
                    const double rate = r.kind == StepKind::kGood ? good_rate : cross_rate;
                    note(rate * prev_h * (1.0 + kEnvelopeSlack) + floor_abs, h, r.iter);
                }
            }
            prev_f = r.f_value;
            prev_iter = r.iter;
        }
    }
    if (out.checked == 0) out.worst_margin = 0.0;
    return out;
}

} // namespace gscd::oracles
