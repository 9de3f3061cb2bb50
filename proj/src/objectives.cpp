#include <gscd/objectives.hpp>
#include <gscd/errors.hpp>

#include <algorithm>
#include <cmath>

namespace gscd {

namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double loss_scale(const LossKind& loss, std::size_t n_cols)
{
    return std::visit(overloaded{
        [](const SquaredResidual&) { return 1.0; },
        [n_cols](const DualSvm& l) {
            const double n = static_cast<double>(n_cols);
            return 1.0 / (l.svm_lambda * n * n);
        },
        [](const Logistic&) { return 0.25; },
    }, loss);
}

double logistic_loss(double z)
{
    return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0);
}

double logistic_grad(double z)
{
    return -1.0 / (1.0 + std::exp(z));
}

} // namespace

double smoothness_L(const LossKind& loss, const SparseColMatrix& m, const RegKind& reg)
{
    if (m.n_cols() == 0) {
        throw UsageError("smoothness_L: matrix has no columns");
    }
    const double max_sq = m.max_col_sq_norm();
    if (max_sq == 0.0) {
        throw UsageError("smoothness_L: all columns are zero");
    }
    double l = max_sq * loss_scale(loss, m.n_cols());
    if (const auto* en = std::get_if<ElasticNetL1>(&reg)) l += en->lambda2;
    return l;
}

CompositeProblem::CompositeProblem(SparseColMatrix matrix, LossKind loss, RegKind reg, DenseVector linear_term)
    : matrix_(std::move(matrix)),
      loss_(std::move(loss)),
      reg_(std::move(reg)),
      linear_term_(std::move(linear_term)),
      smoothness_(0.0)
{
    if (linear_term_.empty()) linear_term_.assign(matrix_.n_cols(), 0.0);
    if (linear_term_.size() != matrix_.n_cols()) {
        throw UsageError("CompositeProblem: linear term length must equal n_cols");
    }
    if (const auto* sq = std::get_if<SquaredResidual>(&loss_)) {
        if (sq->target.size() != matrix_.n_rows()) {
            throw UsageError("CompositeProblem: target length must equal n_rows");
        }
    }
    if (const auto* svm = std::get_if<DualSvm>(&loss_); svm && !(svm->svm_lambda > 0.0)) {
        throw UsageError("CompositeProblem: svm lambda must be positive");
    }
    std::visit(overloaded{
        [](const L1& r) { if (!(r.lambda >= 0.0)) throw UsageError("L1: lambda must be nonnegative"); },
        [](const ElasticNetL1& r) {
            if (!(r.lambda1 >= 0.0) || !(r.lambda2 >= 0.0)) {
                throw UsageError("ElasticNetL1: lambdas must be nonnegative");
            }
        },
        [](const auto&) {},
    }, reg_);
    smoothness_ = smoothness_L(loss_, matrix_, reg_);
}

bool CompositeProblem::is_l1_type() const noexcept
{
    return std::holds_alternative<L1>(reg_) || std::holds_alternative<ElasticNetL1>(reg_);
}

bool CompositeProblem::is_box() const noexcept
{
    return std::holds_alternative<Box>(reg_);
}

double CompositeProblem::l1_weight() const noexcept
{
    if (const auto* r = std::get_if<L1>(&reg_)) return r->lambda;
    if (const auto* r = std::get_if<ElasticNetL1>(&reg_)) return r->lambda1;
    return 0.0;
}

double CompositeProblem::l2_weight() const noexcept
{
    if (const auto* r = std::get_if<ElasticNetL1>(&reg_)) return r->lambda2;
    return 0.0;
}

double CompositeProblem::coord_curvature(std::size_t j) const
{
    return matrix_.col_sq_norm(j) * loss_scale(loss_, matrix_.n_cols()) + l2_weight();
}

bool CompositeProblem::is_quadratic() const noexcept
{
    return !std::holds_alternative<Logistic>(loss_);
}

CompositeProblem make_lasso(SparseColMatrix a, DenseVector b, double lambda)
{
    return CompositeProblem(std::move(a), SquaredResidual{std::move(b)}, L1{lambda});
}

CompositeProblem make_elastic_net(SparseColMatrix a, DenseVector b, double lambda1, double lambda2)
{
    return CompositeProblem(std::move(a), SquaredResidual{std::move(b)}, ElasticNetL1{lambda1, lambda2});
}

CompositeProblem make_dual_svm(SparseColMatrix folded, double svm_lambda)
{
    const std::size_t n = folded.n_cols();
    DenseVector c(n, n == 0 ? 0.0 : -1.0 / static_cast<double>(n));
    return CompositeProblem(std::move(folded), DualSvm{svm_lambda}, Box{}, std::move(c));
}

CompositeProblem make_logistic(SparseColMatrix folded, double lambda)
{
    return CompositeProblem(std::move(folded), Logistic{}, L1{lambda});
}

IterateState IterateState::zeros(const CompositeProblem& p)
{
    IterateState s;
    s.alpha.assign(p.n_cols(), 0.0);
    s.residual.assign(p.n_rows(), 0.0);
    return s;
}

IterateState IterateState::from_alpha(const CompositeProblem& p, DenseVector alpha)
{
    if (alpha.size() != p.n_cols()) {
        throw UsageError("IterateState::from_alpha: alpha length must equal n_cols");
    }
    IterateState s;
    s.residual = multiply(p.matrix(), alpha);
    s.nnz = static_cast<std::size_t>(std::count_if(alpha.begin(), alpha.end(), [](double a) { return a != 0.0; }));
    s.alpha = std::move(alpha);
    return s;
}

DenseVector grad_l(const CompositeProblem& p, const IterateState& s)
{
    const auto& v = s.residual;
    DenseVector g(v.size());
    std::visit(overloaded{
        [&](const SquaredResidual& l) {
            for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] - l.target[i];
        },
        [&](const DualSvm& l) {
            const double n = static_cast<double>(p.n_cols());
            const double scale = 1.0 / (l.svm_lambda * n * n);
            for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] * scale;
        },
        [&](const Logistic&) {
            for (std::size_t i = 0; i < v.size(); ++i) g[i] = logistic_grad(v[i]);
        },
    }, p.loss());
    return g;
}

double coord_grad(const CompositeProblem& p, const IterateState& s, std::size_t j, std::span<const double> gl)
{
    if (j >= p.n_cols()) throw UsageError("coord_grad: coordinate out of range");
    return col_dot(p.matrix(), j, gl) + p.linear_term()[j] + p.l2_weight() * s.alpha[j];
}

double coord_grad(const CompositeProblem& p, const IterateState& s, std::size_t j)
{
    if (j >= p.n_cols()) throw UsageError("coord_grad: coordinate out of range");
    // Only the rows touched by column j are needed.
    const auto col = p.matrix().column(j);
    double acc = 0.0;
    std::visit(overloaded{
        [&](const SquaredResidual& l) {
            for (std::size_t k = 0; k < col.nnz(); ++k) {
                const auto r = col.rows[k];
                acc += col.vals[k] * (s.residual[r] - l.target[r]);
            }
        },
        [&](const DualSvm& l) {
            const double n = static_cast<double>(p.n_cols());
            for (std::size_t k = 0; k < col.nnz(); ++k) acc += col.vals[k] * s.residual[col.rows[k]];
            acc /= l.svm_lambda * n * n;
        },
        [&](const Logistic&) {
            for (std::size_t k = 0; k < col.nnz(); ++k) acc += col.vals[k] * logistic_grad(s.residual[col.rows[k]]);
        },
    }, p.loss());
    return acc + p.linear_term()[j] + p.l2_weight() * s.alpha[j];
}

DenseVector full_gradient(const CompositeProblem& p, const IterateState& s)
{
    const DenseVector gl = grad_l(p, s);
    DenseVector g(p.n_cols());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = coord_grad(p, s, j, gl);
    return g;
}

DenseVector subgrad_score(const CompositeProblem& p, const IterateState& s, std::span<const double> grad)
{
    if (!p.is_l1_type()) {
        throw UsageError("subgrad_score: requires an L1-type regularizer");
    }
    const double lambda = p.l1_weight();
    DenseVector out(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        out[i] = s.alpha[i] == 0.0 ? shrink(grad[i], lambda) : grad[i] + sign(s.alpha[i]) * lambda;
    }
    return out;
}

DenseVector subgrad_score(const CompositeProblem& p, const IterateState& s)
{
    if (!p.is_l1_type()) {
        throw UsageError("subgrad_score: requires an L1-type regularizer");
    }
    return subgrad_score(p, s, full_gradient(p, s));
}

double smooth_value(const CompositeProblem& p, const IterateState& s)
{
    const auto& v = s.residual;
    double val = std::visit(overloaded{
        [&](const SquaredResidual& l) {
            double acc = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double r = v[i] - l.target[i];
                acc += r * r;
            }
            return 0.5 * acc;
        },
        [&](const DualSvm& l) {
            const double n = static_cast<double>(p.n_cols());
            double acc = 0.0;
            for (double x : v) acc += x * x;
            return acc / (2.0 * l.svm_lambda * n * n);
        },
        [&](const Logistic&) {
            double acc = 0.0;
            for (double x : v) acc += logistic_loss(x);
            return acc;
        },
    }, p.loss());
    val += dot(p.linear_term(), s.alpha);
    if (const double l2 = p.l2_weight(); l2 != 0.0) val += 0.5 * l2 * dot(s.alpha, s.alpha);
    return val;
}

double objective_value(const CompositeProblem& p, const IterateState& s)
{
    double g = 0.0;
    if (p.is_l1_type()) {
        double l1 = 0.0;
        for (double a : s.alpha) l1 += std::abs(a);
        g = p.l1_weight() * l1;
    } else if (p.is_box()) {
        for (double a : s.alpha) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw UsageError("objective_value: iterate outside the unit box");
            }
        }
    }
    return smooth_value(p, s) + g;
}

void refresh_residual(const CompositeProblem& p, IterateState& s)
{
    s.residual = multiply(p.matrix(), s.alpha);
    s.steps_since_refresh = 0;
}

void apply_coord_delta(const CompositeProblem& p, IterateState& s, std::size_t j, double delta)
{
    if (j >= p.n_cols()) throw UsageError("apply_coord_delta: coordinate out of range");
    if (delta == 0.0) return;
    const double before = s.alpha[j];
    s.alpha[j] += delta;
    const double after = s.alpha[j];
    if (before == 0.0 && after != 0.0) ++s.nnz;
    if (before != 0.0 && after == 0.0) --s.nnz;
    col_axpy(p.matrix(), j, delta, s.residual);
    if (++s.steps_since_refresh >= kResidualRefreshPeriod) refresh_residual(p, s);
}

void set_coord(const CompositeProblem& p, IterateState& s, std::size_t j, double value)
{
    if (j >= p.n_cols()) throw UsageError("set_coord: coordinate out of range");
    const double before = s.alpha[j];
    if (value == before) return;
    s.alpha[j] = value;
    if (before == 0.0) ++s.nnz;
    if (value == 0.0) --s.nnz;
    col_axpy(p.matrix(), j, value - before, s.residual);
    if (++s.steps_since_refresh >= kResidualRefreshPeriod) refresh_residual(p, s);
}

DenseVector svm_primal_weights(const CompositeProblem& p, const IterateState& s)
{
    const auto* svm = std::get_if<DualSvm>(&p.loss());
    if (!svm) throw UsageError("svm_primal_weights: problem is not a dual SVM");
    const double n = static_cast<double>(p.n_cols());
    DenseVector w = s.residual;
    for (double& x : w) x /= svm->svm_lambda * n;
    return w;
}

double duality_gap(const CompositeProblem& p, const IterateState& s)
{
    const auto* svm = std::get_if<DualSvm>(&p.loss());
    if (!svm) throw UsageError("duality_gap: problem is not a dual SVM");
    const double n = static_cast<double>(p.n_cols());
    const double lambda = svm->svm_lambda;
    const DenseVector w = svm_primal_weights(p, s);

    double hinge = 0.0;
    for (std::size_t i = 0; i < p.n_cols(); ++i) {
        hinge += std::max(0.0, 1.0 - col_dot(p.matrix(), i, w));
    }
    const double w_sq = dot(w, w);
    const double primal = hinge / n + 0.5 * lambda * w_sq;

    double alpha_sum = 0.0;
    for (double a : s.alpha) alpha_sum += a;
    const double v_sq = dot(s.residual, s.residual);
    const double dual = alpha_sum / n - v_sq / (2.0 * lambda * n * n);
    return primal - dual;
}

RescaledMatrix rescale_columns(const SparseColMatrix& m, std::span<const double> per_col_L)
{
    if (per_col_L.size() != m.n_cols()) {
        throw UsageError("rescale_columns: expected one constant per column");
    }
    DenseVector scales(per_col_L.size());
    for (std::size_t j = 0; j < scales.size(); ++j) {
        if (!(per_col_L[j] > 0.0)) {
            throw UsageError("rescale_columns: smoothness constants must be positive");
        }
        scales[j] = 1.0 / std::sqrt(per_col_L[j]);
    }
    return {m.scale_columns(scales), std::move(scales)};
}

std::string loss_name(const LossKind& loss)
{
    return std::visit(overloaded{
        [](const SquaredResidual&) { return std::string("squared"); },
        [](const DualSvm&) { return std::string("dual_svm"); },
        [](const Logistic&) { return std::string("logistic"); },
    }, loss);
}

std::string reg_name(const RegKind& reg)
{
    return std::visit(overloaded{
        [](const L1&) { return std::string("l1"); },
        [](const Box&) { return std::string("box"); },
        [](const ElasticNetL1&) { return std::string("elastic_net"); },
        [](const NoReg&) { return std::string("none"); },
    }, reg);
}

} // namespace gscd
