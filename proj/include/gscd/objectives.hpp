#pragma once
#include <gscd/sparse.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <variant>

namespace gscd {

// ---------------------------------------------------------------------------
// Loss l(v) on v = A*alpha. Labels are folded into A (or b) at load time.
// ---------------------------------------------------------------------------

// l(v) = 1/2 ||v - b||^2
struct SquaredResidual
{
    DenseVector target;
};

// l(v) = ||v||^2 / (2 * lambda * n^2), with columns b_i a_i and c = -(1/n) 1.
struct DualSvm
{
    double svm_lambda;
};

// l(v) = sum_i log(1 + exp(-v_i))
struct Logistic {};

using LossKind = std::variant<SquaredResidual, DualSvm, Logistic>;

// ---------------------------------------------------------------------------
// Separable regularizer g(alpha) = sum_i g_i(alpha_i).
// ---------------------------------------------------------------------------

struct L1
{
    double lambda;
};

// Indicator of the unit box [0,1]^n.
struct Box {};

// lambda1 ||alpha||_1 + lambda2/2 ||alpha||^2; the quadratic part is treated
// as smooth, so selection and updates see a plain L1 term with lambda1.
struct ElasticNetL1
{
    double lambda1;
    double lambda2;
};

struct NoReg {};

using RegKind = std::variant<L1, Box, ElasticNetL1, NoReg>;

/**
 * F(alpha) = l(A alpha) + c^T alpha + g(alpha).
 *
 * Immutable once built. The coordinate-wise smoothness constant L is
 * derived from the loss and the column norms at construction.
 */
class CompositeProblem
{
public:
    // Empty linear_term means c = 0.
    CompositeProblem(SparseColMatrix matrix, LossKind loss, RegKind reg, DenseVector linear_term = {});

    const SparseColMatrix& matrix() const noexcept { return matrix_; }
    const LossKind& loss() const noexcept { return loss_; }
    const RegKind& reg() const noexcept { return reg_; }
    const DenseVector& linear_term() const noexcept { return linear_term_; }
    double smoothness() const noexcept { return smoothness_; }

    std::size_t n_cols() const noexcept { return matrix_.n_cols(); }
    std::size_t n_rows() const noexcept { return matrix_.n_rows(); }

    bool is_l1_type() const noexcept;
    bool is_box() const noexcept;
    // lambda (L1) or lambda1 (elastic net); 0 otherwise.
    double l1_weight() const noexcept;
    // lambda2 for elastic net; 0 otherwise.
    double l2_weight() const noexcept;
    // Exact curvature of f along coordinate j (quadratic losses) or its
    // upper bound (logistic).
    double coord_curvature(std::size_t j) const;
    bool is_quadratic() const noexcept;

private:
    SparseColMatrix matrix_;
    LossKind loss_;
    RegKind reg_;
    DenseVector linear_term_;
    double smoothness_;
};

// Convenience constructors for the supported applications.
CompositeProblem make_lasso(SparseColMatrix a, DenseVector b, double lambda);
CompositeProblem make_elastic_net(SparseColMatrix a, DenseVector b, double lambda1, double lambda2);
// Columns of `folded` must already be b_i * a_i.
CompositeProblem make_dual_svm(SparseColMatrix folded, double svm_lambda);
// Rows of `folded` must already be b_i * a_i.
CompositeProblem make_logistic(SparseColMatrix folded, double lambda);

/**
 * Mutable solver state: alpha, the maintained residual v = A*alpha and the
 * count of nonzero coordinates.
 */
struct IterateState
{
    DenseVector alpha;
    DenseVector residual;
    std::size_t nnz = 0;
    std::size_t iter = 0;
    std::size_t steps_since_refresh = 0;

    static IterateState zeros(const CompositeProblem& p);
    static IterateState from_alpha(const CompositeProblem& p, DenseVector alpha);
};

// Full residual recomputation happens after this many coordinate updates.
inline constexpr std::size_t kResidualRefreshPeriod = 1000;

double smoothness_L(const LossKind& loss, const SparseColMatrix& m, const RegKind& reg);

// Gradient of l at the current residual, length n_rows.
DenseVector grad_l(const CompositeProblem& p, const IterateState& s);

// <A_j, grad l(v)> + c_j (+ lambda2 alpha_j for elastic net).
double coord_grad(const CompositeProblem& p, const IterateState& s, std::size_t j);

// Same as coord_grad but reuses a precomputed grad_l.
double coord_grad(const CompositeProblem& p, const IterateState& s, std::size_t j, std::span<const double> gl);

DenseVector full_gradient(const CompositeProblem& p, const IterateState& s);

/// The GS-s score vector s(alpha) for L1-type regularizers.
DenseVector subgrad_score(const CompositeProblem& p, const IterateState& s);
DenseVector subgrad_score(const CompositeProblem& p, const IterateState& s, std::span<const double> grad);

double smooth_value(const CompositeProblem& p, const IterateState& s);
double objective_value(const CompositeProblem& p, const IterateState& s);

void apply_coord_delta(const CompositeProblem& p, IterateState& s, std::size_t j, double delta);
// Sets alpha_j to exactly `value` (no rounding from old + delta) and updates the residual.
void set_coord(const CompositeProblem& p, IterateState& s, std::size_t j, double value);

// Recomputes the residual from alpha; also resets the refresh counter.
void refresh_residual(const CompositeProblem& p, IterateState& s);

double duality_gap(const CompositeProblem& p, const IterateState& s);
// Primal weights w(alpha) = A alpha / (lambda n) for the dual SVM; the stationary pairing
// of the dual objective, so the gap vanishes at the optimum.
DenseVector svm_primal_weights(const CompositeProblem& p, const IterateState& s);

struct RescaledMatrix
{
    SparseColMatrix matrix;
    // Column j was multiplied by scales[j] = 1/sqrt(L_j); alpha_orig = alpha_scaled * scales[j].
    DenseVector scales;
};

RescaledMatrix rescale_columns(const SparseColMatrix& m, std::span<const double> per_col_L);

std::string loss_name(const LossKind& loss);
std::string reg_name(const RegKind& reg);

} // namespace gscd
