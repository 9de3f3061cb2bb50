#pragma once
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gscd {

using DenseVector = std::vector<double>;

struct Triplet
{
    std::size_t row;
    std::size_t col;
    double value;
};

/**
 * Read-only view of one stored column.
 * rows[k] is the row id of vals[k]; rows are strictly increasing.
 */
struct ColumnView
{
    std::span<const std::uint32_t> rows;
    std::span<const double> vals;

    std::size_t nnz() const noexcept { return rows.size(); }
};

/**
 * Immutable column-compressed matrix with cached squared column norms.
 *
 * Every consumer in this library touches the matrix one column at a time
 * (coordinate gradients, residual updates, augmented point extraction),
 * so only column access is provided.
 */
class SparseColMatrix
{
public:
    SparseColMatrix() = default;

    // Validates the compressed layout and throws UsageError on violation.
    SparseColMatrix(
        std::size_t n_rows,
        std::size_t n_cols,
        std::vector<std::size_t> col_starts,
        std::vector<std::uint32_t> row_indices,
        std::vector<double> values
    );

    // Duplicate (row, col) entries are summed; explicit zeros are dropped.
    static SparseColMatrix from_triplets(
        std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries
    );

    // Row-major dense input of size n_rows * n_cols; zeros are not stored.
    static SparseColMatrix from_dense(
        std::size_t n_rows, std::size_t n_cols, std::span<const double> row_major
    );

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    ColumnView column(std::size_t j) const;
    double col_sq_norm(std::size_t j) const { return col_sq_norms_.at(j); }
    const std::vector<double>& col_sq_norms() const noexcept { return col_sq_norms_; }
    double max_col_sq_norm() const noexcept;

    const std::vector<std::size_t>& col_starts() const noexcept { return col_starts_; }
    const std::vector<std::uint32_t>& row_indices() const noexcept { return row_indices_; }
    const std::vector<double>& values() const noexcept { return values_; }

    SparseColMatrix transpose() const;
    // New matrix with column j multiplied by scale[j].
    SparseColMatrix scale_columns(std::span<const double> scale) const;
    SparseColMatrix select_rows(std::span<const std::size_t> rows) const;
    SparseColMatrix select_cols(std::span<const std::size_t> cols) const;
    // Row-major dense copy.
    std::vector<double> to_dense() const;

    bool operator==(const SparseColMatrix& other) const = default;

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::size_t> col_starts_{0};
    std::vector<std::uint32_t> row_indices_;
    std::vector<double> values_;
    std::vector<double> col_sq_norms_;
};

// Soft-threshold: x - sign(x)*lambda when |x| >= lambda, else 0.
inline double shrink(double x, double lambda) noexcept
{
    if (x >= lambda) return x - lambda;
    if (x <= -lambda) return x + lambda;
    return 0.0;
}

inline double sign(double x) noexcept
{
    return static_cast<double>((x > 0.0) - (x < 0.0));
}

double col_dot(const SparseColMatrix& m, std::size_t j, std::span<const double> v);

// v += scale * A_j, touching only the stored entries of column j.
void col_axpy(const SparseColMatrix& m, std::size_t j, double scale, std::span<double> v);

// A * x for x over columns.
DenseVector multiply(const SparseColMatrix& m, std::span<const double> x);

// A^T * y for y over rows.
DenseVector multiply_transpose(const SparseColMatrix& m, std::span<const double> y);

double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> a);

} // namespace gscd
