#include <gscd/sparse.hpp>
#include <gscd/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gscd {

SparseColMatrix::SparseColMatrix(
    std::size_t n_rows,
    std::size_t n_cols,
    std::vector<std::size_t> col_starts,
    std::vector<std::uint32_t> row_indices,
    std::vector<double> values
)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      col_starts_(std::move(col_starts)),
      row_indices_(std::move(row_indices)),
      values_(std::move(values))
{
    if (n_rows_ > std::numeric_limits<std::uint32_t>::max()) {
        throw UsageError("SparseColMatrix: too many rows");
    }
    if (col_starts_.size() != n_cols_ + 1) {
        throw UsageError("SparseColMatrix: col_starts must have n_cols+1 entries");
    }
    if (col_starts_.front() != 0 || col_starts_.back() != values_.size()) {
        throw UsageError("SparseColMatrix: col_starts must span [0, nnz]");
    }
    if (row_indices_.size() != values_.size()) {
        throw UsageError("SparseColMatrix: row_indices and values differ in length");
    }
    col_sq_norms_.assign(n_cols_, 0.0);
    for (std::size_t j = 0; j < n_cols_; ++j) {
        if (col_starts_[j] > col_starts_[j + 1]) {
            throw UsageError("SparseColMatrix: col_starts must be non-decreasing");
        }
        double sq = 0.0;
        for (std::size_t k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
            if (row_indices_[k] >= n_rows_) {
                throw UsageError("SparseColMatrix: row index out of range in column " + std::to_string(j));
            }
            if (k > col_starts_[j] && row_indices_[k] <= row_indices_[k - 1]) {
                throw UsageError("SparseColMatrix: row indices must be strictly increasing in column " + std::to_string(j));
            }
            sq += values_[k] * values_[k];
        }
        col_sq_norms_[j] = sq;
    }
}

SparseColMatrix SparseColMatrix::from_triplets(
    std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries
)
{
    for (const auto& t : entries) {
        if (t.row >= n_rows || t.col >= n_cols) {
            throw UsageError("from_triplets: entry out of range");
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    std::vector<std::size_t> starts(n_cols + 1, 0);
    std::vector<std::uint32_t> rows;
    std::vector<double> vals;
    rows.reserve(entries.size());
    vals.reserve(entries.size());
    std::size_t k = 0;
    for (std::size_t j = 0; j < n_cols; ++j) {
        starts[j] = vals.size();
        while (k < entries.size() && entries[k].col == j) {
            const std::size_t r = entries[k].row;
            double v = 0.0;
            while (k < entries.size() && entries[k].col == j && entries[k].row == r) {
                v += entries[k].value;
                ++k;
            }
            if (v != 0.0) {
                rows.push_back(static_cast<std::uint32_t>(r));
                vals.push_back(v);
            }
        }
    }
    starts[n_cols] = vals.size();
    return SparseColMatrix(n_rows, n_cols, std::move(starts), std::move(rows), std::move(vals));
}

SparseColMatrix SparseColMatrix::from_dense(
    std::size_t n_rows, std::size_t n_cols, std::span<const double> row_major
)
{
    if (row_major.size() != n_rows * n_cols) {
        throw UsageError("from_dense: size mismatch");
    }
    std::vector<std::size_t> starts(n_cols + 1, 0);
    std::vector<std::uint32_t> rows;
    std::vector<double> vals;
    for (std::size_t j = 0; j < n_cols; ++j) {
        starts[j] = vals.size();
        for (std::size_t i = 0; i < n_rows; ++i) {
            const double v = row_major[i * n_cols + j];
            if (v != 0.0) {
                rows.push_back(static_cast<std::uint32_t>(i));
                vals.push_back(v);
            }
        }
    }
    starts[n_cols] = vals.size();
    return SparseColMatrix(n_rows, n_cols, std::move(starts), std::move(rows), std::move(vals));
}

ColumnView SparseColMatrix::column(std::size_t j) const
{
    if (j >= n_cols_) {
        throw UsageError("column index " + std::to_string(j) + " out of range");
    }
    const std::size_t b = col_starts_[j];
    const std::size_t e = col_starts_[j + 1];
    return {
        std::span<const std::uint32_t>(row_indices_.data() + b, e - b),
        std::span<const double>(values_.data() + b, e - b),
    };
}

double SparseColMatrix::max_col_sq_norm() const noexcept
{
    double m = 0.0;
    for (double s : col_sq_norms_) m = std::max(m, s);
    return m;
}

SparseColMatrix SparseColMatrix::transpose() const
{
    std::vector<std::size_t> starts(n_rows_ + 1, 0);
    for (auto r : row_indices_) ++starts[r + 1];
    for (std::size_t i = 0; i < n_rows_; ++i) starts[i + 1] += starts[i];
    std::vector<std::uint32_t> rows(values_.size());
    std::vector<double> vals(values_.size());
    std::vector<std::size_t> fill(starts.begin(), starts.end() - 1);
    for (std::size_t j = 0; j < n_cols_; ++j) {
        for (std::size_t k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
            const std::size_t dst = fill[row_indices_[k]]++;
            rows[dst] = static_cast<std::uint32_t>(j);
            vals[dst] = values_[k];
        }
    }
    return SparseColMatrix(n_cols_, n_rows_, std::move(starts), std::move(rows), std::move(vals));
}

SparseColMatrix SparseColMatrix::scale_columns(std::span<const double> scale) const
{
    if (scale.size() != n_cols_) {
        throw UsageError("scale_columns: expected one scale per column");
    }
    std::vector<double> vals = values_;
    for (std::size_t j = 0; j < n_cols_; ++j) {
        for (std::size_t k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
            vals[k] *= scale[j];
        }
    }
    return SparseColMatrix(n_rows_, n_cols_, col_starts_, row_indices_, std::move(vals));
}

SparseColMatrix SparseColMatrix::select_rows(std::span<const std::size_t> rows) const
{
    std::vector<std::int64_t> remap(n_rows_, -1);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= n_rows_) throw UsageError("select_rows: row out of range");
        remap[rows[k]] = static_cast<std::int64_t>(k);
    }
    std::vector<Triplet> entries;
    for (std::size_t j = 0; j < n_cols_; ++j) {
        for (std::size_t k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
            const auto r = remap[row_indices_[k]];
            if (r >= 0) entries.push_back({static_cast<std::size_t>(r), j, values_[k]});
        }
    }
    return from_triplets(rows.size(), n_cols_, std::move(entries));
}

SparseColMatrix SparseColMatrix::select_cols(std::span<const std::size_t> cols) const
{
    std::vector<std::size_t> starts{0};
    std::vector<std::uint32_t> rws;
    std::vector<double> vals;
    for (auto j : cols) {
        const auto c = column(j);
        rws.insert(rws.end(), c.rows.begin(), c.rows.end());
        vals.insert(vals.end(), c.vals.begin(), c.vals.end());
        starts.push_back(vals.size());
    }
    return SparseColMatrix(n_rows_, cols.size(), std::move(starts), std::move(rws), std::move(vals));
}

std::vector<double> SparseColMatrix::to_dense() const
{
    std::vector<double> out(n_rows_ * n_cols_, 0.0);
    for (std::size_t j = 0; j < n_cols_; ++j) {
        for (std::size_t k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
            out[row_indices_[k] * n_cols_ + j] = values_[k];
        }
    }
    return out;
}

double col_dot(const SparseColMatrix& m, std::size_t j, std::span<const double> v)
{
    if (v.size() != m.n_rows()) {
        throw UsageError("col_dot: vector length does not match n_rows");
    }
    const auto c = m.column(j);
    double s = 0.0;
    for (std::size_t k = 0; k < c.nnz(); ++k) s += c.vals[k] * v[c.rows[k]];
    return s;
}

void col_axpy(const SparseColMatrix& m, std::size_t j, double scale, std::span<double> v)
{
    if (v.size() != m.n_rows()) {
        throw UsageError("col_axpy: vector length does not match n_rows");
    }
    const auto c = m.column(j);
    if (scale == 0.0) return;
    for (std::size_t k = 0; k < c.nnz(); ++k) v[c.rows[k]] += scale * c.vals[k];
}

DenseVector multiply(const SparseColMatrix& m, std::span<const double> x)
{
    if (x.size() != m.n_cols()) throw UsageError("multiply: length mismatch");
    DenseVector out(m.n_rows(), 0.0);
    for (std::size_t j = 0; j < m.n_cols(); ++j) {
        if (x[j] != 0.0) col_axpy(m, j, x[j], out);
    }
    return out;
}

DenseVector multiply_transpose(const SparseColMatrix& m, std::span<const double> y)
{
    if (y.size() != m.n_rows()) throw UsageError("multiply_transpose: length mismatch");
    DenseVector out(m.n_cols(), 0.0);
    for (std::size_t j = 0; j < m.n_cols(); ++j) out[j] = col_dot(m, j, y);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw UsageError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm_inf(std::span<const double> a)
{
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

} // namespace gscd
