#pragma once
#include <gscd/sparse.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace gscd {

/**
 * Examples are rows, features are columns, one label per example.
 * This is already the Lasso layout (A, b); SVM and logistic problems fold the
 * labels into the matrix with fold_svm / fold_logistic.
 */
struct Dataset
{
    SparseColMatrix matrix;
    DenseVector labels;
    std::string name;

    std::size_t n_examples() const noexcept { return matrix.n_rows(); }
    std::size_t n_features() const noexcept { return matrix.n_cols(); }
};

// libsvm text: "label idx:val idx:val ...", 1-based strictly increasing indices
// on disk, 0-based in memory. Blank lines and '#' comments are skipped.
// The feature count is max(largest index, min_features).
Dataset parse_libsvm(std::istream& in, std::size_t min_features = 0, std::string name = {});
Dataset parse_libsvm_text(std::string_view text, std::size_t min_features = 0, std::string name = {});
// Plain or gzip-compressed file, detected by the leading magic bytes.
Dataset load_libsvm(const std::string& path, std::size_t min_features = 0);

// Shortest decimal form that parses back to the identical double.
void write_libsvm(std::ostream& out, const Dataset& d);

// Columns b_i a_i: features x examples.
SparseColMatrix fold_svm(const Dataset& d);
// Rows b_i a_i: examples x features.
SparseColMatrix fold_logistic(const Dataset& d);

struct NormalizedDataset
{
    Dataset dataset;
    // Original norm of each kept column; alpha_original = alpha / scales[j].
    DenseVector scales;
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;
};

// Unit-norm columns; all-zero columns are dropped and listed.
NormalizedDataset normalize_columns(const Dataset& d);
// Same, applied to the example rows (SVM datapoints become unit-length columns after folding).
NormalizedDataset normalize_rows(const Dataset& d);

struct DiagQuadratic
{
    std::vector<double> spectrum;
};

struct CorrelatedLasso
{
    std::size_t n = 100;  // features (columns)
    std::size_t d = 50;   // examples (rows)
    double density = 1.0;
    double correlation = 0.5;
    double noise = 0.1;
    std::size_t support = 10;
};

struct RandomSvm
{
    std::size_t n = 50;  // examples
    std::size_t d = 10;  // features
    double margin = 0.1;
};

struct SynthSpec
{
    std::variant<DiagQuadratic, CorrelatedLasso, RandomSvm> kind;
    std::uint64_t seed = 0;
};

// DiagQuadratic: A = diag(sqrt(lambda_j)), b ~ N(0, 1)^n.
// CorrelatedLasso: Gaussian columns sharing a common factor, planted sparse truth, noisy b.
// RandomSvm: +-1 labels from a random unit hyperplane, examples within the margin rejected.
Dataset gen_synthetic(const SynthSpec& spec);

// (sum_j 1/lambda_j)^-1
double diag_mu1(const std::vector<double>& spectrum);

// Seeded shuffle split over examples; round(frac * n) go to the training side.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double frac, std::uint64_t seed);

} // namespace gscd
