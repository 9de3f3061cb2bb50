#pragma once
#include <gscd/data_io.hpp>
#include <gscd/objectives.hpp>
#include <gscd/solver.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gscd {

enum class ProblemKind { kLasso, kSvm, kLogistic, kElasticNet };

std::string problem_name(ProblemKind k);
ProblemKind parse_problem(const std::string& s);

struct RunSpec
{
    Rule rule = Rule::kGss;
    // "exact" (full-gradient rule) or "smips"
    std::string engine = "exact";
    // "exact" or "lsh"; only used by the smips engine
    std::string backend = "exact";
    int lsh_bits = 0;
    int lsh_tables = 10;
    Fallback fallback = Fallback::kRandomFromMask;
    bool line_search = false;

    std::string id() const;
};

struct ExperimentConfig
{
    ProblemKind problem = ProblemKind::kLasso;
    std::string data_path;
    // e.g. "diag:4,1", "corr:n=1000,d=100,density=0.3", "svm:n=50,d=10,margin=0.1"
    std::string synthetic;
    double lambda = 0.1;
    double lambda2 = 0.0;
    // Defaults to 1/n for the dual SVM when unset.
    std::optional<double> svm_lambda;
    std::vector<RunSpec> runs;
    std::size_t max_iters = 1000;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    std::string out = "gscd_out";
    bool normalize = false;
    std::optional<double> beta;
    std::size_t workers = 1;
    std::size_t trace_every = 1;
    // Fraction of examples held out for test accuracy (SVM and logistic); 0 disables.
    double test_fraction = 0.0;
    bool adaptivity = false;
    bool instrument_theta = false;
};

// Throws ConfigError on unknown keys or malformed values.
SynthSpec parse_synthetic(const std::string& text, std::uint64_t seed);
// Flat "key = value" lines, '#' comments. Keys match the long CLI flag names.
std::map<std::string, std::string> read_config_file(const std::string& path);
// Builds a config from key/value pairs. rule, engine and backend take comma
// lists; a single value is broadcast to the length of the longest list.
ExperimentConfig config_from_values(const std::map<std::string, std::string>& values);
void validate_config(const ExperimentConfig& cfg);

struct BuiltProblem
{
    CompositeProblem problem;
    // Held-out examples with features matching the trained weights.
    std::optional<Dataset> test;
    std::vector<std::size_t> dropped_columns;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);

struct AdaptivityRow
{
    std::size_t iter = 0;
    double exact_all = 0.0;
    double exact_mask = 0.0;
    double lsh_all = 0.0;  // NaN when no bucket was hit
    double lsh_mask = 0.0;
};

struct RunResult
{
    RunSpec spec;
    std::string id;
    bool ok = false;
    std::string error;
    Trace trace;
    double initial_gap = std::numeric_limits<double>::quiet_NaN();
    double initial_test_accuracy = std::numeric_limits<double>::quiet_NaN();
    std::vector<AdaptivityRow> adaptivity;
};

struct ExperimentResult
{
    std::vector<RunResult> runs;
    double f_star = 0.0;
    std::int64_t load_ns = 0;
    std::size_t n_coords = 0;
    std::size_t n_rows = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const BuiltProblem& built);

struct MetricsRow
{
    std::string run_id;
    std::size_t iter = 0;
    std::int64_t wall_ns = 0;
    double f_value = 0.0;
    double suboptimality = 0.0;
    std::size_t nnz = 0;
    std::string step_kind;  // "init" for the starting point
    std::optional<std::size_t> coord;
    double theta = 0.0;
    double gap = 0.0;
    double test_accuracy = 0.0;
    bool fell_back = false;
};

inline constexpr const char* kMetricsHeader =
    "run_id,iter,wall_ns,f_value,suboptimality,nnz,step_kind,coord,theta,gap,test_accuracy,fell_back";

// Rows ordered by (run, iter); includes an iter-0 row per run.
std::vector<MetricsRow> metrics_rows(const ExperimentResult& r);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_summary_json(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResult& r);

enum class XAxis { kIter, kWall };

inline constexpr double kSuboptFloor = 1e-16;
inline constexpr std::size_t kMaxPlotPoints = 2000;

// Indices of at most max_points evenly spaced rows, first and last always kept.
std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t max_points);
// Wide format: two columns (x, suboptimality) per run.
void emit_plot_csv(std::ostream& out, const std::vector<MetricsRow>& rows, XAxis axis);

void write_adaptivity_csv(std::ostream& out, const std::vector<AdaptivityRow>& rows);
// Runs the experiment and returns the rows of the first LSH run.
std::vector<AdaptivityRow> adaptivity_report(const ExperimentConfig& cfg);

// Parses arguments, runs, writes <out>.metrics.csv, <out>.summary.json, <out>.plot.csv
// (and <out>.adaptivity.csv). Returns 0 on success, 1 on config error, 2 on run failure.
int cli_main(int argc, char** argv);

} // namespace gscd
