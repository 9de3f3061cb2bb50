#include <gscd/harness.hpp>
#include <gscd/errors.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace gscd {

namespace {

using Clock = std::chrono::steady_clock;

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double to_real(const std::string& key, const std::string& v)
{
    double x = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

std::uint64_t to_count(const std::string& key, const std::string& v)
{
    std::uint64_t x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    }
    return x;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt_real(double v)
{
    if (std::isnan(v)) return "";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

nlohmann::json json_real(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double accuracy(const Dataset& test, std::span<const double> w)
{
    if (test.n_examples() == 0) return std::numeric_limits<double>::quiet_NaN();
    const DenseVector score = multiply(test.matrix, w);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < score.size(); ++i) {
        const double pred = score[i] >= 0.0 ? 1.0 : -1.0;
        const double truth = test.labels[i] > 0.0 ? 1.0 : -1.0;
        if (pred == truth) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(score.size());
}

DenseVector model_weights(const CompositeProblem& p, const IterateState& s)
{
    if (std::holds_alternative<DualSvm>(p.loss())) return svm_primal_weights(p, s);
    return s.alpha;
}

SolverConfig solver_config(const ExperimentConfig& cfg, const RunSpec& rs)
{
    SolverConfig sc;
    sc.rule = rs.rule;
    sc.use_line_search = rs.line_search;
    sc.max_iters = cfg.max_iters;
    sc.tol = cfg.tol;
    sc.seed = cfg.seed;
    sc.trace_every = cfg.trace_every;
    sc.instrument_theta = cfg.instrument_theta;
    if (rs.engine == "exact") {
        sc.engine = ExactRule{};
    } else {
        SmipsEngine e;
        e.beta = cfg.beta;
        if (rs.backend == "lsh") {
            e.backend = HyperplaneLsh{rs.lsh_bits, rs.lsh_tables, cfg.seed, rs.fallback};
        } else {
            e.backend = ExactSearch{};
        }
        sc.engine = e;
    }
    return sc;
}

RunResult execute_run(const ExperimentConfig& cfg, const BuiltProblem& built, const RunSpec& rs, std::size_t index)
{
    RunResult rr;
    rr.spec = rs;
    rr.id = "r" + std::to_string(index) + "-" + rs.id();
    try {
        const CompositeProblem& p = built.problem;
        SolverConfig sc = solver_config(cfg, rs);
        const bool svm = std::holds_alternative<DualSvm>(p.loss());
        const IterateState zero = IterateState::zeros(p);
        if (svm) rr.initial_gap = duality_gap(p, zero);
        if (built.test) rr.initial_test_accuracy = accuracy(*built.test, model_weights(p, zero));
        sc.on_record = [&](const IterateState& s, StepRecord& rec) {
            if (svm) rec.gap = duality_gap(p, s);
            if (built.test) rec.test_accuracy = accuracy(*built.test, model_weights(p, s));
        };
        if (cfg.adaptivity && rs.engine == "smips" && rs.backend == "lsh") {
            sc.on_smips_query = [&rr](const SmipsProbe& probe) {
                AdaptivityRow row;
                row.iter = probe.iter;
                row.exact_all = probe.index->exact_all(probe.query).value;
                row.exact_mask = probe.index->exact(probe.query, *probe.mask).value;
                row.lsh_all = std::numeric_limits<double>::quiet_NaN();
                for (auto id : probe.index->candidates(probe.query, probe.cache)) {
                    const double v = probe.index->point_set().inner(id, probe.query);
                    if (std::isnan(row.lsh_all) || v > row.lsh_all) row.lsh_all = v;
                }
                row.lsh_mask = probe.result.value;
                rr.adaptivity.push_back(row);
            };
        }
        rr.trace = solve(p, sc);
        rr.ok = true;
    } catch (const std::exception& e) {
        rr.ok = false;
        rr.error = e.what();
    }
    return rr;
}

double best_value(const Trace& t)
{
    double f = t.f_initial;
    for (const auto& r : t.records) f = std::min(f, r.f_value);
    return f;
}

std::vector<double> quantiles(std::vector<double> v, std::initializer_list<double> qs)
{
    std::vector<double> out;
    if (v.empty()) return out;
    std::sort(v.begin(), v.end());
    for (double q : qs) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = static_cast<std::size_t>(std::ceil(pos));
        out.push_back(v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]));
    }
    return out;
}

} // namespace

std::string problem_name(ProblemKind k)
{
    switch (k) {
    case ProblemKind::kLasso: return "lasso";
    case ProblemKind::kSvm: return "svm";
    case ProblemKind::kLogistic: return "logistic";
    case ProblemKind::kElasticNet: return "elasticnet";
    }
    return "?";
}

ProblemKind parse_problem(const std::string& s)
{
    if (s == "lasso") return ProblemKind::kLasso;
    if (s == "svm") return ProblemKind::kSvm;
    if (s == "logistic") return ProblemKind::kLogistic;
    if (s == "elasticnet" || s == "elastic-net") return ProblemKind::kElasticNet;
    throw ConfigError("unknown problem '" + s + "'");
}

std::string RunSpec::id() const
{
    std::string s = rule_name(rule) + "-" + engine;
    if (engine == "smips") s += "-" + backend;
    if (line_search) s += "-ls";
    return s;
}

SynthSpec parse_synthetic(const std::string& text, std::uint64_t seed)
{
    const auto colon = text.find(':');
    const std::string kind = trim(text.substr(0, colon));
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    SynthSpec spec;
    spec.seed = seed;
    if (kind == "diag") {
        DiagQuadratic d;
        for (const auto& tok : split(rest, ',')) d.spectrum.push_back(to_real("synthetic", tok));
        if (d.spectrum.empty()) throw ConfigError("synthetic diag: empty spectrum");
        spec.kind = d;
        return spec;
    }
    std::map<std::string, std::string> kv;
    for (const auto& tok : split(rest, ',')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("synthetic: expected key=value, got '" + tok + "'");
        kv[trim(tok.substr(0, eq))] = trim(tok.substr(eq + 1));
    }
    auto take = [&](const char* key, auto& field) {
        const auto it = kv.find(key);
        if (it == kv.end()) return;
        using F = std::decay_t<decltype(field)>;
        if constexpr (std::is_floating_point_v<F>) field = to_real(key, it->second);
        else field = static_cast<F>(to_count(key, it->second));
        kv.erase(it);
    };
    if (kind == "corr") {
        CorrelatedLasso c;
        take("n", c.n);
        take("d", c.d);
        take("density", c.density);
        take("correlation", c.correlation);
        take("noise", c.noise);
        take("support", c.support);
        spec.kind = c;
    } else if (kind == "svm") {
        RandomSvm s;
        take("n", s.n);
        take("d", s.d);
        take("margin", s.margin);
        spec.kind = s;
    } else {
        throw ConfigError("synthetic: unknown kind '" + kind + "' (expected diag, corr or svm)");
    }
    if (!kv.empty()) throw ConfigError("synthetic: unknown key '" + kv.begin()->first + "'");
    return spec;
}

std::map<std::string, std::string> read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(no) + ": expected key = value");
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

ExperimentConfig config_from_values(const std::map<std::string, std::string>& values)
{
    ExperimentConfig cfg;
    std::vector<std::string> rules{"gs-s"};
    std::vector<std::string> engines{"exact"};
    std::vector<std::string> backends{"exact"};
    int lsh_bits = 0;
    int lsh_tables = 10;
    Fallback fallback = Fallback::kRandomFromMask;
    bool line_search = false;

    for (const auto& [key, v] : values) {
        if (key == "problem") cfg.problem = parse_problem(v);
        else if (key == "data") cfg.data_path = v;
        else if (key == "synthetic") cfg.synthetic = v;
        else if (key == "lambda") cfg.lambda = to_real(key, v);
        else if (key == "lambda2") cfg.lambda2 = to_real(key, v);
        else if (key == "svm-lambda") cfg.svm_lambda = to_real(key, v);
        else if (key == "beta") cfg.beta = to_real(key, v);
        else if (key == "max-iters") cfg.max_iters = to_count(key, v);
        else if (key == "tol") cfg.tol = to_real(key, v);
        else if (key == "seed") cfg.seed = to_count(key, v);
        else if (key == "out") cfg.out = v;
        else if (key == "normalize") cfg.normalize = to_bool(key, v);
        else if (key == "workers") cfg.workers = to_count(key, v);
        else if (key == "trace-every") cfg.trace_every = to_count(key, v);
        else if (key == "test-frac") cfg.test_fraction = to_real(key, v);
        else if (key == "adaptivity") cfg.adaptivity = to_bool(key, v);
        else if (key == "theta") cfg.instrument_theta = to_bool(key, v);
        else if (key == "rule") rules = split(v, ',');
        else if (key == "engine") engines = split(v, ',');
        else if (key == "backend") backends = split(v, ',');
        else if (key == "lsh-bits") lsh_bits = static_cast<int>(to_count(key, v));
        else if (key == "lsh-tables") lsh_tables = static_cast<int>(to_count(key, v));
        else if (key == "line-search") line_search = to_bool(key, v);
        else if (key == "fallback") {
            if (v == "random") fallback = Fallback::kRandomFromMask;
            else if (v == "exact") fallback = Fallback::kExactScan;
            else throw ConfigError("fallback: expected 'random' or 'exact', got '" + v + "'");
        } else {
            throw ConfigError("unknown configuration key '" + key + "'");
        }
    }

    const std::size_t n_runs = std::max({rules.size(), engines.size(), backends.size()});
    auto at = [&](const std::vector<std::string>& list, const char* name, std::size_t i) -> const std::string& {
        if (list.size() == 1) return list[0];
        if (list.size() != n_runs) {
            throw ConfigError(std::string(name) + ": list length " + std::to_string(list.size())
                              + " does not match the " + std::to_string(n_runs) + " runs");
        }
        return list[i];
    };
    if (rules.empty() || engines.empty() || backends.empty()) throw ConfigError("no runs configured");
    for (std::size_t i = 0; i < n_runs; ++i) {
        RunSpec rs;
        try {
            rs.rule = parse_rule(at(rules, "rule", i));
        } catch (const UsageError& e) {
            throw ConfigError(e.what());
        }
        rs.engine = at(engines, "engine", i);
        rs.backend = at(backends, "backend", i);
        rs.lsh_bits = lsh_bits;
        rs.lsh_tables = lsh_tables;
        rs.fallback = fallback;
        rs.line_search = line_search;
        cfg.runs.push_back(rs);
    }
    return cfg;
}

void validate_config(const ExperimentConfig& cfg)
{
    if (cfg.runs.empty()) throw ConfigError("no runs configured");
    if (cfg.data_path.empty() == cfg.synthetic.empty()) {
        throw ConfigError("exactly one of data and synthetic must be given");
    }
    if (!cfg.data_path.empty() && !std::filesystem::exists(cfg.data_path)) {
        throw ConfigError("data file '" + cfg.data_path + "' does not exist");
    }
    if (cfg.max_iters < 1) throw ConfigError("max-iters must be at least 1");
    if (!(cfg.tol >= 0.0)) throw ConfigError("tol must be nonnegative");
    if (!(cfg.lambda >= 0.0) || !(cfg.lambda2 >= 0.0)) throw ConfigError("lambda values must be nonnegative");
    if (cfg.svm_lambda && !(*cfg.svm_lambda > 0.0)) throw ConfigError("svm-lambda must be positive");
    if (cfg.beta && !(*cfg.beta > 0.0)) throw ConfigError("beta must be positive");
    if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
    if (cfg.trace_every < 1) throw ConfigError("trace-every must be at least 1");
    if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0)) throw ConfigError("test-frac must be in [0, 1)");
    for (const auto& r : cfg.runs) {
        if (r.engine != "exact" && r.engine != "smips") {
            throw ConfigError("engine must be 'exact' or 'smips', got '" + r.engine + "'");
        }
        if (r.backend != "exact" && r.backend != "lsh") {
            throw ConfigError("backend must be 'exact' or 'lsh', got '" + r.backend + "'");
        }
        if (r.engine == "smips" && r.rule != Rule::kGss) {
            throw ConfigError("the smips engine only supports the gs-s rule");
        }
        if (r.engine == "smips" && r.backend == "lsh" && (r.lsh_bits > 63 || r.lsh_tables < 1)) {
            throw ConfigError("lsh-bits must be in [0, 63] and lsh-tables at least 1");
        }
    }
}

BuiltProblem build_problem(const ExperimentConfig& cfg)
{
    Dataset data;
    if (!cfg.data_path.empty()) {
        data = load_libsvm(cfg.data_path);
    } else {
        try {
            data = gen_synthetic(parse_synthetic(cfg.synthetic, cfg.seed));
        } catch (const UsageError& e) {
            throw ConfigError(std::string("synthetic: ") + e.what());
        }
    }

    const bool classify = cfg.problem == ProblemKind::kSvm || cfg.problem == ProblemKind::kLogistic;
    std::optional<Dataset> test;
    if (classify && cfg.test_fraction > 0.0) {
        auto [tr, te] = train_test_split(data, 1.0 - cfg.test_fraction, cfg.seed);
        data = std::move(tr);
        test = std::move(te);
    }

    std::vector<std::size_t> dropped;
    switch (cfg.problem) {
    case ProblemKind::kLasso:
    case ProblemKind::kElasticNet: {
        if (cfg.normalize) {
            auto nd = normalize_columns(data);
            data = std::move(nd.dataset);
            dropped = std::move(nd.dropped);
        }
        auto p = cfg.problem == ProblemKind::kLasso
                     ? make_lasso(data.matrix, data.labels, cfg.lambda)
                     : make_elastic_net(data.matrix, data.labels, cfg.lambda, cfg.lambda2);
        return {std::move(p), std::nullopt, std::move(dropped)};
    }
    case ProblemKind::kSvm: {
        if (cfg.normalize) {
            auto nd = normalize_rows(data);
            data = std::move(nd.dataset);
            dropped = std::move(nd.dropped);
            if (test) test = normalize_rows(*test).dataset;
        }
        const double n = static_cast<double>(data.n_examples());
        auto p = make_dual_svm(fold_svm(data), cfg.svm_lambda.value_or(1.0 / n));
        return {std::move(p), std::move(test), std::move(dropped)};
    }
    case ProblemKind::kLogistic: {
        if (cfg.normalize) {
            auto nd = normalize_columns(data);
            if (test) {
                DenseVector inv(nd.scales.size());
                for (std::size_t k = 0; k < inv.size(); ++k) inv[k] = 1.0 / nd.scales[k];
                test->matrix = test->matrix.select_cols(nd.kept).scale_columns(inv);
            }
            data = std::move(nd.dataset);
            dropped = std::move(nd.dropped);
        }
        auto p = make_logistic(fold_logistic(data), cfg.lambda);
        return {std::move(p), std::move(test), std::move(dropped)};
    }
    }
    throw ConfigError("unsupported problem");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const BuiltProblem& built)
{
    validate_config(cfg);
    ExperimentResult res;
    res.n_coords = built.problem.n_cols();
    res.n_rows = built.problem.n_rows();
    res.runs.resize(cfg.runs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.runs.size(); i = next++) {
            res.runs[i] = execute_run(cfg, built, cfg.runs[i], i);
        }
    };
    const std::size_t n_threads = std::min(cfg.workers, cfg.runs.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    double f_star = std::numeric_limits<double>::infinity();
    for (const auto& r : res.runs) {
        if (r.ok) f_star = std::min(f_star, best_value(r.trace));
    }
    try {
        SolverConfig polish;
        polish.rule = Rule::kGss;
        polish.max_iters = cfg.max_iters * 10;
        // Far below the run tolerance, so the polish only stops once it is converged.
        polish.tol = cfg.tol * 1e-3;
        polish.trace_every = polish.max_iters;
        f_star = std::min(f_star, best_value(solve(built.problem, polish)));
    } catch (const std::exception&) {
        // The polish run only tightens F*; sibling results stand without it.
    }
    res.f_star = f_star;
    return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    const auto t0 = Clock::now();
    const BuiltProblem built = build_problem(cfg);
    const auto load_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
    ExperimentResult res = run_experiment(cfg, built);
    res.load_ns = load_ns;
    return res;
}

std::vector<MetricsRow> metrics_rows(const ExperimentResult& r)
{
    std::vector<MetricsRow> rows;
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& run : r.runs) {
        if (!run.ok) continue;
        MetricsRow init;
        init.run_id = run.id;
        init.f_value = run.trace.f_initial;
        init.suboptimality = std::max(0.0, init.f_value - r.f_star);
        init.step_kind = "init";
        init.theta = nan;
        init.gap = run.initial_gap;
        init.test_accuracy = run.initial_test_accuracy;
        rows.push_back(init);
        for (const auto& rec : run.trace.records) {
            MetricsRow m;
            m.run_id = run.id;
            m.iter = rec.iter;
            m.wall_ns = rec.wall_ns;
            m.f_value = rec.f_value;
            m.suboptimality = std::max(0.0, rec.f_value - r.f_star);
            m.nnz = rec.nnz;
            m.step_kind = step_kind_name(rec.kind);
            m.coord = rec.coord;
            m.theta = rec.theta;
            m.gap = rec.gap;
            m.test_accuracy = rec.test_accuracy;
            m.fell_back = rec.fell_back;
            rows.push_back(m);
        }
    }
    return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows)
{
    out << kMetricsHeader << '\n';
    for (const auto& m : rows) {
        out << m.run_id << ',' << m.iter << ',' << m.wall_ns << ',' << fmt_real(m.f_value) << ','
            << fmt_real(m.suboptimality) << ',' << m.nnz << ',' << m.step_kind << ','
            << (m.coord ? std::to_string(*m.coord) : std::string()) << ',' << fmt_real(m.theta) << ','
            << fmt_real(m.gap) << ',' << fmt_real(m.test_accuracy) << ',' << (m.fell_back ? 1 : 0) << '\n';
    }
}

void write_summary_json(std::ostream& out, const ExperimentConfig& cfg, const ExperimentResult& r)
{
    nlohmann::json j;
    j["problem"] = problem_name(cfg.problem);
    j["data"] = cfg.data_path.empty() ? cfg.synthetic : cfg.data_path;
    j["n_coords"] = r.n_coords;
    j["n_rows"] = r.n_rows;
    j["f_star"] = json_real(r.f_star);
    j["load_ns"] = r.load_ns;
    j["seed"] = cfg.seed;
    j["runs"] = nlohmann::json::array();
    for (const auto& run : r.runs) {
        nlohmann::json jr;
        jr["id"] = run.id;
        jr["rule"] = rule_name(run.spec.rule);
        jr["engine"] = run.spec.engine;
        jr["backend"] = run.spec.backend;
        jr["ok"] = run.ok;
        if (!run.ok) {
            jr["error"] = run.error;
            j["runs"].push_back(jr);
            continue;
        }
        const auto& t = run.trace;
        const CounterSummary cs = run_counters(t);
        const std::size_t iters = t.counters.total();
        jr["iterations"] = iters;
        jr["stop_reason"] = stop_reason_name(t.stop);
        jr["final_objective"] = json_real(t.records.empty() ? t.f_initial : t.records.back().f_value);
        jr["counters"] = {{"good", t.counters.good}, {"bad", t.counters.bad},
                          {"cross", t.counters.cross}, {"fallback", t.counters.fallback}};
        jr["lemma_holds"] = cs.lemma_holds;
        jr["fallback_rate"] = iters ? static_cast<double>(t.counters.fallback) / static_cast<double>(iters) : 0.0;
        jr["wall_ns"] = t.wall_ns;
        jr["setup_ns"] = t.setup_ns;
        std::vector<double> thetas;
        for (const auto& rec : t.records) {
            if (!std::isnan(rec.theta)) thetas.push_back(rec.theta);
        }
        const auto q = quantiles(thetas, {0.0, 0.1, 0.5, 0.9, 1.0});
        if (q.empty()) {
            jr["theta_quantiles"] = nullptr;
        } else {
            jr["theta_quantiles"] = {{"min", q[0]}, {"p10", q[1]}, {"p50", q[2]}, {"p90", q[3]}, {"max", q[4]}};
        }
        j["runs"].push_back(jr);
    }
    out << j.dump(2) << '\n';
}

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t max_points)
{
    std::vector<std::size_t> idx;
    if (n == 0) return idx;
    if (n <= max_points) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    if (max_points < 2) return {0, n - 1};
    for (std::size_t k = 0; k < max_points; ++k) {
        const auto i = static_cast<std::size_t>(
            std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(max_points - 1)));
        if (idx.empty() || idx.back() != i) idx.push_back(i);
    }
    return idx;
}

void emit_plot_csv(std::ostream& out, const std::vector<MetricsRow>& rows, XAxis axis)
{
    if (rows.empty()) throw UsageError("emit_plot_csv: no metrics rows");
    std::vector<std::string> ids;
    std::vector<std::vector<const MetricsRow*>> series;
    for (const auto& r : rows) {
        if (ids.empty() || ids.back() != r.run_id) {
            ids.push_back(r.run_id);
            series.emplace_back();
        }
        series.back().push_back(&r);
    }
    std::vector<std::vector<std::size_t>> picks;
    std::size_t n_lines = 0;
    for (const auto& s : series) {
        picks.push_back(downsample_indices(s.size(), kMaxPlotPoints));
        n_lines = std::max(n_lines, picks.back().size());
    }
    const char* xname = axis == XAxis::kIter ? "iter" : "wall_ns";
    for (std::size_t k = 0; k < ids.size(); ++k) {
        out << (k ? "," : "") << ids[k] << '_' << xname << ',' << ids[k] << "_subopt";
    }
    out << '\n';
    for (std::size_t line = 0; line < n_lines; ++line) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (k) out << ',';
            if (line >= picks[k].size()) {
                out << ',';
                continue;
            }
            const MetricsRow& m = *series[k][picks[k][line]];
            if (axis == XAxis::kIter) out << m.iter;
            else out << m.wall_ns;
            out << ',' << fmt_real(std::max(m.suboptimality, kSuboptFloor));
        }
        out << '\n';
    }
}

void write_adaptivity_csv(std::ostream& out, const std::vector<AdaptivityRow>& rows)
{
    out << "iter,exact_all,exact_mask,lsh_all,lsh_mask,mask_over_all,lsh_mask_over_exact_mask\n";
    for (const auto& r : rows) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double ratio_mask = r.exact_all > 0.0 ? r.exact_mask / r.exact_all : nan;
        const double ratio_lsh = r.exact_mask > 0.0 ? r.lsh_mask / r.exact_mask : nan;
        out << r.iter << ',' << fmt_real(r.exact_all) << ',' << fmt_real(r.exact_mask) << ',' << fmt_real(r.lsh_all)
            << ',' << fmt_real(r.lsh_mask) << ',' << fmt_real(ratio_mask) << ',' << fmt_real(ratio_lsh) << '\n';
    }
}

std::vector<AdaptivityRow> adaptivity_report(const ExperimentConfig& cfg)
{
    ExperimentConfig c = cfg;
    c.adaptivity = true;
    const bool has_lsh = std::any_of(c.runs.begin(), c.runs.end(), [](const RunSpec& r) {
        return r.engine == "smips" && r.backend == "lsh";
    });
    if (!has_lsh) throw ConfigError("adaptivity report needs a run with the smips engine and lsh backend");
    const ExperimentResult r = run_experiment(c);
    for (const auto& run : r.runs) {
        if (run.spec.engine == "smips" && run.spec.backend == "lsh") {
            if (!run.ok) throw std::runtime_error("LSH run failed: " + run.error);
            return run.adaptivity;
        }
    }
    return {};
}

int cli_main(int argc, char** argv)
{
    CLI::App app{"Greedy coordinate descent with Gauss-Southwell rules and inner-product search selection"};
    std::map<std::string, std::string> cli_values;
    std::string config_path;
    std::vector<std::string> rules, engines, backends;
    app.add_option("--config", config_path, "flat key=value config file; flags override it");

    // Scalar options are collected as text and validated in one place.
    const std::vector<std::pair<std::string, std::string>> scalar = {
        {"problem", "lasso | svm | logistic | elasticnet"},
        {"data", "libsvm file (plain or gzip)"},
        {"synthetic", "diag:l1,l2,... | corr:n=,d=,density=,correlation=,noise=,support= | svm:n=,d=,margin="},
        {"lambda", "L1 weight (lambda1 for elastic net)"},
        {"lambda2", "elastic net L2 weight"},
        {"svm-lambda", "SVM regularization (default 1/n)"},
        {"beta", "augmentation constant (default 50/sqrt(n))"},
        {"lsh-bits", "bits per hash table (0 = floor(log2 points) - 1)"},
        {"lsh-tables", "number of hash tables"},
        {"fallback", "random | exact, used when no LSH candidate survives the mask"},
        {"max-iters", "iteration cap per run"},
        {"tol", "stopping tolerance"},
        {"seed", "random seed"},
        {"out", "output path prefix"},
        {"workers", "parallel runs"},
        {"trace-every", "record every k-th step"},
        {"test-frac", "held-out fraction for test accuracy (svm, logistic)"},
    };
    std::map<std::string, std::string> scalar_values;
    for (const auto& [name, help] : scalar) {
        app.add_option("--" + name, scalar_values[name], help);
    }
    app.add_option("--rule", rules, "gs-s | gs-r | gs-q | uniform (repeatable)");
    app.add_option("--engine", engines, "exact | smips (repeatable)");
    app.add_option("--backend", backends, "exact | lsh for the smips engine (repeatable)");
    bool normalize = false, adaptivity = false, line_search = false, theta = false;
    auto* f_norm = app.add_flag("--normalize", normalize, "scale columns (SVM: examples) to unit norm");
    auto* f_adapt = app.add_flag("--adaptivity", adaptivity, "write the four-way LSH adaptivity report");
    auto* f_ls = app.add_flag("--line-search", line_search, "exact 1-d line search instead of the prox step");
    auto* f_theta = app.add_flag("--theta", theta, "measure theta against the exact score every step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    ExperimentConfig cfg;
    try {
        std::map<std::string, std::string> values;
        if (!config_path.empty()) values = read_config_file(config_path);
        for (const auto& [name, help] : scalar) {
            if (app.count("--" + name)) values[name] = scalar_values[name];
        }
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
            return s;
        };
        if (!rules.empty()) values["rule"] = join(rules);
        if (!engines.empty()) values["engine"] = join(engines);
        if (!backends.empty()) values["backend"] = join(backends);
        if (f_norm->count()) values["normalize"] = normalize ? "true" : "false";
        if (f_adapt->count()) values["adaptivity"] = adaptivity ? "true" : "false";
        if (f_ls->count()) values["line-search"] = line_search ? "true" : "false";
        if (f_theta->count()) values["theta"] = theta ? "true" : "false";
        cfg = config_from_values(values);
        validate_config(cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    ExperimentResult result;
    try {
        result = run_experiment(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        const std::filesystem::path prefix(cfg.out);
        if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
        const auto rows = metrics_rows(result);
        {
            std::ofstream f(cfg.out + ".metrics.csv");
            write_metrics_csv(f, rows);
        }
        {
            std::ofstream f(cfg.out + ".summary.json");
            write_summary_json(f, cfg, result);
        }
        if (!rows.empty()) {
            std::ofstream f(cfg.out + ".plot.csv");
            emit_plot_csv(f, rows, XAxis::kIter);
        }
        if (cfg.adaptivity) {
            for (const auto& run : result.runs) {
                if (run.ok && !run.adaptivity.empty()) {
                    std::ofstream f(cfg.out + ".adaptivity.csv");
                    write_adaptivity_csv(f, run.adaptivity);
                    break;
                }
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error writing outputs: " << e.what() << '\n';
        return 2;
    }

    bool failed = false;
    for (const auto& run : result.runs) {
        const std::string status = run.ok ? "ok" : "FAILED: " + run.error;
        std::cout << run.id << ": " << status;
        if (run.ok) {
            const auto& t = run.trace;
            std::cout << " iters=" << t.counters.total() << " stop=" << stop_reason_name(t.stop)
                      << " F=" << fmt_real(t.records.empty() ? t.f_initial : t.records.back().f_value);
        }
        std::cout << '\n';
        failed = failed || !run.ok;
    }
    std::cout << "F* = " << fmt_real(result.f_star) << '\n';
    return failed ? 2 : 0;
}

} // namespace gscd
