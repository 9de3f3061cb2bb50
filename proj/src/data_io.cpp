#include <gscd/data_io.hpp>
#include <gscd/errors.hpp>

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace gscd {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_real(std::string_view tok, std::size_t line, const char* what)
{
    double v = 0.0;
    if (tok.size() > 1 && tok.front() == '+') tok.remove_prefix(1);
    const auto* end = tok.data() + tok.size();
    const auto r = std::from_chars(tok.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) {
        throw ParseError(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
    }
    return v;
}

std::size_t parse_index(std::string_view tok, std::size_t line)
{
    std::size_t v = 0;
    const auto* end = tok.data() + tok.size();
    const auto r = std::from_chars(tok.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) {
        throw ParseError(line, "bad feature index '" + std::string(tok) + "'");
    }
    if (v == 0) throw ParseError(line, "feature index 0 (indices are 1-based)");
    return v;
}

std::string format_real(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string read_file_bytes(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    unsigned char magic[2] = {0, 0};
    f.read(reinterpret_cast<char*>(magic), 2);
    const bool gz = f.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
    f.close();
    if (!gz) {
        std::ifstream plain(path, std::ios::binary);
        std::ostringstream ss;
        ss << plain.rdbuf();
        return ss.str();
    }
    gzFile z = gzopen(path.c_str(), "rb");
    if (!z) throw ConfigError("cannot open gzip file '" + path + "'");
    std::string out;
    char buf[1 << 16];
    int got = 0;
    while ((got = gzread(z, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(got));
    const bool failed = got < 0;
    gzclose(z);
    if (failed) throw ConfigError("corrupt gzip stream in '" + path + "'");
    return out;
}

NormalizedDataset normalize_impl(const Dataset& d)
{
    NormalizedDataset out;
    const auto& m = d.matrix;
    for (std::size_t j = 0; j < m.n_cols(); ++j) {
        (m.col_sq_norm(j) > 0.0 ? out.kept : out.dropped).push_back(j);
    }
    SparseColMatrix kept = m.select_cols(out.kept);
    out.scales.resize(out.kept.size());
    DenseVector inv(out.kept.size());
    for (std::size_t k = 0; k < out.kept.size(); ++k) {
        out.scales[k] = std::sqrt(kept.col_sq_norm(k));
        inv[k] = 1.0 / out.scales[k];
    }
    out.dataset = Dataset{kept.scale_columns(inv), d.labels, d.name};
    return out;
}

} // namespace

Dataset parse_libsvm(std::istream& in, std::size_t min_features, std::string name)
{
    std::vector<Triplet> entries;
    DenseVector labels;
    std::size_t n_features = min_features;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const std::size_t row = labels.size();
        std::size_t pos = 0;
        std::size_t prev = 0;
        bool first = true;
        while (pos < line.size()) {
            const auto end = std::min(line.find_first_of(" \t", pos), line.size());
            const std::string_view tok = line.substr(pos, end - pos);
            pos = line.find_first_not_of(" \t", end);
            if (pos == std::string_view::npos) pos = line.size();
            if (first) {
                labels.push_back(parse_real(tok, line_no, "label"));
                first = false;
                continue;
            }
            const auto colon = tok.find(':');
            if (colon == std::string_view::npos) {
                throw ParseError(line_no, "expected idx:val, got '" + std::string(tok) + "'");
            }
            const std::size_t idx = parse_index(tok.substr(0, colon), line_no);
            if (idx == prev) throw ParseError(line_no, "duplicate feature index " + std::to_string(idx));
            if (idx < prev) throw ParseError(line_no, "feature indices must be increasing");
            prev = idx;
            const double v = parse_real(tok.substr(colon + 1), line_no, "feature value");
            n_features = std::max(n_features, idx);
            entries.push_back({row, idx - 1, v});
        }
    }
    if (labels.empty()) throw ParseError(line_no, "empty dataset");
    Dataset d;
    d.matrix = SparseColMatrix::from_triplets(labels.size(), n_features, std::move(entries));
    d.labels = std::move(labels);
    d.name = std::move(name);
    return d;
}

Dataset parse_libsvm_text(std::string_view text, std::size_t min_features, std::string name)
{
    std::istringstream in{std::string(text)};
    return parse_libsvm(in, min_features, std::move(name));
}

Dataset load_libsvm(const std::string& path, std::size_t min_features)
{
    const std::string bytes = read_file_bytes(path);
    std::string name = path;
    if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
    return parse_libsvm_text(bytes, min_features, std::move(name));
}

void write_libsvm(std::ostream& out, const Dataset& d)
{
    const SparseColMatrix rows = d.matrix.transpose();
    for (std::size_t i = 0; i < rows.n_cols(); ++i) {
        out << format_real(i < d.labels.size() ? d.labels[i] : 0.0);
        const auto c = rows.column(i);
        for (std::size_t k = 0; k < c.nnz(); ++k) {
            out << ' ' << (c.rows[k] + 1) << ':' << format_real(c.vals[k]);
        }
        out << '\n';
    }
}

SparseColMatrix fold_svm(const Dataset& d)
{
    if (d.labels.size() != d.n_examples()) throw UsageError("fold_svm: one label per example required");
    return d.matrix.transpose().scale_columns(d.labels);
}

SparseColMatrix fold_logistic(const Dataset& d)
{
    return fold_svm(d).transpose();
}

NormalizedDataset normalize_columns(const Dataset& d)
{
    return normalize_impl(d);
}

NormalizedDataset normalize_rows(const Dataset& d)
{
    const Dataset t{d.matrix.transpose(), {}, d.name};
    NormalizedDataset r = normalize_impl(t);
    r.dataset.matrix = r.dataset.matrix.transpose();
    r.dataset.labels.clear();
    for (auto i : r.kept) r.dataset.labels.push_back(d.labels.at(i));
    return r;
}

double diag_mu1(const std::vector<double>& spectrum)
{
    if (spectrum.empty()) throw UsageError("diag_mu1: empty spectrum");
    double s = 0.0;
    for (double l : spectrum) {
        if (!(l > 0.0)) throw UsageError("diag_mu1: spectrum must be positive");
        s += 1.0 / l;
    }
    return 1.0 / s;
}

namespace {

Dataset gen_diag(const DiagQuadratic& k, std::mt19937_64& rng)
{
    const std::size_t n = k.spectrum.size();
    if (n == 0) throw UsageError("DiagQuadratic: empty spectrum");
    std::vector<Triplet> e;
    for (std::size_t j = 0; j < n; ++j) {
        if (!(k.spectrum[j] > 0.0)) throw UsageError("DiagQuadratic: spectrum must be positive");
        e.push_back({j, j, std::sqrt(k.spectrum[j])});
    }
    std::normal_distribution<double> g(0.0, 1.0);
    DenseVector b(n);
    for (double& x : b) x = g(rng);
    return {SparseColMatrix::from_triplets(n, n, std::move(e)), std::move(b), "diag"};
}

Dataset gen_correlated(const CorrelatedLasso& k, std::mt19937_64& rng)
{
    if (k.n == 0 || k.d == 0) throw UsageError("CorrelatedLasso: dimensions must be at least 1");
    if (!(k.density > 0.0 && k.density <= 1.0)) throw UsageError("CorrelatedLasso: density must be in (0, 1]");
    if (!(k.correlation >= 0.0 && k.correlation < 1.0)) {
        throw UsageError("CorrelatedLasso: correlation must be in [0, 1)");
    }
    if (!(k.noise >= 0.0)) throw UsageError("CorrelatedLasso: noise must be nonnegative");
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Shared factor gives every pair of (dense) columns correlation rho.
    DenseVector shared(k.d);
    for (double& x : shared) x = g(rng);
    const double a = std::sqrt(1.0 - k.correlation);
    const double c = std::sqrt(k.correlation);
    std::vector<Triplet> e;
    for (std::size_t j = 0; j < k.n; ++j) {
        for (std::size_t i = 0; i < k.d; ++i) {
            const double v = a * g(rng) + c * shared[i];
            if (k.density >= 1.0 || u(rng) < k.density) e.push_back({i, j, v});
        }
    }
    SparseColMatrix m = SparseColMatrix::from_triplets(k.d, k.n, std::move(e));

    std::vector<std::size_t> idx(k.n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    DenseVector truth(k.n, 0.0);
    for (std::size_t s = 0; s < std::min(k.support, k.n); ++s) {
        truth[idx[s]] = (u(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + u(rng));
    }
    DenseVector b = multiply(m, truth);
    for (double& x : b) x += k.noise * g(rng);
    return {std::move(m), std::move(b), "correlated"};
}

Dataset gen_svm(const RandomSvm& k, std::mt19937_64& rng)
{
    if (k.n == 0 || k.d == 0) throw UsageError("RandomSvm: dimensions must be at least 1");
    if (!(k.margin >= 0.0)) throw UsageError("RandomSvm: margin must be nonnegative");
    std::normal_distribution<double> g(0.0, 1.0);
    DenseVector w(k.d);
    double wn = 0.0;
    for (double& x : w) {
        x = g(rng);
        wn += x * x;
    }
    wn = std::sqrt(wn);
    for (double& x : w) x /= wn;

    std::vector<Triplet> e;
    DenseVector labels;
    DenseVector x(k.d);
    std::size_t attempts = 0;
    while (labels.size() < k.n) {
        if (++attempts > 1000 * k.n + 1000) throw UsageError("RandomSvm: margin too large to sample");
        double norm = 0.0;
        for (double& xi : x) {
            xi = g(rng);
            norm += xi * xi;
        }
        norm = std::sqrt(norm);
        double proj = 0.0;
        for (std::size_t i = 0; i < k.d; ++i) {
            x[i] /= norm;
            proj += x[i] * w[i];
        }
        if (std::abs(proj) < k.margin) continue;
        const std::size_t row = labels.size();
        for (std::size_t i = 0; i < k.d; ++i) e.push_back({row, i, x[i]});
        labels.push_back(proj > 0.0 ? 1.0 : -1.0);
    }
    return {SparseColMatrix::from_triplets(k.n, k.d, std::move(e)), std::move(labels), "svm"};
}

} // namespace

Dataset gen_synthetic(const SynthSpec& spec)
{
    std::mt19937_64 rng(spec.seed);
    return std::visit([&](const auto& k) -> Dataset {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DiagQuadratic>) return gen_diag(k, rng);
        else if constexpr (std::is_same_v<K, CorrelatedLasso>) return gen_correlated(k, rng);
        else return gen_svm(k, rng);
    }, spec.kind);
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double frac, std::uint64_t seed)
{
    if (!(frac > 0.0 && frac < 1.0)) throw UsageError("train_test_split: frac must be in (0, 1)");
    const std::size_t n = d.n_examples();
    const auto n_train = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) throw UsageError("train_test_split: one side of the split is empty");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    auto take = [&](const std::vector<std::size_t>& rows, const char* suffix) {
        Dataset out;
        out.matrix = d.matrix.select_rows(rows);
        for (auto r : rows) out.labels.push_back(d.labels.at(r));
        out.name = d.name + suffix;
        return out;
    };
    return {take(tr, ".train"), take(te, ".test")};
}

} // namespace gscd
