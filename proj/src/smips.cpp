#include <gscd/smips.hpp>
#include <gscd/errors.hpp>

#include <algorithm>
#include <bit>
#include <cmath>

namespace gscd {

namespace {

void require_beta(double beta)
{
    if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("beta must be positive and finite");
}

void require_c(const SparseColMatrix& a, std::span<const double> c)
{
    if (c.size() != a.n_cols()) throw UsageError("linear term length must equal n_cols");
}

// Signs of (first slot, whole point) for the four L1 variants in id order.
constexpr double kL1SlotSign[4] = {1.0, 1.0, -1.0, -1.0};
constexpr double kL1PointSign[4] = {1.0, -1.0, 1.0, -1.0};

// Assembles point columns. head(j, k) writes the augmented slots of variant k
// of coordinate j into (rows, vals); A_j follows shifted by a_offset.
template <class Head>
SparseColMatrix assemble(const SparseColMatrix& a, std::size_t dim, std::size_t variants,
                         std::size_t a_offset, Head&& head)
{
    const std::size_t n = a.n_cols();
    std::vector<std::size_t> starts{0};
    std::vector<std::uint32_t> rows;
    std::vector<double> vals;
    starts.reserve(n * variants + 1);
    for (std::size_t j = 0; j < n; ++j) {
        const auto col = a.column(j);
        for (std::size_t k = 0; k < variants; ++k) {
            const double sgn = head(j, k, rows, vals);
            for (std::size_t e = 0; e < col.nnz(); ++e) {
                rows.push_back(static_cast<std::uint32_t>(col.rows[e] + a_offset));
                vals.push_back(sgn * col.vals[e]);
            }
            starts.push_back(vals.size());
        }
    }
    return SparseColMatrix(dim, n * variants, std::move(starts), std::move(rows), std::move(vals));
}

void push_nonzero(std::vector<std::uint32_t>& rows, std::vector<double>& vals, std::size_t r, double v)
{
    if (v != 0.0) {
        rows.push_back(static_cast<std::uint32_t>(r));
        vals.push_back(v);
    }
}

std::size_t variants_of(MappingKind kind)
{
    return (kind == MappingKind::kL1 || kind == MappingKind::kElasticNet) ? 4 : 2;
}

} // namespace

std::string sign_tag_name(SignTag t)
{
    switch (t) {
    case SignTag::kPlusPos: return "+A+";
    case SignTag::kMinusPos: return "-A+";
    case SignTag::kPlusNeg: return "+A-";
    case SignTag::kMinusNeg: return "-A-";
    case SignTag::kPlus: return "+A";
    case SignTag::kMinus: return "-A";
    }
    return "?";
}

AugmentedPointSet::AugmentedPointSet(MappingKind kind, double beta, std::size_t n_coords, SparseColMatrix points)
    : kind_(kind), beta_(beta), n_coords_(n_coords), points_(std::move(points))
{
    if (points_.n_cols() != n_coords_ * variants_of(kind_)) {
        throw UsageError("AugmentedPointSet: point count does not match mapping");
    }
}

PointTag AugmentedPointSet::point_to_coordinate(std::size_t id) const
{
    if (id >= n_points()) throw UsageError("point id " + std::to_string(id) + " out of range");
    const std::size_t v = variants_of(kind_);
    const std::size_t k = id % v;
    if (v == 4) return {id / 4, static_cast<SignTag>(k)};
    return {id / 2, k == 0 ? SignTag::kPlus : SignTag::kMinus};
}

std::size_t AugmentedPointSet::point_id(std::size_t coord, SignTag tag) const
{
    if (coord >= n_coords_) throw UsageError("point_id: coordinate out of range");
    const bool four = variants_of(kind_) == 4;
    const bool tag_four = tag != SignTag::kPlus && tag != SignTag::kMinus;
    if (four != tag_four) throw UsageError("point_id: tag does not belong to this mapping");
    if (four) return 4 * coord + static_cast<std::size_t>(tag);
    return 2 * coord + (tag == SignTag::kPlus ? 0 : 1);
}

DenseVector AugmentedPointSet::point(std::size_t id) const
{
    if (id >= n_points()) throw UsageError("point id out of range");
    DenseVector out(dim(), 0.0);
    const auto col = points_.column(id);
    for (std::size_t k = 0; k < col.nnz(); ++k) out[col.rows[k]] = col.vals[k];
    return out;
}

double AugmentedPointSet::inner(std::size_t id, std::span<const double> q) const
{
    return col_dot(points_, id, q);
}

double default_beta(std::size_t n_coords)
{
    if (n_coords == 0) throw UsageError("default_beta: no coordinates");
    return 50.0 / std::sqrt(static_cast<double>(n_coords));
}

AugmentedPointSet build_l1_points(const SparseColMatrix& a, std::span<const double> c, double beta)
{
    require_beta(beta);
    require_c(a, c);
    auto pts = assemble(a, a.n_rows() + 2, 4, 2, [&](std::size_t j, std::size_t k, auto& rows, auto& vals) {
        const double ps = kL1PointSign[k];
        push_nonzero(rows, vals, 0, ps * kL1SlotSign[k] * beta);
        push_nonzero(rows, vals, 1, ps * beta * c[j]);
        return ps;
    });
    return AugmentedPointSet(MappingKind::kL1, beta, a.n_cols(), std::move(pts));
}

AugmentedPointSet build_elastic_net_points(const SparseColMatrix& a, std::span<const double> c, double beta)
{
    require_beta(beta);
    require_c(a, c);
    const std::size_t n = a.n_cols();
    auto pts = assemble(a, a.n_rows() + n + 2, 4, n + 2, [&](std::size_t j, std::size_t k, auto& rows, auto& vals) {
        const double ps = kL1PointSign[k];
        push_nonzero(rows, vals, 0, ps * kL1SlotSign[k] * beta);
        push_nonzero(rows, vals, 1, ps * beta * c[j]);
        push_nonzero(rows, vals, 2 + j, ps * beta);
        return ps;
    });
    return AugmentedPointSet(MappingKind::kElasticNet, beta, n, std::move(pts));
}

AugmentedPointSet build_box_points(const SparseColMatrix& a, std::span<const double> c, double beta)
{
    require_beta(beta);
    require_c(a, c);
    for (double x : c) {
        if (x != c.front()) {
            throw UsageError("build_box_points: the linear term must be uniform across coordinates");
        }
    }
    auto pts = assemble(a, a.n_rows() + 1, 2, 1, [&](std::size_t, std::size_t k, auto& rows, auto& vals) {
        const double ps = k == 0 ? 1.0 : -1.0;
        push_nonzero(rows, vals, 0, ps * beta);
        return ps;
    });
    return AugmentedPointSet(MappingKind::kBox, beta, a.n_cols(), std::move(pts));
}

AugmentedPointSet build_l2_points(const SparseColMatrix& a, double beta)
{
    require_beta(beta);
    const std::size_t n = a.n_cols();
    auto pts = assemble(a, a.n_rows() + n, 2, n, [&](std::size_t j, std::size_t k, auto& rows, auto& vals) {
        const double ps = k == 0 ? 1.0 : -1.0;
        push_nonzero(rows, vals, j, ps * beta);
        return ps;
    });
    return AugmentedPointSet(MappingKind::kL2, beta, n, std::move(pts));
}

DenseVector build_l1_query(std::span<const double> grad_l, double lambda, double beta)
{
    require_beta(beta);
    DenseVector q(grad_l.size() + 2);
    q[0] = lambda / beta;
    q[1] = 1.0 / beta;
    std::copy(grad_l.begin(), grad_l.end(), q.begin() + 2);
    return q;
}

DenseVector build_elastic_net_query(
    std::span<const double> grad_l, std::span<const double> alpha, double lambda1, double lambda2, double beta
)
{
    require_beta(beta);
    DenseVector q(grad_l.size() + alpha.size() + 2);
    q[0] = lambda1 / beta;
    q[1] = 1.0 / beta;
    for (std::size_t j = 0; j < alpha.size(); ++j) q[2 + j] = lambda2 / beta * alpha[j];
    std::copy(grad_l.begin(), grad_l.end(), q.begin() + 2 + static_cast<std::ptrdiff_t>(alpha.size()));
    return q;
}

DenseVector build_box_query(std::span<const double> grad_l, double c_slot, double beta)
{
    require_beta(beta);
    DenseVector q(grad_l.size() + 1);
    q[0] = c_slot / beta;
    std::copy(grad_l.begin(), grad_l.end(), q.begin() + 1);
    return q;
}

DenseVector build_l2_query(std::span<const double> grad_l, std::span<const double> alpha, double lambda, double beta)
{
    require_beta(beta);
    DenseVector q(grad_l.size() + alpha.size());
    for (std::size_t j = 0; j < alpha.size(); ++j) q[j] = lambda / beta * alpha[j];
    std::copy(grad_l.begin(), grad_l.end(), q.begin() + static_cast<std::ptrdiff_t>(alpha.size()));
    return q;
}

SubsetMask::SubsetMask(MappingKind kind, std::size_t n_points) : kind_(kind), pos_(n_points, kAbsent)
{
    if (n_points >= kAbsent) throw UsageError("SubsetMask: too many points");
}

void SubsetMask::insert(std::size_t id)
{
    if (id >= pos_.size()) throw UsageError("SubsetMask: point id out of range");
    if (pos_[id] != kAbsent) return;
    pos_[id] = static_cast<std::uint32_t>(members_.size());
    members_.push_back(static_cast<std::uint32_t>(id));
}

void SubsetMask::erase(std::size_t id)
{
    if (id >= pos_.size()) throw UsageError("SubsetMask: point id out of range");
    const std::uint32_t p = pos_[id];
    if (p == kAbsent) return;
    const std::uint32_t last = members_.back();
    members_[p] = last;
    pos_[last] = p;
    members_.pop_back();
    pos_[id] = kAbsent;
}

std::size_t SubsetMask::random_member(std::mt19937_64& rng) const
{
    if (members_.empty()) throw UsageError("random_member: mask is empty");
    std::uniform_int_distribution<std::size_t> dist(0, members_.size() - 1);
    return members_[dist(rng)];
}

std::vector<char> SubsetMask::to_flags() const
{
    std::vector<char> f(pos_.size(), 0);
    for (auto m : members_) f[m] = 1;
    return f;
}

bool SubsetMask::operator==(const SubsetMask& other) const
{
    return kind_ == other.kind_ && to_flags() == other.to_flags();
}

unsigned l1_variant_bits(double alpha_j) noexcept
{
    if (alpha_j > 0.0) return 0b0011;  // +A+, -A+
    if (alpha_j < 0.0) return 0b1100;  // +A-, -A-
    return 0b0110;                     // -A+, +A-
}

unsigned box_variant_bits(double alpha_j) noexcept
{
    return (alpha_j > 0.0 ? 0b01u : 0u) | (alpha_j < 1.0 ? 0b10u : 0u);
}

namespace {

unsigned variant_bits(MappingKind kind, double alpha_j)
{
    switch (kind) {
    case MappingKind::kL1:
    case MappingKind::kElasticNet: return l1_variant_bits(alpha_j);
    case MappingKind::kBox: return box_variant_bits(alpha_j);
    case MappingKind::kL2: return 0b11;
    }
    return 0;
}

} // namespace

SubsetMask build_mask(MappingKind kind, std::span<const double> alpha)
{
    const std::size_t v = variants_of(kind);
    SubsetMask m(kind, alpha.size() * v);
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        const unsigned bits = variant_bits(kind, alpha[j]);
        for (std::size_t k = 0; k < v; ++k) {
            if (bits & (1u << k)) m.insert(v * j + k);
        }
    }
    return m;
}

SubsetMask build_l1_mask(std::span<const double> alpha, MappingKind kind)
{
    if (kind != MappingKind::kL1 && kind != MappingKind::kElasticNet) {
        throw UsageError("build_l1_mask: mapping kind must be L1 or elastic net");
    }
    return build_mask(kind, alpha);
}

SubsetMask build_box_mask(std::span<const double> alpha)
{
    return build_mask(MappingKind::kBox, alpha);
}

SubsetMask build_full_mask(MappingKind kind, std::size_t n_points)
{
    SubsetMask m(kind, n_points);
    for (std::size_t i = 0; i < n_points; ++i) m.insert(i);
    return m;
}

int update_mask_after_step(SubsetMask& m, std::size_t j, double old_val, double new_val)
{
    const std::size_t v = variants_of(m.kind());
    if (v * (j + 1) > m.size()) throw UsageError("update_mask_after_step: coordinate out of range");
    const unsigned before = variant_bits(m.kind(), old_val);
    const unsigned after = variant_bits(m.kind(), new_val);
    const unsigned diff = before ^ after;
    for (std::size_t k = 0; k < v; ++k) {
        if (diff & (1u << k)) m.set(v * j + k, (after >> k) & 1u);
    }
    return std::popcount(diff);
}

int default_lsh_bits(std::size_t n_points)
{
    if (n_points < 2) return 1;
    const int lg = static_cast<int>(std::bit_width(n_points)) - 1;
    return std::clamp(lg - 1, 1, 63);
}

SmipsIndex::SmipsIndex(const AugmentedPointSet& ps, SmipsBackend backend) : ps_(&ps), backend_(backend)
{
    const auto* lsh = std::get_if<HyperplaneLsh>(&backend_);
    if (!lsh) return;
    bits_ = lsh->bits_per_table == 0 ? default_lsh_bits(ps.n_points()) : lsh->bits_per_table;
    tables_ = lsh->n_tables;
    fallback_ = lsh->fallback;
    if (bits_ < 1 || bits_ > 63) throw UsageError("HyperplaneLsh: bits_per_table must be in [1, 63]");
    if (tables_ < 1) throw UsageError("HyperplaneLsh: n_tables must be at least 1");

    const std::size_t dim = ps.dim();
    const std::size_t n_hyper = static_cast<std::size_t>(bits_) * static_cast<std::size_t>(tables_);
    std::mt19937_64 rng(lsh->seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    hyperplanes_.resize(n_hyper * dim);
    for (double& h : hyperplanes_) h = gauss(rng);

    buckets_.resize(static_cast<std::size_t>(tables_));
    for (int t = 0; t < tables_; ++t) {
        for (std::size_t id = 0; id < ps.n_points(); ++id) {
            buckets_[static_cast<std::size_t>(t)][hash_point(t, id)].push_back(static_cast<std::uint32_t>(id));
        }
    }
}

void SmipsIndex::check_query(std::span<const double> q) const
{
    if (q.size() != ps_->dim()) {
        throw UsageError("smips query dimension " + std::to_string(q.size()) + " does not match point dimension "
                         + std::to_string(ps_->dim()));
    }
}

std::uint64_t SmipsIndex::hash_point(int table, std::size_t id) const
{
    if (tables_ == 0) throw UsageError("hash_point: index has no hash tables");
    const auto col = ps_->points().column(id);
    const std::size_t dim = ps_->dim();
    std::uint64_t h = 0;
    for (int b = 0; b < bits_; ++b) {
        const double* r = hyperplanes_.data() + (static_cast<std::size_t>(table) * bits_ + b) * dim;
        double acc = 0.0;
        for (std::size_t k = 0; k < col.nnz(); ++k) acc += r[col.rows[k]] * col.vals[k];
        if (acc >= 0.0) h |= std::uint64_t{1} << b;
    }
    return h;
}

double SmipsIndex::projection(std::size_t h, std::span<const double> q, const ProjectionCache* cache) const
{
    const std::size_t dim = ps_->dim();
    const double* r = hyperplanes_.data() + h * dim;
    double acc = 0.0;
    if (cache) {
        acc = cache->partial[h];
        for (std::size_t i = 0; i < cache->offset; ++i) acc += r[i] * q[i];
        for (std::size_t i = cache->offset + cache->length; i < dim; ++i) acc += r[i] * q[i];
    } else {
        for (std::size_t i = 0; i < dim; ++i) acc += r[i] * q[i];
    }
    return acc;
}

std::uint64_t SmipsIndex::hash_query(int table, std::span<const double> q, const ProjectionCache* cache) const
{
    if (tables_ == 0) throw UsageError("hash_query: index has no hash tables");
    check_query(q);
    std::uint64_t h = 0;
    for (int b = 0; b < bits_; ++b) {
        if (projection(static_cast<std::size_t>(table) * bits_ + b, q, cache) >= 0.0) h |= std::uint64_t{1} << b;
    }
    return h;
}

ProjectionCache SmipsIndex::make_cache(std::size_t offset, double scale, std::span<const double> alpha) const
{
    if (offset + alpha.size() > ps_->dim()) throw UsageError("make_cache: block exceeds point dimension");
    ProjectionCache c;
    c.offset = offset;
    c.length = alpha.size();
    c.scale = scale;
    const std::size_t dim = ps_->dim();
    const std::size_t n_hyper = static_cast<std::size_t>(bits_) * static_cast<std::size_t>(tables_);
    c.partial.assign(n_hyper, 0.0);
    for (std::size_t h = 0; h < n_hyper; ++h) {
        const double* r = hyperplanes_.data() + h * dim + offset;
        double acc = 0.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) acc += r[j] * alpha[j];
        c.partial[h] = scale * acc;
    }
    return c;
}

void SmipsIndex::update_cache(ProjectionCache& c, std::size_t j, double delta_alpha) const
{
    if (j >= c.length) throw UsageError("update_cache: coordinate out of range");
    const std::size_t dim = ps_->dim();
    for (std::size_t h = 0; h < c.partial.size(); ++h) {
        c.partial[h] += c.scale * delta_alpha * hyperplanes_[h * dim + c.offset + j];
    }
}

SmipsResult SmipsIndex::exact(std::span<const double> q, const SubsetMask& m) const
{
    check_query(q);
    if (m.size() != ps_->n_points()) throw UsageError("smips: mask size does not match point set");
    if (m.count() == 0) throw UsageError("smips: empty mask");
    SmipsResult best;
    bool have = false;
    for (auto id : m.members()) {
        const double v = ps_->inner(id, q);
        if (!have || v > best.value || (v == best.value && id < best.id)) {
            best.id = id;
            best.value = v;
            have = true;
        }
    }
    return best;
}

SmipsResult SmipsIndex::exact_all(std::span<const double> q) const
{
    check_query(q);
    SmipsResult best;
    for (std::size_t id = 0; id < ps_->n_points(); ++id) {
        const double v = ps_->inner(id, q);
        if (id == 0 || v > best.value) {
            best.id = id;
            best.value = v;
        }
    }
    return best;
}

std::vector<std::uint32_t> SmipsIndex::candidates(std::span<const double> q, const ProjectionCache* cache) const
{
    std::vector<std::uint32_t> out;
    for (int t = 0; t < tables_; ++t) {
        const auto& table = buckets_[static_cast<std::size_t>(t)];
        const auto it = table.find(hash_query(t, q, cache));
        if (it != table.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SmipsResult SmipsIndex::query(std::span<const double> q, const SubsetMask& m, std::mt19937_64& rng,
                              const ProjectionCache* cache) const
{
    if (is_exact()) return exact(q, m);
    check_query(q);
    if (m.size() != ps_->n_points()) throw UsageError("smips: mask size does not match point set");
    if (m.count() == 0) throw UsageError("smips: empty mask");

    SmipsResult best;
    bool have = false;
    for (auto id : candidates(q, cache)) {
        if (!m.contains(id)) continue;
        const double v = ps_->inner(id, q);
        if (!have || v > best.value) {
            best.id = id;
            best.value = v;
            have = true;
        }
    }
    if (have) return best;

    if (fallback_ == Fallback::kExactScan) {
        best = exact(q, m);
    } else {
        best.id = m.random_member(rng);
        best.value = ps_->inner(best.id, q);
    }
    best.fell_back = true;
    return best;
}

SmipsResult smips_query(
    const AugmentedPointSet& ps, std::span<const double> q, const SubsetMask& m, const SmipsBackend& backend
)
{
    SmipsIndex index(ps, backend);
    std::uint64_t seed = 0;
    if (const auto* lsh = std::get_if<HyperplaneLsh>(&backend)) seed = lsh->seed;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    return index.query(q, m, rng);
}

} // namespace gscd
