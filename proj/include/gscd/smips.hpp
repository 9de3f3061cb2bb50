#pragma once
#include <gscd/sparse.hpp>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace gscd {

// kElasticNet extends the L1 points with a beta*e_j block so that the
// lambda2*alpha_j gradient term is carried by the query.
enum class MappingKind { kL1, kBox, kL2, kElasticNet };

// Sign variants. For L1-type mappings: +A^+, -A^+, +A^-, -A^- (point ids 4j..4j+3).
// For box and L2 mappings: +A, -A (point ids 2j, 2j+1).
enum class SignTag : std::uint8_t { kPlusPos, kMinusPos, kPlusNeg, kMinusNeg, kPlus, kMinus };

std::string sign_tag_name(SignTag t);

struct PointTag
{
    std::size_t coord;
    SignTag tag;
};

/**
 * Augmented points stored as columns of a sparse matrix, augmented slots first.
 *
 *   L1:          (s*beta, beta*c_j, A_j)               dim d+2, 4n points
 *   ElasticNet:  (s*beta, beta*c_j, beta*e_j, A_j)     dim n+d+2, 4n points
 *   Box:         (beta, A_j)                           dim d+1, 2n points
 *   L2:          (beta*e_j, A_j)                       dim n+d, 2n points
 */
class AugmentedPointSet
{
public:
    AugmentedPointSet(MappingKind kind, double beta, std::size_t n_coords, SparseColMatrix points);

    MappingKind kind() const noexcept { return kind_; }
    double beta() const noexcept { return beta_; }
    std::size_t n_coords() const noexcept { return n_coords_; }
    std::size_t n_points() const noexcept { return points_.n_cols(); }
    std::size_t dim() const noexcept { return points_.n_rows(); }
    const SparseColMatrix& points() const noexcept { return points_; }

    PointTag point_to_coordinate(std::size_t id) const;
    std::size_t point_id(std::size_t coord, SignTag tag) const;
    // Dense copy of one point, for tests and diagnostics.
    DenseVector point(std::size_t id) const;
    double inner(std::size_t id, std::span<const double> q) const;

private:
    MappingKind kind_;
    double beta_;
    std::size_t n_coords_;
    SparseColMatrix points_;
};

double default_beta(std::size_t n_coords);

AugmentedPointSet build_l1_points(const SparseColMatrix& a, std::span<const double> c, double beta);
AugmentedPointSet build_elastic_net_points(const SparseColMatrix& a, std::span<const double> c, double beta);
// Throws UsageError unless c is uniform; the query carries c in a single slot.
AugmentedPointSet build_box_points(const SparseColMatrix& a, std::span<const double> c, double beta);
AugmentedPointSet build_l2_points(const SparseColMatrix& a, double beta);

// (lambda/beta, 1/beta, grad_l)
DenseVector build_l1_query(std::span<const double> grad_l, double lambda, double beta);
// (lambda1/beta, 1/beta, (lambda2/beta) alpha, grad_l)
DenseVector build_elastic_net_query(
    std::span<const double> grad_l, std::span<const double> alpha, double lambda1, double lambda2, double beta
);
// (c/beta, grad_l)
DenseVector build_box_query(std::span<const double> grad_l, double c_slot, double beta);
// ((lambda/beta) alpha, grad_l)
DenseVector build_l2_query(std::span<const double> grad_l, std::span<const double> alpha, double lambda, double beta);

/**
 * Live candidate subset. Membership toggles and uniform sampling are O(1).
 */
class SubsetMask
{
public:
    SubsetMask(MappingKind kind, std::size_t n_points);

    MappingKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return pos_.size(); }
    std::size_t count() const noexcept { return members_.size(); }
    bool contains(std::size_t id) const { return pos_.at(id) != kAbsent; }
    void insert(std::size_t id);
    void erase(std::size_t id);
    void set(std::size_t id, bool on) { on ? insert(id) : erase(id); }
    const std::vector<std::uint32_t>& members() const noexcept { return members_; }
    std::size_t random_member(std::mt19937_64& rng) const;
    std::vector<char> to_flags() const;

    bool operator==(const SubsetMask& other) const;

private:
    static constexpr std::uint32_t kAbsent = 0xffffffffu;
    MappingKind kind_;
    std::vector<std::uint32_t> pos_;
    std::vector<std::uint32_t> members_;
};

// Points included for one coordinate value, as a bitset over the 4 (or 2) variants.
unsigned l1_variant_bits(double alpha_j) noexcept;
unsigned box_variant_bits(double alpha_j) noexcept;

SubsetMask build_l1_mask(std::span<const double> alpha, MappingKind kind = MappingKind::kL1);
SubsetMask build_box_mask(std::span<const double> alpha);
SubsetMask build_full_mask(MappingKind kind, std::size_t n_points);
SubsetMask build_mask(MappingKind kind, std::span<const double> alpha);

// Toggles only the membership differences for coordinate j; returns the number of toggles.
int update_mask_after_step(SubsetMask& m, std::size_t j, double old_val, double new_val);

struct ExactSearch {};

enum class Fallback { kExactScan, kRandomFromMask };

struct HyperplaneLsh
{
    int bits_per_table = 0;  // 0 means floor(log2(n_points)) - 1
    int n_tables = 10;
    std::uint64_t seed = 0;
    Fallback fallback = Fallback::kRandomFromMask;
};

using SmipsBackend = std::variant<ExactSearch, HyperplaneLsh>;

int default_lsh_bits(std::size_t n_points);

struct SmipsResult
{
    std::size_t id = 0;
    double value = 0.0;
    bool fell_back = false;
};

/**
 * Cached projections of the alpha-dependent query block onto every hyperplane,
 * so the L2/elastic-net query hash costs O(k L) per coordinate step instead of
 * O(k L n). Built and updated through SmipsIndex.
 */
struct ProjectionCache
{
    std::size_t offset = 0;  // first query slot of the alpha block
    std::size_t length = 0;
    double scale = 0.0;      // block = scale * alpha
    std::vector<double> partial;  // one per hyperplane
};

/**
 * Query engine over a fixed point set. Exact scans the mask; LSH hashes the
 * points once at construction and filters bucket candidates by the mask.
 * Immutable after construction, so concurrent queries are safe.
 */
class SmipsIndex
{
public:
    SmipsIndex(const AugmentedPointSet& ps, SmipsBackend backend);

    const AugmentedPointSet& point_set() const noexcept { return *ps_; }
    const SmipsBackend& backend() const noexcept { return backend_; }
    bool is_exact() const noexcept { return std::holds_alternative<ExactSearch>(backend_); }
    int bits_per_table() const noexcept { return bits_; }
    int n_tables() const noexcept { return tables_; }

    SmipsResult query(std::span<const double> q, const SubsetMask& m, std::mt19937_64& rng,
                      const ProjectionCache* cache = nullptr) const;

    // Exact argmax over included points; lowest id on ties.
    SmipsResult exact(std::span<const double> q, const SubsetMask& m) const;
    // Exact argmax over all points.
    SmipsResult exact_all(std::span<const double> q) const;
    // LSH candidates for q without mask filtering; empty if no bucket hit.
    std::vector<std::uint32_t> candidates(std::span<const double> q, const ProjectionCache* cache = nullptr) const;

    std::uint64_t hash_point(int table, std::size_t id) const;
    std::uint64_t hash_query(int table, std::span<const double> q, const ProjectionCache* cache = nullptr) const;

    ProjectionCache make_cache(std::size_t offset, double scale, std::span<const double> alpha) const;
    void update_cache(ProjectionCache& c, std::size_t j, double delta_alpha) const;

private:
    double projection(std::size_t h, std::span<const double> q, const ProjectionCache* cache) const;
    void check_query(std::span<const double> q) const;

    const AugmentedPointSet* ps_;
    SmipsBackend backend_;
    int bits_ = 0;
    int tables_ = 0;
    Fallback fallback_ = Fallback::kRandomFromMask;
    // hyperplanes_[h * dim + r], h = table * bits + bit
    std::vector<double> hyperplanes_;
    std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>> buckets_;
};

// One-shot convenience; builds an index (and LSH tables) per call.
SmipsResult smips_query(
    const AugmentedPointSet& ps, std::span<const double> q, const SubsetMask& m, const SmipsBackend& backend
);

} // namespace gscd
