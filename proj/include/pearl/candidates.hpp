#ifndef PEARL_CANDIDATES_HPP
#define PEARL_CANDIDATES_HPP

#include "pearl/core.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace pearl {

// Indices in this module are zero-based. Config files and reports use
// one-based numbering and convert at the boundary.

enum class CandidateKind { FrlSubset, FusionColumns, Explicit };

/// Recipe for one candidate representation set.
struct CandidateSpec {
    CandidateKind kind = CandidateKind::FrlSubset;
    std::vector<int> indices; // sorted, unique
    std::string name;         // Explicit only

    static CandidateSpec frl_subset(std::vector<int> frls) { return {CandidateKind::FrlSubset, std::move(frls), {}}; }
    static CandidateSpec fusion_columns(std::vector<int> cols)
    {
        return {CandidateKind::FusionColumns, std::move(cols), {}};
    }
    static CandidateSpec explicit_set(std::string name, std::vector<int> frls)
    {
        return {CandidateKind::Explicit, std::move(frls), std::move(name)};
    }

    /// True for specs that select whole FRL blocks.
    bool selects_frls() const noexcept { return kind != CandidateKind::FusionColumns; }

    std::string label() const
    {
        std::string s = kind == CandidateKind::FusionColumns ? "cols{" : (kind == CandidateKind::Explicit ? name + "{" : "{");
        for (std::size_t i = 0; i < indices.size(); ++i)
            s += (i ? "," : "") + std::to_string(indices[i] + 1);
        return s + "}";
    }

    friend bool operator==(const CandidateSpec&, const CandidateSpec&) = default;
};

/// Ordered list of J candidate specs over M foundation blocks.
class CandidatePool {
public:
    CandidatePool(std::vector<CandidateSpec> specs, std::vector<Index> foundation_dims)
        : specs_(std::move(specs)), dims_(std::move(foundation_dims))
    {
        require(!specs_.empty(), "candidate pool must contain at least one spec");
        require(!dims_.empty(), "candidate pool needs at least one foundation block");
        for (auto d : dims_)
            require(d >= 1, "foundation dimensions must be >= 1");
        const Index total = total_columns();
        for (std::size_t j = 0; j < specs_.size(); ++j) {
            const auto& s = specs_[j];
            const auto where = " (candidate " + std::to_string(j + 1) + ")";
            require(!s.indices.empty(), "candidate spec is empty" + where);
            require(std::is_sorted(s.indices.begin(), s.indices.end()) &&
                        std::adjacent_find(s.indices.begin(), s.indices.end()) == s.indices.end(),
                    "candidate indices must be sorted and duplicate-free" + where);
            const Index limit = s.selects_frls() ? static_cast<Index>(dims_.size()) : total;
            require(s.indices.front() >= 0 && s.indices.back() < limit, "candidate index out of range" + where);
            for (std::size_t i = 0; i < j; ++i)
                require(!(specs_[i].kind == s.kind && specs_[i].indices == s.indices && specs_[i].name == s.name),
                        "duplicate candidate spec" + where);
        }
    }

    const std::vector<CandidateSpec>& specs() const noexcept { return specs_; }
    const CandidateSpec& spec(std::size_t j) const { return specs_.at(j); }
    const std::vector<Index>& foundation_dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return specs_.size(); }
    std::size_t num_frls() const noexcept { return dims_.size(); }

    Index total_columns() const { return std::accumulate(dims_.begin(), dims_.end(), Index{0}); }

    Index realized_dim(std::size_t j) const
    {
        const auto& s = spec(j);
        if (!s.selects_frls())
            return static_cast<Index>(s.indices.size());
        Index d = 0;
        for (int m : s.indices)
            d += dims_[static_cast<std::size_t>(m)];
        return d;
    }

    /// Position of the spec covering every FRL, if any.
    std::optional<std::size_t> fusion_index() const
    {
        for (std::size_t j = 0; j < specs_.size(); ++j)
            if (specs_[j].selects_frls() && specs_[j].indices.size() == dims_.size())
                return j;
        return std::nullopt;
    }

    /// Positions of single-FRL specs, one per FRL in ascending FRL order.
    std::vector<std::size_t> single_frl_indices() const
    {
        std::vector<std::size_t> out;
        for (std::size_t m = 0; m < dims_.size(); ++m)
            for (std::size_t j = 0; j < specs_.size(); ++j)
                if (specs_[j].selects_frls() && specs_[j].indices.size() == 1 &&
                    specs_[j].indices[0] == static_cast<int>(m)) {
                    out.push_back(j);
                    break;
                }
        return out;
    }

private:
    std::vector<CandidateSpec> specs_;
    std::vector<Index> dims_;
};

namespace detail {

/// Nonempty subsets of {0..count-1}: ascending size, lexicographic within a size.
inline std::vector<std::vector<int>> ordered_subsets(int count)
{
    std::vector<std::vector<int>> out;
    for (int size = 1; size <= count; ++size) {
        std::vector<int> cur(static_cast<std::size_t>(size));
        std::iota(cur.begin(), cur.end(), 0);
        for (;;) {
            out.push_back(cur);
            int i = size - 1;
            while (i >= 0 && cur[static_cast<std::size_t>(i)] == count - size + i)
                --i;
            if (i < 0)
                break;
            ++cur[static_cast<std::size_t>(i)];
            for (int k = i + 1; k < size; ++k)
                cur[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k - 1)] + 1;
        }
    }
    return out;
}

} // namespace detail

/// All 2^M - 1 nonempty FRL subsets; the full set comes last.
inline CandidatePool enumerate_frl_subsets(std::vector<Index> foundation_dims)
{
    const auto m = static_cast<int>(foundation_dims.size());
    require(m >= 1 && m <= 20, "FRL count must be in [1, 20] for subset enumeration");
    std::vector<CandidateSpec> specs;
    for (auto& s : detail::ordered_subsets(m))
        specs.push_back(CandidateSpec::frl_subset(std::move(s)));
    return CandidatePool(std::move(specs), std::move(foundation_dims));
}

inline CandidatePool enumerate_frl_subsets(int m)
{
    require(m >= 1 && m <= 20, "FRL count must be in [1, 20] for subset enumeration");
    return enumerate_frl_subsets(std::vector<Index>(static_cast<std::size_t>(m), 1));
}

/// All 2^p - 1 nonempty subsets of the fusion matrix's p columns.
inline CandidatePool enumerate_fusion_columns(std::vector<Index> foundation_dims)
{
    const Index p = std::accumulate(foundation_dims.begin(), foundation_dims.end(), Index{0});
    require(p >= 1 && p <= 16, "fusion column count " + std::to_string(p) + " outside [1, 16]");
    std::vector<CandidateSpec> specs;
    for (auto& s : detail::ordered_subsets(static_cast<int>(p)))
        specs.push_back(CandidateSpec::fusion_columns(std::move(s)));
    return CandidatePool(std::move(specs), std::move(foundation_dims));
}

enum class CandidateSchemeKind { FrlSubsets, FusionColumns, Explicit };

/// How to build a pool once the foundation dimensions are known.
struct CandidateScheme {
    CandidateSchemeKind kind = CandidateSchemeKind::FrlSubsets;
    std::vector<CandidateSpec> explicit_specs;
};

inline CandidatePool build_pool(const CandidateScheme& scheme, std::vector<Index> foundation_dims)
{
    switch (scheme.kind) {
    case CandidateSchemeKind::FrlSubsets: return enumerate_frl_subsets(std::move(foundation_dims));
    case CandidateSchemeKind::FusionColumns: return enumerate_fusion_columns(std::move(foundation_dims));
    case CandidateSchemeKind::Explicit: return CandidatePool(scheme.explicit_specs, std::move(foundation_dims));
    }
    throw Error("unknown candidate scheme");
}

/// Candidate j's matrix: FRL blocks concatenated in ascending FRL order, or
/// the selected fusion columns in ascending order.
inline Matrix realize(const CandidatePool& pool, const std::vector<Matrix>& foundation, std::size_t j)
{
    require(j < pool.size(), "candidate index " + std::to_string(j + 1) + " out of range");
    require(foundation.size() == pool.num_frls(), "foundation block count does not match pool");
    const Index n = foundation.front().rows();
    for (std::size_t m = 0; m < foundation.size(); ++m) {
        require(foundation[m].cols() == pool.foundation_dims()[m],
                "foundation block " + std::to_string(m + 1) + " has the wrong width");
        require(foundation[m].rows() == n, "foundation blocks disagree on row count");
    }
    const auto& spec = pool.spec(j);
    Matrix out(n, pool.realized_dim(j));
    Index col = 0;
    if (spec.selects_frls()) {
        for (int m : spec.indices) {
            const auto& block = foundation[static_cast<std::size_t>(m)];
            out.middleCols(col, block.cols()) = block;
            col += block.cols();
        }
    } else {
        for (int c : spec.indices) {
            std::size_t m = 0;
            Index offset = c;
            while (offset >= foundation[m].cols()) {
                offset -= foundation[m].cols();
                ++m;
            }
            out.col(col++) = foundation[m].col(offset);
        }
    }
    return out;
}

} // namespace pearl

#endif // PEARL_CANDIDATES_HPP
