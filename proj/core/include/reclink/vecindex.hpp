#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace reclink::index {

/// Normalize to unit Euclidean length. Throws on the zero vector
/// ("degenerate embedding").
std::vector<float> l2_normalize(std::span<const float> v);

struct SearchHit {
    std::string target_id;
    float score;  // cosine similarity in [-1, 1]
};

/// Immutable exact inner-product index over unit-norm rows. Searches are
/// exhaustive scans; ties on score break toward the smaller row index.
class FlatIndex {
public:
    static FlatIndex build(
        const std::vector<std::pair<std::string, std::vector<float>>>& vectors);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }

    /// Exact top-k by inner product against the normalized query.
    /// Returns min(k, size()) hits in nonincreasing score order.
    std::vector<SearchHit> search(std::span<const float> query,
                                  std::size_t k) const;

    /// Row index + score of the single best hit, without id lookup.
    std::pair<std::size_t, float> search_top1(std::span<const float> query) const;

    /// Exact top-1 for many queries (row-major, already normalized or not);
    /// splits work across `threads`. Results identical at any thread count.
    std::vector<std::pair<std::size_t, float>> search_top1_batch(
        const std::vector<std::vector<float>>& queries, int threads) const;

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;  // row-major, unit rows
    std::vector<std::string> ids_;
};

}  // namespace reclink::index
