#include "reclink/mining.hpp"

#include <stdexcept>

#include "reclink/rng.hpp"
#include "reclink/vecindex.hpp"

namespace reclink::mining {

std::vector<HardNegativeSet> build_hard_negative_sets(
    const std::vector<std::pair<std::string, std::vector<float>>>&
        per_label_embeddings,
    int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (per_label_embeddings.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("fewer labels than k");

    const auto idx = index::FlatIndex::build(per_label_embeddings);
    std::vector<HardNegativeSet> sets;
    sets.reserve(per_label_embeddings.size());
    for (std::size_t i = 0; i < per_label_embeddings.size(); ++i) {
        // k nearest including self; self is dropped from the neighbor list.
        const auto hits = idx.search(idx.row(i), static_cast<std::size_t>(k));
        HardNegativeSet set;
        set.anchor_label = per_label_embeddings[i].first;
        for (const auto& hit : hits)
            if (hit.target_id != set.anchor_label)
                set.neighbor_labels.push_back(hit.target_id);
        // If the anchor tied itself out of the top-k, trim to k-1 neighbors.
        if (set.neighbor_labels.size() >= static_cast<std::size_t>(k))
            set.neighbor_labels.resize(k - 1);
        sets.push_back(std::move(set));
    }
    return sets;
}

namespace {

std::size_t sample_view(Rng& rng, const std::map<std::string, std::size_t>& views,
                        const std::string& label) {
    const auto it = views.find(label);
    if (it == views.end() || it->second == 0)
        throw std::invalid_argument("no views available for label " + label);
    return rng.uniform_int(it->second);
}

}  // namespace

BatchPlan partition_batches(const std::vector<HardNegativeSet>& sets, int batch_size,
                            int k, int m, std::uint64_t seed,
                            const std::map<std::string, std::size_t>& views_per_label) {
    if (k < 1 || m < 1 || batch_size < 1)
        throw std::invalid_argument("B, k, m must be positive");
    if (batch_size % (k * m) != 0)
        throw std::invalid_argument("B must be divisible by k*m");
    const std::size_t group = static_cast<std::size_t>(batch_size) / (k * m);

    std::vector<std::size_t> order(sets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(seed);
    shuffle_rng.shuffle(order);

    Rng view_rng(Rng::derive(seed, 1));
    BatchPlan plan;
    plan.k = k;
    plan.m = m;
    const std::size_t n_batches = sets.size() / group;  // trailing group dropped
    plan.batches.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        std::vector<Slot> batch;
        batch.reserve(batch_size);
        for (std::size_t g = 0; g < group; ++g) {
            const HardNegativeSet& set = sets[order[b * group + g]];
            if (set.neighbor_labels.size() != static_cast<std::size_t>(k - 1))
                throw std::invalid_argument("set for " + set.anchor_label +
                                            " does not have k-1 neighbors");
            for (int v = 0; v < m; ++v)
                batch.push_back({set.anchor_label,
                                 sample_view(view_rng, views_per_label,
                                             set.anchor_label)});
            for (const std::string& nb : set.neighbor_labels)
                for (int v = 0; v < m; ++v)
                    batch.push_back(
                        {nb, sample_view(view_rng, views_per_label, nb)});
        }
        plan.batches.push_back(std::move(batch));
    }
    return plan;
}

BatchPlan resample_views(const BatchPlan& plan,
                         const std::map<std::string, std::size_t>& views_per_label,
                         std::uint64_t seed, std::uint64_t epoch) {
    Rng rng(Rng::derive(seed, 0x45504f43ULL + epoch));
    BatchPlan out = plan;
    for (auto& batch : out.batches)
        for (Slot& slot : batch)
            slot.view = sample_view(rng, views_per_label, slot.label);
    return out;
}

}  // namespace reclink::mining
