#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace reclink::mining {

/// An anchor label and its k-1 nearest-neighbor labels, nearest first.
struct HardNegativeSet {
    std::string anchor_label;
    std::vector<std::string> neighbor_labels;
};

/// One slot of a planned batch: which label, which of its views.
struct Slot {
    std::string label;
    std::size_t view = 0;
};

/// Ordered batches of exactly B slots each; every batch holds B/(k*m)
/// hard-negative sets' worth of labels with m view slots per label
/// occurrence.
struct BatchPlan {
    std::vector<std::vector<Slot>> batches;
    int k = 1;
    int m = 1;
};

/// Exact k-NN (including self, which is then dropped) over one pooled
/// embedding per label. Neighbors are recorded in similarity order with
/// ties broken by insertion order of `per_label_embeddings`.
std::vector<HardNegativeSet> build_hard_negative_sets(
    const std::vector<std::pair<std::string, std::vector<float>>>&
        per_label_embeddings,
    int k);

/// Seeded shuffle of the sets, partitioned into groups of B/(k*m); each
/// set contributes its anchor plus k-1 neighbors, each with m view slots
/// sampled with replacement from that label's available views. A trailing
/// group smaller than B/(k*m) is dropped.
BatchPlan partition_batches(const std::vector<HardNegativeSet>& sets, int batch_size,
                            int k, int m, std::uint64_t seed,
                            const std::map<std::string, std::size_t>& views_per_label);

/// Fresh with-replacement view sampling for one epoch; batch/label
/// structure is preserved, only view indices change.
BatchPlan resample_views(const BatchPlan& plan,
                         const std::map<std::string, std::size_t>& views_per_label,
                         std::uint64_t seed, std::uint64_t epoch);

}  // namespace reclink::mining
