#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace reclink {

/// One entity instance: a row of either the query list or the target
/// directory. `vec` carries a visual embedding when present.
struct Record {
    std::string id;
    std::string text;
    std::optional<std::vector<float>> vec;
    std::optional<std::string> block;
    std::optional<std::string> label;
};

/// query_id -> set of matching target ids. An empty set means the query
/// has no counterpart in the target directory.
using GroundTruth = std::map<std::string, std::set<std::string>>;

struct DatasetSplit {
    std::set<std::string> train;
    std::set<std::string> val;
    std::set<std::string> test;
};

struct HyperParams {
    double lr_max = 5e-6;
    int batch_size = 153;
    double weight_decay = 0.001;
    double temp = 0.1;
    double im_wt = 0.5;
    int views = 3;      // m
    int neighbors = 3;  // k
    int epochs = 30;
    std::optional<double> nm_thresh;

    /// Throws std::invalid_argument on any out-of-range field.
    void validate(bool for_mining = false) const;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

/// Checks every dataset invariant (unique nonempty ids, declared embedding
/// dimension, text-or-vector presence). Violations are data, not errors.
ValidationReport validate_dataset(const std::vector<Record>& records,
                                  std::size_t declared_dim);

/// Checks GroundTruth referential integrity against the two datasets.
ValidationReport validate_ground_truth(const GroundTruth& truth,
                                       const std::vector<Record>& queries,
                                       const std::vector<Record>& targets);

struct SplitRatios {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

/// Deterministic class-level split. Sizes are floor(val*n) and
/// floor(test*n), with the remainder allocated to train
/// (1286 labels -> 772/257/257).
DatasetSplit split_by_class(const std::set<std::string>& labels,
                            SplitRatios ratios, std::uint64_t seed);

}  // namespace reclink
