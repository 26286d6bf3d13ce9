#include "reclink/record.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "reclink/rng.hpp"

namespace reclink {

void HyperParams::validate(bool for_mining) const {
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (weight_decay < 0) throw std::invalid_argument("weight_decay must be >= 0");
    if (temp <= 0) throw std::invalid_argument("temp must be > 0");
    if (im_wt < 0 || im_wt > 1) throw std::invalid_argument("im_wt must be in [0,1]");
    if (views <= 0) throw std::invalid_argument("views must be positive");
    if (neighbors <= 0) throw std::invalid_argument("neighbors must be positive");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (nm_thresh && (*nm_thresh < -1.0 || *nm_thresh > 1.0))
        throw std::invalid_argument("nm_thresh must be in [-1,1]");
    if (for_mining && batch_size % (neighbors * views) != 0)
        throw std::invalid_argument("batch_size must be divisible by k*m for mining");
}

ValidationReport validate_dataset(const std::vector<Record>& records,
                                  std::size_t declared_dim) {
    ValidationReport report;
    std::unordered_set<std::string> seen;
    for (const Record& r : records) {
        if (r.id.empty()) {
            report.violations.push_back("empty id");
        } else if (!seen.insert(r.id).second) {
            report.violations.push_back("duplicate id " + r.id);
        }
        if (r.vec) {
            if (r.vec->size() != declared_dim) {
                report.violations.push_back(
                    "record " + r.id + ": embedding dimension " +
                    std::to_string(r.vec->size()) + " != declared " +
                    std::to_string(declared_dim));
            }
            for (float x : *r.vec) {
                if (!std::isfinite(x)) {
                    report.violations.push_back("record " + r.id +
                                                ": non-finite embedding entry");
                    break;
                }
            }
        }
        if (r.text.empty() && !r.vec) {
            report.violations.push_back("record " + r.id +
                                        ": empty text and no embedding");
        }
    }
    report.ok = report.violations.empty();
    return report;
}

ValidationReport validate_ground_truth(const GroundTruth& truth,
                                       const std::vector<Record>& queries,
                                       const std::vector<Record>& targets) {
    ValidationReport report;
    std::unordered_set<std::string> qids, tids;
    for (const Record& r : queries) qids.insert(r.id);
    for (const Record& r : targets) tids.insert(r.id);
    for (const auto& [qid, matches] : truth) {
        if (!qids.count(qid))
            report.violations.push_back("unknown query_id " + qid);
        for (const std::string& tid : matches)
            if (!tids.count(tid))
                report.violations.push_back("unknown target_id " + tid +
                                            " for query " + qid);
    }
    report.ok = report.violations.empty();
    return report;
}

DatasetSplit split_by_class(const std::set<std::string>& labels,
                            SplitRatios ratios, std::uint64_t seed) {
    if (labels.size() < 3) throw std::invalid_argument("insufficient classes");
    const double sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must sum to 1");

    std::vector<std::string> order(labels.begin(), labels.end());
    Rng rng(seed);
    rng.shuffle(order);

    const std::size_t n = order.size();
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * n));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n));
    const std::size_t n_train = n - n_val - n_test;  // remainder goes to train

    DatasetSplit split;
    std::size_t i = 0;
    for (; i < n_train; ++i) split.train.insert(order[i]);
    for (; i < n_train + n_val; ++i) split.val.insert(order[i]);
    for (; i < n; ++i) split.test.insert(order[i]);
    return split;
}

}  // namespace reclink
