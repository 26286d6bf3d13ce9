#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reclink/optim.hpp"
#include "reclink/record.hpp"

namespace reclink::linkage {

inline constexpr const char* kNoMatch = "NO_MATCH";

enum class Mode { kVisual, kLanguage, kMultimodal, kStringMetric };

std::string mode_name(Mode mode);

struct LinkPrediction {
    std::string query_id;
    std::string predicted;  // target id or kNoMatch
    double score;           // cosine similarity; raw distance for string modes
};

struct LinkOptions {
    Mode mode = Mode::kMultimodal;
    double im_wt = 0.5;
    std::optional<double> nm_thresh;
    bool block = false;
    int threads = 1;
};

/// Embeds queries and targets with the toy encoders, pools per the mode
/// (im_wt=1 visual, im_wt=0 language), and links each query to its exact
/// top-1 target, restricted to the query's block key when block=true.
/// Candidate-free queries after blocking predict NO_MATCH with score -1.
std::vector<LinkPrediction> link(const std::vector<Record>& queries,
                                 const std::vector<Record>& targets,
                                 const optim::ToyModel& model,
                                 const LinkOptions& opts);

struct EvalReport {
    double accuracy = 0.0;
    std::size_t n_queries = 0;
    std::size_t n_correct = 0;
    std::string mode;
    bool include_no_match = true;
};

/// A prediction is correct iff it is in the query's truth set, or it is
/// NO_MATCH and the truth set is empty. include_no_match=false drops
/// empty-truth queries from both numerator and denominator.
EvalReport evaluate(const std::vector<LinkPrediction>& predictions,
                    const GroundTruth& truth, bool include_no_match,
                    const std::string& mode = "");

/// Sweeps thresholds at observed score midpoints and returns the one
/// maximizing include_no_match accuracy; ties go to the smallest
/// threshold. Returns nullopt (with a warning flag) when the validation
/// truth has no unmatched queries.
struct ThresholdResult {
    std::optional<double> threshold;
    double accuracy = 0.0;
    bool warning_no_unmatched = false;
};
ThresholdResult tune_threshold(const std::vector<LinkPrediction>& val_predictions,
                               const GroundTruth& truth);

struct NodeStats {
    std::string node;
    std::optional<double> avg_distance;  // none when unreachable from all seeds
    std::size_t degree = 0;
};

/// Treats predicted links as undirected edges; per node, the mean of
/// finite shortest-path distances to the seed firms plus the degree.
std::vector<NodeStats> supply_graph_stats(
    const std::vector<LinkPrediction>& predictions,
    const std::set<std::string>& seed_firms);

// -- File formats ----------------------------------------------------------

/// CSV `query_id,predicted,score`.
void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<LinkPrediction>& predictions);
std::vector<LinkPrediction> read_predictions_csv(const std::filesystem::path& path);

/// JSON with all EvalReport fields.
void write_report_json(const std::filesystem::path& path, const EvalReport& report);

/// CSV `node,avg_distance,degree` (avg_distance empty when none).
void write_graph_stats_csv(const std::filesystem::path& path,
                           const std::vector<NodeStats>& stats);

}  // namespace reclink::linkage
