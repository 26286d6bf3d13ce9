#include "reclink/linkage.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "reclink/io.hpp"
#include "reclink/metricspace.hpp"
#include "reclink/vecindex.hpp"

namespace reclink::linkage {

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::kVisual: return "visual";
        case Mode::kLanguage: return "language";
        case Mode::kMultimodal: return "multimodal";
        case Mode::kStringMetric: return "string-metric";
    }
    return "unknown";
}

namespace {

std::vector<float> embed_record(const Record& r, const optim::ToyModel& model,
                                Mode mode, double im_wt) {
    std::vector<double> emb;
    switch (mode) {
        case Mode::kVisual:
            if (!r.vec)
                throw std::invalid_argument("record " + r.id +
                                            " lacks a visual embedding");
            emb = model.embed_visual(std::span<const float>(*r.vec));
            break;
        case Mode::kLanguage:
            if (r.text.empty())
                throw std::invalid_argument("record " + r.id + " has empty text");
            emb = model.embed_text(r.text);
            break;
        case Mode::kMultimodal: {
            if (!r.vec || r.text.empty())
                throw std::invalid_argument("record " + r.id +
                                            " lacks a modality for multimodal");
            const auto f = model.embed_visual(std::span<const float>(*r.vec));
            const auto g = model.embed_text(r.text);
            emb = metric::pool(f, g, im_wt);
            break;
        }
        case Mode::kStringMetric:
            throw std::invalid_argument("string-metric mode has no embeddings");
    }
    return {emb.begin(), emb.end()};
}

}  // namespace

std::vector<LinkPrediction> link(const std::vector<Record>& queries,
                                 const std::vector<Record>& targets,
                                 const optim::ToyModel& model,
                                 const LinkOptions& opts) {
    if (targets.empty()) throw std::invalid_argument("empty target set");

    // Targets sorted by id before indexing: the row-index tie-break then
    // realizes the smallest-target-id rule, independent of input order.
    std::vector<const Record*> sorted_targets;
    sorted_targets.reserve(targets.size());
    for (const Record& t : targets) sorted_targets.push_back(&t);
    std::sort(sorted_targets.begin(), sorted_targets.end(),
              [](const Record* a, const Record* b) { return a->id < b->id; });

    // One index per block key (a single "" key when blocking is off).
    std::map<std::string, std::vector<std::pair<std::string, std::vector<float>>>>
        grouped;
    for (const Record* t : sorted_targets) {
        std::string key;
        if (opts.block) {
            if (!t->block)
                throw std::invalid_argument("target " + t->id +
                                            " lacks a block key");
            key = *t->block;
        }
        grouped[key].emplace_back(t->id,
                                  embed_record(*t, model, opts.mode, opts.im_wt));
    }
    std::map<std::string, index::FlatIndex> indexes;
    for (auto& [key, vecs] : grouped)
        indexes.emplace(key, index::FlatIndex::build(vecs));

    // Group queries per block key so each group can batch through its index.
    std::vector<LinkPrediction> out(queries.size());
    std::map<std::string, std::vector<std::size_t>> query_groups;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::string key;
        if (opts.block) {
            if (!queries[i].block)
                throw std::invalid_argument("query " + queries[i].id +
                                            " lacks a block key");
            key = *queries[i].block;
        }
        query_groups[key].push_back(i);
    }

    for (const auto& [key, qidx] : query_groups) {
        const auto it = indexes.find(key);
        if (it == indexes.end()) {
            for (std::size_t i : qidx)
                out[i] = {queries[i].id, kNoMatch, -1.0};
            continue;
        }
        std::vector<std::vector<float>> embs;
        embs.reserve(qidx.size());
        for (std::size_t i : qidx)
            embs.push_back(embed_record(queries[i], model, opts.mode, opts.im_wt));
        const auto hits = it->second.search_top1_batch(embs, opts.threads);
        for (std::size_t j = 0; j < qidx.size(); ++j) {
            const std::size_t i = qidx[j];
            const double score = hits[j].second;
            if (opts.nm_thresh && score < *opts.nm_thresh)
                out[i] = {queries[i].id, kNoMatch, score};
            else
                out[i] = {queries[i].id, it->second.ids()[hits[j].first], score};
        }
    }
    return out;
}

EvalReport evaluate(const std::vector<LinkPrediction>& predictions,
                    const GroundTruth& truth, bool include_no_match,
                    const std::string& mode) {
    EvalReport report;
    report.mode = mode;
    report.include_no_match = include_no_match;
    for (const LinkPrediction& p : predictions) {
        const auto it = truth.find(p.query_id);
        if (it == truth.end())
            throw std::invalid_argument("unknown query_id " + p.query_id);
        const auto& matches = it->second;
        if (!include_no_match && matches.empty()) continue;
        ++report.n_queries;
        const bool correct = p.predicted == kNoMatch ? matches.empty()
                                                     : matches.count(p.predicted) > 0;
        if (correct) ++report.n_correct;
    }
    if (report.n_queries == 0)
        throw std::invalid_argument("no queries to evaluate");
    report.accuracy =
        static_cast<double>(report.n_correct) / static_cast<double>(report.n_queries);
    return report;
}

ThresholdResult tune_threshold(const std::vector<LinkPrediction>& val_predictions,
                               const GroundTruth& truth) {
    ThresholdResult result;
    bool any_unmatched = false;
    for (const LinkPrediction& p : val_predictions) {
        const auto it = truth.find(p.query_id);
        if (it == truth.end())
            throw std::invalid_argument("unknown query_id " + p.query_id);
        if (it->second.empty()) any_unmatched = true;
    }
    if (!any_unmatched) {
        result.warning_no_unmatched = true;
        return result;
    }

    std::vector<double> scores;
    scores.reserve(val_predictions.size());
    for (const LinkPrediction& p : val_predictions) scores.push_back(p.score);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

    std::vector<double> candidates;
    candidates.push_back(scores.front());  // threshold below every score
    for (std::size_t i = 0; i + 1 < scores.size(); ++i)
        candidates.push_back(0.5 * (scores[i] + scores[i + 1]));

    const auto accuracy_at = [&](double t) {
        std::size_t correct = 0;
        for (const LinkPrediction& p : val_predictions) {
            const auto& matches = truth.at(p.query_id);
            const bool no_match = p.predicted == kNoMatch || p.score < t;
            if (no_match ? matches.empty() : matches.count(p.predicted) > 0)
                ++correct;
        }
        return static_cast<double>(correct) /
               static_cast<double>(val_predictions.size());
    };

    for (double t : candidates) {
        const double acc = accuracy_at(t);
        if (!result.threshold || acc > result.accuracy) {
            result.threshold = t;
            result.accuracy = acc;
        }
    }
    return result;
}

std::vector<NodeStats> supply_graph_stats(
    const std::vector<LinkPrediction>& predictions,
    const std::set<std::string>& seed_firms) {
    if (seed_firms.empty()) throw std::invalid_argument("seeds nonempty");

    std::map<std::string, std::set<std::string>> adj;
    for (const LinkPrediction& p : predictions) {
        adj[p.query_id];  // query nodes exist even when unmatched
        if (p.predicted == kNoMatch || p.predicted == p.query_id) continue;
        adj[p.query_id].insert(p.predicted);
        adj[p.predicted].insert(p.query_id);
    }

    // BFS from each seed present in the graph.
    std::map<std::string, std::vector<std::size_t>> finite_dists;
    for (const std::string& seed : seed_firms) {
        if (!adj.count(seed)) continue;
        std::map<std::string, std::size_t> dist{{seed, 0}};
        std::deque<std::string> frontier{seed};
        while (!frontier.empty()) {
            const std::string node = frontier.front();
            frontier.pop_front();
            for (const std::string& next : adj[node])
                if (dist.emplace(next, dist[node] + 1).second)
                    frontier.push_back(next);
        }
        for (const auto& [node, d] : dist) finite_dists[node].push_back(d);
    }

    std::vector<NodeStats> stats;
    stats.reserve(adj.size());
    for (const auto& [node, neighbors] : adj) {
        NodeStats ns;
        ns.node = node;
        ns.degree = neighbors.size();
        const auto it = finite_dists.find(node);
        if (it != finite_dists.end()) {
            double sum = 0.0;
            for (std::size_t d : it->second) sum += static_cast<double>(d);
            ns.avg_distance = sum / static_cast<double>(it->second.size());
        }
        stats.push_back(std::move(ns));
    }
    return stats;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<LinkPrediction>& predictions) {
    std::ostringstream out;
    out << "query_id,predicted,score\n";
    out.precision(17);
    for (const LinkPrediction& p : predictions)
        out << p.query_id << ',' << p.predicted << ',' << p.score << '\n';
    atomic_write(path, out.str());
}

std::vector<LinkPrediction> read_predictions_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<LinkPrediction> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error("malformed predictions row: " + line);
        out.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1),
                       std::stod(line.substr(c2 + 1))});
    }
    return out;
}

void write_report_json(const std::filesystem::path& path,
                       const EvalReport& report) {
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["n_queries"] = report.n_queries;
    j["n_correct"] = report.n_correct;
    j["mode"] = report.mode;
    j["include_no_match"] = report.include_no_match;
    atomic_write(path, j.dump(2) + "\n");
}

void write_graph_stats_csv(const std::filesystem::path& path,
                           const std::vector<NodeStats>& stats) {
    std::ostringstream out;
    out << "node,avg_distance,degree\n";
    out.precision(17);
    for (const NodeStats& ns : stats) {
        out << ns.node << ',';
        if (ns.avg_distance) out << *ns.avg_distance;
        out << ',' << ns.degree << '\n';
    }
    atomic_write(path, out.str());
}

}  // namespace reclink::linkage
