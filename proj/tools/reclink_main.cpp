// Command-line front end: every subcommand reads declared inputs, writes
// its outputs atomically, and drops a manifest (config echo + seeds +
// input digests) next to the primary output so any artifact can be traced
// back to the exact run that produced it.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reclink/io.hpp"
#include "reclink/linkage.hpp"
#include "reclink/metricspace.hpp"
#include "reclink/mining.hpp"
#include "reclink/optim.hpp"
#include "reclink/record.hpp"
#include "reclink/rng.hpp"
#include "reclink/strmetrics.hpp"
#include "reclink/synth.hpp"
#include "reclink/utf8.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reclink;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

int default_threads() {
    if (const char* env = std::getenv("RECLINK_THREADS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (...) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

/// Echo of every option the user (or config file) set, plus defaults for
/// the rest, keyed by long option name.
json config_echo(const CLI::App& cmd) {
    json j = json::object();
    for (const CLI::Option* opt : cmd.get_options()) {
        std::string name = opt->get_lnames().empty() ? opt->get_name()
                                                     : opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        if (!opt->results().empty()) {
            j[name] = opt->results().size() == 1 ? json(opt->results().front())
                                                 : json(opt->results());
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        } else if (opt->count() == 0 && opt->get_expected_min() == 0) {
            j[name] = false;  // unset flag
        }
    }
    return j;
}

std::string hex_digest(const fs::path& path) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(file_digest(path)));
    return buf;
}

void write_manifest(const fs::path& primary_output, const CLI::App& cmd,
                    const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
    json j;
    j["command"] = cmd.get_name();
    j["config"] = config_echo(cmd);
    j["inputs"] = json::object();
    for (const fs::path& in : inputs) j["inputs"][in.string()] = hex_digest(in);
    j["outputs"] = json::array();
    for (const fs::path& out : outputs) j["outputs"].push_back(out.string());
    fs::path mpath = primary_output;
    mpath += ".manifest.json";
    atomic_write(mpath, j.dump(2) + "\n");
}

// -- Shared loaders ----------------------------------------------------

/// Groups labeled records into per-label view lists, preserving the order
/// of first appearance. Each record is one (visual, text) view.
optim::TrainingSet to_training_set(const std::vector<Record>& records) {
    optim::TrainingSet data;
    std::map<std::string, std::size_t> index;
    for (const Record& r : records) {
        if (!r.label) throw std::runtime_error("record " + r.id + " lacks a label");
        if (!r.vec)
            throw std::runtime_error("record " + r.id + " lacks a visual vector");
        auto [it, inserted] = index.emplace(*r.label, data.size());
        if (inserted) {
            optim::LabeledViews lv;
            lv.label = *r.label;
            data.push_back(std::move(lv));
        }
        optim::View view;
        view.visual.assign(r.vec->begin(), r.vec->end());
        view.text = r.text;
        data[it->second].views.push_back(std::move(view));
    }
    return data;
}

void write_plan_jsonl(const fs::path& path, const mining::BatchPlan& plan) {
    std::ostringstream out;
    for (const auto& batch : plan.batches) {
        json arr = json::array();
        for (const mining::Slot& slot : batch)
            arr.push_back({{"label", slot.label}, {"view", slot.view}});
        out << arr.dump() << '\n';
    }
    atomic_write(path, out.str());
}

mining::BatchPlan read_plan_jsonl(const fs::path& path, int k, int m) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    mining::BatchPlan plan;
    plan.k = k;
    plan.m = m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json arr = json::parse(line);
        std::vector<mining::Slot> batch;
        for (const json& obj : arr)
            batch.push_back({obj.at("label").get<std::string>(),
                             obj.at("view").get<std::size_t>()});
        plan.batches.push_back(std::move(batch));
    }
    return plan;
}

synth::NoiseChannel make_channel(double p_sub, double p_del, double p_ins,
                                 const std::string& alphabet,
                                 const std::string& confusables_path,
                                 bool no_default_confusables) {
    synth::NoiseChannel channel =
        no_default_confusables ? synth::NoiseChannel()
                               : synth::NoiseChannel::with_default_confusables();
    if (!confusables_path.empty()) channel.load_confusables(confusables_path);
    channel.p_sub = p_sub;
    channel.p_del = p_del;
    channel.p_ins = p_ins;
    const auto alpha_cps = utf8_decode(alphabet);
    channel.insertion_alphabet.assign(alpha_cps.begin(), alpha_cps.end());
    channel.validate();
    return channel;
}

// -- Subcommands -----------------------------------------------------------

void add_ingest(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "ingest", "Validate a record file (and optional ground truth), "
                  "optionally producing a class-level 60-20-20 split");
    auto records_path = std::make_shared<std::string>();
    auto truth_path = std::make_shared<std::string>();
    auto targets_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto split_path = std::make_shared<std::string>();
    auto dim = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--records", *records_path, "Input records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--dim", *dim, "Declared embedding dimension")->required();
    cmd->add_option("--truth", *truth_path, "Ground truth JSONL to validate")
        ->check(CLI::ExistingFile);
    cmd->add_option("--targets", *targets_path,
                    "Target records JSONL (for truth validation)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out_path, "Validation report JSON")->required();
    cmd->add_option("--split-out", *split_path,
                    "Write a label split JSON here (requires labeled records)");
    cmd->add_option("--seed", *seed, "Split seed")->capture_default_str();

    cmd->callback([=] {
        const auto records = read_records_jsonl(*records_path);
        ValidationReport report = validate_dataset(records, *dim);
        std::vector<fs::path> inputs = {*records_path};
        if (!truth_path->empty()) {
            const auto truth = read_ground_truth_jsonl(*truth_path);
            const auto targets = targets_path->empty()
                                     ? records
                                     : read_records_jsonl(*targets_path);
            const auto tr = validate_ground_truth(truth, records, targets);
            report.ok = report.ok && tr.ok;
            report.violations.insert(report.violations.end(),
                                     tr.violations.begin(), tr.violations.end());
            inputs.push_back(*truth_path);
            if (!targets_path->empty()) inputs.push_back(*targets_path);
        }
        json j;
        j["ok"] = report.ok;
        j["violations"] = report.violations;
        j["n_records"] = records.size();
        atomic_write(*out_path, j.dump(2) + "\n");
        std::vector<fs::path> outputs = {*out_path};

        if (!split_path->empty()) {
            std::set<std::string> labels;
            for (const Record& r : records)
                if (r.label) labels.insert(*r.label);
            const DatasetSplit split = split_by_class(labels, {}, *seed);
            json s;
            s["train"] = split.train;
            s["val"] = split.val;
            s["test"] = split.test;
            atomic_write(*split_path, s.dump(2) + "\n");
            outputs.push_back(*split_path);
        }
        write_manifest(*out_path, *cmd, inputs, outputs);
    });
}

void add_synth(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "synth", "Generate a synthetic labeled dataset: per word, m noisy "
                 "text views and m visual-proxy views");
    auto words_path = std::make_shared<std::string>();
    auto confusables_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto alphabet = std::make_shared<std::string>();
    auto views = std::make_shared<int>(3);
    auto d_in = std::make_shared<std::size_t>(64);
    auto aug = std::make_shared<double>(0.1);
    auto p_sub = std::make_shared<double>(0.0);
    auto p_del = std::make_shared<double>(0.0);
    auto p_ins = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto proj_seed = std::make_shared<std::uint64_t>(1);
    auto aug_seed = std::make_shared<std::uint64_t>(2);
    auto no_defaults = std::make_shared<bool>(false);
    cmd->add_option("--words", *words_path, "Word list, one per line")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--views", *views, "Views per label")->capture_default_str();
    cmd->add_option("--d-in", *d_in, "Visual proxy dimension")->capture_default_str();
    cmd->add_option("--aug-strength", *aug, "Proxy noise scale")
        ->capture_default_str();
    cmd->add_option("--p-sub", *p_sub, "Substitution probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--p-del", *p_del, "Deletion probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--p-ins", *p_ins, "Insertion probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--alphabet", *alphabet, "Insertion alphabet");
    cmd->add_option("--confusables", *confusables_path,
                    "Extra confusable pairs TSV (char, confusable, weight)")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--no-default-confusables", *no_defaults,
                  "Start from an empty substitution table");
    cmd->add_option("--seed", *seed, "Text noise seed")->capture_default_str();
    cmd->add_option("--projection-seed", *proj_seed, "Visual projection seed")
        ->capture_default_str();
    cmd->add_option("--augment-seed", *aug_seed, "Visual noise seed")
        ->capture_default_str();
    cmd->add_option("--out", *out_path, "Output records JSONL")->required();

    cmd->callback([=] {
        const auto words = read_word_list(*words_path);
        const auto channel = make_channel(*p_sub, *p_del, *p_ins, *alphabet,
                                          *confusables_path, *no_defaults);
        const auto data = synth::generate_synthetic_dataset(
            words, *views, channel, *d_in, *aug,
            {.master = *seed, .projection = *proj_seed, .augment = *aug_seed});
        std::vector<Record> records;
        records.reserve(data.size() * static_cast<std::size_t>(*views));
        for (const synth::SynthRecord& rec : data)
            for (std::size_t v = 0; v < rec.views.size(); ++v) {
                Record r;
                r.id = rec.label + "_v" + std::to_string(v);
                r.text = rec.views[v].noisy_text;
                r.vec = std::vector<float>(rec.views[v].visual.begin(),
                                           rec.views[v].visual.end());
                r.label = rec.label;
                records.push_back(std::move(r));
            }
        write_records_jsonl(*out_path, records);
        std::vector<fs::path> inputs = {*words_path};
        if (!confusables_path->empty()) inputs.push_back(*confusables_path);
        write_manifest(*out_path, *cmd, inputs, {*out_path});
    });
}

struct TrainFlags {
    std::string records, out, trace;
    double lr_max = 5e-6, weight_decay = 0.001, temp = 0.1;
    int epochs = 30;
    std::uint64_t seed = 0;
};

void add_common_train_flags(CLI::App* cmd, const std::shared_ptr<TrainFlags>& f) {
    cmd->add_option("--records", f->records, "Labeled training records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--lr-max", f->lr_max, "Peak learning rate")
        ->capture_default_str();
    cmd->add_option("--weight-decay", f->weight_decay, "AdamW decoupled decay")
        ->capture_default_str();
    cmd->add_option("--temp", f->temp, "Loss temperature")->capture_default_str();
    cmd->add_option("--epochs", f->epochs, "Training epochs")
        ->capture_default_str();
    cmd->add_option("--seed", f->seed, "Training seed")->capture_default_str();
    cmd->add_option("--trace", f->trace, "Loss trace CSV (epoch,step,lr,loss)");
    cmd->add_option("--out", f->out, "Output model checkpoint")->required();
}

void add_pretrain(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "pretrain", "Stage one: symmetric image-text contrastive pretraining "
                    "of the toy encoders");
    auto f = std::make_shared<TrainFlags>();
    auto batch_size = std::make_shared<int>(153);
    auto d_out = std::make_shared<std::size_t>(32);
    auto hidden = std::make_shared<std::size_t>(0);
    auto hash_dim = std::make_shared<std::size_t>(4096);
    auto init_seed = std::make_shared<std::uint64_t>(0);
    add_common_train_flags(cmd, f);
    cmd->add_option("--batch-size", *batch_size, "Minibatch size")
        ->capture_default_str();
    cmd->add_option("--d-out", *d_out, "Embedding dimension")
        ->capture_default_str();
    cmd->add_option("--hidden-dim", *hidden, "Optional tanh hidden width (0=linear)")
        ->capture_default_str();
    cmd->add_option("--hash-dim", *hash_dim, "Text feature buckets (power of two)")
        ->capture_default_str();
    cmd->add_option("--init-seed", *init_seed, "Weight init seed")
        ->capture_default_str();

    cmd->callback([=] {
        const auto records = read_records_jsonl(f->records);
        const auto data = to_training_set(records);
        if (data.empty() || data.front().views.empty() ||
            data.front().views.front().visual.empty())
            throw std::runtime_error("training set has no visual views");
        const std::size_t d_in = data.front().views.front().visual.size();
        optim::TextEncoderConfig cfg;
        cfg.hash_dim = *hash_dim;
        auto model = optim::ToyModel::init(d_in, *d_out, cfg, *hidden, *init_seed);
        HyperParams hp;
        hp.lr_max = f->lr_max;
        hp.batch_size = *batch_size;
        hp.weight_decay = f->weight_decay;
        hp.temp = f->temp;
        hp.epochs = f->epochs;
        const auto trace = optim::pretrain_toy(model, data, hp, f->seed);
        optim::save_checkpoint(f->out, model);
        std::vector<fs::path> outputs = {f->out};
        if (!f->trace.empty()) {
            optim::write_trace_csv(f->trace, trace);
            outputs.push_back(f->trace);
        }
        write_manifest(f->out, *cmd, {f->records}, outputs);
    });
}

void add_mine(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "mine", "Build hard-negative sets from checkpoint embeddings and "
                "partition them into a batch plan");
    auto model_path = std::make_shared<std::string>();
    auto records_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto k = std::make_shared<int>(3);
    auto m = std::make_shared<int>(3);
    auto batch_size = std::make_shared<int>(153);
    auto im_wt = std::make_shared<double>(0.5);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--model", *model_path, "Model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--records", *records_path, "Labeled records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--k", *k, "Hard-negative set size (anchor + k-1 neighbors)")
        ->capture_default_str();
    cmd->add_option("--m", *m, "View slots per label occurrence")
        ->capture_default_str();
    cmd->add_option("--batch-size", *batch_size, "Slots per batch (divisible by k*m)")
        ->capture_default_str();
    cmd->add_option("--im-wt", *im_wt, "Pooling weight for mining embeddings")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--seed", *seed, "Shuffle/sampling seed")->capture_default_str();
    cmd->add_option("--out", *out_path, "Batch plan JSONL")->required();

    cmd->callback([=] {
        const auto model = optim::load_checkpoint(*model_path);
        const auto records = read_records_jsonl(*records_path);
        const auto data = to_training_set(records);
        // One pooled embedding per label: a seeded random view, as the
        // mining procedure samples one pair per label.
        Rng pick(Rng::derive(*seed, 0x53414d50));  // "SAMP"
        std::vector<std::pair<std::string, std::vector<float>>> per_label;
        std::map<std::string, std::size_t> view_counts;
        per_label.reserve(data.size());
        for (const optim::LabeledViews& lv : data) {
            const optim::View& view = lv.views[pick.uniform_int(lv.views.size())];
            const auto fvec =
                model.embed_visual(std::span<const double>(view.visual));
            const auto g = model.embed_text(view.text);
            const auto z = metric::pool(fvec, g, *im_wt);
            per_label.emplace_back(lv.label,
                                   std::vector<float>(z.begin(), z.end()));
            view_counts[lv.label] = lv.views.size();
        }
        const auto sets = mining::build_hard_negative_sets(per_label, *k);
        const auto plan = mining::partition_batches(sets, *batch_size, *k, *m,
                                                    *seed, view_counts);
        write_plan_jsonl(*out_path, plan);
        write_manifest(*out_path, *cmd, {*model_path, *records_path}, {*out_path});
    });
}

void add_train(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "train", "Stage two: supervised contrastive fine-tuning on pooled "
                 "embeddings over a mined batch plan");
    auto f = std::make_shared<TrainFlags>();
    auto model_path = std::make_shared<std::string>();
    auto plan_path = std::make_shared<std::string>();
    auto k = std::make_shared<int>(3);
    auto m = std::make_shared<int>(3);
    auto im_wt = std::make_shared<double>(0.5);
    add_common_train_flags(cmd, f);
    cmd->add_option("--model", *model_path, "Input model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--plan", *plan_path, "Batch plan JSONL from `mine`")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--k", *k, "Hard-negative set size used by the plan")
        ->capture_default_str();
    cmd->add_option("--m", *m, "View slots per label occurrence in the plan")
        ->capture_default_str();
    cmd->add_option("--im-wt", *im_wt, "Pooling weight")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    cmd->callback([=] {
        auto model = optim::load_checkpoint(*model_path);
        const auto records = read_records_jsonl(f->records);
        const auto data = to_training_set(records);
        const auto plan = read_plan_jsonl(*plan_path, *k, *m);
        if (plan.batches.empty()) throw std::runtime_error("empty batch plan");
        HyperParams hp;
        hp.lr_max = f->lr_max;
        hp.batch_size = static_cast<int>(plan.batches.front().size());
        hp.weight_decay = f->weight_decay;
        hp.temp = f->temp;
        hp.im_wt = *im_wt;
        hp.views = *m;
        hp.neighbors = *k;
        hp.epochs = f->epochs;
        const auto trace = optim::train_supervised_toy(model, data, plan, hp, f->seed);
        optim::save_checkpoint(f->out, model);
        std::vector<fs::path> outputs = {f->out};
        if (!f->trace.empty()) {
            optim::write_trace_csv(f->trace, trace);
            outputs.push_back(f->trace);
        }
        write_manifest(f->out, *cmd, {*model_path, f->records, *plan_path}, outputs);
    });
}

void add_link(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "link", "Embed queries and targets and link each query to its "
                "exact top-1 target");
    auto model_path = std::make_shared<std::string>();
    auto queries_path = std::make_shared<std::string>();
    auto targets_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("multimodal");
    auto im_wt = std::make_shared<double>(0.5);
    auto nm_thresh = std::make_shared<double>();
    auto block = std::make_shared<bool>(false);
    auto threads = std::make_shared<int>(default_threads());
    cmd->add_option("--model", *model_path, "Model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--queries", *queries_path, "Query records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--targets", *targets_path, "Target records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--mode", *mode, "visual | language | multimodal")
        ->check(CLI::IsMember({"visual", "language", "multimodal"}))
        ->capture_default_str();
    cmd->add_option("--im-wt", *im_wt, "Pooling weight (multimodal mode)")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    auto* nm_opt = cmd->add_option("--nm-thresh", *nm_thresh,
                                   "No-match score threshold")
                       ->check(CLI::Range(-1.0, 1.0));
    cmd->add_flag("--block", *block, "Restrict candidates to the query's block key");
    cmd->add_option("--threads", *threads, "Worker threads")
        ->capture_default_str();
    cmd->add_option("--out", *out_path, "Predictions CSV")->required();

    cmd->callback([=] {
        const auto model = optim::load_checkpoint(*model_path);
        const auto queries = read_records_jsonl(*queries_path);
        const auto targets = read_records_jsonl(*targets_path);
        linkage::LinkOptions opts;
        opts.mode = *mode == "visual"     ? linkage::Mode::kVisual
                    : *mode == "language" ? linkage::Mode::kLanguage
                                          : linkage::Mode::kMultimodal;
        opts.im_wt = *im_wt;
        if (nm_opt->count()) opts.nm_thresh = *nm_thresh;
        opts.block = *block;
        opts.threads = *threads;
        const auto preds = linkage::link(queries, targets, model, opts);
        linkage::write_predictions_csv(*out_path, preds);
        write_manifest(*out_path, *cmd,
                       {*model_path, *queries_path, *targets_path}, {*out_path});
    });
}

void add_eval(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "eval", "Score a predictions file against multi-match ground truth");
    auto preds_path = std::make_shared<std::string>();
    auto truth_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>();
    auto include_no_match = std::make_shared<bool>(true);
    cmd->add_option("--preds", *preds_path, "Predictions CSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--truth", *truth_path, "Ground truth JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--include-no-match", *include_no_match,
                    "Count empty-truth queries (true/false)")
        ->capture_default_str();
    cmd->add_option("--mode-name", *mode, "Mode label for the report");
    cmd->add_option("--out", *out_path, "Report JSON")->required();

    cmd->callback([=] {
        const auto preds = linkage::read_predictions_csv(*preds_path);
        const auto truth = read_ground_truth_jsonl(*truth_path);
        const auto report =
            linkage::evaluate(preds, truth, *include_no_match, *mode);
        linkage::write_report_json(*out_path, report);
        write_manifest(*out_path, *cmd, {*preds_path, *truth_path}, {*out_path});
    });
}

void add_stringmatch(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "stringmatch", "Link queries to targets by edit distance or n-gram "
                       "cosine over characters or stroke decompositions");
    auto queries_path = std::make_shared<std::string>();
    auto targets_path = std::make_shared<std::string>();
    auto table_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto metric = std::make_shared<std::string>("lev");
    auto unit = std::make_shared<std::string>("char");
    auto n = std::make_shared<std::size_t>(3);
    cmd->add_option("--queries", *queries_path, "Query records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--targets", *targets_path, "Target records JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--metric", *metric, "lev | ngram")
        ->check(CLI::IsMember({"lev", "ngram"}))
        ->capture_default_str();
    cmd->add_option("--n", *n, "n-gram order")->capture_default_str();
    cmd->add_option("--unit", *unit, "char | stroke")
        ->check(CLI::IsMember({"char", "stroke"}))
        ->capture_default_str();
    cmd->add_option("--table", *table_path, "Stroke decomposition TSV")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out_path, "Predictions CSV")->required();

    cmd->callback([=] {
        const auto queries = read_records_jsonl(*queries_path);
        const auto targets = read_records_jsonl(*targets_path);
        str::DecompositionTable table;
        str::StringMatchParams params;
        params.metric = *metric == "lev" ? str::Metric::kLevenshtein
                                         : str::Metric::kNGramCosine;
        params.n = *n;
        params.unit =
            *unit == "stroke" ? str::Unit::kStroke : str::Unit::kCharacter;
        if (!table_path->empty()) {
            table = str::DecompositionTable::load(*table_path);
            params.table = &table;
        }
        const auto matches = str::stringmatch_link(queries, targets, params);
        std::vector<linkage::LinkPrediction> preds;
        preds.reserve(matches.size());
        for (const str::StringMatch& sm : matches)
            preds.push_back({sm.query_id, sm.target_id, sm.score});
        linkage::write_predictions_csv(*out_path, preds);
        std::vector<fs::path> inputs = {*queries_path, *targets_path};
        if (!table_path->empty()) inputs.push_back(*table_path);
        write_manifest(*out_path, *cmd, inputs, {*out_path});
    });
}

void add_graph(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "graph", "Per-node average distance to seed firms and degree over "
                 "the undirected prediction graph");
    auto preds_path = std::make_shared<std::string>();
    auto seeds_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("--preds", *preds_path, "Predictions CSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed-firms", *seeds_path, "Seed firm ids, one per line")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out_path, "Stats CSV (node,avg_distance,degree)")
        ->required();

    cmd->callback([=] {
        const auto preds = linkage::read_predictions_csv(*preds_path);
        const auto seed_list = read_word_list(*seeds_path);
        const std::set<std::string> seeds(seed_list.begin(), seed_list.end());
        const auto stats = linkage::supply_graph_stats(preds, seeds);
        linkage::write_graph_stats_csv(*out_path, stats);
        write_manifest(*out_path, *cmd, {*preds_path, *seeds_path}, {*out_path});
    });
}

std::string trim(std::string_view s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string_view::npos) return "";
    const auto to = s.find_last_not_of(" \t\r");
    return std::string(s.substr(from, to - from + 1));
}

/// Config file support: `key = value` lines (`#` comments), keys checked
/// against the subcommand's options, command-line values taking
/// precedence. Applied by injecting `--key=value` args before parsing.
std::vector<std::string> apply_config_file(CLI::App& app,
                                           std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw std::invalid_argument("--config requires a path");
            config_path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + i);
            break;
        }
    }
    if (config_path.empty()) return args;
    if (args.empty() || args.front().rfind("-", 0) == 0)
        throw std::invalid_argument("--config requires a subcommand");
    CLI::App* cmd = app.get_subcommand_no_throw(args.front());
    if (!cmd) throw std::invalid_argument("unknown command " + args.front());

    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open config " + config_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key");
        const std::string flag = "--" + key;
        if (!cmd->get_option_no_throw(flag))
            throw std::invalid_argument("unknown config key " + key);
        bool overridden = false;
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) overridden = true;
        if (!overridden) args.push_back(flag + "=" + value);
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Record linkage toolkit: synthesis, contrastive training, "
                 "exact retrieval, and evaluation"};
    app.require_subcommand(1);
    add_ingest(app);
    add_synth(app);
    add_pretrain(app);
    add_mine(app);
    add_train(app);
    add_link(app);
    add_eval(app);
    add_stringmatch(app);
    add_graph(app);
    for (CLI::App* cmd : app.get_subcommands(nullptr))
        cmd->add_option("--config",
                        "Config file: `key = value` lines, `#` comments, keys "
                        "matching this command's options");

    std::vector<std::string> args;
    try {
        args = apply_config_file(
            app, std::vector<std::string>(argv + 1, argv + argc));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }
    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
