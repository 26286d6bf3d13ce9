#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reclink/matrix.hpp"
#include "reclink/mining.hpp"
#include "reclink/record.hpp"

namespace reclink::optim {

// -- Text featurization ------------------------------------------------

struct TextEncoderConfig {
    std::size_t hash_dim = 4096;  // power of two
    std::vector<int> ngram_orders = {1, 2, 3};
};

/// Sparse feature vector: (bucket, count) pairs sorted by bucket.
using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

/// Counts of hashed character n-grams for each configured order. The hash
/// is FNV-1a over UTF-8 bytes, stable across runs and platforms.
SparseVec featurize_text(std::string_view s, const TextEncoderConfig& cfg);

// -- Encoders -----------------------------------------------------------

/// A linear map (optionally with one tanh hidden layer) followed by L2
/// normalization. Stands in for the real vision/text encoders, which are
/// out of scope; linear suffices to exercise every loss, optimizer, and
/// mining path while keeping gradient checks exact.
class Encoder {
public:
    Encoder() = default;
    /// Seeded Gaussian init, sd 1/sqrt(fan_in). hidden_dim=0 is pure linear.
    Encoder(std::size_t in_dim, std::size_t out_dim, std::size_t hidden_dim,
            std::uint64_t seed);

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }
    std::size_t hidden_dim() const { return hidden_dim_; }

    struct Forward {
        SparseVec input;
        std::vector<double> h_pre;  // hidden pre-activation (hidden only)
        std::vector<double> h;      // tanh(h_pre)
        std::vector<double> raw;    // pre-normalization output
        double raw_norm = 0.0;
        std::vector<double> unit;   // raw / raw_norm
    };
    Forward forward(const SparseVec& input) const;
    std::vector<double> embed(const SparseVec& input) const;

    struct Grads {
        MatrixD w1, w2;
    };
    Grads zero_grads() const;
    /// Accumulates d(loss)/d(weights) given d(loss)/d(unit output).
    void backward(const Forward& fwd, std::span<const double> d_unit,
                  Grads& grads) const;

    MatrixD& w1() { return w1_; }
    MatrixD& w2() { return w2_; }
    const MatrixD& w1() const { return w1_; }
    const MatrixD& w2() const { return w2_; }

private:
    std::size_t in_dim_ = 0, out_dim_ = 0, hidden_dim_ = 0;
    MatrixD w1_;  // in_dim x (hidden_dim ? hidden_dim : out_dim)
    MatrixD w2_;  // hidden_dim x out_dim, empty when linear
};

/// Dense vector as SparseVec input for the visual encoder.
SparseVec dense_input(std::span<const float> v);
SparseVec dense_input(std::span<const double> v);

// -- Optimizer and schedule ------------------------------------------------

struct AdamWState {
    std::int64_t t = 0;
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Decoupled weight decay (param *= 1 - lr*wd) then bias-corrected Adam.
/// Throws on non-finite gradient entries.
void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamWState& state, double lr, double weight_decay);

struct SchedulerConfig {
    double lr_max = 1.0;
    double lr_min = 0.0;
    int t0 = 10;
    int tmult = 2;
};

/// Cosine annealing with warm restarts: cycle lengths T0, T0*Tmult, ...;
/// lr = lr_min + (lr_max-lr_min)/2 * (1 + cos(pi * T_cur / T_i)).
double cosine_warm_restarts_lr(std::int64_t step, const SchedulerConfig& config);

// -- Toy model and training loops ---------------------------------------

struct View {
    std::vector<double> visual;  // d_in
    std::string text;
};

struct LabeledViews {
    std::string label;
    std::vector<View> views;
};

using TrainingSet = std::vector<LabeledViews>;

struct ToyModel {
    TextEncoderConfig text_cfg;
    Encoder visual;
    Encoder text;

    static ToyModel init(std::size_t d_in, std::size_t out_dim,
                         const TextEncoderConfig& cfg, std::size_t hidden_dim,
                         std::uint64_t seed);

    std::vector<double> embed_text(std::string_view s) const;
    std::vector<double> embed_visual(std::span<const double> v) const;
    std::vector<double> embed_visual(std::span<const float> v) const;
};

struct TraceRow {
    int epoch;
    std::int64_t step;
    double lr;
    double loss;
};

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<TraceRow>& trace);

/// Self-supervised stage: minimizes the symmetric image-text loss over
/// seeded minibatches of (visual, text) views. Deterministic given seed.
std::vector<TraceRow> pretrain_toy(ToyModel& model, const TrainingSet& data,
                                   const HyperParams& hp, std::uint64_t seed);

/// Supervised stage: minimizes the supervised contrastive loss on pooled
/// embeddings over BatchPlan batches, resampling views per epoch.
std::vector<TraceRow> train_supervised_toy(ToyModel& model, const TrainingSet& data,
                                           const mining::BatchPlan& plan,
                                           const HyperParams& hp,
                                           std::uint64_t seed);

// -- Checkpoints --------------------------------------------------------

/// Binary checkpoint: magic "RLCK", format version, hash config and
/// encoder dims, then row-major little-endian float32 weights.
void save_checkpoint(const std::filesystem::path& path, const ToyModel& model);
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace reclink::optim
