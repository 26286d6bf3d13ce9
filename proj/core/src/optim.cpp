#include "reclink/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "reclink/io.hpp"
#include "reclink/metricspace.hpp"
#include "reclink/rng.hpp"
#include "reclink/utf8.hpp"

namespace reclink::optim {

SparseVec featurize_text(std::string_view s, const TextEncoderConfig& cfg) {
    if (cfg.hash_dim == 0 || (cfg.hash_dim & (cfg.hash_dim - 1)) != 0)
        throw std::invalid_argument("hash_dim must be a power of two");
    const auto cps = utf8_decode(s);
    std::unordered_map<std::uint32_t, double> counts;
    std::string gram;
    for (int order : cfg.ngram_orders) {
        if (order <= 0) throw std::invalid_argument("ngram order must be positive");
        const auto n = static_cast<std::size_t>(order);
        if (cps.size() < n) continue;
        for (std::size_t i = 0; i + n <= cps.size(); ++i) {
            gram.clear();
            for (std::size_t j = 0; j < n; ++j) utf8_append(gram, cps[i + j]);
            const std::uint64_t h =
                fnv1a64(gram.data(), gram.size(), 0xcbf29ce484222325ULL ^ n);
            counts[static_cast<std::uint32_t>(h & (cfg.hash_dim - 1))] += 1.0;
        }
    }
    SparseVec out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end());
    return out;
}

SparseVec dense_input(std::span<const float> v) {
    SparseVec out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] != 0.0f) out.emplace_back(static_cast<std::uint32_t>(i), v[i]);
    return out;
}

SparseVec dense_input(std::span<const double> v) {
    SparseVec out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] != 0.0) out.emplace_back(static_cast<std::uint32_t>(i), v[i]);
    return out;
}

namespace {

void gaussian_init(MatrixD& w, double sd, Rng& rng) {
    for (double& x : w.data()) x = sd * rng.gaussian();
}

}  // namespace

Encoder::Encoder(std::size_t in_dim, std::size_t out_dim, std::size_t hidden_dim,
                 std::uint64_t seed)
    : in_dim_(in_dim), out_dim_(out_dim), hidden_dim_(hidden_dim) {
    Rng rng(seed);
    w1_ = MatrixD(in_dim, hidden_dim ? hidden_dim : out_dim);
    gaussian_init(w1_, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
    if (hidden_dim) {
        w2_ = MatrixD(hidden_dim, out_dim);
        gaussian_init(w2_, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
    }
}

Encoder::Forward Encoder::forward(const SparseVec& input) const {
    Forward fwd;
    fwd.input = input;
    const std::size_t h1 = hidden_dim_ ? hidden_dim_ : out_dim_;
    std::vector<double> acc(h1, 0.0);
    for (const auto& [i, x] : input) {
        if (i >= in_dim_) throw std::invalid_argument("input index out of range");
        const auto row = w1_.row(i);
        for (std::size_t j = 0; j < h1; ++j) acc[j] += x * row[j];
    }
    if (hidden_dim_) {
        fwd.h_pre = acc;
        fwd.h.resize(hidden_dim_);
        for (std::size_t t = 0; t < hidden_dim_; ++t) fwd.h[t] = std::tanh(acc[t]);
        fwd.raw.assign(out_dim_, 0.0);
        for (std::size_t t = 0; t < hidden_dim_; ++t) {
            const auto row = w2_.row(t);
            for (std::size_t j = 0; j < out_dim_; ++j)
                fwd.raw[j] += fwd.h[t] * row[j];
        }
    } else {
        fwd.raw = std::move(acc);
    }
    fwd.raw_norm = norm(fwd.raw);
    if (fwd.raw_norm == 0.0)
        throw std::invalid_argument("degenerate embedding: zero encoder output");
    fwd.unit.resize(out_dim_);
    for (std::size_t j = 0; j < out_dim_; ++j)
        fwd.unit[j] = fwd.raw[j] / fwd.raw_norm;
    return fwd;
}

std::vector<double> Encoder::embed(const SparseVec& input) const {
    return forward(input).unit;
}

Encoder::Grads Encoder::zero_grads() const {
    Grads g;
    g.w1 = MatrixD(w1_.rows(), w1_.cols());
    if (hidden_dim_) g.w2 = MatrixD(w2_.rows(), w2_.cols());
    return g;
}

void Encoder::backward(const Forward& fwd, std::span<const double> d_unit,
                       Grads& grads) const {
    // through normalization: d_raw = (d_unit - (d_unit . unit) unit) / |raw|
    const double proj = dot(d_unit, fwd.unit);
    std::vector<double> d_raw(out_dim_);
    for (std::size_t j = 0; j < out_dim_; ++j)
        d_raw[j] = (d_unit[j] - proj * fwd.unit[j]) / fwd.raw_norm;

    if (hidden_dim_) {
        std::vector<double> d_hpre(hidden_dim_);
        for (std::size_t t = 0; t < hidden_dim_; ++t) {
            auto g2 = grads.w2.row(t);
            const auto row = w2_.row(t);
            double dh = 0.0;
            for (std::size_t j = 0; j < out_dim_; ++j) {
                g2[j] += fwd.h[t] * d_raw[j];
                dh += row[j] * d_raw[j];
            }
            d_hpre[t] = dh * (1.0 - fwd.h[t] * fwd.h[t]);
        }
        for (const auto& [i, x] : fwd.input) {
            auto g1 = grads.w1.row(i);
            for (std::size_t t = 0; t < hidden_dim_; ++t) g1[t] += x * d_hpre[t];
        }
    } else {
        for (const auto& [i, x] : fwd.input) {
            auto g1 = grads.w1.row(i);
            for (std::size_t j = 0; j < out_dim_; ++j) g1[j] += x * d_raw[j];
        }
    }
}

void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamWState& state, double lr, double weight_decay) {
    if (params.size() != grads.size())
        throw std::invalid_argument("param/grad shape mismatch");
    if (lr < 0) throw std::invalid_argument("lr must be >= 0");
    for (double g : grads)
        if (!std::isfinite(g))
            throw std::invalid_argument("non-finite gradient entry");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    } else if (state.m.size() != params.size()) {
        throw std::invalid_argument("optimizer state shape mismatch");
    }

    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] *= 1.0 - lr * weight_decay;  // decoupled decay first
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] =
            state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

double cosine_warm_restarts_lr(std::int64_t step, const SchedulerConfig& config) {
    if (config.t0 < 1 || config.tmult < 1)
        throw std::invalid_argument("T0 and Tmult must be >= 1");
    if (config.lr_max < config.lr_min || config.lr_min < 0)
        throw std::invalid_argument("require lr_max >= lr_min >= 0");
    if (step < 0) throw std::invalid_argument("step must be >= 0");

    std::int64_t cycle_len = config.t0;
    std::int64_t offset = step;
    while (offset >= cycle_len) {
        offset -= cycle_len;
        cycle_len *= config.tmult;
        if (config.tmult == 1) break;
    }
    if (config.tmult == 1) offset = step % config.t0;

    const double frac = static_cast<double>(offset) / static_cast<double>(cycle_len);
    return config.lr_min + 0.5 * (config.lr_max - config.lr_min) *
                               (1.0 + std::cos(std::numbers::pi * frac));
}

ToyModel ToyModel::init(std::size_t d_in, std::size_t out_dim,
                        const TextEncoderConfig& cfg, std::size_t hidden_dim,
                        std::uint64_t seed) {
    ToyModel model;
    model.text_cfg = cfg;
    model.visual = Encoder(d_in, out_dim, hidden_dim, Rng::derive(seed, 0));
    model.text = Encoder(cfg.hash_dim, out_dim, hidden_dim, Rng::derive(seed, 1));
    return model;
}

std::vector<double> ToyModel::embed_text(std::string_view s) const {
    return text.embed(featurize_text(s, text_cfg));
}

std::vector<double> ToyModel::embed_visual(std::span<const double> v) const {
    return visual.embed(dense_input(v));
}

std::vector<double> ToyModel::embed_visual(std::span<const float> v) const {
    return visual.embed(dense_input(v));
}

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << "epoch,step,lr,loss\n";
    out.precision(17);
    for (const TraceRow& row : trace)
        out << row.epoch << ',' << row.step << ',' << row.lr << ',' << row.loss
            << '\n';
    atomic_write(path, out.str());
}

namespace {

struct Trainer {
    ToyModel& model;
    const HyperParams& hp;
    SchedulerConfig sched;
    Encoder::Grads vis_grads, txt_grads;
    AdamWState vis_w1_state, vis_w2_state, txt_w1_state, txt_w2_state;
    std::int64_t step = 0;

    explicit Trainer(ToyModel& m, const HyperParams& h) : model(m), hp(h) {
        sched.lr_max = h.lr_max;
        vis_grads = m.visual.zero_grads();
        txt_grads = m.text.zero_grads();
    }

    void zero() {
        std::fill(vis_grads.w1.data().begin(), vis_grads.w1.data().end(), 0.0);
        std::fill(vis_grads.w2.data().begin(), vis_grads.w2.data().end(), 0.0);
        std::fill(txt_grads.w1.data().begin(), txt_grads.w1.data().end(), 0.0);
        std::fill(txt_grads.w2.data().begin(), txt_grads.w2.data().end(), 0.0);
    }

    double apply() {
        const double lr = cosine_warm_restarts_lr(step, sched);
        adamw_step(model.visual.w1().data(), vis_grads.w1.data(), vis_w1_state,
                   lr, hp.weight_decay);
        if (model.visual.hidden_dim())
            adamw_step(model.visual.w2().data(), vis_grads.w2.data(),
                       vis_w2_state, lr, hp.weight_decay);
        adamw_step(model.text.w1().data(), txt_grads.w1.data(), txt_w1_state, lr,
                   hp.weight_decay);
        if (model.text.hidden_dim())
            adamw_step(model.text.w2().data(), txt_grads.w2.data(), txt_w2_state,
                       lr, hp.weight_decay);
        ++step;
        return lr;
    }
};

}  // namespace

std::vector<TraceRow> pretrain_toy(ToyModel& model, const TrainingSet& data,
                                   const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    std::vector<const View*> pairs;
    for (const LabeledViews& lv : data)
        for (const View& v : lv.views) pairs.push_back(&v);
    const auto b = static_cast<std::size_t>(hp.batch_size);
    if (pairs.size() < b)
        throw std::invalid_argument("batch size exceeds dataset size");

    const std::size_t d = model.visual.out_dim();
    Trainer trainer(model, hp);
    std::vector<TraceRow> trace;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(epoch)));
        std::vector<const View*> order = pairs;
        rng.shuffle(order);
        for (std::size_t start = 0; start + b <= order.size(); start += b) {
            std::vector<Encoder::Forward> vis_fwd(b), txt_fwd(b);
            MatrixD image(b, d), text(b, d);
            for (std::size_t i = 0; i < b; ++i) {
                const View& view = *order[start + i];
                vis_fwd[i] = model.visual.forward(dense_input(
                    std::span<const double>(view.visual)));
                txt_fwd[i] =
                    model.text.forward(featurize_text(view.text, model.text_cfg));
                std::copy(vis_fwd[i].unit.begin(), vis_fwd[i].unit.end(),
                          image.row(i).begin());
                std::copy(txt_fwd[i].unit.begin(), txt_fwd[i].unit.end(),
                          text.row(i).begin());
            }
            const auto clip = metric::clip_loss_grad(image, text, hp.temp);
            trainer.zero();
            for (std::size_t i = 0; i < b; ++i) {
                model.visual.backward(vis_fwd[i], clip.d_image.row(i),
                                      trainer.vis_grads);
                model.text.backward(txt_fwd[i], clip.d_text.row(i),
                                    trainer.txt_grads);
            }
            const std::int64_t at = trainer.step;
            const double lr = trainer.apply();
            trace.push_back({epoch, at, lr, clip.value});
        }
    }
    return trace;
}

std::vector<TraceRow> train_supervised_toy(ToyModel& model, const TrainingSet& data,
                                           const mining::BatchPlan& plan,
                                           const HyperParams& hp,
                                           std::uint64_t seed) {
    hp.validate();
    std::unordered_map<std::string, const LabeledViews*> by_label;
    std::map<std::string, std::size_t> view_counts;
    for (const LabeledViews& lv : data) {
        by_label[lv.label] = &lv;
        view_counts[lv.label] = lv.views.size();
    }

    const std::size_t d = model.visual.out_dim();
    const double w = hp.im_wt;
    metric::LossOptions loss_opts;
    loss_opts.temp = hp.temp;

    Trainer trainer(model, hp);
    std::vector<TraceRow> trace;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        const auto epoch_plan =
            mining::resample_views(plan, view_counts, seed,
                                   static_cast<std::uint64_t>(epoch));
        for (const auto& slots : epoch_plan.batches) {
            const std::size_t b = slots.size();
            std::vector<Encoder::Forward> vis_fwd(b), txt_fwd(b);
            metric::PooledBatch batch;
            batch.image_embs = MatrixD(b, d);
            batch.text_embs = MatrixD(b, d);
            batch.pooled = MatrixD(b, d);
            std::vector<double> pool_norms(b, 1.0);
            for (std::size_t i = 0; i < b; ++i) {
                const auto it = by_label.find(slots[i].label);
                if (it == by_label.end())
                    throw std::invalid_argument("plan label not in dataset: " +
                                                slots[i].label);
                const View& view = it->second->views.at(slots[i].view);
                batch.labels.push_back(slots[i].label);
                vis_fwd[i] = model.visual.forward(dense_input(
                    std::span<const double>(view.visual)));
                txt_fwd[i] =
                    model.text.forward(featurize_text(view.text, model.text_cfg));
                std::copy(vis_fwd[i].unit.begin(), vis_fwd[i].unit.end(),
                          batch.image_embs.row(i).begin());
                std::copy(txt_fwd[i].unit.begin(), txt_fwd[i].unit.end(),
                          batch.text_embs.row(i).begin());
                auto z = batch.pooled.row(i);
                if (w == 1.0) {
                    std::copy(vis_fwd[i].unit.begin(), vis_fwd[i].unit.end(),
                              z.begin());
                } else if (w == 0.0) {
                    std::copy(txt_fwd[i].unit.begin(), txt_fwd[i].unit.end(),
                              z.begin());
                } else {
                    for (std::size_t t = 0; t < d; ++t)
                        z[t] = w * vis_fwd[i].unit[t] +
                               (1.0 - w) * txt_fwd[i].unit[t];
                    pool_norms[i] = norm(z);
                    if (pool_norms[i] == 0.0)
                        throw std::invalid_argument("degenerate pool");
                    for (std::size_t t = 0; t < d; ++t) z[t] /= pool_norms[i];
                }
            }

            const auto report = metric::supcon_loss(batch, loss_opts);
            const MatrixD dz = metric::supcon_grad(batch, loss_opts);
            trainer.zero();
            std::vector<double> df(d), dg(d);
            for (std::size_t i = 0; i < b; ++i) {
                const auto dzi = dz.row(i);
                if (w == 1.0) {
                    model.visual.backward(vis_fwd[i], dzi, trainer.vis_grads);
                } else if (w == 0.0) {
                    model.text.backward(txt_fwd[i], dzi, trainer.txt_grads);
                } else {
                    const auto z = batch.pooled.row(i);
                    const double proj = dot(dzi, z);
                    for (std::size_t t = 0; t < d; ++t) {
                        const double dp = (dzi[t] - proj * z[t]) / pool_norms[i];
                        df[t] = w * dp;
                        dg[t] = (1.0 - w) * dp;
                    }
                    model.visual.backward(vis_fwd[i], df, trainer.vis_grads);
                    model.text.backward(txt_fwd[i], dg, trainer.txt_grads);
                }
            }
            const std::int64_t at = trainer.step;
            const double lr = trainer.apply();
            trace.push_back({epoch, at, lr, report.value});
        }
    }
    return trace;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t& off) {
    if (off + 4 > s.size()) throw std::runtime_error("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | static_cast<unsigned char>(s[off + i]);
    off += 4;
    return v;
}

void put_matrix(std::string& out, const MatrixD& m) {
    for (double x : m.data()) {
        const auto f = static_cast<float>(x);
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        put_u32(out, v);
    }
}

void get_matrix(const std::string& s, std::size_t& off, MatrixD& m) {
    for (double& x : m.data()) {
        const std::uint32_t v = get_u32(s, off);
        float f;
        std::memcpy(&f, &v, 4);
        x = f;
    }
}

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ToyModel& model) {
    std::string out = "RLCK";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.text_cfg.hash_dim));
    put_u32(out, static_cast<std::uint32_t>(model.text_cfg.ngram_orders.size()));
    for (int order : model.text_cfg.ngram_orders)
        put_u32(out, static_cast<std::uint32_t>(order));
    put_u32(out, static_cast<std::uint32_t>(model.visual.in_dim()));
    put_u32(out, static_cast<std::uint32_t>(model.visual.out_dim()));
    put_u32(out, static_cast<std::uint32_t>(model.visual.hidden_dim()));
    put_u32(out, static_cast<std::uint32_t>(model.text.hidden_dim()));
    put_matrix(out, model.visual.w1());
    if (model.visual.hidden_dim()) put_matrix(out, model.visual.w2());
    put_matrix(out, model.text.w1());
    if (model.text.hidden_dim()) put_matrix(out, model.text.w2());
    atomic_write(path, out);
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string raw = ss.str();
    if (raw.size() < 8 || raw.compare(0, 4, "RLCK") != 0)
        throw std::runtime_error(path.string() + ": not a checkpoint file");
    std::size_t off = 4;
    if (get_u32(raw, off) != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");

    ToyModel model;
    model.text_cfg.hash_dim = get_u32(raw, off);
    model.text_cfg.ngram_orders.resize(get_u32(raw, off));
    for (int& order : model.text_cfg.ngram_orders)
        order = static_cast<int>(get_u32(raw, off));
    const std::uint32_t d_in = get_u32(raw, off);
    const std::uint32_t out_dim = get_u32(raw, off);
    const std::uint32_t vis_hidden = get_u32(raw, off);
    const std::uint32_t txt_hidden = get_u32(raw, off);
    model.visual = Encoder(d_in, out_dim, vis_hidden, 0);
    model.text = Encoder(model.text_cfg.hash_dim, out_dim, txt_hidden, 0);
    get_matrix(raw, off, model.visual.w1());
    if (vis_hidden) get_matrix(raw, off, model.visual.w2());
    get_matrix(raw, off, model.text.w1());
    if (txt_hidden) get_matrix(raw, off, model.text.w2());
    if (off != raw.size())
        throw std::runtime_error(path.string() + ": trailing checkpoint bytes");
    return model;
}

}  // namespace reclink::optim
