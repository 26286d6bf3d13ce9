#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "reclink/metricspace.hpp"
#include "reclink/optim.hpp"
#include "reclink/rng.hpp"

using namespace reclink;
using namespace reclink::optim;

namespace {

TrainingSet tiny_training_set(std::size_t labels, std::size_t views,
                              std::size_t d_in, std::uint64_t seed) {
    Rng rng(seed);
    TrainingSet data;
    for (std::size_t c = 0; c < labels; ++c) {
        LabeledViews lv;
        lv.label = "c" + std::to_string(c);
        std::vector<double> base(d_in);
        for (double& x : base) x = rng.gaussian();
        for (std::size_t v = 0; v < views; ++v) {
            View view;
            view.visual = base;
            for (double& x : view.visual) x += 0.1 * rng.gaussian();
            view.text = "label-" + std::to_string(c) + (v % 2 ? "x" : "");
            lv.views.push_back(std::move(view));
        }
        data.push_back(std::move(lv));
    }
    return data;
}

mining::BatchPlan plan_for(const TrainingSet& data, int batch_size, int k, int m,
                           std::uint64_t seed) {
    std::map<std::string, std::size_t> counts;
    std::vector<mining::HardNegativeSet> sets;
    for (std::size_t i = 0; i < data.size(); ++i) {
        counts[data[i].label] = data[i].views.size();
        mining::HardNegativeSet set;
        set.anchor_label = data[i].label;
        for (int j = 1; j < k; ++j)
            set.neighbor_labels.push_back(
                data[(i + j) % data.size()].label);
        sets.push_back(std::move(set));
    }
    return mining::partition_batches(sets, batch_size, k, m, seed, counts);
}

}  // namespace

TEST_CASE("featurize_text determinism and sparsity") {
    const TextEncoderConfig cfg;
    CHECK(featurize_text("", cfg).empty());
    const auto a = featurize_text("東京製紙", cfg);
    const auto b = featurize_text("東京製紙", cfg);
    CHECK(a == b);
    CHECK_FALSE(a.empty());
}

TEST_CASE("featurize_text of 'ab' with orders 1 and 2 hits 3 buckets") {
    TextEncoderConfig cfg;
    cfg.ngram_orders = {1, 2};
    const auto feats = featurize_text("ab", cfg);
    // grams a, b, ab; distinct buckets barring a collision
    double total = 0;
    for (const auto& [bucket, count] : feats) total += count;
    CHECK(total == doctest::Approx(3.0));
    CHECK(feats.size() == 3);
}

TEST_CASE("scheduler closed form and restart boundaries") {
    const SchedulerConfig config{.lr_max = 2.0};
    CHECK(cosine_warm_restarts_lr(0, config) == doctest::Approx(2.0));
    CHECK(cosine_warm_restarts_lr(5, config) == doctest::Approx(1.0));
    // restarts at cumulative steps 10, 30, 70, 150 with T0=10, Tmult=2
    for (std::int64_t boundary : {10, 30, 70, 150})
        CHECK(cosine_warm_restarts_lr(boundary, config) == doctest::Approx(2.0));
    // mid-cycle of the second cycle (length 20)
    CHECK(cosine_warm_restarts_lr(20, config) == doctest::Approx(1.0));
}

TEST_CASE("scheduler matches the closed form over 0..1000") {
    const SchedulerConfig config{.lr_max = 0.37, .lr_min = 0.01};
    for (std::int64_t step = 0; step <= 1000; ++step) {
        // independent cycle bookkeeping
        std::int64_t len = 10, start = 0;
        while (step - start >= len) {
            start += len;
            len *= 2;
        }
        const double want =
            0.01 + 0.5 * (0.37 - 0.01) *
                       (1.0 + std::cos(std::numbers::pi *
                                       static_cast<double>(step - start) / len));
        const double got = cosine_warm_restarts_lr(step, config);
        CHECK(std::abs(got - want) <= 1e-12 * std::max(std::abs(want), 1.0));
    }
}

TEST_CASE("adamw zero gradient leaves parameters unchanged without decay") {
    std::vector<double> params{1.0, -2.0, 3.0};
    const std::vector<double> grads{0.0, 0.0, 0.0};
    AdamWState state;
    adamw_step(params, grads, state, 0.01, 0.0);
    CHECK(params == std::vector<double>{1.0, -2.0, 3.0});
    CHECK(state.t == 1);
}

TEST_CASE("first adamw step moves by about lr in the gradient sign") {
    std::vector<double> params{0.0, 0.0};
    const std::vector<double> grads{0.5, -3.0};
    AdamWState state;
    adamw_step(params, grads, state, 0.01, 0.0);
    CHECK(params[0] == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(params[1] == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("decoupled decay scales parameters before the update") {
    std::vector<double> params{1.0, 2.0};
    const std::vector<double> grads{0.0, 0.0};
    AdamWState state;
    adamw_step(params, grads, state, 0.01, 0.1);
    CHECK(params[0] == doctest::Approx(0.999));
    CHECK(params[1] == doctest::Approx(2.0 * 0.999));
}

TEST_CASE("adamw rejects non-finite gradients") {
    std::vector<double> params{1.0};
    std::vector<double> grads{std::nan("")};
    AdamWState state;
    CHECK_THROWS(adamw_step(params, grads, state, 0.01, 0.0));
}

TEST_CASE("encoder gradient matches finite differences") {
    for (const std::size_t hidden : {std::size_t{0}, std::size_t{5}}) {
        Encoder enc(6, 4, hidden, 77);
        SparseVec input{{0, 1.0}, {2, -0.7}, {5, 0.4}};
        std::vector<double> direction(4);
        Rng rng(3);
        for (double& x : direction) x = rng.gaussian();

        const auto fwd = enc.forward(input);
        auto grads = enc.zero_grads();
        enc.backward(fwd, direction, grads);

        const auto loss = [&] {
            const auto unit = enc.embed(input);
            double s = 0;
            for (std::size_t i = 0; i < unit.size(); ++i)
                s += direction[i] * unit[i];
            return s;
        };
        const auto fd1 = oracles::finite_diff(loss, enc.w1().data());
        CHECK(oracles::max_rel_error(grads.w1.data(), fd1) < 1e-4);
        if (hidden) {
            const auto fd2 = oracles::finite_diff(loss, enc.w2().data());
            CHECK(oracles::max_rel_error(grads.w2.data(), fd2) < 1e-4);
        }
    }
}

TEST_CASE("gradient through pool + normalize + encoders matches FD") {
    // two-instance toy: loss is the supervised contrastive value of the
    // pooled embeddings, differentiated back to both encoders' weights
    auto model = ToyModel::init(4, 3, {.hash_dim = 64, .ngram_orders = {1, 2}},
                                0, 123);
    const std::vector<std::vector<double>> vis = {{1.0, 0.2, -0.3, 0.5},
                                                  {-0.4, 1.1, 0.6, -0.2}};
    const std::vector<std::string> texts = {"ab", "cd"};
    const double im_wt = 0.4, temp = 0.5;

    const auto loss = [&] {
        MatrixD pooled(2, 3);
        for (std::size_t i = 0; i < 2; ++i) {
            const auto f = model.embed_visual(std::span<const double>(vis[i]));
            const auto g = model.embed_text(texts[i]);
            const auto z = metric::pool(f, g, im_wt);
            std::copy(z.begin(), z.end(), pooled.row(i).begin());
        }
        metric::PooledBatch batch;
        batch.image_embs = pooled;
        batch.text_embs = pooled;
        batch.pooled = pooled;
        batch.labels = {"same", "same"};
        return metric::supcon_loss(batch, {.temp = temp}).value;
    };

    // analytic path
    std::vector<Encoder::Forward> vf(2), tf(2);
    metric::PooledBatch batch;
    batch.image_embs = MatrixD(2, 3);
    batch.text_embs = MatrixD(2, 3);
    batch.pooled = MatrixD(2, 3);
    batch.labels = {"same", "same"};
    std::vector<double> pool_norms(2);
    for (std::size_t i = 0; i < 2; ++i) {
        vf[i] = model.visual.forward(dense_input(std::span<const double>(vis[i])));
        tf[i] = model.text.forward(featurize_text(texts[i], model.text_cfg));
        auto z = batch.pooled.row(i);
        for (std::size_t t = 0; t < 3; ++t)
            z[t] = im_wt * vf[i].unit[t] + (1 - im_wt) * tf[i].unit[t];
        pool_norms[i] = norm(z);
        for (std::size_t t = 0; t < 3; ++t) z[t] /= pool_norms[i];
    }
    const MatrixD dz = metric::supcon_grad(batch, {.temp = temp});
    auto vis_grads = model.visual.zero_grads();
    auto txt_grads = model.text.zero_grads();
    for (std::size_t i = 0; i < 2; ++i) {
        const auto z = batch.pooled.row(i);
        const double proj = dot(dz.row(i), z);
        std::vector<double> df(3), dg(3);
        for (std::size_t t = 0; t < 3; ++t) {
            const double dp = (dz(i, t) - proj * z[t]) / pool_norms[i];
            df[t] = im_wt * dp;
            dg[t] = (1 - im_wt) * dp;
        }
        model.visual.backward(vf[i], df, vis_grads);
        model.text.backward(tf[i], dg, txt_grads);
    }

    const auto fd_vis = oracles::finite_diff(loss, model.visual.w1().data());
    const auto fd_txt = oracles::finite_diff(loss, model.text.w1().data());
    CHECK(oracles::max_rel_error(vis_grads.w1.data(), fd_vis) < 1e-4);
    CHECK(oracles::max_rel_error(txt_grads.w1.data(), fd_txt) < 1e-4);
}

TEST_CASE("pretraining reduces the loss and is reproducible") {
    const auto data = tiny_training_set(12, 3, 6, 5);
    HyperParams hp;
    hp.batch_size = 12;
    hp.epochs = 8;
    hp.lr_max = 0.05;
    hp.temp = 0.2;
    hp.weight_decay = 0.0;

    auto model1 = ToyModel::init(6, 8, {.hash_dim = 256}, 0, 9);
    const auto trace1 = pretrain_toy(model1, data, hp, 21);
    REQUIRE_FALSE(trace1.empty());

    double first_epoch = 0, last_epoch = 0;
    int nf = 0, nl = 0;
    for (const auto& row : trace1) {
        if (row.epoch == 0) {
            first_epoch += row.loss;
            ++nf;
        }
        if (row.epoch == hp.epochs - 1) {
            last_epoch += row.loss;
            ++nl;
        }
    }
    CHECK(last_epoch / nl < first_epoch / nf);

    auto model2 = ToyModel::init(6, 8, {.hash_dim = 256}, 0, 9);
    const auto trace2 = pretrain_toy(model2, data, hp, 21);
    CHECK(model1.visual.w1().data() == model2.visual.w1().data());
    CHECK(model1.text.w1().data() == model2.text.w1().data());
    for (std::size_t i = 0; i < trace1.size(); ++i)
        CHECK(trace1[i].loss == trace2[i].loss);
}

TEST_CASE("zero epochs leave the encoders at initialization") {
    const auto data = tiny_training_set(6, 2, 4, 1);
    HyperParams hp;
    hp.batch_size = 4;
    hp.epochs = 0;
    auto model = ToyModel::init(4, 6, {.hash_dim = 128}, 0, 2);
    const auto reference = ToyModel::init(4, 6, {.hash_dim = 128}, 0, 2);
    const auto trace = pretrain_toy(model, data, hp, 3);
    CHECK(trace.empty());
    CHECK(model.visual.w1().data() == reference.visual.w1().data());
    CHECK(model.text.w1().data() == reference.text.w1().data());
}

TEST_CASE("supervised training with lr 0 leaves weights unchanged") {
    const auto data = tiny_training_set(9, 3, 5, 8);
    const auto plan = plan_for(data, 18, 3, 2, 4);
    REQUIRE_FALSE(plan.batches.empty());

    HyperParams hp;
    hp.batch_size = 18;
    hp.neighbors = 3;
    hp.views = 2;
    hp.epochs = 2;
    hp.lr_max = 0.0;
    hp.weight_decay = 0.0;
    auto model = ToyModel::init(5, 6, {.hash_dim = 128}, 0, 31);
    const auto reference = ToyModel::init(5, 6, {.hash_dim = 128}, 0, 31);
    train_supervised_toy(model, data, plan, hp, 7);
    CHECK(model.visual.w1().data() == reference.visual.w1().data());
    CHECK(model.text.w1().data() == reference.text.w1().data());
}

TEST_CASE("supervised training is reproducible and reduces the loss") {
    const auto data = tiny_training_set(12, 4, 6, 13);
    const auto plan = plan_for(data, 12, 2, 2, 5);
    HyperParams hp;
    hp.batch_size = 12;
    hp.neighbors = 2;
    hp.views = 2;
    hp.epochs = 10;
    hp.lr_max = 0.05;
    hp.temp = 0.2;
    hp.weight_decay = 0.0;

    auto m1 = ToyModel::init(6, 8, {.hash_dim = 256}, 0, 17);
    auto m2 = ToyModel::init(6, 8, {.hash_dim = 256}, 0, 17);
    const auto t1 = train_supervised_toy(m1, data, plan, hp, 19);
    const auto t2 = train_supervised_toy(m2, data, plan, hp, 19);
    REQUIRE_FALSE(t1.empty());
    CHECK(m1.visual.w1().data() == m2.visual.w1().data());
    CHECK(m1.text.w1().data() == m2.text.w1().data());

    double first = 0, last = 0;
    int nf = 0, nl = 0;
    for (const auto& row : t1) {
        if (row.epoch == 0) {
            first += row.loss;
            ++nf;
        }
        if (row.epoch == hp.epochs - 1) {
            last += row.loss;
            ++nl;
        }
    }
    CHECK(last / nl < first / nf);
}

TEST_CASE("checkpoints round-trip through the binary format") {
    auto model = ToyModel::init(6, 4, {.hash_dim = 128, .ngram_orders = {1, 3}},
                                5, 99);
    const auto path = std::filesystem::temp_directory_path() / "rl_test.ckpt";
    save_checkpoint(path, model);
    const auto back = load_checkpoint(path);
    CHECK(back.text_cfg.hash_dim == 128);
    CHECK(back.text_cfg.ngram_orders == std::vector<int>{1, 3});
    CHECK(back.visual.in_dim() == 6);
    CHECK(back.visual.hidden_dim() == 5);
    // weights survive to float32 precision
    for (std::size_t i = 0; i < model.visual.w1().data().size(); ++i)
        CHECK(back.visual.w1().data()[i] ==
              static_cast<double>(static_cast<float>(model.visual.w1().data()[i])));
    // a second save of the loaded model is byte-identical
    const auto path2 = std::filesystem::temp_directory_path() / "rl_test2.ckpt";
    save_checkpoint(path2, back);
    const auto load_bytes = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(load_bytes(path) == load_bytes(path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}
