#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reclink/metricspace.hpp"
#include "reclink/rng.hpp"

using namespace reclink;
using namespace reclink::metric;

namespace {

MatrixD random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    MatrixD m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
        normalize_inplace(m.row(i));
    }
    return m;
}

PooledBatch random_batch(Rng& rng, std::size_t b, std::size_t d,
                         std::size_t classes, double im_wt) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < b; ++i)
        labels.push_back("c" + std::to_string(rng.uniform_int(classes)));
    return make_pooled_batch(random_unit_rows(rng, b, d),
                             random_unit_rows(rng, b, d), labels, im_wt);
}

// Direct transcription of the loss definition, no shared code with the
// library path.
double supcon_reference(const MatrixD& z, const std::vector<std::string>& labels,
                        double temp) {
    const std::size_t b = labels.size();
    double total = 0.0;
    std::size_t live = 0;
    for (std::size_t i = 0; i < b; ++i) {
        std::vector<std::size_t> pos;
        for (std::size_t k = 0; k < b; ++k)
            if (k != i && labels[k] == labels[i]) pos.push_back(k);
        if (pos.empty()) continue;
        double denom = 0.0;
        for (std::size_t j = 0; j < b; ++j)
            if (j != i) denom += std::exp(dot(z.row(i), z.row(j)) / temp);
        double term = 0.0;
        for (std::size_t k : pos)
            term += -std::log(std::exp(dot(z.row(i), z.row(k)) / temp) / denom);
        total += term / static_cast<double>(pos.size());
        ++live;
    }
    return live ? total / static_cast<double>(live) : 0.0;
}

}  // namespace

TEST_CASE("pool midpoint of orthogonal unit vectors") {
    const auto z = pool(std::vector<double>{1, 0}, std::vector<double>{0, 1}, 0.5);
    CHECK(z[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(z[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("pool reduces exactly to one modality at the endpoints") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto f = normalized([&] {
            std::vector<double> v(8);
            for (double& x : v) x = rng.gaussian();
            return v;
        }());
        const auto g = normalized([&] {
            std::vector<double> v(8);
            for (double& x : v) x = rng.gaussian();
            return v;
        }());
        CHECK(pool(f, g, 1.0) == f);  // bit-exact
        CHECK(pool(f, g, 0.0) == g);
    }
}

TEST_CASE("pool of the mean equals the normalized mean") {
    const std::vector<double> f{0.6, 0.8};
    const std::vector<double> g{0.8, 0.6};
    const auto z = pool(f, g, 0.5);
    auto mean = std::vector<double>{(f[0] + g[0]) / 2, (f[1] + g[1]) / 2};
    normalize_inplace(mean);
    CHECK(z[0] == doctest::Approx(mean[0]));
    CHECK(z[1] == doctest::Approx(mean[1]));
}

TEST_CASE("pool rejects antipodal inputs at the midpoint") {
    CHECK_THROWS_WITH(
        pool(std::vector<double>{1, 0}, std::vector<double>{-1, 0}, 0.5),
        doctest::Contains("degenerate pool"));
}

TEST_CASE("supcon_loss is zero for an identical positive pair") {
    MatrixD embs(2, 2);
    embs(0, 0) = 1;
    embs(1, 0) = 1;
    const auto batch = make_pooled_batch(embs, embs, {"a", "a"}, 0.5);
    const auto report = supcon_loss(batch, {.temp = 1.0});
    CHECK(report.value == doctest::Approx(0.0));
    CHECK(report.skipped_anchors.empty());
}

TEST_CASE("supcon_loss matches the hand-computed two-class batch") {
    MatrixD embs(4, 2);
    embs(0, 0) = 1;
    embs(1, 0) = 1;
    embs(2, 1) = 1;
    embs(3, 1) = 1;
    const auto batch = make_pooled_batch(embs, embs, {"A", "A", "B", "B"}, 0.5);
    const auto report = supcon_loss(batch, {.temp = 1.0});
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
    CHECK(report.value == doctest::Approx(expected).epsilon(1e-6));
    CHECK(report.value == doctest::Approx(0.55144).epsilon(1e-3));
    for (double term : report.per_anchor)
        CHECK(term == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("all-distinct labels skip every anchor") {
    Rng rng(4);
    const auto batch = random_batch(rng, 3, 4, 1000, 0.5);
    const auto report = supcon_loss(batch, {.temp = 1.0});
    CHECK(report.value == 0.0);
    CHECK(report.skipped_anchors.size() == 3);
}

TEST_CASE("supcon_loss agrees with an independent transcription") {
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const auto batch = random_batch(rng, 8, 6, 3, 0.3);
        const auto report = supcon_loss(batch, {.temp = 0.1});
        CHECK(report.value ==
              doctest::Approx(supcon_reference(batch.pooled, batch.labels, 0.1))
                  .epsilon(1e-10));
    }
}

TEST_CASE("supcon_loss is invariant to batch reordering and rotation") {
    Rng rng(6);
    auto batch = random_batch(rng, 6, 4, 2, 0.5);
    const double base = supcon_loss(batch, {.temp = 0.2}).value;

    // reorder rows 0 and 3
    PooledBatch swapped = batch;
    for (std::size_t j = 0; j < 4; ++j) {
        std::swap(swapped.pooled(0, j), swapped.pooled(3, j));
        std::swap(swapped.image_embs(0, j), swapped.image_embs(3, j));
        std::swap(swapped.text_embs(0, j), swapped.text_embs(3, j));
    }
    std::swap(swapped.labels[0], swapped.labels[3]);
    CHECK(supcon_loss(swapped, {.temp = 0.2}).value == doctest::Approx(base));

    // rotate the plane spanned by coordinates (0,1)
    PooledBatch rotated = batch;
    const double c = std::cos(0.7), s = std::sin(0.7);
    for (std::size_t i = 0; i < 6; ++i) {
        const double x = rotated.pooled(i, 0), y = rotated.pooled(i, 1);
        rotated.pooled(i, 0) = c * x - s * y;
        rotated.pooled(i, 1) = s * x + c * y;
    }
    CHECK(supcon_loss(rotated, {.temp = 0.2}).value ==
          doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("supcon value is the mean of non-skipped per-anchor terms") {
    Rng rng(7);
    const auto batch = random_batch(rng, 10, 5, 4, 0.5);
    const auto report = supcon_loss(batch, {.temp = 0.15});
    double sum = 0.0;
    std::size_t live = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        if (report.skipped_anchors.count(i)) {
            CHECK(report.per_anchor[i] == 0.0);
            continue;
        }
        sum += report.per_anchor[i];
        ++live;
    }
    CHECK(report.value == doctest::Approx(sum / live));
    CHECK(report.value >= 0.0);
}

TEST_CASE("supcon_grad matches central finite differences") {
    Rng rng(8);
    for (int rep = 0; rep < 5; ++rep) {
        auto batch = random_batch(rng, 8, 16, 3, 0.5);
        for (const LossOptions opts :
             {LossOptions{.temp = 0.5},
              LossOptions{.temp = 2.0, .temp_mode = TempMode::kMultiply},
              LossOptions{.temp = 0.5, .include_self = true}}) {
            const MatrixD grad = supcon_grad(batch, opts);
            const auto fd = oracles::finite_diff(
                [&] { return supcon_loss(batch, opts).value; },
                batch.pooled.data());
            CHECK(oracles::max_rel_error(grad.data(), fd) < 1e-4);
        }
    }
}

TEST_CASE("clip_loss basics") {
    MatrixD f(1, 2), g(1, 2);
    f(0, 0) = 1;
    g(0, 0) = 1;
    CHECK(clip_loss(f, g, 1.0) == doctest::Approx(0.0));  // B=1

    MatrixD f2(2, 2), g2(2, 2);
    f2(0, 0) = 1;
    f2(1, 1) = 1;
    g2(0, 0) = 1;
    g2(1, 1) = 1;
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(clip_loss(f2, g2, 1.0) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(clip_loss(f2, g2, 1.0) == doctest::Approx(0.31326).epsilon(1e-3));
}

TEST_CASE("clip_loss is invariant under simultaneous row permutation") {
    Rng rng(9);
    const auto f = random_unit_rows(rng, 5, 6);
    const auto g = random_unit_rows(rng, 5, 6);
    const double base = clip_loss(f, g, 0.3);
    CHECK(base >= 0.0);

    MatrixD fp(5, 6), gp(5, 6);
    const std::size_t perm[5] = {3, 1, 4, 0, 2};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            fp(i, j) = f(perm[i], j);
            gp(i, j) = g(perm[i], j);
        }
    CHECK(clip_loss(fp, gp, 0.3) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("clip_loss_grad matches central finite differences") {
    Rng rng(10);
    auto f = random_unit_rows(rng, 6, 8);
    auto g = random_unit_rows(rng, 6, 8);
    const auto got = clip_loss_grad(f, g, 0.4);
    const auto fd_f = oracles::finite_diff(
        [&] { return clip_loss(f, g, 0.4); }, f.data());
    const auto fd_g = oracles::finite_diff(
        [&] { return clip_loss(f, g, 0.4); }, g.data());
    CHECK(oracles::max_rel_error(got.d_image.data(), fd_f) < 1e-4);
    CHECK(oracles::max_rel_error(got.d_text.data(), fd_g) < 1e-4);
}

TEST_CASE("im_wt=1 pooled batch is bit-identical to the image embeddings") {
    Rng rng(11);
    const auto image = random_unit_rows(rng, 6, 5);
    const auto text = random_unit_rows(rng, 6, 5);
    const auto batch = make_pooled_batch(
        image, text, {"a", "a", "b", "b", "c", "c"}, 1.0);
    CHECK(batch.pooled.data() == batch.image_embs.data());

    // and the loss equals the single-modality loss on the image rows
    PooledBatch direct = batch;
    direct.pooled = batch.image_embs;
    CHECK(supcon_loss(batch, {.temp = 0.1}).value ==
          supcon_loss(direct, {.temp = 0.1}).value);
}
