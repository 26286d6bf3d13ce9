#include "reclink/metricspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reclink::metric {

namespace {

double temp_factor(const LossOptions& opts) {
    if (opts.temp <= 0) throw std::invalid_argument("temp must be > 0");
    return opts.temp_mode == TempMode::kDivide ? 1.0 / opts.temp : opts.temp;
}

MatrixD similarity(const MatrixD& z) {
    const std::size_t b = z.rows();
    MatrixD s(b, b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double d = dot(z.row(i), z.row(j));
            s(i, j) = d;
            s(j, i) = d;
        }
    return s;
}

std::vector<std::vector<std::size_t>> positive_sets(
    const std::vector<std::string>& labels) {
    const std::size_t b = labels.size();
    std::vector<std::vector<std::size_t>> pos(b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
            if (j != i && labels[j] == labels[i]) pos[i].push_back(j);
    return pos;
}

}  // namespace

std::vector<double> pool(std::span<const double> f, std::span<const double> g,
                         double im_wt) {
    if (f.size() != g.size()) throw std::invalid_argument("dimension mismatch");
    if (im_wt < 0.0 || im_wt > 1.0)
        throw std::invalid_argument("im_wt must be in [0,1]");
    if (im_wt == 1.0) return {f.begin(), f.end()};
    if (im_wt == 0.0) return {g.begin(), g.end()};
    std::vector<double> z(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        z[i] = im_wt * f[i] + (1.0 - im_wt) * g[i];
    if (norm(z) == 0.0) throw std::invalid_argument("degenerate pool");
    normalize_inplace(z);
    return z;
}

PooledBatch make_pooled_batch(const MatrixD& image_embs, const MatrixD& text_embs,
                              std::vector<std::string> labels, double im_wt) {
    if (image_embs.rows() != text_embs.rows() ||
        image_embs.cols() != text_embs.cols())
        throw std::invalid_argument("modality shapes differ");
    if (labels.size() != image_embs.rows())
        throw std::invalid_argument("label count mismatch");
    if (labels.empty()) throw std::invalid_argument("labels nonempty");

    PooledBatch batch;
    batch.image_embs = image_embs;
    batch.text_embs = text_embs;
    batch.labels = std::move(labels);
    for (std::size_t i = 0; i < batch.image_embs.rows(); ++i) {
        normalize_inplace(batch.image_embs.row(i));
        normalize_inplace(batch.text_embs.row(i));
    }
    batch.pooled = MatrixD(batch.image_embs.rows(), batch.image_embs.cols());
    for (std::size_t i = 0; i < batch.pooled.rows(); ++i) {
        const auto z =
            pool(batch.image_embs.row(i), batch.text_embs.row(i), im_wt);
        std::copy(z.begin(), z.end(), batch.pooled.row(i).begin());
    }
    return batch;
}

LossReport supcon_loss(const PooledBatch& batch, const LossOptions& opts) {
    const std::size_t b = batch.size();
    if (b < 2) throw std::invalid_argument("batch size must be >= 2");
    const double tfac = temp_factor(opts);
    const MatrixD s = similarity(batch.pooled);
    const auto pos = positive_sets(batch.labels);

    LossReport report;
    report.per_anchor.assign(b, 0.0);
    std::size_t live = 0;
    for (std::size_t i = 0; i < b; ++i) {
        if (pos[i].empty()) {
            report.skipped_anchors.insert(i);
            continue;
        }
        // log-sum-exp over the denominator candidates
        double mx = -1e300;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !opts.include_self) continue;
            mx = std::max(mx, tfac * s(i, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !opts.include_self) continue;
            z += std::exp(tfac * s(i, j) - mx);
        }
        const double log_z = mx + std::log(z);
        double term = 0.0;
        for (std::size_t k : pos[i]) term += log_z - tfac * s(i, k);
        report.per_anchor[i] = term / static_cast<double>(pos[i].size());
        report.value += report.per_anchor[i];
        ++live;
    }
    if (live > 0) report.value /= static_cast<double>(live);
    return report;
}

MatrixD supcon_grad(const PooledBatch& batch, const LossOptions& opts) {
    const std::size_t b = batch.size();
    const std::size_t d = batch.pooled.cols();
    if (b < 2) throw std::invalid_argument("batch size must be >= 2");
    const double tfac = temp_factor(opts);
    const MatrixD s = similarity(batch.pooled);
    const auto pos = positive_sets(batch.labels);

    std::size_t live = 0;
    for (std::size_t i = 0; i < b; ++i)
        if (!pos[i].empty()) ++live;
    MatrixD grad(b, d);
    if (live == 0) return grad;

    // c(i,j) = dL_i/ds_ij for anchor i; zero rows for skipped anchors.
    MatrixD c(b, b);
    for (std::size_t i = 0; i < b; ++i) {
        if (pos[i].empty()) continue;
        double mx = -1e300;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !opts.include_self) continue;
            mx = std::max(mx, tfac * s(i, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !opts.include_self) continue;
            z += std::exp(tfac * s(i, j) - mx);
        }
        const double inv_p = 1.0 / static_cast<double>(pos[i].size());
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !opts.include_self) continue;
            const double p = std::exp(tfac * s(i, j) - mx) / z;
            const bool positive =
                j != i && batch.labels[j] == batch.labels[i];
            c(i, j) = tfac * (p - (positive ? inv_p : 0.0));
        }
    }

    const double scale = 1.0 / static_cast<double>(live);
    for (std::size_t r = 0; r < b; ++r) {
        auto g = grad.row(r);
        for (std::size_t j = 0; j < b; ++j) {
            if (j == r) continue;
            const double w = c(r, j) + c(j, r);  // s_rj feeds both anchors
            if (w == 0.0) continue;
            const auto zj = batch.pooled.row(j);
            for (std::size_t t = 0; t < d; ++t) g[t] += w * zj[t];
        }
        if (opts.include_self && c(r, r) != 0.0) {
            const auto zr = batch.pooled.row(r);
            for (std::size_t t = 0; t < d; ++t) g[t] += 2.0 * c(r, r) * zr[t];
        }
        for (std::size_t t = 0; t < d; ++t) g[t] *= scale;
    }
    return grad;
}

double clip_loss(const MatrixD& image_embs, const MatrixD& text_embs,
                 double temp) {
    return clip_loss_grad(image_embs, text_embs, temp).value;
}

ClipGrad clip_loss_grad(const MatrixD& image_embs, const MatrixD& text_embs,
                        double temp) {
    if (temp <= 0) throw std::invalid_argument("temp must be > 0");
    const std::size_t b = image_embs.rows();
    const std::size_t d = image_embs.cols();
    if (b == 0 || text_embs.rows() != b || text_embs.cols() != d)
        throw std::invalid_argument("modality shapes differ");

    MatrixD logits(b, b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
            logits(i, j) = dot(image_embs.row(i), text_embs.row(j)) / temp;

    // row softmax (image -> text) and column softmax (text -> image)
    MatrixD p_row(b, b), p_col(b, b);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double mx = logits(i, 0);
        for (std::size_t j = 1; j < b; ++j) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < b; ++j) z += std::exp(logits(i, j) - mx);
        for (std::size_t j = 0; j < b; ++j)
            p_row(i, j) = std::exp(logits(i, j) - mx) / z;
        loss += 0.5 * (mx + std::log(z) - logits(i, i));
    }
    for (std::size_t j = 0; j < b; ++j) {
        double mx = logits(0, j);
        for (std::size_t i = 1; i < b; ++i) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < b; ++i) z += std::exp(logits(i, j) - mx);
        for (std::size_t i = 0; i < b; ++i)
            p_col(i, j) = std::exp(logits(i, j) - mx) / z;
        loss += 0.5 * (mx + std::log(z) - logits(j, j));
    }
    loss /= static_cast<double>(b);

    ClipGrad out{loss, MatrixD(b, d), MatrixD(b, d)};
    const double scale = 0.5 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            const double delta = i == j ? 1.0 : 0.0;
            const double dl =
                scale * ((p_row(i, j) - delta) + (p_col(i, j) - delta)) / temp;
            if (dl == 0.0) continue;
            const auto gj = text_embs.row(j);
            const auto fi = image_embs.row(i);
            auto dfi = out.d_image.row(i);
            auto dgj = out.d_text.row(j);
            for (std::size_t t = 0; t < d; ++t) {
                dfi[t] += dl * gj[t];
                dgj[t] += dl * fi[t];
            }
        }
    return out;
}

}  // namespace reclink::metric
