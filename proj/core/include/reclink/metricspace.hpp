#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "reclink/matrix.hpp"

namespace reclink::metric {

/// How the temperature enters the similarity: divide (the conventional
/// form, default) or multiply (the alternative printed form).
enum class TempMode { kDivide, kMultiply };

struct LossOptions {
    double temp = 0.1;
    TempMode temp_mode = TempMode::kDivide;
    bool include_self = false;  // keep j=i in the softmax denominator
};

/// A minibatch of per-modality and pooled embeddings, all rows unit-norm.
/// pooled row i = normalize(im_wt * image_row_i + (1-im_wt) * text_row_i).
struct PooledBatch {
    MatrixD image_embs;
    MatrixD text_embs;
    MatrixD pooled;
    std::vector<std::string> labels;

    std::size_t size() const { return labels.size(); }
};

/// normalize(im_wt*f + (1-im_wt)*g) for unit vectors f, g. im_wt=1 returns
/// f and im_wt=0 returns g exactly. Throws "degenerate pool" when the
/// combination is the zero vector.
std::vector<double> pool(std::span<const double> f, std::span<const double> g,
                         double im_wt);

/// Builds a PooledBatch from raw (not necessarily normalized) modality
/// embeddings: per-modality normalize, pool, renormalize.
PooledBatch make_pooled_batch(const MatrixD& image_embs, const MatrixD& text_embs,
                              std::vector<std::string> labels, double im_wt);

struct LossReport {
    double value = 0.0;
    std::vector<double> per_anchor;     // 0 for skipped anchors
    std::set<std::size_t> skipped_anchors;  // anchors with empty positive set
};

/// Supervised contrastive loss on the pooled rows. Per anchor i with
/// positives P(i) = {k != i : y_k = y_i}:
///   -(1/|P(i)|) sum_{k in P(i)} log( exp(s_ik/t) / sum_{j != i} exp(s_ij/t) )
/// with s_ij = dot(pooled_i, pooled_j). Anchors with empty P(i) are skipped;
/// the value is the mean over non-skipped anchors.
LossReport supcon_loss(const PooledBatch& batch, const LossOptions& opts);

/// Analytic gradient of supcon_loss's value with respect to every pooled
/// entry, treating pooled rows as free (unnormalized) variables.
MatrixD supcon_grad(const PooledBatch& batch, const LossOptions& opts);

/// Symmetric image-text contrastive loss: logits L_ij = dot(f_i,g_j)/t,
/// loss = 0.5*(mean row cross-entropy + mean column cross-entropy) against
/// the diagonal.
double clip_loss(const MatrixD& image_embs, const MatrixD& text_embs,
                 double temp);

/// Gradients of clip_loss with respect to both embedding matrices.
struct ClipGrad {
    double value;
    MatrixD d_image;
    MatrixD d_text;
};
ClipGrad clip_loss_grad(const MatrixD& image_embs, const MatrixD& text_embs,
                        double temp);

}  // namespace reclink::metric
