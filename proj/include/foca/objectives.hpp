#pragma once

#include "foca/heads.hpp"
#include "foca/image_io.hpp"
#include "foca/tensor.hpp"

#include <vector>

namespace foca::objectives {

struct LossWeights {
    double lambda_c = 0.5;
    double lambda_bce = 2.0;
    double lambda_dice = 1.0;
    double tau = 0.07;

    void validate() const;
};

inline constexpr double kDiceSmoothing = 1.0;

// Component values of one step. The linear identities
//   l_total = l_pred + lambda_c * l_cl
//   l_pred  = l_t + l_cls + l_mask
//   l_mask  = lambda_bce * l_bce + lambda_dice * l_dice
// hold exactly because the fields are filled from the same graph nodes.
struct LossBreakdown {
    double l_total = 0.0;
    double l_pred = 0.0;
    double l_cl = 0.0;
    double l_t = 0.0;
    double l_cls = 0.0;
    double l_mask = 0.0;
    double l_bce = 0.0;
    double l_dice = 0.0;
};

// s_ij = (z_i . z_j) / (tau * |z_i| * |z_j|), norms applied as written.
Tensor similarity_matrix(const Tensor& z, double tau);

// Self-positive InfoNCE over the similarity matrix diagonal.
Tensor infonce(const Tensor& z, double tau);

// Paired-view InfoNCE: rows [0,n) and [n,2n) are two views of the same
// samples; row i's positive is its partner view. Optional mode.
Tensor infonce_pairs(const Tensor& z, double tau);

Tensor bce_loss(const Tensor& logits, const Mask& mask);
Tensor dice_loss(const Tensor& logits, const Mask& mask);

// Mean cross-entropy over the verdict/region/cue slot classifications.
Tensor text_loss(const Tensor& verdict_logits, const Tensor& region_logits,
                 const Tensor& cue_logits, const heads::Explanation& reference);

Tensor cls_loss(const Tensor& det_logits, heads::Verdict label);

// Assembled total objective for one batch.
struct TotalLoss {
    Tensor total; // graph root for backward()
    LossBreakdown breakdown;
};

TotalLoss total_loss(const Tensor& l_t, const Tensor& l_cls, const Tensor& l_bce,
                     const Tensor& l_dice, const Tensor& l_cl, const LossWeights& w);

} // namespace foca::objectives
