#include "foca/objectives.hpp"

#include "foca/error.hpp"

#include <cmath>

namespace foca::objectives {

void LossWeights::validate() const {
    if (!(tau > 0.0)) throw ParameterError("loss weights: tau must be > 0");
    if (lambda_c < 0.0 || lambda_bce < 0.0 || lambda_dice < 0.0)
        throw ParameterError("loss weights: lambdas must be >= 0");
}

Tensor similarity_matrix(const Tensor& z, double tau) {
    if (!(tau > 0.0)) throw ParameterError("similarity_matrix: tau must be > 0");
    if (z.ndim() != 2 || z.dim(0) < 1)
        throw DimensionError("similarity_matrix: expected [N,d] embeddings, got " + z.shape_str());
    // Row norms, then cosine similarities; the degenerate-row guard lives
    // in the norm computation.
    Tensor sq = mul(z, z);
    Tensor norms = sqrt_elem(row_sum(sq));
    for (std::size_t i = 0; i < norms.numel(); ++i)
        if (norms.values()[i] <= kNormEpsilon)
            throw DegenerateVectorError("similarity_matrix: row " + std::to_string(i) +
                                        " of Z has vanishing norm");
    Tensor unit = div_colvec(z, norms);
    return mul_scalar(matmul(unit, transpose(unit)), 1.0 / tau);
}

Tensor infonce(const Tensor& z, double tau) {
    Tensor s = similarity_matrix(z, tau);
    Tensor lse = row_logsumexp(s);
    Tensor positives = diag(s);
    return mean_all(sub(lse, positives));
}

Tensor infonce_pairs(const Tensor& z, double tau) {
    if (z.ndim() != 2 || z.dim(0) % 2 != 0)
        throw DimensionError("infonce_pairs: expected [2N,d] stacked views, got " + z.shape_str());
    const std::size_t total = z.dim(0);
    const std::size_t n = total / 2;
    Tensor s = similarity_matrix(z, tau);
    // Positive for row i is its partner view; the self term is excluded
    // from the denominator by construction of the gather below.
    std::vector<std::size_t> pos_idx(total);
    std::vector<std::size_t> neg_idx;
    neg_idx.reserve(total * (total - 1));
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t partner = i < n ? i + n : i - n;
        pos_idx[i] = i * total + partner;
        for (std::size_t j = 0; j < total; ++j)
            if (j != i) neg_idx.push_back(i * total + j);
    }
    Tensor positives = gather(s, std::move(pos_idx), {total});
    Tensor denom_rows = gather(s, std::move(neg_idx), {total, total - 1});
    Tensor lse = row_logsumexp(denom_rows);
    return mean_all(sub(lse, positives));
}

Tensor bce_loss(const Tensor& logits, const Mask& mask) {
    if (logits.ndim() != 2 || logits.dim(0) != mask.height || logits.dim(1) != mask.width)
        throw DimensionError("bce_loss: logits " + logits.shape_str() + " do not match mask " +
                             std::to_string(mask.height) + "x" + std::to_string(mask.width));
    return bce_with_logits_mean(logits, mask.data);
}

Tensor dice_loss(const Tensor& logits, const Mask& mask) {
    if (logits.ndim() != 2 || logits.dim(0) != mask.height || logits.dim(1) != mask.width)
        throw DimensionError("dice_loss: logits " + logits.shape_str() + " do not match mask " +
                             std::to_string(mask.height) + "x" + std::to_string(mask.width));
    Tensor p = sigmoid(logits);
    std::vector<double> mv(mask.data.size());
    double mask_sum = 0.0;
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        mv[i] = mask.data[i] ? 1.0 : 0.0;
        mask_sum += mv[i];
    }
    Tensor m = Tensor::from_data(logits.shape(), std::move(mv));
    Tensor intersection = sum_all(mul(p, m));
    Tensor denom = add_scalar(sum_all(p), mask_sum + kDiceSmoothing);
    Tensor ratio = div_elem(add_scalar(mul_scalar(intersection, 2.0), kDiceSmoothing), denom);
    return add_scalar(mul_scalar(ratio, -1.0), 1.0);
}

Tensor text_loss(const Tensor& verdict_logits, const Tensor& region_logits,
                 const Tensor& cue_logits, const heads::Explanation& reference) {
    Tensor lv = ce_with_logits(verdict_logits, static_cast<std::size_t>(reference.verdict));
    Tensor lr = ce_with_logits(region_logits, static_cast<std::size_t>(reference.region));
    Tensor lc = ce_with_logits(cue_logits, static_cast<std::size_t>(reference.cue));
    return mul_scalar(add(add(lv, lr), lc), 1.0 / 3.0);
}

Tensor cls_loss(const Tensor& det_logits, heads::Verdict label) {
    return ce_with_logits(det_logits, static_cast<std::size_t>(label));
}

TotalLoss total_loss(const Tensor& l_t, const Tensor& l_cls, const Tensor& l_bce,
                     const Tensor& l_dice, const Tensor& l_cl, const LossWeights& w) {
    w.validate();
    Tensor l_mask = add(mul_scalar(l_bce, w.lambda_bce), mul_scalar(l_dice, w.lambda_dice));
    Tensor l_pred = add(add(l_t, l_cls), l_mask);
    Tensor total = add(l_pred, mul_scalar(l_cl, w.lambda_c));
    TotalLoss out;
    out.total = total;
    out.breakdown.l_t = l_t.item();
    out.breakdown.l_cls = l_cls.item();
    out.breakdown.l_bce = l_bce.item();
    out.breakdown.l_dice = l_dice.item();
    out.breakdown.l_mask = l_mask.item();
    out.breakdown.l_cl = l_cl.item();
    out.breakdown.l_pred = l_pred.item();
    out.breakdown.l_total = total.item();
    return out;
}

} // namespace foca::objectives
