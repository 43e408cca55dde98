#include "foca/model.hpp"

#include "foca/error.hpp"

namespace foca::model {

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p;
    p.cfg = cfg;
    p.faf = faf::FafParams::init(cfg.faf, seed);
    p.backbone = heads::BackboneParams::init(cfg.backbone, seed);
    return p;
}

ModelParams ModelParams::clone() const {
    ModelParams p;
    p.cfg = cfg;
    p.faf = faf.clone();
    p.backbone = backbone.clone();
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::trainable() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (cfg.faf_enabled) {
        auto f = faf.trainable();
        out.insert(out.end(), f.begin(), f.end());
    } else {
        // The attention projections are bypassed; the contrastive head
        // still runs on the raw image and keeps training.
        out = {{"faf.mlp1_w", faf.mlp1_w},
               {"faf.mlp1_b", faf.mlp1_b},
               {"faf.mlp2_w", faf.mlp2_w},
               {"faf.mlp2_b", faf.mlp2_b}};
    }
    auto b = backbone.trainable();
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

SampleForward forward_sample(const Tensor& image, const ModelParams& params) {
    SampleForward out;
    out.bands = wavelet::dwt2(image);
    if (params.cfg.faf_enabled) {
        out.fused = faf::cross_attend(out.bands.hh, image, params.faf);
    } else {
        // Ablated variant: the heads consume the raw image.
        out.fused.x_f = image;
        out.fused.attention = Tensor::zeros({1, 1});
    }
    out.backbone = heads::trunk_forward(out.fused.x_f, params.backbone);
    Tensor frozen = heads::frozen_forward(image, params.backbone);
    out.mask_logits = heads::decode_mask(frozen, out.backbone.h_seg, params.backbone,
                                         image.dim(0), image.dim(1));
    out.contrastive = faf::contrastive_embed(out.fused.x_f, params.faf);
    return out;
}

Prediction predict(const Tensor& image, const ModelParams& params) {
    NoGradGuard ng;
    SampleForward fwd = forward_sample(image, params);
    Prediction pred;
    pred.det_logits = reshape(fwd.backbone.det_logits, {2});
    pred.verdict = heads::verdict_from_logits(pred.det_logits);
    pred.mask_logits = fwd.mask_logits;
    pred.mask = heads::mask_from_logits(fwd.mask_logits);
    pred.explanation =
        heads::explain(fwd.fused, pred.verdict, pred.mask, fwd.bands, params.backbone);
    return pred;
}

} // namespace foca::model
