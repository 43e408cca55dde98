#pragma once

#include "foca/datagen.hpp"
#include "foca/faf.hpp"
#include "foca/heads.hpp"
#include "foca/objectives.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace foca::model {

struct ModelConfig {
    faf::FafConfig faf;
    heads::BackboneConfig backbone;
    bool faf_enabled = true; // false bypasses the fusion block entirely
};

struct ModelParams {
    ModelConfig cfg;
    faf::FafParams faf;
    heads::BackboneParams backbone;

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
    ModelParams clone() const;
    // Fixed-order trainable registry; the checkpoint layout follows it.
    std::vector<std::pair<std::string, Tensor>> trainable() const;
};

// One sample through dwt -> fusion -> trunk/heads -> mask decoder.
struct SampleForward {
    wavelet::SubbandSet bands;
    faf::FusedFeature fused;
    heads::BackboneOut backbone;
    Tensor mask_logits;
    Tensor contrastive; // [d_embed] unit embedding
};

SampleForward forward_sample(const Tensor& image, const ModelParams& params);

// Inference products for one image.
struct Prediction {
    heads::Verdict verdict = heads::Verdict::authentic;
    Mask mask;
    heads::Explanation explanation;
    Tensor det_logits;
    Tensor mask_logits;
};

Prediction predict(const Tensor& image, const ModelParams& params);

} // namespace foca::model
