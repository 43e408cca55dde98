#pragma once

#include "foca/faf.hpp"
#include "foca/image_io.hpp"
#include "foca/tensor.hpp"
#include "foca/wavelet.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace foca::heads {

enum class Verdict : std::uint8_t { authentic = 0, tampered = 1 };
enum class RegionSlot : std::uint8_t { nw = 0, ne = 1, sw = 2, se = 3, center = 4, none = 5 };
enum class CueSlot : std::uint8_t {
    hh_energy_anomaly = 0,
    boundary_discontinuity = 1,
    texture_mismatch = 2,
    none = 3
};

inline constexpr std::size_t kRegionClasses = 6;
inline constexpr std::size_t kCueClasses = 4;

std::string to_string(Verdict v);
std::string to_string(RegionSlot r);
std::string to_string(CueSlot c);
Verdict verdict_from_string(const std::string& s);
RegionSlot region_from_string(const std::string& s);
CueSlot cue_from_string(const std::string& s);

// Slot-based explanation; rendered deterministically from the slots.
// An authentic verdict forces region none and cue none.
struct Explanation {
    Verdict verdict = Verdict::authentic;
    RegionSlot region = RegionSlot::none;
    CueSlot cue = CueSlot::none;
    std::string rendered;
};

Explanation make_explanation(Verdict v, RegionSlot r, CueSlot c);
std::string render_explanation(Verdict v, RegionSlot r, CueSlot c);

// Quadrant (or center box) holding the largest share of true pixels;
// none when the mask is empty. Ties resolve in slot order.
RegionSlot region_from_mask(const Mask& mask);

struct BackboneConfig {
    std::size_t trunk_patch = 8; // grid side is H / trunk_patch
    std::size_t c_b = 32;        // trunk token width
    std::size_t d_b = 32;        // pooled embedding width
    std::size_t c_s = 32;        // frozen feature channels
    std::size_t c_d = 32;        // decoder channels

    void validate() const;
};

// Trainable trunk + heads, plus the frozen encoder. The frozen stack is
// derived from the seed, kept out of the trainable set, and never updated.
struct BackboneParams {
    BackboneConfig cfg;

    // trunk: per-patch embedding (raw + standardized paths), then one
    // global-context mixing layer
    Tensor patch_w, patch_sw, patch_b; // [trunk_patch^2*3, c_b] each, [c_b]
    Tensor mix_w, ctx_w, mix_b;
    Tensor cls_w, cls_b; // pooled -> h_cls  [2*c_b, d_b]
    Tensor seg_w, seg_b; // pooled -> h_seg embedding

    Tensor phi_w, phi_b; // detection classifier [d_b, 2]
    Tensor verdict_w, verdict_b;
    Tensor region_w, region_b;
    Tensor cue_w, cue_b;
    Tensor gamma_w, gamma_b; // [d_b, c_s]

    // frozen encoder (requires_grad stays false)
    Tensor f_conv1, f_bias1; // 3 -> 8, stride 2
    Tensor f_conv2, f_bias2; // 8 -> 16, stride 2
    Tensor f_conv3, f_bias3; // 16 -> c_s, stride 2

    // decoder: two 3x3 convs then a per-cell projection to an 8x8 logit patch
    Tensor d_conv1, d_bias1;
    Tensor d_conv2, d_bias2;
    Tensor up_w, up_b; // [c_d, 64]

    static BackboneParams init(const BackboneConfig& cfg, std::uint64_t seed);
    BackboneParams clone() const;
    std::vector<std::pair<std::string, Tensor>> trainable() const;
    std::vector<std::pair<std::string, Tensor>> frozen() const;
};

// Everything the trunk and heads produce for one sample.
struct BackboneOut {
    Tensor tokens;  // [G*G, c_b] trunk grid tokens
    Tensor h_cls;   // [1, d_b]
    Tensor h_seg_emb;
    Tensor det_logits; // [1, 2]
    Tensor verdict_logits;
    Tensor region_logits;
    Tensor cue_logits;
    Tensor h_seg; // [1, c_s]
};

BackboneOut trunk_forward(const Tensor& x_f, const BackboneParams& params);

// Frozen feature grid f from the raw image; no gradient ever reaches it.
Tensor frozen_forward(const Tensor& x_img, const BackboneParams& params);

// Decoder: modulate f per channel by h_seg, two convs, per-cell upsampling
// projection back to full-resolution logits.
Tensor decode_mask(const Tensor& frozen_features, const Tensor& h_seg,
                   const BackboneParams& params, std::size_t height, std::size_t width);

std::pair<Tensor, Verdict> detect(const faf::FusedFeature& x_f, const BackboneParams& params);
Tensor segment(const faf::FusedFeature& x_f, const Tensor& x_img, const BackboneParams& params);
Explanation explain(const faf::FusedFeature& x_f, Verdict verdict, const Mask& predicted_mask,
                    const wavelet::SubbandSet& bands, const BackboneParams& params);

Verdict verdict_from_logits(const Tensor& logits); // ties break to authentic
Mask mask_from_logits(const Tensor& logits);       // sigmoid > 0.5, i.e. logit > 0

} // namespace foca::heads
