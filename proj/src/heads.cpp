#include "foca/heads.hpp"

#include "foca/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace foca::heads {

std::string to_string(Verdict v) {
    return v == Verdict::authentic ? "authentic" : "tampered";
}

std::string to_string(RegionSlot r) {
    switch (r) {
        case RegionSlot::nw: return "NW";
        case RegionSlot::ne: return "NE";
        case RegionSlot::sw: return "SW";
        case RegionSlot::se: return "SE";
        case RegionSlot::center: return "center";
        case RegionSlot::none: return "none";
    }
    return "none";
}

std::string to_string(CueSlot c) {
    switch (c) {
        case CueSlot::hh_energy_anomaly: return "hh-energy-anomaly";
        case CueSlot::boundary_discontinuity: return "boundary-discontinuity";
        case CueSlot::texture_mismatch: return "texture-mismatch";
        case CueSlot::none: return "none";
    }
    return "none";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "authentic") return Verdict::authentic;
    if (s == "tampered") return Verdict::tampered;
    throw DataError("unknown verdict slot value: " + s);
}

RegionSlot region_from_string(const std::string& s) {
    for (std::uint8_t i = 0; i < kRegionClasses; ++i)
        if (to_string(static_cast<RegionSlot>(i)) == s) return static_cast<RegionSlot>(i);
    throw DataError("unknown region slot value: " + s);
}

CueSlot cue_from_string(const std::string& s) {
    for (std::uint8_t i = 0; i < kCueClasses; ++i)
        if (to_string(static_cast<CueSlot>(i)) == s) return static_cast<CueSlot>(i);
    throw DataError("unknown cue slot value: " + s);
}

namespace {

std::string region_phrase(RegionSlot r) {
    switch (r) {
        case RegionSlot::nw: return "north-west";
        case RegionSlot::ne: return "north-east";
        case RegionSlot::sw: return "south-west";
        case RegionSlot::se: return "south-east";
        case RegionSlot::center: return "central";
        case RegionSlot::none: return "undetermined";
    }
    return "undetermined";
}

std::string cue_phrase(CueSlot c) {
    switch (c) {
        case CueSlot::hh_energy_anomaly: return "high-frequency sub-band energy is anomalous";
        case CueSlot::boundary_discontinuity:
            return "sub-band energy spikes along the region boundary";
        case CueSlot::texture_mismatch: return "texture statistics mismatch the surrounding area";
        case CueSlot::none: return "sub-band cues are inconclusive";
    }
    return "sub-band cues are inconclusive";
}

} // namespace

std::string render_explanation(Verdict v, RegionSlot r, CueSlot c) {
    if (v == Verdict::authentic) return "No tampering detected; sub-band energy is consistent.";
    return "Tampering detected in the " + region_phrase(r) + " region; " + cue_phrase(c) + ".";
}

Explanation make_explanation(Verdict v, RegionSlot r, CueSlot c) {
    Explanation e;
    e.verdict = v;
    if (v == Verdict::authentic) {
        e.region = RegionSlot::none;
        e.cue = CueSlot::none;
    } else {
        e.region = r;
        e.cue = c;
    }
    e.rendered = render_explanation(e.verdict, e.region, e.cue);
    return e;
}

RegionSlot region_from_mask(const Mask& mask) {
    if (mask.empty_mask()) return RegionSlot::none;
    const std::size_t h = mask.height, w = mask.width;
    std::array<std::size_t, 5> counts{}; // nw, ne, sw, se, center
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            const bool top = y < h / 2, left = x < w / 2;
            counts[top ? (left ? 0 : 1) : (left ? 2 : 3)]++;
            if (y >= h / 4 && y < h - h / 4 && x >= w / 4 && x < w - w / 4) counts[4]++;
        }
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
        if (counts[i] > counts[best]) best = i;
    return static_cast<RegionSlot>(best);
}

void BackboneConfig::validate() const {
    if (trunk_patch == 0) throw ParameterError("heads: trunk_patch must be >= 1");
    if (c_b == 0 || d_b == 0 || c_s == 0 || c_d == 0)
        throw ParameterError("heads: channel widths must be >= 1");
}

BackboneParams BackboneParams::init(const BackboneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    using faf::init_bias;
    using faf::init_linear;
    BackboneParams p;
    p.cfg = cfg;
    const std::size_t tok_in = cfg.trunk_patch * cfg.trunk_patch * 3;
    p.patch_w = init_linear(tok_in, cfg.c_b, seed, "trunk.patch_w");
    p.patch_sw = init_linear(tok_in, cfg.c_b, seed, "trunk.patch_sw");
    p.patch_b = init_bias(cfg.c_b);
    p.mix_w = init_linear(cfg.c_b, cfg.c_b, seed, "trunk.mix_w");
    p.ctx_w = init_linear(cfg.c_b, cfg.c_b, seed, "trunk.ctx_w");
    p.mix_b = init_bias(cfg.c_b);
    p.cls_w = init_linear(2 * cfg.c_b, cfg.d_b, seed, "trunk.cls_w");
    p.cls_b = init_bias(cfg.d_b);
    p.seg_w = init_linear(2 * cfg.c_b, cfg.d_b, seed, "trunk.seg_w");
    p.seg_b = init_bias(cfg.d_b);
    p.phi_w = init_linear(cfg.d_b, 2, seed, "heads.phi_w");
    p.phi_b = init_bias(2);
    p.verdict_w = init_linear(cfg.d_b, 2, seed, "heads.verdict_w");
    p.verdict_b = init_bias(2);
    p.region_w = init_linear(cfg.d_b, kRegionClasses, seed, "heads.region_w");
    p.region_b = init_bias(kRegionClasses);
    p.cue_w = init_linear(cfg.d_b, kCueClasses, seed, "heads.cue_w");
    p.cue_b = init_bias(kCueClasses);
    p.gamma_w = init_linear(cfg.d_b, cfg.c_s, seed, "heads.gamma_w");
    p.gamma_b = init_bias(cfg.c_s);

    // Frozen encoder comes off its own stream and is never trainable.
    const std::uint64_t frozen_seed = derive_seed(seed, "frozen_enc");
    auto frozen_conv = [&](std::size_t ci, std::size_t co, std::string_view name) {
        Rng rng(derive_seed(frozen_seed, name));
        const double bound = std::sqrt(2.0 / static_cast<double>(9 * ci));
        std::vector<double> v(9 * ci * co);
        for (auto& x : v) x = rng.gaussian() * bound;
        return Tensor::from_data({3, 3, ci, co}, std::move(v), /*requires_grad=*/false);
    };
    p.f_conv1 = frozen_conv(3, 8, "conv1");
    p.f_bias1 = Tensor::zeros({8});
    p.f_conv2 = frozen_conv(8, 16, "conv2");
    p.f_bias2 = Tensor::zeros({16});
    p.f_conv3 = frozen_conv(16, cfg.c_s, "conv3");
    p.f_bias3 = Tensor::zeros({cfg.c_s});

    auto dec_conv = [&](std::size_t ci, std::size_t co, std::string_view name) {
        Rng rng(derive_seed(seed, name));
        const double bound = 1.0 / std::sqrt(static_cast<double>(9 * ci));
        std::vector<double> v(9 * ci * co);
        for (auto& x : v) x = rng.uniform(-bound, bound);
        return Tensor::from_data({3, 3, ci, co}, std::move(v), /*requires_grad=*/true);
    };
    p.d_conv1 = dec_conv(cfg.c_s, cfg.c_d, "dec.conv1");
    p.d_bias1 = init_bias(cfg.c_d);
    p.d_conv2 = dec_conv(cfg.c_d, cfg.c_d, "dec.conv2");
    p.d_bias2 = init_bias(cfg.c_d);
    p.up_w = init_linear(cfg.c_d, 64, seed, "dec.up_w");
    p.up_b = init_bias(64);
    return p;
}

BackboneParams BackboneParams::clone() const {
    auto ct = [](const Tensor& t) {
        return Tensor::from_data(t.shape(), t.values(), t.requires_grad());
    };
    BackboneParams p;
    p.cfg = cfg;
    p.patch_w = ct(patch_w);
    p.patch_sw = ct(patch_sw);
    p.patch_b = ct(patch_b);
    p.mix_w = ct(mix_w);
    p.ctx_w = ct(ctx_w);
    p.mix_b = ct(mix_b);
    p.cls_w = ct(cls_w);
    p.cls_b = ct(cls_b);
    p.seg_w = ct(seg_w);
    p.seg_b = ct(seg_b);
    p.phi_w = ct(phi_w);
    p.phi_b = ct(phi_b);
    p.verdict_w = ct(verdict_w);
    p.verdict_b = ct(verdict_b);
    p.region_w = ct(region_w);
    p.region_b = ct(region_b);
    p.cue_w = ct(cue_w);
    p.cue_b = ct(cue_b);
    p.gamma_w = ct(gamma_w);
    p.gamma_b = ct(gamma_b);
    p.f_conv1 = ct(f_conv1);
    p.f_bias1 = ct(f_bias1);
    p.f_conv2 = ct(f_conv2);
    p.f_bias2 = ct(f_bias2);
    p.f_conv3 = ct(f_conv3);
    p.f_bias3 = ct(f_bias3);
    p.d_conv1 = ct(d_conv1);
    p.d_bias1 = ct(d_bias1);
    p.d_conv2 = ct(d_conv2);
    p.d_bias2 = ct(d_bias2);
    p.up_w = ct(up_w);
    p.up_b = ct(up_b);
    return p;
}

std::vector<std::pair<std::string, Tensor>> BackboneParams::trainable() const {
    return {
        {"trunk.patch_w", patch_w}, {"trunk.patch_sw", patch_sw},
        {"trunk.patch_b", patch_b},
        {"trunk.mix_w", mix_w},     {"trunk.ctx_w", ctx_w},
        {"trunk.mix_b", mix_b},     {"trunk.cls_w", cls_w},
        {"trunk.cls_b", cls_b},     {"trunk.seg_w", seg_w},
        {"trunk.seg_b", seg_b},     {"heads.phi_w", phi_w},
        {"heads.phi_b", phi_b},     {"heads.verdict_w", verdict_w},
        {"heads.verdict_b", verdict_b}, {"heads.region_w", region_w},
        {"heads.region_b", region_b},   {"heads.cue_w", cue_w},
        {"heads.cue_b", cue_b},     {"heads.gamma_w", gamma_w},
        {"heads.gamma_b", gamma_b}, {"dec.conv1", d_conv1},
        {"dec.bias1", d_bias1},     {"dec.conv2", d_conv2},
        {"dec.bias2", d_bias2},     {"dec.up_w", up_w},
        {"dec.up_b", up_b},
    };
}

std::vector<std::pair<std::string, Tensor>> BackboneParams::frozen() const {
    return {
        {"frozen.conv1", f_conv1}, {"frozen.bias1", f_bias1}, {"frozen.conv2", f_conv2},
        {"frozen.bias2", f_bias2}, {"frozen.conv3", f_conv3}, {"frozen.bias3", f_bias3},
    };
}

BackboneOut trunk_forward(const Tensor& x_f, const BackboneParams& params) {
    const auto& cfg = params.cfg;
    if (x_f.ndim() != 3 || x_f.dim(2) != 3)
        throw DimensionError("trunk: expected [H,W,3] input, got " + x_f.shape_str());
    if (x_f.dim(0) % cfg.trunk_patch != 0 || x_f.dim(1) % cfg.trunk_patch != 0)
        throw DimensionError("trunk: trunk_patch does not divide input " + x_f.shape_str());

    Tensor tok = faf::tokenize(x_f, cfg.trunk_patch);
    Tensor embed = add(matmul(tok, params.patch_w),
                       matmul(standardize_rows(tok), params.patch_sw));
    Tensor h1 = relu(add_rowvec(embed, params.patch_b));
    // Global-context mixing: every token sees the mean token.
    Tensor ctx = matmul(mean_rows(h1), params.ctx_w);
    Tensor h2 = relu(add_rowvec(matmul(h1, params.mix_w),
                                reshape(add_rowvec(ctx, params.mix_b), {cfg.c_b})));
    // Mean and max pooled views, concatenated.
    Tensor pooled = reshape(concat_rows({mean_rows(h2), max_rows(h2)}), {1, 2 * cfg.c_b});

    BackboneOut out;
    out.tokens = h2;
    out.h_cls = relu(add_rowvec(matmul(pooled, params.cls_w), params.cls_b));
    out.h_seg_emb = relu(add_rowvec(matmul(pooled, params.seg_w), params.seg_b));
    out.det_logits = add_rowvec(matmul(out.h_cls, params.phi_w), params.phi_b);
    out.verdict_logits = add_rowvec(matmul(out.h_cls, params.verdict_w), params.verdict_b);
    out.region_logits = add_rowvec(matmul(out.h_cls, params.region_w), params.region_b);
    out.cue_logits = add_rowvec(matmul(out.h_cls, params.cue_w), params.cue_b);
    out.h_seg = add_rowvec(matmul(out.h_seg_emb, params.gamma_w), params.gamma_b);
    return out;
}

Tensor frozen_forward(const Tensor& x_img, const BackboneParams& params) {
    if (x_img.ndim() != 3 || x_img.dim(2) != 3)
        throw DimensionError("frozen_enc: expected [H,W,3] image, got " + x_img.shape_str());
    if (x_img.dim(0) % 8 != 0 || x_img.dim(1) % 8 != 0)
        throw DimensionError("frozen_enc: image sides must be divisible by 8, got " +
                             x_img.shape_str());
    Tensor h = relu(conv2d(x_img, params.f_conv1, params.f_bias1, 2, 1));
    h = relu(conv2d(h, params.f_conv2, params.f_bias2, 2, 1));
    return conv2d(h, params.f_conv3, params.f_bias3, 2, 1);
}

Tensor decode_mask(const Tensor& frozen_features, const Tensor& h_seg,
                   const BackboneParams& params, std::size_t height, std::size_t width) {
    Tensor mod = mul_channels(frozen_features, reshape(h_seg, {params.cfg.c_s}));
    Tensor d1 = relu(conv2d(mod, params.d_conv1, params.d_bias1, 1, 1));
    Tensor d2 = relu(conv2d(d1, params.d_conv2, params.d_bias2, 1, 1));
    const std::size_t g = frozen_features.dim(0);
    Tensor cells = reshape(d2, {g * frozen_features.dim(1), params.cfg.c_d});
    Tensor patches = add_rowvec(matmul(cells, params.up_w), params.up_b);
    Tensor logits3 = faf::detokenize(patches, height, width, 8, 1);
    return reshape(logits3, {height, width});
}

std::pair<Tensor, Verdict> detect(const faf::FusedFeature& x_f, const BackboneParams& params) {
    BackboneOut out = trunk_forward(x_f.x_f, params);
    Tensor logits = reshape(out.det_logits, {2});
    return {logits, verdict_from_logits(logits)};
}

Tensor segment(const faf::FusedFeature& x_f, const Tensor& x_img, const BackboneParams& params) {
    if (x_f.x_f.shape() != x_img.shape())
        throw DimensionError("segment: fused feature " + x_f.x_f.shape_str() +
                             " does not match image " + x_img.shape_str());
    BackboneOut out = trunk_forward(x_f.x_f, params);
    Tensor f = frozen_forward(x_img, params);
    return decode_mask(f, out.h_seg, params, x_img.dim(0), x_img.dim(1));
}

Explanation explain(const faf::FusedFeature& x_f, Verdict verdict, const Mask& predicted_mask,
                    const wavelet::SubbandSet& /*bands*/, const BackboneParams& params) {
    if (verdict == Verdict::authentic)
        return make_explanation(Verdict::authentic, RegionSlot::none, CueSlot::none);
    BackboneOut out = trunk_forward(x_f.x_f, params);
    // Pick among the three genuine cues only; "none" is reserved for the
    // authentic verdict.
    const auto& cv = out.cue_logits.values();
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
        if (cv[i] > cv[best]) best = i;
    return make_explanation(Verdict::tampered, region_from_mask(predicted_mask),
                            static_cast<CueSlot>(best));
}

Verdict verdict_from_logits(const Tensor& logits) {
    if (logits.numel() != 2)
        throw DimensionError("verdict_from_logits: expected 2 logits, got " + logits.shape_str());
    // Strict inequality: an exact tie counts as authentic.
    return logits.values()[1] > logits.values()[0] ? Verdict::tampered : Verdict::authentic;
}

Mask mask_from_logits(const Tensor& logits) {
    if (logits.ndim() != 2)
        throw DimensionError("mask_from_logits: expected [H,W] logits, got " + logits.shape_str());
    Mask m;
    m.height = logits.dim(0);
    m.width = logits.dim(1);
    m.data.resize(logits.numel());
    for (std::size_t i = 0; i < logits.numel(); ++i)
        m.data[i] = logits.values()[i] > 0.0 ? 1 : 0;
    return m;
}

} // namespace foca::heads
