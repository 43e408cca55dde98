#pragma once

#include "foca/rng.hpp"
#include "foca/tensor.hpp"
#include "foca/wavelet.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace foca::faf {

struct FafConfig {
    std::size_t patch = 4;   // HH patch side; the RGB side uses 2*patch
    std::size_t d_k = 64;
    std::size_t d_v = 64;
    std::size_t d_h = 128;   // contrastive MLP hidden width
    std::size_t d_embed = 64;

    void validate() const;
};

// Trainable state of the frequency attention fusion block: the q/k/v
// projections, the output projection back to patch space, and the
// contrastive MLP head.
struct FafParams {
    FafConfig cfg;
    Tensor w_q;    // [patch^2*3, d_k]
    Tensor w_k;    // [(2*patch)^2*3, d_k]
    Tensor w_v;    // [(2*patch)^2*3, d_v]
    Tensor w_o;    // [d_v, (2*patch)^2*3]
    Tensor mlp1_w; // [3, d_h]
    Tensor mlp1_b; // [d_h]
    Tensor mlp2_w; // [d_h, d_embed]
    Tensor mlp2_b; // [d_embed]

    static FafParams init(const FafConfig& cfg, std::uint64_t seed);
    FafParams clone() const; // deep copy; fresh storage for every tensor
    std::vector<std::pair<std::string, Tensor>> trainable() const;
};

// HH-guided fusion output. attention keeps the softmax weights around for
// diagnostics; every row sums to 1.
struct FusedFeature {
    Tensor x_f;       // same shape as the input image
    Tensor attention; // [T, T]
};

// Non-overlapping patches flattened row-major: [h,w,C] -> [T, patch*patch*C].
Tensor tokenize(const Tensor& x, std::size_t patch);
Tensor detokenize(const Tensor& tokens, std::size_t height, std::size_t width,
                  std::size_t patch, std::size_t channels);

// Scaled dot-product attention over prebuilt token matrices.
// Returns (attended values [Tq, d_v], attention weights [Tq, Tk]).
std::pair<Tensor, Tensor> attend(const Tensor& q_tokens, const Tensor& k_tokens,
                                 const FafParams& params);

// HH tokens query the image tokens; the projected result is added back
// onto the image (residual form).
FusedFeature cross_attend(const Tensor& x_hh, const Tensor& x_img, const FafParams& params);

// Pool, project through the two-layer ReLU MLP, and normalize to unit length.
Tensor contrastive_embed(const Tensor& x_f, const FafParams& params);

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, seeded per parameter name.
Tensor init_linear(std::size_t rows, std::size_t cols, std::uint64_t seed,
                   std::string_view name);
Tensor init_bias(std::size_t n);

} // namespace foca::faf
