#include "foca/faf.hpp"

#include "foca/error.hpp"

#include <cmath>

namespace foca::faf {

void FafConfig::validate() const {
    if (patch == 0) throw ParameterError("faf: patch must be >= 1");
    if (d_k == 0) throw ParameterError("faf: d_k must be >= 1");
    if (d_v == 0 || d_h == 0 || d_embed == 0)
        throw ParameterError("faf: projection dimensions must be >= 1");
}

Tensor init_linear(std::size_t rows, std::size_t cols, std::uint64_t seed, std::string_view name) {
    Rng rng(derive_seed(seed, name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_data({rows, cols}, std::move(v), /*requires_grad=*/true);
}

Tensor init_bias(std::size_t n) {
    return Tensor::zeros({n}, /*requires_grad=*/true);
}

FafParams FafParams::init(const FafConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t q_in = cfg.patch * cfg.patch * 3;
    const std::size_t k_in = 4 * cfg.patch * cfg.patch * 3;
    FafParams p;
    p.cfg = cfg;
    p.w_q = init_linear(q_in, cfg.d_k, seed, "faf.w_q");
    p.w_k = init_linear(k_in, cfg.d_k, seed, "faf.w_k");
    p.w_v = init_linear(k_in, cfg.d_v, seed, "faf.w_v");
    p.w_o = init_linear(cfg.d_v, k_in, seed, "faf.w_o");
    p.mlp1_w = init_linear(3, cfg.d_h, seed, "faf.mlp1_w");
    p.mlp1_b = init_bias(cfg.d_h);
    p.mlp2_w = init_linear(cfg.d_h, cfg.d_embed, seed, "faf.mlp2_w");
    p.mlp2_b = init_bias(cfg.d_embed);
    return p;
}

namespace {

Tensor clone_tensor(const Tensor& t) {
    return Tensor::from_data(t.shape(), t.values(), t.requires_grad());
}

} // namespace

FafParams FafParams::clone() const {
    FafParams p;
    p.cfg = cfg;
    p.w_q = clone_tensor(w_q);
    p.w_k = clone_tensor(w_k);
    p.w_v = clone_tensor(w_v);
    p.w_o = clone_tensor(w_o);
    p.mlp1_w = clone_tensor(mlp1_w);
    p.mlp1_b = clone_tensor(mlp1_b);
    p.mlp2_w = clone_tensor(mlp2_w);
    p.mlp2_b = clone_tensor(mlp2_b);
    return p;
}

std::vector<std::pair<std::string, Tensor>> FafParams::trainable() const {
    return {
        {"faf.w_q", w_q},       {"faf.w_k", w_k},       {"faf.w_v", w_v},
        {"faf.w_o", w_o},       {"faf.mlp1_w", mlp1_w}, {"faf.mlp1_b", mlp1_b},
        {"faf.mlp2_w", mlp2_w}, {"faf.mlp2_b", mlp2_b},
    };
}

namespace {

std::vector<std::size_t> patch_index_map(std::size_t h, std::size_t w, std::size_t c,
                                         std::size_t patch) {
    const std::size_t gy = h / patch, gx = w / patch;
    std::vector<std::size_t> idx;
    idx.reserve(h * w * c);
    for (std::size_t by = 0; by < gy; ++by)
        for (std::size_t bx = 0; bx < gx; ++bx)
            for (std::size_t py = 0; py < patch; ++py)
                for (std::size_t px = 0; px < patch; ++px)
                    for (std::size_t k = 0; k < c; ++k)
                        idx.push_back(((by * patch + py) * w + (bx * patch + px)) * c + k);
    return idx;
}

} // namespace

Tensor tokenize(const Tensor& x, std::size_t patch) {
    if (x.ndim() != 3)
        throw DimensionError("tokenize: expected [H,W,C] tensor, got " + x.shape_str());
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (patch == 0 || h % patch != 0 || w % patch != 0)
        throw DimensionError("tokenize: patch " + std::to_string(patch) + " does not divide " +
                             x.shape_str());
    const std::size_t tokens = (h / patch) * (w / patch);
    return gather(x, patch_index_map(h, w, c, patch), {tokens, patch * patch * c});
}

Tensor detokenize(const Tensor& tokens, std::size_t height, std::size_t width, std::size_t patch,
                  std::size_t channels) {
    if (tokens.ndim() != 2)
        throw DimensionError("detokenize: expected [T,D] tokens, got " + tokens.shape_str());
    if (patch == 0 || height % patch != 0 || width % patch != 0)
        throw DimensionError("detokenize: patch does not divide the target image size");
    const std::size_t expect_t = (height / patch) * (width / patch);
    const std::size_t expect_d = patch * patch * channels;
    if (tokens.dim(0) != expect_t || tokens.dim(1) != expect_d)
        throw DimensionError("detokenize: tokens " + tokens.shape_str() + " do not match " +
                             std::to_string(expect_t) + "x" + std::to_string(expect_d));
    // Invert the tokenize permutation.
    const auto fwd = patch_index_map(height, width, channels, patch);
    std::vector<std::size_t> inv(fwd.size());
    for (std::size_t i = 0; i < fwd.size(); ++i) inv[fwd[i]] = i;
    return gather(tokens, std::move(inv), {height, width, channels});
}

std::pair<Tensor, Tensor> attend(const Tensor& q_tokens, const Tensor& k_tokens,
                                 const FafParams& params) {
    params.cfg.validate();
    if (q_tokens.dim(0) != k_tokens.dim(0))
        throw DimensionError("attend: token counts disagree, " + q_tokens.shape_str() + " vs " +
                             k_tokens.shape_str());
    // Score path runs on standardized tokens: raw HH coefficients are two
    // orders of magnitude below the image tokens and would pin the softmax
    // at uniform. Values keep the raw image scale.
    Tensor q = matmul(standardize_rows(q_tokens), params.w_q);
    Tensor k = matmul(standardize_rows(k_tokens), params.w_k);
    Tensor v = matmul(k_tokens, params.w_v);
    Tensor scores = mul_scalar(matmul(q, transpose(k)),
                               1.0 / std::sqrt(static_cast<double>(params.cfg.d_k)));
    Tensor weights = softmax_rows(scores);
    return {matmul(weights, v), weights};
}

FusedFeature cross_attend(const Tensor& x_hh, const Tensor& x_img, const FafParams& params) {
    const std::size_t p = params.cfg.patch;
    if (x_img.ndim() != 3 || x_img.dim(2) != 3)
        throw DimensionError("cross_attend: image must be [H,W,3], got " + x_img.shape_str());
    if (x_hh.ndim() != 3 || x_hh.dim(0) * 2 != x_img.dim(0) || x_hh.dim(1) * 2 != x_img.dim(1))
        throw DimensionError("cross_attend: HH band " + x_hh.shape_str() +
                             " is not the half-resolution of " + x_img.shape_str());
    Tensor q_tokens = tokenize(x_hh, p);
    Tensor k_tokens = tokenize(x_img, 2 * p);
    auto [attended, weights] = attend(q_tokens, k_tokens, params);
    Tensor projected = matmul(attended, params.w_o);
    Tensor delta = detokenize(projected, x_img.dim(0), x_img.dim(1), 2 * p, 3);
    FusedFeature out;
    out.x_f = add(delta, x_img);
    out.attention = weights;
    return out;
}

Tensor contrastive_embed(const Tensor& x_f, const FafParams& params) {
    Tensor pooled = reshape(avg_pool_spatial(x_f), {1, x_f.dim(2)});
    Tensor hidden = relu(add_rowvec(matmul(pooled, params.mlp1_w), params.mlp1_b));
    Tensor projected = add_rowvec(matmul(hidden, params.mlp2_w), params.mlp2_b);
    return reshape(l2_normalize_rows(projected), {params.cfg.d_embed});
}

} // namespace foca::faf
