#include "foca/wavelet.hpp"

#include "foca/error.hpp"

#include <string>

namespace foca::wavelet {

namespace {

void require_even_image(const Tensor& img) {
    if (img.ndim() != 3)
        throw DimensionError("dwt2: expected [H,W,C] image, got " + img.shape_str());
    const std::size_t h = img.dim(0), w = img.dim(1);
    if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0)
        throw DimensionError("dwt2: dimensions must be even and >= 2, got " + img.shape_str());
}

} // namespace

SubbandSet dwt2(const Tensor& img) {
    require_even_image(img);
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const std::size_t hh2 = h / 2, wh2 = w / 2;
    std::vector<double> ll(hh2 * wh2 * c), lh(hh2 * wh2 * c), hl(hh2 * wh2 * c), hh(hh2 * wh2 * c);
    const auto& v = img.values();
    for (std::size_t by = 0; by < hh2; ++by)
        for (std::size_t bx = 0; bx < wh2; ++bx)
            for (std::size_t k = 0; k < c; ++k) {
                const double a = v[((2 * by) * w + 2 * bx) * c + k];
                const double b = v[((2 * by) * w + 2 * bx + 1) * c + k];
                const double cc = v[((2 * by + 1) * w + 2 * bx) * c + k];
                const double d = v[((2 * by + 1) * w + 2 * bx + 1) * c + k];
                const std::size_t o = (by * wh2 + bx) * c + k;
                ll[o] = (a + b + cc + d) / 2.0;
                lh[o] = (a + b - cc - d) / 2.0; // low along width, high along height
                hl[o] = (a - b + cc - d) / 2.0; // high along width, low along height
                hh[o] = (a - b - cc + d) / 2.0;
            }
    SubbandSet out;
    out.ll = Tensor::from_data({hh2, wh2, c}, std::move(ll));
    out.lh = Tensor::from_data({hh2, wh2, c}, std::move(lh));
    out.hl = Tensor::from_data({hh2, wh2, c}, std::move(hl));
    out.hh = Tensor::from_data({hh2, wh2, c}, std::move(hh));
    out.source_height = h;
    out.source_width = w;
    return out;
}

Tensor idwt2(const SubbandSet& bands) {
    const auto& shape = bands.ll.shape();
    if (shape.size() != 3) throw DimensionError("idwt2: bands must be [H/2,W/2,C]");
    if (bands.lh.shape() != shape || bands.hl.shape() != shape || bands.hh.shape() != shape)
        throw DimensionError("idwt2: band shapes disagree, ll " + bands.ll.shape_str() + ", lh " +
                             bands.lh.shape_str() + ", hl " + bands.hl.shape_str() + ", hh " +
                             bands.hh.shape_str());
    const std::size_t hh2 = shape[0], wh2 = shape[1], c = shape[2];
    const std::size_t h = hh2 * 2, w = wh2 * 2;
    std::vector<double> img(h * w * c);
    for (std::size_t by = 0; by < hh2; ++by)
        for (std::size_t bx = 0; bx < wh2; ++bx)
            for (std::size_t k = 0; k < c; ++k) {
                const std::size_t o = (by * wh2 + bx) * c + k;
                const double ll = bands.ll.values()[o];
                const double lh = bands.lh.values()[o];
                const double hl = bands.hl.values()[o];
                const double hhv = bands.hh.values()[o];
                img[((2 * by) * w + 2 * bx) * c + k] = (ll + lh + hl + hhv) / 2.0;
                img[((2 * by) * w + 2 * bx + 1) * c + k] = (ll + lh - hl - hhv) / 2.0;
                img[((2 * by + 1) * w + 2 * bx) * c + k] = (ll - lh + hl - hhv) / 2.0;
                img[((2 * by + 1) * w + 2 * bx + 1) * c + k] = (ll - lh - hl + hhv) / 2.0;
            }
    return Tensor::from_data({h, w, c}, std::move(img));
}

Tensor hh_energy_map(const SubbandSet& bands, std::size_t window) {
    if (window < 1 || window % 2 == 0)
        throw ParameterError("hh_energy_map: window must be odd and >= 1, got " +
                             std::to_string(window));
    const std::size_t h = bands.hh.dim(0), w = bands.hh.dim(1), c = bands.hh.dim(2);
    std::vector<double> energy(h * w, 0.0);
    for (std::size_t i = 0; i < h * w; ++i)
        for (std::size_t k = 0; k < c; ++k) {
            const double v = bands.hh.values()[i * c + k];
            energy[i] += v * v;
        }
    if (window == 1) return Tensor::from_data({h, w}, std::move(energy));
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(window / 2);
    const double inv = 1.0 / static_cast<double>(window * window);
    std::vector<double> smooth(h * w, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
                if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + dx;
                    if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                    acc += energy[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
                }
            }
            smooth[y * w + x] = acc * inv;
        }
    return Tensor::from_data({h, w}, std::move(smooth));
}

std::vector<std::pair<std::size_t, std::size_t>> mask_boundary_sites(
    const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width) {
    if (mask.size() != height * width)
        throw DimensionError("mask_boundary_sites: mask size does not match dimensions");
    std::vector<std::pair<std::size_t, std::size_t>> sites;
    auto at = [&](std::size_t y, std::size_t x) { return mask[y * width + x] != 0; };
    for (std::size_t by = 0; by < height / 2; ++by)
        for (std::size_t bx = 0; bx < width / 2; ++bx) {
            bool any_true = false, any_false = false;
            // The 2x2 block plus a one-pixel ring, so blocks straddling an
            // edge on either side count as boundary sites.
            const std::size_t y0 = by * 2 > 0 ? by * 2 - 1 : 0;
            const std::size_t x0 = bx * 2 > 0 ? bx * 2 - 1 : 0;
            const std::size_t y1 = std::min(by * 2 + 2, height - 1);
            const std::size_t x1 = std::min(bx * 2 + 2, width - 1);
            for (std::size_t y = y0; y <= y1; ++y)
                for (std::size_t x = x0; x <= x1; ++x) (at(y, x) ? any_true : any_false) = true;
            if (any_true && any_false) sites.emplace_back(by, bx);
        }
    return sites;
}

double mean_energy_at(const Tensor& energy,
                      const std::vector<std::pair<std::size_t, std::size_t>>& sites) {
    if (sites.empty()) return 0.0;
    const std::size_t w = energy.dim(1);
    double acc = 0.0;
    for (const auto& [y, x] : sites) acc += energy.values()[y * w + x];
    return acc / static_cast<double>(sites.size());
}

} // namespace foca::wavelet
