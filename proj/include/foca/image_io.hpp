#pragma once

#include "foca/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace foca {

// Binary mask; data is 0/1 per pixel, row-major.
struct Mask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> data;

    std::size_t count_true() const {
        std::size_t n = 0;
        for (auto v : data) n += v ? 1 : 0;
        return n;
    }
    bool empty_mask() const { return count_true() == 0; }
    bool at(std::size_t y, std::size_t x) const { return data[y * width + x] != 0; }
};

namespace image_io {

// P6 pixmap, 8-bit, values mapped linearly between [0,1] and [0,255].
void write_ppm(const std::string& path, const Tensor& img);
Tensor read_ppm(const std::string& path);

// P5 graymap with values 0/255.
void write_mask_pgm(const std::string& path, const Mask& mask);
Mask read_mask_pgm(const std::string& path);

// P5 graymap from an [H,W] tensor, affinely rescaled to [0,255].
// Returns the applied (scale, offset) so the file stays interpretable.
std::pair<double, double> write_gray_pgm(const std::string& path, const Tensor& field);

// Single-channel [H,W] or [H,W,C] tensor rescaled per call to [0,255] P6/P5.
std::pair<double, double> write_band_ppm(const std::string& path, const Tensor& band);

} // namespace image_io
} // namespace foca
