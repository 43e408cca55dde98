#pragma once

#include "foca/tensor.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace foca::wavelet {

// Single-level orthonormal Haar decomposition of an [H,W,C] image.
// Subscript convention: first letter is the filter along the width,
// second along the height. A constant image is pure LL with value 2v.
struct SubbandSet {
    Tensor ll, lh, hl, hh; // each [H/2, W/2, C]
    std::size_t source_height = 0;
    std::size_t source_width = 0;
};

SubbandSet dwt2(const Tensor& img);

// Exact inverse; reconstruction error is at rounding level.
Tensor idwt2(const SubbandSet& bands);

// Channel-summed squared HH magnitude, box-smoothed with an odd window.
// Zero padding with a constant divisor of window^2.
Tensor hh_energy_map(const SubbandSet& bands, std::size_t window);

// Half-resolution sites adjacent to a mask edge: positions (y, x) on the
// H/2 x W/2 grid whose 2x2 source block touches both mask values.
std::vector<std::pair<std::size_t, std::size_t>> mask_boundary_sites(
    const std::vector<std::uint8_t>& mask, std::size_t height, std::size_t width);

// Mean of the energy map over the given sites.
double mean_energy_at(const Tensor& energy, const std::vector<std::pair<std::size_t, std::size_t>>& sites);

} // namespace foca::wavelet
