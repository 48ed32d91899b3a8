#pragma once

#include <array>
#include <cstdint>

#include "dvio/image.hpp"

namespace dvio::imgproc {

// Binomial approximation of a 5x5 Gaussian, [1 4 6 4 1]^T [1 4 6 4 1].
// Entries sum to 256 so the weighted sum of 8-bit pixels fits in 16 bits.
inline constexpr std::array<std::array<uint8_t, 5>, 5> kGauss5 = {{
    {1, 4, 6, 4, 1},
    {4, 16, 24, 16, 4},
    {6, 24, 36, 24, 6},
    {4, 16, 24, 16, 4},
    {1, 4, 6, 4, 1},
}};

// 3x3 Sobel gradients. The one-pixel border is zero.
GradientPair sobel3(const Image8& img, int workers = 1);

// Integer 5x5 blur, (sum + 128) >> 8 on the interior; the two-pixel border
// copies the input unchanged.
Image8 gaussian_blur5(const Image8& img, int workers = 1);

}  // namespace dvio::imgproc
