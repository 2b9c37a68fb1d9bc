#pragma once

#include <vector>

#include "og/image.hpp"

namespace og {

struct CannyParams {
    double sigma = 1.4;       // Gaussian blur width, radius 5 (11 taps), replicate border
    double low = 50.0;        // hysteresis thresholds on Sobel gradient magnitude
    double high = 150.0;
};

// Classic Canny: Gaussian blur, Sobel gradients, 4-sector non-maximum
// suppression, double threshold with 8-connected hysteresis. Edge pixels are
// 255, everything else 0.
GrayImage canny_edges(const GrayImage& gray, const CannyParams& params = {});

// Signed response of the 3x3 high-pass kernel (8 at the center, -1 at each
// neighbor), evaluated only where the window fits; the one-pixel border ring
// is left at zero so a constant image yields a constant response.
std::vector<int> highpass_3x3(const GrayImage& gray);

// Full edge-map feature: 255 - clip(canny + high-pass, 0, 255) on the luma of
// the input, so a flat image maps to all-255 and edges map to dark pixels.
GrayImage edge_image(const RgbImage& img, const CannyParams& params = {});

}  // namespace og
