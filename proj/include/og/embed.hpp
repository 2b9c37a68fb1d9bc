#pragma once

#include <string>
#include <vector>

#include "og/image.hpp"

namespace og {

// Raw edge feature: the edge map summarized over a fixed grid, or an
// externally computed embedding fed in verbatim.
struct EdgeDescriptor {
    enum class Provenance { grid, external };

    std::vector<double> values;
    Provenance provenance = Provenance::grid;

    bool all_zero() const {
        for (double v : values) {
            if (v != 0.0) return false;
        }
        return true;
    }
};

// Splits the edge map into grid x grid cells (remainder pixels join the last
// row/column of cells) and emits 1 - mean/255 per cell, so more edge pixels
// (darker map) produce larger components. Output is in [0,1]^(grid*grid).
EdgeDescriptor embed_edge_image(const GrayImage& edge, std::size_t grid = 16);

}  // namespace og
