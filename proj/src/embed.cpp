#include "og/embed.hpp"

#include <string>

#include "og/errors.hpp"

namespace og {

EdgeDescriptor embed_edge_image(const GrayImage& edge, std::size_t grid) {
    if (grid < 1) throw DimensionError("descriptor grid must be at least 1x1");
    if (edge.width < grid || edge.height < grid) {
        throw DimensionError("image " + std::to_string(edge.width) + "x" +
                             std::to_string(edge.height) + " is smaller than the " +
                             std::to_string(grid) + "x" + std::to_string(grid) +
                             " descriptor grid");
    }

    const std::size_t cell_w = edge.width / grid;
    const std::size_t cell_h = edge.height / grid;
    EdgeDescriptor out;
    out.provenance = EdgeDescriptor::Provenance::grid;
    out.values.resize(grid * grid);
    for (std::size_t gy = 0; gy < grid; ++gy) {
        const std::size_t y0 = gy * cell_h;
        const std::size_t y1 = (gy + 1 == grid) ? edge.height : (gy + 1) * cell_h;
        for (std::size_t gx = 0; gx < grid; ++gx) {
            const std::size_t x0 = gx * cell_w;
            const std::size_t x1 = (gx + 1 == grid) ? edge.width : (gx + 1) * cell_w;
            double sum = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
                for (std::size_t x = x0; x < x1; ++x) sum += edge.pixels[y * edge.width + x];
            }
            const double mean = sum / static_cast<double>((y1 - y0) * (x1 - x0));
            out.values[gy * grid + gx] = 1.0 - mean / 255.0;
        }
    }
    return out;
}

}  // namespace og
