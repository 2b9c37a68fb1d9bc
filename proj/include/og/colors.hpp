#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "og/image.hpp"

namespace og {

// Three dominant colors of an item, in [1,2] per component after the +1
// shift, ordered by descending cluster size (ties by R,G,B). The all-zero
// vector is reserved for absent items and can never collide with real colors.
struct ColorVector {
    std::array<double, 9> values{};
    std::array<std::size_t, 3> cluster_sizes{};

    std::vector<double> as_vector() const { return {values.begin(), values.end()}; }
};

// One Lloyd fixed point: centroids in [0,1] RGB space plus member counts.
struct KMeansResult {
    std::vector<std::array<double, 3>> centroids;
    std::vector<std::size_t> sizes;
    // objective (sum of squared distances) recorded after every assignment
    std::vector<double> objective_trace;
};

// Lloyd's algorithm from explicit starting centroids. Assignment ties go to
// the lowest centroid index; a cluster that ends up empty is re-seeded from
// the point farthest from its own centroid (ties: lowest point index).
// Exposed separately so tests can drive it from exhaustive initializations.
KMeansResult lloyd(const std::vector<std::array<double, 3>>& points,
                   std::vector<std::array<double, 3>> centroids, std::size_t max_iterations);

// k-means++ starting centroids for the given seed.
std::vector<std::array<double, 3>> kmeanspp_init(const std::vector<std::array<double, 3>>& points,
                                                 std::size_t k, std::uint64_t seed);

// Foreground pixels of img (entire image when the mask is empty), clustered
// into k=3 colors, then shifted by +1 into [1,2].
ColorVector extract_colors(const RgbImage& img, const ForegroundMask& mask, std::uint64_t seed);

// The same, with the Lloyd trace kept for objective-monotonicity checks.
ColorVector extract_colors_traced(const RgbImage& img, const ForegroundMask& mask,
                                  std::uint64_t seed, KMeansResult* trace_out);

}  // namespace og
