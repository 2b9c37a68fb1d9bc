#include "og/colors.hpp"

#include <algorithm>
#include <limits>

#include "og/errors.hpp"
#include "og/rng.hpp"

namespace og {

namespace {

double sq_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dr = a[0] - b[0];
    const double dg = a[1] - b[1];
    const double db = a[2] - b[2];
    return dr * dr + dg * dg + db * db;
}

}  // namespace

std::vector<std::array<double, 3>> kmeanspp_init(const std::vector<std::array<double, 3>>& points,
                                                 std::size_t k, std::uint64_t seed) {
    if (points.empty()) throw InvariantError("k-means++ needs at least one point");
    Rng rng(seed);
    std::vector<std::array<double, 3>> centroids;
    centroids.push_back(points[rng.index(points.size())]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = sq_dist(points[i], centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c) {
                best = std::min(best, sq_dist(points[i], centroids[c]));
            }
            d2[i] = best;
        }
        centroids.push_back(points[rng.weighted_index(d2)]);
    }
    return centroids;
}

KMeansResult lloyd(const std::vector<std::array<double, 3>>& points,
                   std::vector<std::array<double, 3>> centroids, std::size_t max_iterations) {
    if (points.empty()) throw InvariantError("lloyd needs at least one point");
    const std::size_t k = centroids.size();
    KMeansResult result;
    std::vector<std::size_t> assignment(points.size(), k);
    std::vector<std::size_t> previous;

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        double objective = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best_c = 0;
            double best_d = sq_dist(points[i], centroids[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = sq_dist(points[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best_c = c;
                }
            }
            assignment[i] = best_c;
            objective += best_d;
        }
        result.objective_trace.push_back(objective);
        if (assignment == previous) break;
        previous = assignment;

        std::vector<std::array<double, 3>> sums(k, {0.0, 0.0, 0.0});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t c = assignment[i];
            sums[c][0] += points[i][0];
            sums[c][1] += points[i][1];
            sums[c][2] += points[i][2];
            counts[c] += 1;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            centroids[c] = {sums[c][0] / static_cast<double>(counts[c]),
                            sums[c][1] / static_cast<double>(counts[c]),
                            sums[c][2] / static_cast<double>(counts[c])};
        }
        // re-seed empty clusters from the point farthest from its centroid
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t farthest = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d = sq_dist(points[i], centroids[assignment[i]]);
                if (d > far_d) {
                    far_d = d;
                    farthest = i;
                }
            }
            centroids[c] = points[farthest];
            previous.clear();  // force at least one more assignment pass
        }
    }

    result.centroids = std::move(centroids);
    result.sizes.assign(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        // recompute the final assignment against the returned centroids
        std::size_t best_c = 0;
        double best_d = sq_dist(points[i], result.centroids[0]);
        for (std::size_t c = 1; c < k; ++c) {
            const double d = sq_dist(points[i], result.centroids[c]);
            if (d < best_d) {
                best_d = d;
                best_c = c;
            }
        }
        result.sizes[best_c] += 1;
    }
    return result;
}

ColorVector extract_colors_traced(const RgbImage& img, const ForegroundMask& mask,
                                  std::uint64_t seed, KMeansResult* trace_out) {
    std::vector<std::array<double, 3>> points;
    const std::size_t n = img.width * img.height;
    points.reserve(mask.empty() ? n : mask.foreground_count);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask.empty() && !mask.foreground[i]) continue;
        points.push_back({img.pixels[3 * i] / 255.0, img.pixels[3 * i + 1] / 255.0,
                          img.pixels[3 * i + 2] / 255.0});
    }

    KMeansResult km = lloyd(points, kmeanspp_init(points, 3, seed), 100);

    std::array<std::size_t, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (km.sizes[a] != km.sizes[b]) return km.sizes[a] > km.sizes[b];
        return km.centroids[a] < km.centroids[b];
    });

    ColorVector out;
    for (std::size_t slot = 0; slot < 3; ++slot) {
        const std::size_t c = order[slot];
        out.cluster_sizes[slot] = km.sizes[c];
        for (std::size_t ch = 0; ch < 3; ++ch) out.values[3 * slot + ch] = km.centroids[c][ch] + 1.0;
    }
    if (trace_out) *trace_out = std::move(km);
    return out;
}

ColorVector extract_colors(const RgbImage& img, const ForegroundMask& mask, std::uint64_t seed) {
    return extract_colors_traced(img, mask, seed, nullptr);
}

}  // namespace og
