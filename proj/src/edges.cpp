#include "og/edges.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace og {

namespace {

constexpr int kBlurRadius = 5;

std::vector<double> gaussian_kernel(double sigma) {
    std::vector<double> k(2 * kBlurRadius + 1);
    double sum = 0.0;
    for (int i = -kBlurRadius; i <= kBlurRadius; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + kBlurRadius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

inline std::size_t clamp_coord(long v, std::size_t n) {
    if (v < 0) return 0;
    if (v >= static_cast<long>(n)) return n - 1;
    return static_cast<std::size_t>(v);
}

}  // namespace

GrayImage canny_edges(const GrayImage& gray, const CannyParams& params) {
    const std::size_t w = gray.width;
    const std::size_t h = gray.height;
    const std::vector<double> kernel = gaussian_kernel(params.sigma);

    // separable Gaussian blur with replicated borders
    std::vector<double> tmp(w * h), blur(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -kBlurRadius; i <= kBlurRadius; ++i) {
                s += kernel[static_cast<std::size_t>(i + kBlurRadius)] *
                     gray.pixels[y * w + clamp_coord(static_cast<long>(x) + i, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -kBlurRadius; i <= kBlurRadius; ++i) {
                s += kernel[static_cast<std::size_t>(i + kBlurRadius)] *
                     tmp[clamp_coord(static_cast<long>(y) + i, h) * w + x];
            }
            blur[y * w + x] = s;
        }
    }

    // Sobel gradients, replicated borders
    std::vector<double> gx(w * h), gy(w * h), mag(w * h);
    auto b = [&](long x, long y) { return blur[clamp_coord(y, h) * w + clamp_coord(x, w)]; };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const long xi = static_cast<long>(x), yi = static_cast<long>(y);
            const double sx = (b(xi + 1, yi - 1) - b(xi - 1, yi - 1)) +
                              2.0 * (b(xi + 1, yi) - b(xi - 1, yi)) +
                              (b(xi + 1, yi + 1) - b(xi - 1, yi + 1));
            const double sy = (b(xi - 1, yi + 1) - b(xi - 1, yi - 1)) +
                              2.0 * (b(xi, yi + 1) - b(xi, yi - 1)) +
                              (b(xi + 1, yi + 1) - b(xi + 1, yi - 1));
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
            mag[y * w + x] = std::sqrt(sx * sx + sy * sy);
        }
    }

    // non-maximum suppression across 4 direction sectors
    const double kTan22 = 0.41421356237309503;  // tan(22.5 deg)
    const double kTan67 = 2.41421356237309503;  // tan(67.5 deg)
    auto m = [&](long x, long y) { return mag[clamp_coord(y, h) * w + clamp_coord(x, w)]; };
    std::vector<std::uint8_t> keep(w * h, 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            if (mag[i] <= 0.0) continue;
            const double ax = std::fabs(gx[i]);
            const double ay = std::fabs(gy[i]);
            long dx, dy;
            if (ay <= kTan22 * ax) {
                dx = 1; dy = 0;
            } else if (ay >= kTan67 * ax) {
                dx = 0; dy = 1;
            } else if ((gx[i] >= 0.0) == (gy[i] >= 0.0)) {
                dx = 1; dy = 1;
            } else {
                dx = 1; dy = -1;
            }
            const long xi = static_cast<long>(x), yi = static_cast<long>(y);
            if (mag[i] >= m(xi + dx, yi + dy) && mag[i] >= m(xi - dx, yi - dy)) keep[i] = 1;
        }
    }

    // double threshold and 8-connected hysteresis from the strong pixels
    GrayImage out = GrayImage::filled(w, h, 0);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < w * h; ++i) {
        if (keep[i] && mag[i] >= params.high) {
            out.pixels[i] = 255;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        const long x = static_cast<long>(i % w);
        const long y = static_cast<long>(i / w);
        for (long dy = -1; dy <= 1; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const long nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) {
                    continue;
                }
                const std::size_t j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                if (out.pixels[j] == 0 && keep[j] && mag[j] >= params.low) {
                    out.pixels[j] = 255;
                    queue.push_back(j);
                }
            }
        }
    }
    return out;
}

std::vector<int> highpass_3x3(const GrayImage& gray) {
    const std::size_t w = gray.width;
    const std::size_t h = gray.height;
    std::vector<int> out(w * h, 0);
    if (w < 3 || h < 3) return out;
    for (std::size_t y = 1; y + 1 < h; ++y) {
        for (std::size_t x = 1; x + 1 < w; ++x) {
            int neighbors = 0;
            neighbors += gray.pixels[(y - 1) * w + (x - 1)];
            neighbors += gray.pixels[(y - 1) * w + x];
            neighbors += gray.pixels[(y - 1) * w + (x + 1)];
            neighbors += gray.pixels[y * w + (x - 1)];
            neighbors += gray.pixels[y * w + (x + 1)];
            neighbors += gray.pixels[(y + 1) * w + (x - 1)];
            neighbors += gray.pixels[(y + 1) * w + x];
            neighbors += gray.pixels[(y + 1) * w + (x + 1)];
            out[y * w + x] = 8 * static_cast<int>(gray.pixels[y * w + x]) - neighbors;
        }
    }
    return out;
}

GrayImage edge_image(const RgbImage& img, const CannyParams& params) {
    const GrayImage gray = to_gray(img);
    const GrayImage ie1 = canny_edges(gray, params);
    const std::vector<int> ie2 = highpass_3x3(gray);
    GrayImage out = GrayImage::filled(img.width, img.height, 0);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const int combined = static_cast<int>(ie1.pixels[i]) + ie2[i];
        const int clipped = std::clamp(combined, 0, 255);
        out.pixels[i] = static_cast<std::uint8_t>(255 - clipped);
    }
    return out;
}

}  // namespace og
