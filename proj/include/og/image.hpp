#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "og/errors.hpp"

namespace og {

// 8-bit RGB image, row-major, channel order fixed as R,G,B.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // 3 bytes per pixel

    static RgbImage filled(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b) {
        RgbImage img;
        img.width = w;
        img.height = h;
        img.pixels.resize(w * h * 3);
        for (std::size_t i = 0; i < w * h; ++i) {
            img.pixels[3 * i] = r;
            img.pixels[3 * i + 1] = g;
            img.pixels[3 * i + 2] = b;
        }
        return img;
    }

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }
};

// 8-bit single-channel image.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    static GrayImage filled(std::size_t w, std::size_t h, std::uint8_t v) {
        GrayImage img;
        img.width = w;
        img.height = h;
        img.pixels.assign(w * h, v);
        return img;
    }

    std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

// Decodes a PNG of any common layout to 8-bit RGB. An alpha channel is
// composited over white, which matches the white product-shot backgrounds the
// rest of the pipeline assumes.
RgbImage load_png(const std::string& path);

void save_png(const std::string& path, const RgbImage& img);
void save_png(const std::string& path, const GrayImage& img);

// Integer Rec.601 luma: (299 R + 587 G + 114 B + 500) / 1000.
GrayImage to_gray(const RgbImage& img);

// Foreground selection for near-white product shots. A pixel is background
// iff min(R,G,B) >= whiteness_threshold and it reaches the image border
// through such pixels (4-connected flood fill); everything else is
// foreground. White regions enclosed by the item stay foreground.
struct ForegroundMask {
    std::vector<std::uint8_t> foreground;  // 1 = foreground, indexed y*width+x
    std::size_t foreground_count = 0;

    bool empty() const { return foreground_count == 0; }
};

ForegroundMask background_mask(const RgbImage& img, std::uint8_t whiteness_threshold = 245);

}  // namespace og
