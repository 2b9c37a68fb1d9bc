#include "og/image.hpp"

#include <png.h>

#include <cstdio>
#include <deque>

namespace og {

namespace {

struct FileCloser {
    std::FILE* fp;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

}  // namespace

RgbImage load_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open image file: " + path);
    FileCloser closer{fp};

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw IoError("not a PNG file: " + path);
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }

    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG: " + path);
    }

    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (width == 0 || height == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG has zero dimension: " + path);
    }

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    const std::size_t channels = png_get_channels(png, info);
    if (channels != 3 && channels != 4) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG channel layout in " + path);
    }

    raw.resize(static_cast<std::size_t>(width) * height * channels);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + static_cast<std::size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RgbImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    if (channels == 3) {
        img.pixels.assign(raw.begin(), raw.end());
    } else {
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) {
            const unsigned a = raw[4 * i + 3];
            for (std::size_t c = 0; c < 3; ++c) {
                const unsigned fg = raw[4 * i + c];
                // integer alpha-over-white with round-half-up
                img.pixels[3 * i + c] =
                    static_cast<std::uint8_t>((a * fg + (255u - a) * 255u + 127u) / 255u);
            }
        }
    }
    return img;
}

namespace {

void write_png_rows(const std::string& path, std::size_t width, std::size_t height,
                    int png_color_type, std::size_t channels, const std::uint8_t* data) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open for writing: " + path);
    FileCloser closer{fp};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }

    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG: " + path);
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 png_color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(data + y * width * channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_png(const std::string& path, const RgbImage& img) {
    if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height * 3) {
        throw InvariantError("refusing to save malformed RGB image");
    }
    write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 3, img.pixels.data());
}

void save_png(const std::string& path, const GrayImage& img) {
    if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height) {
        throw InvariantError("refusing to save malformed gray image");
    }
    write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 1, img.pixels.data());
}

GrayImage to_gray(const RgbImage& img) {
    GrayImage out;
    out.width = img.width;
    out.height = img.height;
    out.pixels.resize(img.width * img.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const unsigned r = img.pixels[3 * i];
        const unsigned g = img.pixels[3 * i + 1];
        const unsigned b = img.pixels[3 * i + 2];
        out.pixels[i] = static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
    }
    return out;
}

ForegroundMask background_mask(const RgbImage& img, std::uint8_t whiteness_threshold) {
    const std::size_t w = img.width;
    const std::size_t h = img.height;
    std::vector<std::uint8_t> whitish(w * h, 0);
    for (std::size_t i = 0; i < w * h; ++i) {
        std::uint8_t mn = img.pixels[3 * i];
        mn = std::min(mn, img.pixels[3 * i + 1]);
        mn = std::min(mn, img.pixels[3 * i + 2]);
        whitish[i] = mn >= whiteness_threshold ? 1 : 0;
    }

    // flood fill background inward from every whitish border pixel
    std::vector<std::uint8_t> background(w * h, 0);
    std::deque<std::size_t> queue;
    auto push = [&](std::size_t x, std::size_t y) {
        const std::size_t i = y * w + x;
        if (whitish[i] && !background[i]) {
            background[i] = 1;
            queue.push_back(i);
        }
    };
    for (std::size_t x = 0; x < w; ++x) {
        push(x, 0);
        push(x, h - 1);
    }
    for (std::size_t y = 0; y < h; ++y) {
        push(0, y);
        push(w - 1, y);
    }
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        const std::size_t x = i % w;
        const std::size_t y = i / w;
        if (x > 0) push(x - 1, y);
        if (x + 1 < w) push(x + 1, y);
        if (y > 0) push(x, y - 1);
        if (y + 1 < h) push(x, y + 1);
    }

    ForegroundMask mask;
    mask.foreground.resize(w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        mask.foreground[i] = background[i] ? 0 : 1;
        mask.foreground_count += mask.foreground[i];
    }
    return mask;
}

}  // namespace og
