#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "og/colors.hpp"
#include "og/edges.hpp"
#include "og/embed.hpp"
#include "og/errors.hpp"
#include "og/external.hpp"
#include "og/image.hpp"
#include "og/rng.hpp"

namespace fs = std::filesystem;

namespace {

// PNG byte fixtures, frozen from a reference encoder.

// 2x2 RGB: (255,0,0) (0,255,0) / (0,0,255) (128,64,32)
const unsigned char kRgb2x2Png[] = {
    137, 80, 78, 71, 13, 10, 26, 10, 0, 0, 0, 13, 73, 72, 68, 82,
    0, 0, 0, 2, 0, 0, 0, 2, 8, 2, 0, 0, 0, 253, 212, 154,
    115, 0, 0, 0, 22, 73, 68, 65, 84, 120, 156, 99, 248, 207, 192, 192,
    240, 159, 129, 129, 129, 225, 127, 131, 131, 2, 0, 28, 20, 3, 222, 100,
    212, 173, 141, 0, 0, 0, 0, 73, 69, 78, 68, 174, 66, 96, 130,
};

// 2x2 RGBA, every pixel fully transparent
const unsigned char kTransparent2x2Png[] = {
    137, 80, 78, 71, 13, 10, 26, 10, 0, 0, 0, 13, 73, 72, 68, 82,
    0, 0, 0, 2, 0, 0, 0, 2, 8, 6, 0, 0, 0, 114, 182, 13,
    36, 0, 0, 0, 11, 73, 68, 65, 84, 120, 156, 99, 96, 64, 7, 0,
    0, 18, 0, 1, 119, 241, 250, 0, 0, 0, 0, 0, 73, 69, 78, 68,
    174, 66, 96, 130,
};

// 2x2 RGBA: (255,0,0,255) (0,255,0,128) / (10,20,30,64) (200,100,50,0)
const unsigned char kAlpha2x2Png[] = {
    137, 80, 78, 71, 13, 10, 26, 10, 0, 0, 0, 13, 73, 72, 68, 82,
    0, 0, 0, 2, 0, 0, 0, 2, 8, 6, 0, 0, 0, 114, 182, 13,
    36, 0, 0, 0, 26, 73, 68, 65, 84, 120, 156, 99, 248, 207, 192, 240,
    159, 225, 63, 67, 3, 3, 151, 136, 156, 195, 137, 20, 35, 6, 0, 55,
    103, 5, 88, 120, 143, 99, 38, 0, 0, 0, 0, 73, 69, 78, 68, 174,
    66, 96, 130,
};

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("og_imagefeat_" + name)).string();
}

std::string write_bytes(const std::string& name, const unsigned char* data, std::size_t len) {
    const std::string path = temp_path(name);
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp != nullptr);
    REQUIRE(std::fwrite(data, 1, len, fp) == len);
    std::fclose(fp);
    return path;
}

// Independent scalar re-implementation of the edge pipeline, with sector
// selection via atan2 and hysteresis via fixpoint sweeps instead of BFS.
og::GrayImage reference_edge_image(const og::RgbImage& img) {
    const std::size_t w = img.width, h = img.height;
    std::vector<double> gray(w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        gray[i] = static_cast<double>((299u * img.pixels[3 * i] + 587u * img.pixels[3 * i + 1] +
                                       114u * img.pixels[3 * i + 2] + 500u) /
                                      1000u);
    }
    auto clampi = [](long v, std::size_t n) {
        return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
    };

    const double sigma = 1.4;
    std::array<double, 11> k{};
    double ksum = 0;
    for (int i = -5; i <= 5; ++i) {
        k[static_cast<std::size_t>(i + 5)] = std::exp(-i * i / (2.0 * sigma * sigma));
        ksum += k[static_cast<std::size_t>(i + 5)];
    }
    for (double& v : k) v /= ksum;

    std::vector<double> tmp(w * h), blur(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0;
            for (int i = -5; i <= 5; ++i)
                s += k[static_cast<std::size_t>(i + 5)] * gray[y * w + clampi(static_cast<long>(x) + i, w)];
            tmp[y * w + x] = s;
        }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0;
            for (int i = -5; i <= 5; ++i)
                s += k[static_cast<std::size_t>(i + 5)] * tmp[clampi(static_cast<long>(y) + i, h) * w + x];
            blur[y * w + x] = s;
        }

    auto bl = [&](long x, long y) { return blur[clampi(y, h) * w + clampi(x, w)]; };
    std::vector<double> gx(w * h), gy(w * h), mag(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const long xi = static_cast<long>(x), yi = static_cast<long>(y);
            gx[y * w + x] = bl(xi + 1, yi - 1) - bl(xi - 1, yi - 1) + 2 * (bl(xi + 1, yi) - bl(xi - 1, yi)) +
                            bl(xi + 1, yi + 1) - bl(xi - 1, yi + 1);
            gy[y * w + x] = bl(xi - 1, yi + 1) - bl(xi - 1, yi - 1) + 2 * (bl(xi, yi + 1) - bl(xi, yi - 1)) +
                            bl(xi + 1, yi + 1) - bl(xi + 1, yi - 1);
            mag[y * w + x] = std::sqrt(gx[y * w + x] * gx[y * w + x] + gy[y * w + x] * gy[y * w + x]);
        }

    auto mg = [&](long x, long y) { return mag[clampi(y, h) * w + clampi(x, w)]; };
    std::vector<std::uint8_t> keep(w * h, 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            if (mag[i] <= 0) continue;
            double angle = std::atan2(gy[i], gx[i]) * 180.0 / M_PI;
            if (angle < 0) angle += 180.0;
            if (angle >= 157.5) angle -= 180.0;
            long dx, dy;
            if (angle < 22.5) {
                dx = 1; dy = 0;
            } else if (angle < 67.5) {
                dx = 1; dy = 1;
            } else if (angle < 112.5) {
                dx = 0; dy = 1;
            } else {
                dx = 1; dy = -1;
            }
            const long xi = static_cast<long>(x), yi = static_cast<long>(y);
            if (mag[i] >= mg(xi + dx, yi + dy) && mag[i] >= mg(xi - dx, yi - dy)) keep[i] = 1;
        }

    std::vector<std::uint8_t> edge(w * h, 0);
    for (std::size_t i = 0; i < w * h; ++i) edge[i] = (keep[i] && mag[i] >= 150.0) ? 1 : 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                if (edge[i] || !keep[i] || mag[i] < 50.0) continue;
                for (long dy = -1; dy <= 1 && !edge[i]; ++dy)
                    for (long dx = -1; dx <= 1; ++dx) {
                        const long nx = static_cast<long>(x) + dx, ny = static_cast<long>(y) + dy;
                        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h))
                            continue;
                        if (edge[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)]) {
                            edge[i] = 1;
                            changed = true;
                            break;
                        }
                    }
            }
    }

    const int f[3][3] = {{-1, -1, -1}, {-1, 8, -1}, {-1, -1, -1}};
    og::GrayImage out = og::GrayImage::filled(w, h, 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            int hp = 0;
            if (x >= 1 && y >= 1 && x + 1 < w && y + 1 < h) {
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        hp += f[dy + 1][dx + 1] *
                              static_cast<int>(
                                  gray[(y + static_cast<std::size_t>(dy + 1) - 1) * w +
                                       (x + static_cast<std::size_t>(dx + 1) - 1)]);
            }
            const int combined = (edge[y * w + x] ? 255 : 0) + hp;
            out.pixels[y * w + x] = static_cast<std::uint8_t>(255 - std::clamp(combined, 0, 255));
        }
    return out;
}

}  // namespace

TEST_CASE("frozen 2x2 PNG decodes pixel-exactly") {
    const std::string path = write_bytes("rgb2x2.png", kRgb2x2Png, sizeof(kRgb2x2Png));
    og::RgbImage img = og::load_png(path);
    REQUIRE(img.width == 2);
    REQUIRE(img.height == 2);
    CHECK(img.pixels == std::vector<std::uint8_t>{255, 0, 0, 0, 255, 0, 0, 0, 255, 128, 64, 32});
}

TEST_CASE("fully transparent PNG composites to all white") {
    const std::string path =
        write_bytes("transparent.png", kTransparent2x2Png, sizeof(kTransparent2x2Png));
    og::RgbImage img = og::load_png(path);
    CHECK(img.pixels == std::vector<std::uint8_t>(12, 255));
}

TEST_CASE("partial alpha composites over white with pinned rounding") {
    const std::string path = write_bytes("alpha.png", kAlpha2x2Png, sizeof(kAlpha2x2Png));
    og::RgbImage img = og::load_png(path);
    CHECK(img.pixels == std::vector<std::uint8_t>{255, 0, 0, 127, 255, 127,  //
                                                  194, 196, 199, 255, 255, 255});
}

TEST_CASE("unreadable and corrupt image files raise I/O errors") {
    CHECK_THROWS_AS(og::load_png(temp_path("does_not_exist.png")), og::IoError);

    const unsigned char junk[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const std::string junk_path = write_bytes("junk.png", junk, sizeof(junk));
    CHECK_THROWS_AS(og::load_png(junk_path), og::IoError);

    // valid signature but mangled header chunk
    std::vector<unsigned char> mangled(kRgb2x2Png, kRgb2x2Png + sizeof(kRgb2x2Png));
    mangled[16] = mangled[17] = mangled[18] = mangled[19] = 0;  // width := 0, breaks the CRC too
    const std::string bad_path = write_bytes("zero_dim.png", mangled.data(), mangled.size());
    CHECK_THROWS_AS(og::load_png(bad_path), og::IoError);
}

TEST_CASE("png save/load round-trips RGB and gray images") {
    og::Rng rng(5);
    og::RgbImage img = og::RgbImage::filled(13, 7, 0, 0, 0);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    const std::string path = temp_path("roundtrip_rgb.png");
    og::save_png(path, img);
    og::RgbImage back = og::load_png(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);

    og::GrayImage gray = og::GrayImage::filled(9, 4, 0);
    for (auto& p : gray.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    const std::string gpath = temp_path("roundtrip_gray.png");
    og::save_png(gpath, gray);
    og::RgbImage gback = og::load_png(gpath);
    REQUIRE(gback.width == 9);
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        CHECK(gback.pixels[3 * i] == gray.pixels[i]);
        CHECK(gback.pixels[3 * i + 1] == gray.pixels[i]);
        CHECK(gback.pixels[3 * i + 2] == gray.pixels[i]);
    }
}

TEST_CASE("all-white image has empty foreground") {
    og::RgbImage white = og::RgbImage::filled(10, 10, 255, 255, 255);
    og::ForegroundMask mask = og::background_mask(white);
    CHECK(mask.empty());
    CHECK(mask.foreground_count == 0);
}

TEST_CASE("black square on white masks the square exactly") {
    og::RgbImage img = og::RgbImage::filled(12, 12, 255, 255, 255);
    for (std::size_t y = 4; y < 8; ++y)
        for (std::size_t x = 4; x < 8; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = 0;
    og::ForegroundMask mask = og::background_mask(img);
    CHECK(mask.foreground_count == 16);
    for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x) {
            const bool inside = x >= 4 && x < 8 && y >= 4 && y < 8;
            CHECK(mask.foreground[y * 12 + x] == (inside ? 1 : 0));
        }
}

TEST_CASE("white region enclosed by the item stays foreground") {
    // white canvas, black ring, white interior: the interior cannot reach the
    // border through whitish pixels, so it belongs to the item
    og::RgbImage img = og::RgbImage::filled(11, 11, 255, 255, 255);
    for (std::size_t y = 2; y < 9; ++y)
        for (std::size_t x = 2; x < 9; ++x) {
            const bool ring = x == 2 || x == 8 || y == 2 || y == 8;
            if (ring)
                for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = 0;
        }
    og::ForegroundMask mask = og::background_mask(img);
    for (std::size_t y = 0; y < 11; ++y)
        for (std::size_t x = 0; x < 11; ++x) {
            const bool inside_or_ring = x >= 2 && x <= 8 && y >= 2 && y <= 8;
            CHECK(mask.foreground[y * 11 + x] == (inside_or_ring ? 1 : 0));
        }
    CHECK(mask.foreground_count == 49);
}

TEST_CASE("three pure colors in 60/30/10 proportion are recovered exactly") {
    og::RgbImage img = og::RgbImage::filled(10, 10, 0, 0, 0);
    // 60 red, 30 green, 10 blue pixels
    for (std::size_t i = 0; i < 100; ++i) {
        const std::size_t x = i % 10, y = i / 10;
        if (i < 60) {
            img.at(x, y, 0) = 255;
        } else if (i < 90) {
            img.at(x, y, 1) = 255;
        } else {
            img.at(x, y, 2) = 255;
        }
    }
    og::ForegroundMask all;
    all.foreground.assign(100, 1);
    all.foreground_count = 100;
    for (std::uint64_t seed : {1ULL, 7ULL, 99ULL}) {
        og::ColorVector cv = og::extract_colors(img, all, seed);
        CHECK(cv.cluster_sizes == std::array<std::size_t, 3>{60, 30, 10});
        const std::array<double, 9> expect = {2, 1, 1, 1, 2, 1, 1, 1, 2};
        for (std::size_t i = 0; i < 9; ++i) {
            CHECK(cv.values[i] == doctest::Approx(expect[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("all-black foreground collapses every centroid to (1,1,1)") {
    og::RgbImage img = og::RgbImage::filled(6, 6, 0, 0, 0);
    og::ForegroundMask all;
    all.foreground.assign(36, 1);
    all.foreground_count = 36;
    og::ColorVector cv = og::extract_colors(img, all, 3);
    for (double v : cv.values) CHECK(v == 1.0);
    CHECK(cv.cluster_sizes[0] + cv.cluster_sizes[1] + cv.cluster_sizes[2] == 36);
}

TEST_CASE("two-color image matches the exhaustive-initialization oracle") {
    og::RgbImage img = og::RgbImage::filled(4, 4, 0, 0, 0);
    for (std::size_t i = 0; i < 4; ++i) {  // 12 black, 4 white pixels
        img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = 255;
    }
    std::vector<std::array<double, 3>> points;
    for (std::size_t i = 0; i < 16; ++i) {
        points.push_back({img.pixels[3 * i] / 255.0, img.pixels[3 * i + 1] / 255.0,
                          img.pixels[3 * i + 2] / 255.0});
    }

    // every Lloyd outcome reachable from a distinct triple of starting points
    std::vector<std::array<double, 9>> outcomes;
    for (std::size_t a = 0; a < 16; ++a)
        for (std::size_t b = a + 1; b < 16; ++b)
            for (std::size_t c = b + 1; c < 16; ++c) {
                og::KMeansResult r = og::lloyd(points, {points[a], points[b], points[c]}, 100);
                std::array<std::size_t, 3> order = {0, 1, 2};
                std::sort(order.begin(), order.end(), [&](std::size_t u, std::size_t v) {
                    if (r.sizes[u] != r.sizes[v]) return r.sizes[u] > r.sizes[v];
                    return r.centroids[u] < r.centroids[v];
                });
                std::array<double, 9> key{};
                for (std::size_t s = 0; s < 3; ++s)
                    for (std::size_t ch = 0; ch < 3; ++ch)
                        key[3 * s + ch] = r.centroids[order[s]][ch] + 1.0;
                outcomes.push_back(key);
            }

    og::ForegroundMask all;
    all.foreground.assign(16, 1);
    all.foreground_count = 16;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 11ULL}) {
        og::ColorVector cv = og::extract_colors(img, all, seed);
        bool found = false;
        for (const auto& key : outcomes) {
            bool match = true;
            for (std::size_t i = 0; i < 9; ++i) {
                if (std::fabs(key[i] - cv.values[i]) > 1e-12) match = false;
            }
            found = found || match;
        }
        CHECK(found);
    }
}

TEST_CASE("color components stay in [1,2] and inside the pixel bounding box") {
    og::Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        og::RgbImage img = og::RgbImage::filled(8, 8, 0, 0, 0);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
        og::ForegroundMask mask = og::background_mask(img);
        og::KMeansResult trace;
        og::ColorVector cv = og::extract_colors_traced(img, mask, rng.next_u64(), &trace);

        std::array<double, 3> lo = {2.0, 2.0, 2.0}, hi = {1.0, 1.0, 1.0};
        for (std::size_t i = 0; i < 64; ++i) {
            if (!mask.empty() && !mask.foreground[i]) continue;
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = img.pixels[3 * i + c] / 255.0 + 1.0;
                lo[c] = std::min(lo[c], v);
                hi[c] = std::max(hi[c], v);
            }
        }
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = cv.values[3 * s + c];
                CHECK(v >= 1.0);
                CHECK(v <= 2.0);
                CHECK(v >= lo[c] - 1e-12);
                CHECK(v <= hi[c] + 1e-12);
            }
        }
        // Lloyd objective never increases between assignment passes
        for (std::size_t i = 1; i < trace.objective_trace.size(); ++i) {
            CHECK(trace.objective_trace[i] <= trace.objective_trace[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("edge_image of constant images is all 255") {
    for (std::uint8_t v : {0, 77, 128, 255}) {
        og::RgbImage img = og::RgbImage::filled(16, 12, v, v, v);
        og::GrayImage out = og::edge_image(img);
        for (std::uint8_t p : out.pixels) CHECK(p == 255);
    }
    // non-gray constant too
    og::RgbImage colored = og::RgbImage::filled(9, 9, 200, 30, 90);
    og::GrayImage out = og::edge_image(colored);
    for (std::uint8_t p : out.pixels) CHECK(p == 255);
}

TEST_CASE("single white pixel fixture matches the hand-derived map byte-exactly") {
    og::RgbImage img = og::RgbImage::filled(9, 9, 0, 0, 0);
    img.at(4, 4, 0) = img.at(4, 4, 1) = img.at(4, 4, 2) = 255;

    // the blurred dot peaks below the low Canny threshold, so the Canny map
    // must stay empty and the whole output is decided by the 3x3 high-pass
    og::GrayImage canny = og::canny_edges(og::to_gray(img));
    for (std::uint8_t p : canny.pixels) CHECK(p == 0);

    const std::vector<int> hp = og::highpass_3x3(og::to_gray(img));
    CHECK(hp[4 * 9 + 4] == 8 * 255);
    CHECK(hp[4 * 9 + 3] == -255);
    CHECK(hp[3 * 9 + 3] == -255);

    og::GrayImage out = og::edge_image(img);
    for (std::size_t y = 0; y < 9; ++y) {
        for (std::size_t x = 0; x < 9; ++x) {
            const std::uint8_t expect = (x == 4 && y == 4) ? 0 : 255;
            CHECK(out.at(x, y) == expect);
        }
    }
}

TEST_CASE("vertical step fixture darkens exactly the first bright column") {
    og::RgbImage img = og::RgbImage::filled(8, 8, 0, 0, 0);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 4; x < 8; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = 255;

    og::GrayImage out = og::edge_image(img);

    // the gradient peak sits exactly between columns 3 and 4; with contraction
    // pinned off the blur rounds column 3 one ulp below column 4, so the
    // suppression pass keeps only column 4 and Canny darkens its border rows
    // too (the interior is forced to 0 by the clipped +765 high-pass response
    // regardless)
    for (std::size_t y = 0; y < 8; ++y) CHECK(out.at(4, y) == 0);
    // every other column is 255: the last dark column's high-pass response is
    // -765, which would swallow even a full Canny hit, and beyond the filter
    // support both maps are empty
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            if (x == 4) continue;
            CHECK(out.at(x, y) == 255);
        }
}

TEST_CASE("edge pipeline agrees byte-exactly with an independent re-implementation") {
    std::vector<og::RgbImage> fixtures;

    og::RgbImage step = og::RgbImage::filled(8, 8, 0, 0, 0);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 4; x < 8; ++x)
            for (std::size_t c = 0; c < 3; ++c) step.at(x, y, c) = 255;
    fixtures.push_back(step);

    og::RgbImage dot = og::RgbImage::filled(9, 9, 0, 0, 0);
    dot.at(4, 4, 0) = dot.at(4, 4, 1) = dot.at(4, 4, 2) = 255;
    fixtures.push_back(dot);

    og::Rng rng(23);
    og::RgbImage noise = og::RgbImage::filled(12, 10, 0, 0, 0);
    for (auto& p : noise.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    fixtures.push_back(noise);

    og::RgbImage blocks = og::RgbImage::filled(24, 24, 250, 250, 250);
    for (std::size_t y = 6; y < 18; ++y)
        for (std::size_t x = 6; x < 18; ++x) {
            blocks.at(x, y, 0) = 30;
            blocks.at(x, y, 1) = 60;
            blocks.at(x, y, 2) = 90;
        }
    fixtures.push_back(blocks);

    for (std::size_t i = 0; i < fixtures.size(); ++i) {
        og::GrayImage ours = og::edge_image(fixtures[i]);
        og::GrayImage ref = reference_edge_image(fixtures[i]);
        CHECK(ours.pixels == ref.pixels);
    }
}

TEST_CASE("edge_image is unchanged by alpha-premultiplying an opaque image") {
    // premultiplying a fully opaque pixel is the identity, so an RGBA-opaque
    // file and its RGB twin must decode identically and share an edge map
    og::RgbImage img = og::RgbImage::filled(20, 20, 255, 255, 255);
    for (std::size_t y = 5; y < 15; ++y)
        for (std::size_t x = 5; x < 15; ++x) {
            img.at(x, y, 0) = 10;
            img.at(x, y, 1) = 10;
            img.at(x, y, 2) = 10;
        }
    const std::string path = temp_path("opaque.png");
    og::save_png(path, img);
    og::RgbImage reloaded = og::load_png(path);
    CHECK(reloaded.pixels == img.pixels);
    CHECK(og::edge_image(reloaded).pixels == og::edge_image(img).pixels);
}

TEST_CASE("grid descriptor handles flat, inverted, and hand-sized cases") {
    og::GrayImage flat = og::GrayImage::filled(32, 32, 255);
    og::EdgeDescriptor d = og::embed_edge_image(flat, 16);
    CHECK(d.values.size() == 256);
    for (double v : d.values) CHECK(v == 0.0);
    CHECK(d.all_zero());

    og::GrayImage dark = og::GrayImage::filled(32, 32, 0);
    og::EdgeDescriptor d2 = og::embed_edge_image(dark, 16);
    for (double v : d2.values) CHECK(v == 1.0);

    og::GrayImage four = og::GrayImage::filled(4, 4, 0);
    for (std::size_t i = 0; i < 16; ++i) four.pixels[i] = static_cast<std::uint8_t>(i * 10);
    og::EdgeDescriptor d3 = og::embed_edge_image(four, 2);
    // cell means by hand: (0+10+40+50)/4, (20+30+60+70)/4, (80+90+120+130)/4, (100+110+140+150)/4
    CHECK(d3.values[0] == doctest::Approx(1.0 - 25.0 / 255.0).epsilon(1e-12));
    CHECK(d3.values[1] == doctest::Approx(1.0 - 45.0 / 255.0).epsilon(1e-12));
    CHECK(d3.values[2] == doctest::Approx(1.0 - 105.0 / 255.0).epsilon(1e-12));
    CHECK(d3.values[3] == doctest::Approx(1.0 - 125.0 / 255.0).epsilon(1e-12));
}

TEST_CASE("grid descriptor assigns remainder pixels to the last cells") {
    og::GrayImage img = og::GrayImage::filled(5, 3, 0);
    // 2x2 grid over 5x3: base cell 2x1, last column gets 3 pixels, last row 2
    for (std::size_t x = 0; x < 5; ++x) img.at(x, 2) = 255;  // bottom row bright
    og::EdgeDescriptor d = og::embed_edge_image(img, 2);
    CHECK(d.values[0] == doctest::Approx(1.0).epsilon(1e-12));              // rows 0..0, cols 0..1, all 0
    CHECK(d.values[1] == doctest::Approx(1.0).epsilon(1e-12));              // rows 0..0, cols 2..4
    CHECK(d.values[2] == doctest::Approx(1.0 - 0.5).epsilon(1e-12));        // rows 1..2, cols 0..1
    CHECK(d.values[3] == doctest::Approx(1.0 - 0.5).epsilon(1e-12));        // rows 1..2, cols 2..4

    CHECK_THROWS_AS(og::embed_edge_image(og::GrayImage::filled(10, 10, 0), 16), og::DimensionError);
}

TEST_CASE("darkening a pixel never decreases any descriptor component") {
    og::Rng rng(31);
    og::GrayImage img = og::GrayImage::filled(20, 20, 0);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    og::EdgeDescriptor base = og::embed_edge_image(img, 4);
    for (int trial = 0; trial < 50; ++trial) {
        og::GrayImage darker = img;
        const std::size_t i = rng.index(darker.pixels.size());
        darker.pixels[i] = static_cast<std::uint8_t>(rng.index(darker.pixels[i] + 1u));
        og::EdgeDescriptor d = og::embed_edge_image(darker, 4);
        for (std::size_t k = 0; k < d.values.size(); ++k) {
            CHECK(d.values[k] >= base.values[k] - 1e-15);
        }
    }
}

TEST_CASE("external embeddings ingest verbatim with dimension checks") {
    const std::string csv = temp_path("emb.csv");
    {
        std::FILE* fp = std::fopen(csv.c_str(), "wb");
        REQUIRE(fp != nullptr);
        std::fputs("item_id,v1,v2,v3\n", fp);
        std::fputs("itemA,0.5,-1.25,3\n", fp);
        std::fputs("itemZ,0,0,0\n", fp);
        std::fclose(fp);
    }
    og::ExternalEmbeddings loaded = og::load_external_embeddings(csv, 3);
    bool warn = false;
    og::EdgeDescriptor d = og::ingest_external_embedding(loaded, "itemA", 3, &warn);
    CHECK(d.values == std::vector<double>{0.5, -1.25, 3.0});
    CHECK(d.provenance == og::EdgeDescriptor::Provenance::external);
    CHECK_FALSE(warn);

    og::EdgeDescriptor z = og::ingest_external_embedding(loaded, "itemZ", 3, &warn);
    CHECK(z.all_zero());
    CHECK(warn);  // collides with the absence encoding

    CHECK_THROWS_AS(og::ingest_external_embedding(loaded, "missing", 3, nullptr), og::IoError);
    CHECK_THROWS_AS(og::load_external_embeddings(csv, 4), og::DimensionError);

    const std::string json = temp_path("emb.json");
    {
        std::FILE* fp = std::fopen(json.c_str(), "wb");
        REQUIRE(fp != nullptr);
        std::fputs(R"([{"item_id":"j1","values":[1,2]},{"item_id":"j2","values":[3,4]}])", fp);
        std::fclose(fp);
    }
    og::ExternalEmbeddings jmap = og::load_external_embeddings(json, 2);
    CHECK(jmap.at("j1") == std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(og::load_external_embeddings(json, 3), og::DimensionError);
}
