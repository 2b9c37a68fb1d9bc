#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "og/image.hpp"
#include "og/outfit.hpp"
#include "og/parts.hpp"

namespace og {

// Procedural benchmark data with two planted compatibility rules:
//   (a) hue harmony: every item's dominant hue lies within a tolerance of a
//       shared base hue (circular distance), and
//   (b) texture density: every item carries the same texture class.
// A positive outfit satisfies both rules, a negative violates at least one.
// Item hues are drawn from 6 families spaced 60 degrees apart with a +-10
// degree jitter, so the default 15 degree tolerance cleanly separates
// same-family outfits from cross-family ones.

enum class TextureClass : int { plain = 0, stripes = 1, dots = 2 };
inline constexpr std::size_t kTextureClassCount = 3;

std::string_view texture_name(TextureClass t);
TextureClass texture_from_name(std::string_view name);

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t items_per_part = 36;
    double harmony_tolerance_deg = 15.0;
    // how many of the texture classes are in play (1..3); with 1, the texture
    // rule is vacuous and labels hinge on hue harmony alone
    std::size_t texture_classes = 3;
    std::size_t positive_count = 1500;
    std::size_t negative_count = 1500;
    double train_ratio = 0.70;
    double val_ratio = 0.15;
    double test_ratio = 0.15;
    std::size_t image_size = 96;

    void require_valid() const;
};

struct SynthItem {
    std::string id;
    PartId part = PartId::outer;
    std::string png;  // path relative to the dataset directory
    std::size_t family = 0;
    double hue_deg = 0.0;
    double saturation = 0.0;
    double value = 0.0;
    TextureClass texture = TextureClass::plain;
};

struct SynthOutfitRecord {
    std::string id;
    std::size_t label = kPositiveClass;
    std::string split;                          // train / val / test
    std::map<std::string, std::string> slots;   // part name -> item id
};

struct SynthManifest {
    SynthSpec spec;
    std::vector<SynthItem> items;  // sorted by id
    std::vector<SynthOutfitRecord> outfits;
};

// Rule (a): some base hue covers every given hue within the tolerance. The
// minimal covering arc is derived from the largest circular gap.
bool hue_harmony_holds(const std::vector<double>& hues_deg, double tolerance_deg);
// Both planted rules together.
bool rules_positive(const std::vector<double>& hues_deg,
                    const std::vector<TextureClass>& textures, double tolerance_deg);

// Renders item PNGs under <out_dir>/items/, writes <out_dir>/manifest.json,
// and returns the manifest. Deterministic in spec.seed, byte for byte.
SynthManifest generate_synthetic(const SynthSpec& spec, const std::string& out_dir);

void write_manifest(const SynthManifest& manifest, const std::string& path);
SynthManifest read_manifest(const std::string& path);

// Deterministic rendering of one item (filled part-specific shape, texture
// overlay in a darker shade of the same hue, white background).
RgbImage render_item(const SynthItem& item, std::size_t size);

}  // namespace og
