#include "og/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "og/errors.hpp"
#include "og/rng.hpp"

namespace og {

namespace {

constexpr std::size_t kFamilyCount = 6;
constexpr double kFamilySpacingDeg = 60.0;
constexpr double kHueJitterDeg = 10.0;
constexpr int kConstructionAttempts = 1000;

// rng sub-streams
constexpr std::uint64_t kItemStream = 1;
constexpr std::uint64_t kOutfitStream = 2;

double wrap_hue(double deg) {
    double h = std::fmod(deg, 360.0);
    if (h < 0.0) h += 360.0;
    return h;
}

struct Rgb {
    std::uint8_t r, g, b;
};

Rgb hsv_to_rgb(double hue_deg, double s, double v) {
    const double h = wrap_hue(hue_deg) / 60.0;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r = 0, g = 0, b = 0;
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
    return {byte(r), byte(g), byte(b)};
}

// shape predicates on a unit-free 96x96 design grid, scaled to `size`
struct Canvas {
    double scale;
    bool rect(double x, double y, double x0, double y0, double x1, double y1) const {
        return x >= x0 * scale && x < x1 * scale && y >= y0 * scale && y < y1 * scale;
    }
    bool disk(double x, double y, double cx, double cy, double r) const {
        const double dx = x - cx * scale, dy = y - cy * scale;
        return dx * dx + dy * dy <= r * scale * r * scale;
    }
    bool ellipse(double x, double y, double cx, double cy, double rx, double ry) const {
        const double dx = (x - cx * scale) / (rx * scale), dy = (y - cy * scale) / (ry * scale);
        return dx * dx + dy * dy <= 1.0;
    }
    // trapezoid symmetric about the vertical center line
    bool trapezoid(double x, double y, double y0, double y1, double top_half, double bot_half) const {
        if (y < y0 * scale || y >= y1 * scale) return false;
        const double t = (y - y0 * scale) / ((y1 - y0) * scale);
        const double half = (top_half + (bot_half - top_half) * t) * scale;
        return std::abs(x - 48.0 * scale) <= half;
    }
};

bool part_shape(PartId part, const Canvas& c, double x, double y) {
    switch (part) {
        case PartId::outer:  // open coat: two front panels and shoulders
            return (c.rect(x, y, 14, 12, 44, 86) || c.rect(x, y, 52, 12, 82, 86) ||
                    c.rect(x, y, 14, 12, 82, 28));
        case PartId::upper:  // tee: torso plus sleeve band
            return c.rect(x, y, 30, 26, 66, 80) || c.rect(x, y, 12, 26, 84, 44);
        case PartId::lower:  // pants: waist and two legs
            return (c.rect(x, y, 28, 10, 68, 26) || c.rect(x, y, 28, 26, 44, 86) ||
                    c.rect(x, y, 52, 26, 68, 86));
        case PartId::full:  // dress flaring toward the hem
            return c.trapezoid(x, y, 10, 86, 8, 32);
        case PartId::feet:  // two shoes
            return c.ellipse(x, y, 30, 70, 16, 10) || c.ellipse(x, y, 66, 70, 16, 10);
        case PartId::accessory0:  // round bag
            return c.disk(x, y, 48, 52, 26);
        case PartId::accessory1:  // belt
            return c.rect(x, y, 12, 40, 84, 56);
        case PartId::accessory2:  // pointed hat
            return c.trapezoid(x, y, 14, 78, 2, 32);
    }
    return false;
}

bool texture_accent(TextureClass texture, std::size_t x, std::size_t y, std::size_t size) {
    // the 96-pixel design pitch, kept proportional for other sizes
    const std::size_t pitch = std::max<std::size_t>(2, size / 12);
    switch (texture) {
        case TextureClass::plain:
            return false;
        case TextureClass::stripes:
            return (y / (pitch / 2)) % 2 == 1;
        case TextureClass::dots: {
            const std::size_t r = std::max<std::size_t>(1, pitch / 4);
            const std::size_t cx = x % pitch, cy = y % pitch;
            const double dx = static_cast<double>(cx) - static_cast<double>(pitch) / 2.0;
            const double dy = static_cast<double>(cy) - static_cast<double>(pitch) / 2.0;
            return dx * dx + dy * dy <= static_cast<double>(r * r);
        }
    }
    return false;
}

std::string two_digits(std::size_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02zu", v);
    return buf;
}

std::string four_digits(std::size_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", v);
    return buf;
}

struct ItemTable {
    std::vector<SynthItem> items;  // all parts, sorted by id later
    // indices into `items` per (part, family, texture)
    std::vector<std::size_t> by_part[kPartCount];

    std::vector<std::size_t> matching(std::size_t part, long family, long texture) const {
        std::vector<std::size_t> out;
        for (std::size_t idx : by_part[part]) {
            if (family >= 0 && items[idx].family != static_cast<std::size_t>(family)) continue;
            if (texture >= 0 && items[idx].texture != static_cast<TextureClass>(texture)) continue;
            out.push_back(idx);
        }
        return out;
    }
};

ItemTable build_items(const SynthSpec& spec) {
    ItemTable table;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        Rng rng(mix_seed(spec.seed, kItemStream, p));
        for (std::size_t j = 0; j < spec.items_per_part; ++j) {
            SynthItem item;
            item.part = kAllParts[p];
            item.id = std::string(part_name(item.part)) + "-" + two_digits(j);
            item.png = "items/" + item.id + ".png";
            item.family = j % kFamilyCount;
            item.texture = static_cast<TextureClass>((j / kFamilyCount) % spec.texture_classes);
            item.hue_deg = wrap_hue(static_cast<double>(item.family) * kFamilySpacingDeg +
                                    rng.uniform(-kHueJitterDeg, kHueJitterDeg));
            item.saturation = rng.uniform(0.55, 0.95);
            item.value = rng.uniform(0.60, 0.90);
            table.by_part[p].push_back(table.items.size());
            table.items.push_back(std::move(item));
        }
    }
    return table;
}

struct Draft {
    std::vector<std::size_t> parts;        // part indices, ascending
    std::vector<std::size_t> item_indices; // into ItemTable::items, aligned with parts
};

bool draft_positive(const SynthSpec& spec, const ItemTable& table, Rng& rng, Draft& out) {
    const bool hue_rule_vacuous = spec.harmony_tolerance_deg >= 180.0;
    const std::size_t n = 3 + rng.index(6);
    std::vector<std::size_t> part_order(kPartCount);
    for (std::size_t i = 0; i < kPartCount; ++i) part_order[i] = i;
    rng.shuffle(part_order);
    part_order.resize(n);
    std::sort(part_order.begin(), part_order.end());

    const std::size_t family = rng.index(kFamilyCount);
    const long texture = static_cast<long>(rng.index(spec.texture_classes));

    Draft draft;
    draft.parts = part_order;
    for (std::size_t p : part_order) {
        const long want_family =
            hue_rule_vacuous ? static_cast<long>(rng.index(kFamilyCount)) : static_cast<long>(family);
        std::vector<std::size_t> candidates = table.matching(p, want_family, texture);
        if (candidates.empty() && hue_rule_vacuous) {
            candidates = table.matching(p, -1, texture);
        }
        if (candidates.empty()) return false;
        draft.item_indices.push_back(candidates[rng.index(candidates.size())]);
    }
    out = std::move(draft);
    return true;
}

bool rules_hold(const SynthSpec& spec, const ItemTable& table, const Draft& draft) {
    std::vector<double> hues;
    std::vector<TextureClass> textures;
    for (std::size_t idx : draft.item_indices) {
        hues.push_back(table.items[idx].hue_deg);
        textures.push_back(table.items[idx].texture);
    }
    return rules_positive(hues, textures, spec.harmony_tolerance_deg);
}

bool corrupt_draft(const SynthSpec& spec, const ItemTable& table, Rng& rng, Draft& draft) {
    const bool can_break_hue = spec.harmony_tolerance_deg < 180.0;
    const bool can_break_texture = spec.texture_classes >= 2;
    if (!can_break_hue && !can_break_texture) return false;

    std::size_t mode;  // 0 = hue, 1 = texture, 2 = both
    if (can_break_hue && can_break_texture) mode = rng.index(3);
    else mode = can_break_hue ? 0 : 1;

    const std::size_t victims = 1 + rng.index(std::min<std::size_t>(2, draft.parts.size()));
    std::vector<std::size_t> order(draft.parts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    for (std::size_t v = 0; v < victims; ++v) {
        const std::size_t slot = order[v];
        const SynthItem& current = table.items[draft.item_indices[slot]];
        long family = -1, texture = -1;
        if (mode == 0 || mode == 2) {
            // any different family; far families violate even loose tolerances
            family = static_cast<long>(
                (current.family + 1 + rng.index(kFamilyCount - 1)) % kFamilyCount);
        }
        if (mode == 1 || mode == 2) {
            texture = static_cast<long>(
                (static_cast<std::size_t>(current.texture) + 1 + rng.index(spec.texture_classes - 1)) %
                spec.texture_classes);
        } else {
            texture = static_cast<long>(current.texture);
        }
        std::vector<std::size_t> candidates = table.matching(draft.parts[slot], family, texture);
        if (candidates.empty()) return false;
        draft.item_indices[slot] = candidates[rng.index(candidates.size())];
    }
    return true;
}

nlohmann::json spec_to_json(const SynthSpec& spec) {
    return {{"seed", spec.seed},
            {"items_per_part", spec.items_per_part},
            {"harmony_tolerance_deg", spec.harmony_tolerance_deg},
            {"texture_classes", spec.texture_classes},
            {"positive_count", spec.positive_count},
            {"negative_count", spec.negative_count},
            {"ratios", {spec.train_ratio, spec.val_ratio, spec.test_ratio}},
            {"image_size", spec.image_size}};
}

SynthSpec spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.items_per_part = j.at("items_per_part").get<std::size_t>();
    spec.harmony_tolerance_deg = j.at("harmony_tolerance_deg").get<double>();
    spec.texture_classes = j.at("texture_classes").get<std::size_t>();
    spec.positive_count = j.at("positive_count").get<std::size_t>();
    spec.negative_count = j.at("negative_count").get<std::size_t>();
    spec.train_ratio = j.at("ratios").at(0).get<double>();
    spec.val_ratio = j.at("ratios").at(1).get<double>();
    spec.test_ratio = j.at("ratios").at(2).get<double>();
    spec.image_size = j.at("image_size").get<std::size_t>();
    return spec;
}

}  // namespace

std::string_view texture_name(TextureClass t) {
    switch (t) {
        case TextureClass::plain: return "plain";
        case TextureClass::stripes: return "stripes";
        case TextureClass::dots: return "dots";
    }
    throw UsageError("unknown texture class");
}

TextureClass texture_from_name(std::string_view name) {
    if (name == "plain") return TextureClass::plain;
    if (name == "stripes") return TextureClass::stripes;
    if (name == "dots") return TextureClass::dots;
    throw UsageError("unknown texture class '" + std::string(name) + "'");
}

void SynthSpec::require_valid() const {
    if (items_per_part < 2) {
        throw UsageError("need at least 2 items per part so replacements have alternatives");
    }
    if (texture_classes < 1 || texture_classes > kTextureClassCount) {
        throw UsageError("texture_classes must be between 1 and 3");
    }
    if (!(harmony_tolerance_deg >= 0.0)) {
        throw UsageError("harmony tolerance must be non-negative");
    }
    if (positive_count == 0 || negative_count == 0) {
        throw UsageError("need at least one outfit of each label");
    }
    const double sum = train_ratio + val_ratio + test_ratio;
    if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 || std::abs(sum - 1.0) > 1e-9) {
        throw UsageError("split ratios must be non-negative and sum to 1");
    }
    if (image_size < 32) {
        throw UsageError("image size must be at least 32 pixels");
    }
}

bool hue_harmony_holds(const std::vector<double>& hues_deg, double tolerance_deg) {
    if (hues_deg.empty()) return true;
    if (tolerance_deg >= 180.0) return true;
    std::vector<double> hues;
    hues.reserve(hues_deg.size());
    for (double h : hues_deg) hues.push_back(wrap_hue(h));
    std::sort(hues.begin(), hues.end());
    // the minimal arc covering all hues is the complement of the largest gap
    double largest_gap = 360.0 - hues.back() + hues.front();
    for (std::size_t i = 1; i < hues.size(); ++i) {
        largest_gap = std::max(largest_gap, hues[i] - hues[i - 1]);
    }
    return 360.0 - largest_gap <= 2.0 * tolerance_deg;
}

bool rules_positive(const std::vector<double>& hues_deg,
                    const std::vector<TextureClass>& textures, double tolerance_deg) {
    if (!hue_harmony_holds(hues_deg, tolerance_deg)) return false;
    for (std::size_t i = 1; i < textures.size(); ++i) {
        if (textures[i] != textures[0]) return false;
    }
    return true;
}

RgbImage render_item(const SynthItem& item, std::size_t size) {
    RgbImage img = RgbImage::filled(size, size, 255, 255, 255);
    const Rgb base = hsv_to_rgb(item.hue_deg, item.saturation, item.value);
    const Rgb accent = hsv_to_rgb(item.hue_deg, item.saturation, item.value * 0.55);
    Canvas canvas{static_cast<double>(size) / 96.0};
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            if (!part_shape(item.part, canvas, static_cast<double>(x) + 0.5,
                            static_cast<double>(y) + 0.5)) {
                continue;
            }
            const Rgb& c = texture_accent(item.texture, x, y, size) ? accent : base;
            img.at(x, y, 0) = c.r;
            img.at(x, y, 1) = c.g;
            img.at(x, y, 2) = c.b;
        }
    }
    return img;
}

SynthManifest generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
    spec.require_valid();

    SynthManifest manifest;
    manifest.spec = spec;

    ItemTable table = build_items(spec);

    Rng rng(mix_seed(spec.seed, kOutfitStream));
    const std::size_t total = spec.positive_count + spec.negative_count;
    for (std::size_t k = 0; k < total; ++k) {
        const bool want_positive = k < spec.positive_count;
        Draft draft;
        bool ok = false;
        for (int attempt = 0; attempt < kConstructionAttempts && !ok; ++attempt) {
            if (!draft_positive(spec, table, rng, draft)) continue;
            if (want_positive) {
                ok = rules_hold(spec, table, draft);
            } else {
                ok = corrupt_draft(spec, table, rng, draft) && !rules_hold(spec, table, draft);
            }
        }
        if (!ok) {
            throw UsageError(std::string("spec cannot produce a ") +
                             (want_positive ? "positive" : "negative") +
                             " outfit; adjust tolerance, texture classes, or item counts");
        }
        SynthOutfitRecord record;
        record.label = want_positive ? kPositiveClass : kNegativeClass;
        const std::size_t ordinal = want_positive ? k : k - spec.positive_count;
        record.id = (want_positive ? "pos-" : "neg-") + four_digits(ordinal);
        // split by position within the label block: construction is i.i.d.,
        // so slicing is as good as shuffling and keeps both classes in every
        // split at the requested ratios
        const std::size_t block = want_positive ? spec.positive_count : spec.negative_count;
        const std::size_t n_train = static_cast<std::size_t>(spec.train_ratio * block);
        const std::size_t n_val = static_cast<std::size_t>(spec.val_ratio * block);
        if (ordinal < n_train) record.split = "train";
        else if (ordinal < n_train + n_val) record.split = "val";
        else record.split = "test";
        for (std::size_t i = 0; i < draft.parts.size(); ++i) {
            const SynthItem& item = table.items[draft.item_indices[i]];
            record.slots[std::string(part_name(kAllParts[draft.parts[i]]))] = item.id;
        }
        manifest.outfits.push_back(std::move(record));
    }

    manifest.items = table.items;
    std::sort(manifest.items.begin(), manifest.items.end(),
              [](const SynthItem& a, const SynthItem& b) { return a.id < b.id; });

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "items", ec);
    if (ec) throw IoError("cannot create dataset directory " + out_dir + ": " + ec.message());

    for (const SynthItem& item : manifest.items) {
        save_png((fs::path(out_dir) / item.png).string(), render_item(item, spec.image_size));
    }
    write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

void write_manifest(const SynthManifest& manifest, const std::string& path) {
    nlohmann::json doc;
    doc["spec"] = spec_to_json(manifest.spec);
    nlohmann::json items = nlohmann::json::object();
    for (const SynthItem& item : manifest.items) {
        items[item.id] = {{"part", std::string(part_name(item.part))},
                          {"png", item.png},
                          {"family", item.family},
                          {"hue_deg", item.hue_deg},
                          {"saturation", item.saturation},
                          {"value", item.value},
                          {"texture", std::string(texture_name(item.texture))}};
    }
    doc["items"] = std::move(items);
    nlohmann::json outfits = nlohmann::json::array();
    for (const SynthOutfitRecord& record : manifest.outfits) {
        nlohmann::json slots = nlohmann::json::object();
        for (const auto& [part, item_id] : record.slots) slots[part] = item_id;
        outfits.push_back({{"id", record.id},
                           {"label", record.label == kPositiveClass ? "pos" : "neg"},
                           {"split", record.split},
                           {"slots", std::move(slots)}});
    }
    doc["outfits"] = std::move(outfits);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest to " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("failed while writing manifest to " + path);
}

SynthManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("manifest " + path + " is not valid JSON: " + e.what());
    }
    SynthManifest manifest;
    try {
        manifest.spec = spec_from_json(doc.at("spec"));
        for (const auto& [id, j] : doc.at("items").items()) {
            SynthItem item;
            item.id = id;
            item.part = part_from_name(j.at("part").get<std::string>());
            item.png = j.at("png").get<std::string>();
            item.family = j.at("family").get<std::size_t>();
            item.hue_deg = j.at("hue_deg").get<double>();
            item.saturation = j.at("saturation").get<double>();
            item.value = j.at("value").get<double>();
            item.texture = texture_from_name(j.at("texture").get<std::string>());
            manifest.items.push_back(std::move(item));
        }
        for (const auto& j : doc.at("outfits")) {
            SynthOutfitRecord record;
            record.id = j.at("id").get<std::string>();
            const std::string label = j.at("label").get<std::string>();
            if (label != "pos" && label != "neg") {
                throw IoError("manifest outfit " + record.id + " has unknown label " + label);
            }
            record.label = label == "pos" ? kPositiveClass : kNegativeClass;
            record.split = j.at("split").get<std::string>();
            for (const auto& [part, item_id] : j.at("slots").items()) {
                record.slots[part] = item_id.get<std::string>();
            }
            manifest.outfits.push_back(std::move(record));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("manifest " + path + " is missing fields: " + e.what());
    }
    return manifest;
}

}  // namespace og
