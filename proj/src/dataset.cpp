#include "og/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "og/colors.hpp"
#include "og/edges.hpp"
#include "og/embed.hpp"
#include "og/errors.hpp"
#include "og/rng.hpp"

namespace og {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

constexpr std::uint64_t kPaletteStream = 0x70616c65;  // per-item palette seeds

}  // namespace

const std::vector<LabeledOutfit>& SynthDataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw UsageError("unknown split '" + name + "'");
}

ItemFeatures extract_item_features(const RgbImage& img, const std::string& item_id,
                                   const PipelineConstants& pipeline) {
    ItemFeatures f;
    f.item_id = item_id;

    CannyParams canny;
    canny.sigma = pipeline.canny_sigma;
    canny.low = pipeline.canny_low;
    canny.high = pipeline.canny_high;
    f.edge = embed_edge_image(edge_image(img, canny), pipeline.grid);

    const ForegroundMask mask = background_mask(img, pipeline.whiteness_threshold);
    f.colors = extract_colors(img, mask, mix_seed(kPaletteStream, fnv1a(item_id)));
    return f;
}

SynthDataset load_dataset(const std::string& dir, const PipelineConstants& pipeline) {
    namespace fs = std::filesystem;
    SynthDataset dataset;
    dataset.manifest = read_manifest((fs::path(dir) / "manifest.json").string());

    for (const SynthItem& item : dataset.manifest.items) {
        const RgbImage img = load_png((fs::path(dir) / item.png).string());
        dataset.features.emplace(item.id, extract_item_features(img, item.id, pipeline));
    }

    for (const SynthOutfitRecord& record : dataset.manifest.outfits) {
        LabeledOutfit labeled;
        labeled.outfit.id = record.id;
        labeled.label = record.label;
        for (const auto& [part, item_id] : record.slots) {
            auto it = dataset.features.find(item_id);
            if (it == dataset.features.end()) {
                throw IoError("outfit " + record.id + " references unknown item " + item_id);
            }
            labeled.outfit.slots[part_index(part_from_name(part))] = it->second;
        }
        if (record.split == "train") dataset.train.push_back(std::move(labeled));
        else if (record.split == "val") dataset.val.push_back(std::move(labeled));
        else if (record.split == "test") dataset.test.push_back(std::move(labeled));
        else throw IoError("outfit " + record.id + " has unknown split " + record.split);
    }
    return dataset;
}

std::array<std::vector<ItemFeatures>, kPartCount> part_pools(
    const std::vector<LabeledOutfit>& outfits) {
    std::array<std::map<std::string, const ItemFeatures*>, kPartCount> seen;
    for (const LabeledOutfit& labeled : outfits) {
        for (std::size_t p = 0; p < kPartCount; ++p) {
            if (!labeled.outfit.slots[p]) continue;
            const ItemFeatures& item = *labeled.outfit.slots[p];
            seen[p].emplace(item.item_id, &item);
        }
    }
    std::array<std::vector<ItemFeatures>, kPartCount> pools;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        for (const auto& [id, item] : seen[p]) pools[p].push_back(*item);
    }
    return pools;
}

}  // namespace og
