#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "og/grader.hpp"
#include "og/outfit.hpp"
#include "og/synth.hpp"

namespace og {

// A generated dataset pulled back into memory: every item PNG pushed through
// the feature pipeline once, then assembled into labeled outfits per split.
struct SynthDataset {
    SynthManifest manifest;
    std::unordered_map<std::string, ItemFeatures> features;  // by item id
    std::vector<LabeledOutfit> train, val, test;

    const std::vector<LabeledOutfit>& split(const std::string& name) const;
};

// Features of one rendered item image: edge map summarized on the grid, and
// the dominant palette. The palette seed is derived from the item id so
// re-extraction is reproducible item by item.
ItemFeatures extract_item_features(const RgbImage& img, const std::string& item_id,
                                   const PipelineConstants& pipeline);

SynthDataset load_dataset(const std::string& dir, const PipelineConstants& pipeline = {});

// Distinct items appearing in the given outfits, per part, sorted by item id.
// This is the replacement pool the perturbation protocol draws from.
std::array<std::vector<ItemFeatures>, kPartCount> part_pools(
    const std::vector<LabeledOutfit>& outfits);

}  // namespace og
