#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>

#include "og/colors.hpp"
#include "og/embed.hpp"
#include "og/errors.hpp"
#include "og/parts.hpp"

namespace og {

// The two raw features of one item. item_id is bookkeeping for datasets and
// the perturbation protocol; the model never looks at it.
struct ItemFeatures {
    std::string item_id;
    EdgeDescriptor edge;
    ColorVector colors;
};

// A slot map from parts to items. Between 1 and 8 slots are filled; absent
// slots turn into all-zero vectors at forward time.
struct Outfit {
    std::string id;
    std::array<std::optional<ItemFeatures>, kPartCount> slots;

    bool has(PartId p) const { return slots[part_index(p)].has_value(); }

    const ItemFeatures& item(PartId p) const {
        const auto& slot = slots[part_index(p)];
        if (!slot) throw InvariantError("outfit " + id + " has no item at part " + std::string(part_name(p)));
        return *slot;
    }

    std::size_t item_count() const {
        std::size_t n = 0;
        for (const auto& slot : slots) n += slot.has_value() ? 1 : 0;
        return n;
    }

    void require_valid() const {
        if (item_count() == 0) throw InvariantError("outfit " + id + " has no items; at least one part must be present");
    }
};

// An outfit with its class index: 0 = positive (fashionable), 1 = negative.
inline constexpr std::size_t kPositiveClass = 0;
inline constexpr std::size_t kNegativeClass = 1;

struct LabeledOutfit {
    Outfit outfit;
    std::size_t label = kPositiveClass;
};

}  // namespace og
