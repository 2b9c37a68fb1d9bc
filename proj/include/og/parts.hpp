#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "og/errors.hpp"

namespace og {

// The eight outfit slots, in the fixed order used everywhere an index or a
// concatenation touches parts. Reordering this enum would silently change
// model layouts, so don't.
enum class PartId : int {
    outer = 0,
    upper,
    lower,
    full,
    feet,
    accessory0,
    accessory1,
    accessory2,
};

inline constexpr std::size_t kPartCount = 8;

inline constexpr std::array<PartId, kPartCount> kAllParts = {
    PartId::outer,      PartId::upper,      PartId::lower,      PartId::full,
    PartId::feet,       PartId::accessory0, PartId::accessory1, PartId::accessory2,
};

inline constexpr std::size_t part_index(PartId p) { return static_cast<std::size_t>(p); }

std::string_view part_name(PartId p);

// Inverse of part_name; throws UsageError on anything else.
PartId part_from_name(std::string_view name);

}  // namespace og
