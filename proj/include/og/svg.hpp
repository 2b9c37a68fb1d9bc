#pragma once

#include <string>

#include "og/calibration.hpp"
#include "og/ifiv.hpp"

namespace og {

// Self-contained SVG documents (no external fonts or scripts), rendered with
// fixed canvas sizes and printf-formatted numbers so the same report always
// produces the same bytes.

// Bars of empirical accuracy per confidence bin against the ideal diagonal.
std::string reliability_svg(const CalibrationReport& report);

// Side-by-side positive/negative counts per score bin.
std::string score_histogram_svg(const CalibrationReport& report);

// One horizontal bar per (part, feature) influence, in ranking order, so the
// most blamed pair sits on top.
std::string ifiv_bars_svg(const IfivReport& report);

}  // namespace og
