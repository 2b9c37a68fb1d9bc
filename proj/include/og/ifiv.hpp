#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "og/grader.hpp"
#include "og/outfit.hpp"

namespace og {

// Per-item influence attribution. One backward pass pulls the gradient of the
// temperature-scaled target logit back to every item's feature encodings; the
// influence of a (part, feature) pair is the element-wise product of encoding
// and gradient, summed. Negative influence marks the features that pull the
// outfit toward the other class, which is what flaw detection ranks on.

enum class FeatureKind : int { edge = 0, colors = 1 };

std::string_view feature_name(FeatureKind kind);

struct IfivEntry {
    PartId part = PartId::outer;
    FeatureKind feature = FeatureKind::edge;
    double value = 0.0;
};

struct IfivReport {
    std::size_t target_class = kNegativeClass;
    double temperature = 1.0;
    // the quantity the attribution decomposes: s_c / T
    double target_logit_over_t = 0.0;
    // one (part, feature) entry per present part, in part order with edge
    // before colors; absent parts contribute nothing
    std::vector<IfivEntry> entries;
    // per-part totals, each the in-order sum of that part's two entries
    std::array<std::optional<double>, kPartCount> part_totals;
    // entries sorted by influence ascending (most blame first); exact ties
    // keep part order, then edge before colors
    std::vector<IfivEntry> ranking;

    // in-order sum over every entry; equals target_logit_over_t exactly for
    // bias-free models without batchnorm
    double total() const;
};

IfivReport compute_ifiv(const GraderModel& model, const Outfit& outfit, std::size_t target_class,
                        double temperature);
// Uses the model's stored temperature.
IfivReport compute_ifiv(const GraderModel& model, const Outfit& outfit, std::size_t target_class);

// Shares forward/backward work across outfits. Reports match the one-outfit
// calls up to GEMM rounding (same math, different kernel tiling).
std::vector<IfivReport> compute_ifiv_batch(const GraderModel& model,
                                           const std::vector<const Outfit*>& outfits,
                                           std::size_t target_class, double temperature);

enum class FlawGranularity { pair, item };
// In item mode: winning_pair names the part of the top-ranked (part, feature)
// entry; part_total instead blames the part whose summed influence is lowest.
enum class ItemRule { winning_pair, part_total };

struct FlawPrediction {
    PartId part = PartId::outer;
    // set in pair mode only
    std::optional<FeatureKind> feature;
};

FlawPrediction detect_flaw(const IfivReport& report,
                           FlawGranularity granularity = FlawGranularity::pair,
                           ItemRule item_rule = ItemRule::winning_pair);

std::string ifiv_to_json(const IfivReport& report);
void export_ifiv_json(const IfivReport& report, const std::string& path);

// One row per (part, feature) entry: outfit_id,part,feature,ifiv,rank
void export_ifiv_csv(const std::vector<std::string>& outfit_ids,
                     const std::vector<IfivReport>& reports, const std::string& path);

}  // namespace og
