#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "og/grader.hpp"
#include "og/ifiv.hpp"
#include "og/outfit.hpp"
#include "og/parts.hpp"

namespace og {

// The three ways a base outfit gets damaged: swap in a whole donor item, swap
// only its shape descriptor, or replace its palette with random colors.
enum class ModType : int { item = 0, edge_image = 1, colors = 2 };

inline constexpr std::size_t kModTypeCount = 3;

inline constexpr std::array<ModType, kModTypeCount> kAllModTypes = {
    ModType::item,
    ModType::edge_image,
    ModType::colors,
};

inline constexpr std::size_t mod_type_index(ModType t) { return static_cast<std::size_t>(t); }

std::string_view mod_type_name(ModType t);
ModType mod_type_from_name(std::string_view name);

struct ScoredOutfit {
    Outfit outfit;
    double score = 0.0;
};

// The highest-scoring outfits of a pool: the ones the model considers most
// fashionable and therefore worth damaging.
struct BaseSelection {
    std::vector<ScoredOutfit> bases;                        // score desc, ties by id asc
    std::array<std::size_t, kPartCount> part_counts{};      // bases with the slot filled
    std::map<std::size_t, std::size_t> cardinality_counts;  // item count -> base count
};

BaseSelection select_base(const GraderModel& model, const std::vector<Outfit>& pool, std::size_t n);

// One scored replacement candidate. donor_item_id is set for the two
// donor-based types, colors for the synthetic-palette type.
struct ModCandidate {
    std::size_t index = 0;
    double score = 0.0;
    std::string donor_item_id;
    std::array<double, kColorDim> colors{};
};

// Scores candidate_count single-slot replacements of base at the given part
// without materializing any modified outfit. Donors are drawn uniformly with
// replacement from pool minus the base's own item (pool order does not
// matter; donors are sorted by id first); synthetic palettes are nine iid
// U[1, 2] draws, matching the range of the real color features.
// Deterministic in seed.
std::vector<ModCandidate> score_mod_candidates(const GraderModel& model, const Outfit& base,
                                               PartId part, ModType type,
                                               const std::vector<ItemFeatures>& pool,
                                               std::size_t candidate_count, std::uint64_t seed);

// A kept (low-scoring) modification, fully materialized.
struct ModSample {
    std::string base_id;
    PartId part = PartId::outer;
    ModType type = ModType::item;
    std::string donor_item_id;               // empty for colors mods
    std::array<double, kColorDim> colors{};  // zero for donor mods
    double score = 0.0;
    std::size_t rank = 0;             // 1-based, by ascending score
    std::size_t candidate_index = 0;  // position in the candidate stream
    std::size_t item_count = 0;       // slots filled, inherited from the base
    Outfit modified;
};

// Keeps the `keep` worst-scoring of candidate_count candidates (ties broken
// by candidate index) and materializes them as outfits.
std::vector<ModSample> make_mods(const GraderModel& model, const Outfit& base, PartId part,
                                 ModType type, const std::vector<ItemFeatures>& pool,
                                 std::size_t candidate_count, std::size_t keep,
                                 std::uint64_t seed);

// Exact means of 100/n and 100/(2n) over a population of item counts: the
// accuracy a uniform guesser would reach at item and at item-feature
// granularity.
struct ChanceRates {
    double item_pct = 0.0;
    double feature_pct = 0.0;
};

ChanceRates chance_rates(const std::map<std::size_t, std::size_t>& histogram);
ChanceRates chance_rates(const std::vector<std::size_t>& item_counts);

struct DetectionStratum {
    std::size_t total = 0;
    std::size_t correct = 0;
    double chance_item_pct = 0.0;
    double chance_feature_pct = 0.0;

    double accuracy_pct() const {
        return total == 0 ? 0.0
                          : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }
};

struct DetectionTable {
    std::array<DetectionStratum, kModTypeCount> by_type;
    std::map<std::size_t, DetectionStratum> by_count;
    std::array<DetectionStratum, kPartCount> by_part;
    DetectionStratum overall;
};

struct DetectionOptions {
    std::size_t target_class = kPositiveClass;
    // pair asks the detector for (part, feature) and grades feature-swap mods
    // on both; item coarsens every mod to the part alone.
    FlawGranularity feature_granularity = FlawGranularity::pair;
    ItemRule item_rule = ItemRule::winning_pair;
};

// Runs the influence detector over every mod. A whole-item mod counts as
// correct when the blamed part matches; a feature mod needs part and feature
// both right (unless coarsened to item granularity).
DetectionTable evaluate_detection(const GraderModel& model, const std::vector<ModSample>& mods,
                                  const DetectionOptions& options = {});

// CSV with one row per mod: base_id,part,type,score,rank.
void export_mod_ledger(const std::vector<ModSample>& mods, const std::string& path);

// Writes detection_by_type.csv, detection_by_count.csv, detection_by_part.csv
// and detection.json into dir.
void export_detection_tables(const DetectionTable& table, const std::string& dir);

struct ProtocolOptions {
    std::size_t base_count = 100;
    std::size_t candidate_count = 500;
    std::size_t mods_per_cell = 10;  // kept per (base, part, type)
    std::vector<ModType> types = {ModType::item, ModType::edge_image, ModType::colors};
    std::uint64_t seed = 0;
    DetectionOptions detection;
};

struct ProtocolResult {
    BaseSelection bases;
    std::vector<ModSample> mods;
    DetectionTable detection;
};

// The full damage-and-detect loop: pick the n best bases, damage every filled
// slot of each in every requested way, keep the most damaging candidates, then
// ask the influence ranking to locate the damage.
ProtocolResult run_protocol(const GraderModel& model, const std::vector<Outfit>& pool,
                            const std::array<std::vector<ItemFeatures>, kPartCount>& donor_pools,
                            const ProtocolOptions& options = {});

}  // namespace og
