#include "og/protocol.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "og/errors.hpp"
#include "og/rng.hpp"
#include "og/softmax.hpp"

namespace og {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::array<std::string_view, kModTypeCount> kModTypeNames = {
    "item",
    "edge_image",
    "colors",
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void relu_rows(Tensor& t) {
    for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

// Replacing one slot only moves one item code, and the outfit encoder is
// linear up to its batchnorm/relu, so z' = z - phi_p Wp^T + phi'_p Wp^T with
// Wp the encoder's column slice for that slot. A whole candidate set is then
// two matrix products instead of one full forward pass per candidate.
struct SlotScorer {
    const GraderModel& model;
    std::array<DenseLayer, kPartCount> h_block;  // [h_width, code] slices of h

    explicit SlotScorer(const GraderModel& m) : model(m) {
        const std::size_t code = m.config.item_code_dim();
        const std::size_t width = m.h.w.shape[0];
        for (std::size_t p = 0; p < kPartCount; ++p) {
            h_block[p].w = Tensor::zeros({width, code});
            h_block[p].b = Tensor::zeros({width});
            for (std::size_t r = 0; r < width; ++r) {
                for (std::size_t c = 0; c < code; ++c) {
                    h_block[p].w.at(r, c) = m.h.w.at(r, p * code + c);
                }
            }
        }
    }

    struct BaseState {
        std::array<std::optional<Tensor>, kPartCount> edge_enc, colors_enc;  // [1, dim]
        std::array<std::optional<Tensor>, kPartCount> phi;                   // [1, code]
        std::array<std::optional<Tensor>, kPartCount> u;  // phi_p Wp^T, [1, h_width]
        Tensor z;                                         // pre-activation outfit code
    };

    BaseState prepare(const Outfit& base) const {
        EncodingSet enc = encode_features(model, base);
        const std::size_t code = model.config.item_code_dim();
        const std::size_t in = model.config.item_input_dim();
        BaseState bs;
        Tensor cat = Tensor::zeros({1, kPartCount * code});
        for (std::size_t p = 0; p < kPartCount; ++p) {
            if (!enc.edge[p]) continue;
            Tensor e = std::move(*enc.edge[p]);
            Tensor c = std::move(*enc.colors[p]);
            e.shape = {1, e.size()};
            c.shape = {1, c.size()};
            Tensor x = Tensor::zeros({1, in});
            for (std::size_t i = 0; i < e.size(); ++i) x.at(0, i) = e.at(0, i);
            for (std::size_t i = 0; i < c.size(); ++i) x.at(0, e.size() + i) = c.at(0, i);
            Tensor phi = stack_rows(std::move(x), model.g[p]);
            for (std::size_t i = 0; i < code; ++i) cat.at(0, p * code + i) = phi.at(0, i);
            bs.u[p] = dense_rows(phi, h_block[p]);
            bs.edge_enc[p] = std::move(e);
            bs.colors_enc[p] = std::move(c);
            bs.phi[p] = std::move(phi);
        }
        bs.z = dense_rows(cat, model.h);
        return bs;
    }

    // Scores one replacement item code per row of phi_rows, slotted at part p.
    std::vector<double> scores_for(const BaseState& bs, std::size_t p,
                                   const Tensor& phi_rows) const {
        if (!bs.u[p]) {
            throw InvariantError("cannot rescore part " + std::string(part_name(kAllParts[p])) +
                                 ": the base outfit leaves it empty");
        }
        const std::size_t rows = phi_rows.shape[0];
        const std::size_t width = model.h.w.shape[0];
        Tensor v = dense_rows(phi_rows, h_block[p]);
        const Tensor& u = *bs.u[p];
        Tensor z = Tensor::zeros({rows, width});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < width; ++i) {
                z.at(r, i) = bs.z.at(0, i) - u.at(0, i) + v.at(r, i);
            }
        }
        if (model.config.batchnorm) {
            std::vector<double> scale(width), shift(width);
            for (std::size_t i = 0; i < width; ++i) {
                scale[i] = model.h_bn.gamma[i] / std::sqrt(model.h_bn.running_var[i] + kBnEps);
                shift[i] = model.h_bn.beta[i] - model.h_bn.running_mean[i] * scale[i];
            }
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t i = 0; i < width; ++i) {
                    z.at(r, i) = z.at(r, i) * scale[i] + shift[i];
                }
            }
        }
        relu_rows(z);
        Tensor logits = dense_rows(z, model.head);
        std::vector<double> out(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            Tensor row = Tensor::vector({logits.at(r, 0), logits.at(r, 1)});
            Tensor probs = softmax_probability(row, model.temperature);
            out[r] = 100.0 * probs[kPositiveClass];
        }
        return out;
    }
};

// Donor order must not depend on how the caller assembled the pool, so sort
// by id; the base's own item never donates to itself.
std::vector<const ItemFeatures*> donor_list(const std::vector<ItemFeatures>& pool,
                                            const std::string& skip_id) {
    std::vector<const ItemFeatures*> donors;
    donors.reserve(pool.size());
    for (const ItemFeatures& f : pool) {
        if (f.item_id != skip_id) donors.push_back(&f);
    }
    std::stable_sort(donors.begin(), donors.end(),
                     [](const ItemFeatures* a, const ItemFeatures* b) {
                         return a->item_id < b->item_id;
                     });
    return donors;
}

Tensor donor_feature_rows(const std::vector<const ItemFeatures*>& donors, bool edge) {
    const std::size_t dim = edge ? kEdgeDim : kColorDim;
    Tensor rows = Tensor::zeros({donors.size(), dim});
    for (std::size_t r = 0; r < donors.size(); ++r) {
        if (edge) {
            if (donors[r]->edge.values.size() != kEdgeDim) {
                throw DimensionError("donor item " + donors[r]->item_id + " has an edge descriptor of " +
                                     std::to_string(donors[r]->edge.values.size()) + " values, expected " +
                                     std::to_string(kEdgeDim));
            }
            for (std::size_t i = 0; i < dim; ++i) rows.at(r, i) = donors[r]->edge.values[i];
        } else {
            const std::vector<double> v = donors[r]->colors.as_vector();
            for (std::size_t i = 0; i < dim; ++i) rows.at(r, i) = v[i];
        }
    }
    return rows;
}

// Concatenates an edge-encoding block with a colors-encoding block row by
// row; either side may be a single row broadcast across the other.
Tensor concat_enc_rows(const Tensor& e, const Tensor& c) {
    const std::size_t rows = std::max(e.shape[0], c.shape[0]);
    Tensor x = Tensor::zeros({rows, e.shape[1] + c.shape[1]});
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t er = e.shape[0] == 1 ? 0 : r;
        const std::size_t cr = c.shape[0] == 1 ? 0 : r;
        for (std::size_t i = 0; i < e.shape[1]; ++i) x.at(r, i) = e.at(er, i);
        for (std::size_t i = 0; i < c.shape[1]; ++i) x.at(r, e.shape[1] + i) = c.at(cr, i);
    }
    return x;
}

std::vector<ModCandidate> score_cell(const SlotScorer& scorer, const SlotScorer::BaseState& bs,
                                     const Outfit& base, PartId part, ModType type,
                                     const std::vector<ItemFeatures>& pool,
                                     std::size_t candidate_count, std::uint64_t seed) {
    const std::size_t p = part_index(part);
    if (!base.has(part)) {
        throw UsageError("base outfit " + base.id + " has no item at part " +
                         std::string(part_name(part)));
    }
    if (candidate_count == 0) throw UsageError("candidate count must be positive");

    const GraderModel& model = scorer.model;
    Rng rng(seed);
    std::vector<ModCandidate> out(candidate_count);
    for (std::size_t k = 0; k < candidate_count; ++k) out[k].index = k;

    if (type == ModType::colors) {
        Tensor draws = Tensor::zeros({candidate_count, kColorDim});
        for (std::size_t k = 0; k < candidate_count; ++k) {
            for (std::size_t f = 0; f < kColorDim; ++f) draws.at(k, f) = rng.uniform(1.0, 2.0);
        }
        Tensor c_enc = stack_rows(draws, model.k_colors[p]);
        Tensor phi_rows = stack_rows(concat_enc_rows(*bs.edge_enc[p], c_enc), model.g[p]);
        std::vector<double> scores = scorer.scores_for(bs, p, phi_rows);
        for (std::size_t k = 0; k < candidate_count; ++k) {
            for (std::size_t f = 0; f < kColorDim; ++f) out[k].colors[f] = draws.at(k, f);
            out[k].score = scores[k];
        }
        return out;
    }

    std::vector<const ItemFeatures*> donors = donor_list(pool, base.item(part).item_id);
    if (donors.empty()) {
        throw UsageError("donor pool exhausted for part " + std::string(part_name(part)) +
                         ": nothing to swap in");
    }
    std::vector<std::size_t> picks(candidate_count);
    for (std::size_t k = 0; k < candidate_count; ++k) picks[k] = rng.index(donors.size());

    // each distinct donor goes through the encoders once
    std::vector<std::size_t> distinct = picks;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<const ItemFeatures*> chosen(distinct.size());
    for (std::size_t r = 0; r < distinct.size(); ++r) chosen[r] = donors[distinct[r]];

    Tensor e_enc = stack_rows(donor_feature_rows(chosen, true), model.k_edge[p]);
    Tensor phi_rows =
        type == ModType::item
            ? stack_rows(concat_enc_rows(e_enc, stack_rows(donor_feature_rows(chosen, false),
                                                           model.k_colors[p])),
                         model.g[p])
            : stack_rows(concat_enc_rows(e_enc, *bs.colors_enc[p]), model.g[p]);
    std::vector<double> scores = scorer.scores_for(bs, p, phi_rows);

    for (std::size_t k = 0; k < candidate_count; ++k) {
        const std::size_t row = static_cast<std::size_t>(
            std::lower_bound(distinct.begin(), distinct.end(), picks[k]) - distinct.begin());
        out[k].score = scores[row];
        out[k].donor_item_id = donors[picks[k]]->item_id;
    }
    return out;
}

std::vector<ModSample> mods_for_cell(const SlotScorer& scorer, const SlotScorer::BaseState& bs,
                                     const Outfit& base, PartId part, ModType type,
                                     const std::vector<ItemFeatures>& pool,
                                     std::size_t candidate_count, std::size_t keep,
                                     std::uint64_t seed) {
    if (keep == 0) throw UsageError("must keep at least one mod per cell");
    std::vector<ModCandidate> cands =
        score_cell(scorer, bs, base, part, type, pool, candidate_count, seed);
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (cands[a].score != cands[b].score) return cands[a].score < cands[b].score;
        return a < b;
    });
    keep = std::min(keep, cands.size());

    std::vector<ModSample> mods;
    mods.reserve(keep);
    for (std::size_t r = 0; r < keep; ++r) {
        const ModCandidate& c = cands[order[r]];
        ModSample m;
        m.base_id = base.id;
        m.part = part;
        m.type = type;
        m.donor_item_id = c.donor_item_id;
        m.colors = c.colors;
        m.score = c.score;
        m.rank = r + 1;
        m.candidate_index = c.index;
        m.modified = base;
        m.modified.id = base.id + "-" + std::string(part_name(part)) + "-" +
                        std::string(mod_type_name(type)) + "-r" + std::to_string(m.rank);
        ItemFeatures& slot = *m.modified.slots[part_index(part)];
        if (type == ModType::colors) {
            for (std::size_t f = 0; f < kColorDim; ++f) slot.colors.values[f] = c.colors[f];
        } else {
            const ItemFeatures* donor = nullptr;
            for (const ItemFeatures& f : pool) {
                if (f.item_id == c.donor_item_id) {
                    donor = &f;
                    break;
                }
            }
            if (!donor) throw InvariantError("donor " + c.donor_item_id + " vanished from its pool");
            if (type == ModType::item) {
                slot = *donor;
            } else {
                slot.edge = donor->edge;  // shape changes, palette and identity stay
            }
        }
        m.item_count = m.modified.item_count();
        mods.push_back(std::move(m));
    }
    return mods;
}

struct StratumAccum {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::map<std::size_t, std::size_t> hist;

    void add(std::size_t item_count, bool ok) {
        ++total;
        correct += ok ? 1 : 0;
        ++hist[item_count];
    }

    DetectionStratum finish() const {
        DetectionStratum s;
        s.total = total;
        s.correct = correct;
        const ChanceRates cr = chance_rates(hist);
        s.chance_item_pct = cr.item_pct;
        s.chance_feature_pct = cr.feature_pct;
        return s;
    }
};

bool graded_correct(const ModSample& m, const IfivReport& report, const DetectionOptions& options) {
    // a whole-item swap has no single flawed feature, so it is always graded
    // at item granularity
    if (m.type == ModType::item || options.feature_granularity == FlawGranularity::item) {
        const FlawPrediction pred = detect_flaw(report, FlawGranularity::item, options.item_rule);
        return pred.part == m.part;
    }
    const FlawPrediction pred = detect_flaw(report, FlawGranularity::pair, options.item_rule);
    const FeatureKind expected =
        m.type == ModType::edge_image ? FeatureKind::edge : FeatureKind::colors;
    return pred.part == m.part && pred.feature.has_value() && *pred.feature == expected;
}

json stratum_json(const DetectionStratum& s) {
    return json{{"total", s.total},
                {"correct", s.correct},
                {"accuracy_pct", s.accuracy_pct()},
                {"chance_item_pct", s.chance_item_pct},
                {"chance_feature_pct", s.chance_feature_pct}};
}

void write_stratum_csv(std::ofstream& out, const std::string& key, const DetectionStratum& s) {
    out << key << ',' << s.total << ',' << s.correct << ',' << fmt_double(s.accuracy_pct()) << ','
        << fmt_double(s.chance_item_pct) << ',' << fmt_double(s.chance_feature_pct) << '\n';
}

}  // namespace

std::string_view mod_type_name(ModType t) {
    const std::size_t i = mod_type_index(t);
    if (i >= kModTypeCount) throw UsageError("unknown mod type index " + std::to_string(i));
    return kModTypeNames[i];
}

ModType mod_type_from_name(std::string_view name) {
    if (name == "edge") return ModType::edge_image;  // command-line shorthand
    for (std::size_t i = 0; i < kModTypeCount; ++i) {
        if (kModTypeNames[i] == name) return kAllModTypes[i];
    }
    throw UsageError("unknown mod type \"" + std::string(name) +
                     "\"; expected item, edge_image or colors");
}

BaseSelection select_base(const GraderModel& model, const std::vector<Outfit>& pool,
                          std::size_t n) {
    if (n == 0) throw UsageError("base count must be positive");
    if (n > pool.size()) {
        throw UsageError("asked for " + std::to_string(n) + " bases from a pool of " +
                         std::to_string(pool.size()) + " outfits");
    }
    std::vector<const Outfit*> ptrs;
    ptrs.reserve(pool.size());
    for (const Outfit& o : pool) ptrs.push_back(&o);
    const std::vector<double> scores = score_batch(model, ptrs);

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return pool[a].id < pool[b].id;
    });

    BaseSelection sel;
    sel.bases.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Outfit& o = pool[order[i]];
        sel.bases.push_back(ScoredOutfit{o, scores[order[i]]});
        for (std::size_t p = 0; p < kPartCount; ++p) {
            if (o.has(kAllParts[p])) ++sel.part_counts[p];
        }
        ++sel.cardinality_counts[o.item_count()];
    }
    return sel;
}

std::vector<ModCandidate> score_mod_candidates(const GraderModel& model, const Outfit& base,
                                               PartId part, ModType type,
                                               const std::vector<ItemFeatures>& pool,
                                               std::size_t candidate_count, std::uint64_t seed) {
    const SlotScorer scorer(model);
    const SlotScorer::BaseState bs = scorer.prepare(base);
    return score_cell(scorer, bs, base, part, type, pool, candidate_count, seed);
}

std::vector<ModSample> make_mods(const GraderModel& model, const Outfit& base, PartId part,
                                 ModType type, const std::vector<ItemFeatures>& pool,
                                 std::size_t candidate_count, std::size_t keep,
                                 std::uint64_t seed) {
    const SlotScorer scorer(model);
    const SlotScorer::BaseState bs = scorer.prepare(base);
    return mods_for_cell(scorer, bs, base, part, type, pool, candidate_count, keep, seed);
}

ChanceRates chance_rates(const std::map<std::size_t, std::size_t>& histogram) {
    double total = 0.0;
    double item = 0.0;
    double feature = 0.0;
    for (const auto& [n, count] : histogram) {
        if (count == 0) continue;
        if (n == 0) throw UsageError("an outfit with zero items has no flaw to guess");
        const double c = static_cast<double>(count);
        total += c;
        item += c * (100.0 / static_cast<double>(n));
        feature += c * (100.0 / (2.0 * static_cast<double>(n)));
    }
    if (total == 0.0) return {};
    return ChanceRates{item / total, feature / total};
}

ChanceRates chance_rates(const std::vector<std::size_t>& item_counts) {
    std::map<std::size_t, std::size_t> hist;
    for (std::size_t n : item_counts) ++hist[n];
    return chance_rates(hist);
}

DetectionTable evaluate_detection(const GraderModel& model, const std::vector<ModSample>& mods,
                                  const DetectionOptions& options) {
    DetectionTable table;
    if (mods.empty()) return table;

    std::vector<const Outfit*> ptrs;
    ptrs.reserve(mods.size());
    for (const ModSample& m : mods) ptrs.push_back(&m.modified);
    const std::vector<IfivReport> reports =
        compute_ifiv_batch(model, ptrs, options.target_class, model.temperature);

    std::array<StratumAccum, kModTypeCount> by_type;
    std::map<std::size_t, StratumAccum> by_count;
    std::array<StratumAccum, kPartCount> by_part;
    StratumAccum overall;

    for (std::size_t i = 0; i < mods.size(); ++i) {
        const ModSample& m = mods[i];
        const bool ok = graded_correct(m, reports[i], options);
        by_type[mod_type_index(m.type)].add(m.item_count, ok);
        by_count[m.item_count].add(m.item_count, ok);
        by_part[part_index(m.part)].add(m.item_count, ok);
        overall.add(m.item_count, ok);
    }

    for (std::size_t t = 0; t < kModTypeCount; ++t) table.by_type[t] = by_type[t].finish();
    for (const auto& [n, acc] : by_count) table.by_count[n] = acc.finish();
    for (std::size_t p = 0; p < kPartCount; ++p) table.by_part[p] = by_part[p].finish();
    table.overall = overall.finish();
    return table;
}

void export_mod_ledger(const std::vector<ModSample>& mods, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mod ledger to " + path);
    out << "base_id,part,type,score,rank\n";
    for (const ModSample& m : mods) {
        out << m.base_id << ',' << part_name(m.part) << ',' << mod_type_name(m.type) << ','
            << fmt_double(m.score) << ',' << m.rank << '\n';
    }
    if (!out) throw IoError("failed while writing mod ledger to " + path);
}

void export_detection_tables(const DetectionTable& table, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

    {
        const std::string path = (fs::path(dir) / "detection_by_type.csv").string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "type,total,correct,accuracy_pct,chance_item_pct,chance_feature_pct\n";
        for (std::size_t t = 0; t < kModTypeCount; ++t) {
            write_stratum_csv(out, std::string(kModTypeNames[t]), table.by_type[t]);
        }
        if (!out) throw IoError("failed while writing " + path);
    }
    {
        const std::string path = (fs::path(dir) / "detection_by_count.csv").string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "item_count,total,correct,accuracy_pct,chance_item_pct,chance_feature_pct\n";
        std::set<std::size_t> counts;
        for (std::size_t n = 3; n <= kPartCount; ++n) counts.insert(n);
        for (const auto& [n, s] : table.by_count) counts.insert(n);
        for (std::size_t n : counts) {
            const auto it = table.by_count.find(n);
            write_stratum_csv(out, std::to_string(n),
                              it == table.by_count.end() ? DetectionStratum{} : it->second);
        }
        if (!out) throw IoError("failed while writing " + path);
    }
    {
        const std::string path = (fs::path(dir) / "detection_by_part.csv").string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << "part,total,correct,accuracy_pct,chance_item_pct,chance_feature_pct\n";
        for (std::size_t p = 0; p < kPartCount; ++p) {
            write_stratum_csv(out, std::string(part_name(kAllParts[p])), table.by_part[p]);
        }
        if (!out) throw IoError("failed while writing " + path);
    }
    {
        const std::string path = (fs::path(dir) / "detection.json").string();
        json doc;
        doc["overall"] = stratum_json(table.overall);
        json types = json::object();
        for (std::size_t t = 0; t < kModTypeCount; ++t) {
            types[std::string(kModTypeNames[t])] = stratum_json(table.by_type[t]);
        }
        doc["by_type"] = std::move(types);
        json counts = json::object();
        for (const auto& [n, s] : table.by_count) counts[std::to_string(n)] = stratum_json(s);
        doc["by_count"] = std::move(counts);
        json parts = json::object();
        for (std::size_t p = 0; p < kPartCount; ++p) {
            parts[std::string(part_name(kAllParts[p]))] = stratum_json(table.by_part[p]);
        }
        doc["by_part"] = std::move(parts);
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << doc.dump(2) << "\n";
        if (!out) throw IoError("failed while writing " + path);
    }
}

ProtocolResult run_protocol(const GraderModel& model, const std::vector<Outfit>& pool,
                            const std::array<std::vector<ItemFeatures>, kPartCount>& donor_pools,
                            const ProtocolOptions& options) {
    if (options.types.empty()) throw UsageError("the protocol needs at least one mod type");
    if (options.mods_per_cell == 0) throw UsageError("must keep at least one mod per cell");

    ProtocolResult result;
    result.bases = select_base(model, pool, options.base_count);

    const SlotScorer scorer(model);
    for (std::size_t b = 0; b < result.bases.bases.size(); ++b) {
        const Outfit& base = result.bases.bases[b].outfit;
        const SlotScorer::BaseState bs = scorer.prepare(base);
        for (std::size_t p = 0; p < kPartCount; ++p) {
            if (!base.has(kAllParts[p])) continue;
            for (const ModType type : options.types) {
                const std::uint64_t cell_seed =
                    mix_seed(mix_seed(options.seed, b), p, mod_type_index(type));
                std::vector<ModSample> cell =
                    mods_for_cell(scorer, bs, base, kAllParts[p], type, donor_pools[p],
                                  options.candidate_count, options.mods_per_cell, cell_seed);
                for (ModSample& m : cell) result.mods.push_back(std::move(m));
            }
        }
    }

    result.detection = evaluate_detection(model, result.mods, options.detection);
    return result;
}

}  // namespace og
