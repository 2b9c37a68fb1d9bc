#include "og/ifiv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "og/errors.hpp"

namespace og {

namespace {

constexpr std::size_t kIfivChunk = 64;

void check_request(std::size_t target_class, double temperature) {
    if (target_class != kPositiveClass && target_class != kNegativeClass) {
        throw UsageError("target class must be 0 (positive) or 1 (negative)");
    }
    if (!(temperature > 0.0)) {
        throw UsageError("temperature must be positive");
    }
}

// influence of one feature block for batch row b: sum over the encoding of
// value * gradient, in fixed index order
double block_influence(Tape& tape, Tape::Id enc, std::size_t b) {
    const Tensor& x = tape.value(enc);
    const Tensor& dx = tape.grad(enc);
    const std::size_t cols = x.shape[1];
    double sum = 0.0;
    for (std::size_t k = 0; k < cols; ++k) {
        sum += x.at(b, k) * dx.at(b, k);
    }
    return sum;
}

void attribute_chunk(const GraderModel& model, const Outfit* const* outfits, std::size_t count,
                     std::size_t target_class, double temperature, IfivReport* out) {
    // eval-mode batchnorm only reads the running stats; the model is not
    // mutated by an attribution pass
    GraderModel& m = const_cast<GraderModel&>(model);
    BatchGraphOptions options;
    options.feature_grads = true;
    BatchGraph g = build_batch_graph(m, outfits, count, options);

    Tensor seed = Tensor::zeros({count, 2});
    for (std::size_t b = 0; b < count; ++b) seed.at(b, target_class) = 1.0 / temperature;
    const Tensor& logits = g.tape.value(g.logits);
    g.tape.backward(g.logits, std::move(seed));

    for (std::size_t b = 0; b < count; ++b) {
        IfivReport& report = out[b];
        report.target_class = target_class;
        report.temperature = temperature;
        report.target_logit_over_t = logits.at(b, target_class) / temperature;
        const Outfit& outfit = *outfits[b];
        for (std::size_t p = 0; p < kPartCount; ++p) {
            if (!outfit.has(kAllParts[p])) continue;
            const double edge_v = block_influence(g.tape, g.edge_enc[p], b);
            const double colors_v = block_influence(g.tape, g.colors_enc[p], b);
            report.entries.push_back({kAllParts[p], FeatureKind::edge, edge_v});
            report.entries.push_back({kAllParts[p], FeatureKind::colors, colors_v});
            report.part_totals[p] = edge_v + colors_v;
        }
        report.ranking = report.entries;
        // lowest influence first == largest blame first; stable sort keeps
        // the part-then-feature construction order on exact ties
        std::stable_sort(report.ranking.begin(), report.ranking.end(),
                         [](const IfivEntry& a, const IfivEntry& c) { return a.value < c.value; });
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string_view feature_name(FeatureKind kind) {
    return kind == FeatureKind::edge ? "edge" : "colors";
}

double IfivReport::total() const {
    double sum = 0.0;
    for (const IfivEntry& entry : entries) sum += entry.value;
    return sum;
}

IfivReport compute_ifiv(const GraderModel& model, const Outfit& outfit, std::size_t target_class,
                        double temperature) {
    check_request(target_class, temperature);
    outfit.require_valid();
    IfivReport report;
    const Outfit* ptr = &outfit;
    attribute_chunk(model, &ptr, 1, target_class, temperature, &report);
    return report;
}

IfivReport compute_ifiv(const GraderModel& model, const Outfit& outfit, std::size_t target_class) {
    return compute_ifiv(model, outfit, target_class, model.temperature);
}

std::vector<IfivReport> compute_ifiv_batch(const GraderModel& model,
                                           const std::vector<const Outfit*>& outfits,
                                           std::size_t target_class, double temperature) {
    check_request(target_class, temperature);
    if (outfits.empty()) throw UsageError("attribution needs at least one outfit");
    for (const Outfit* outfit : outfits) {
        if (!outfit) throw UsageError("attribution received a null outfit");
        outfit->require_valid();
    }
    std::vector<IfivReport> reports(outfits.size());
    for (std::size_t start = 0; start < outfits.size(); start += kIfivChunk) {
        const std::size_t count = std::min(kIfivChunk, outfits.size() - start);
        attribute_chunk(model, outfits.data() + start, count, target_class, temperature,
                        &reports[start]);
    }
    return reports;
}

FlawPrediction detect_flaw(const IfivReport& report, FlawGranularity granularity,
                           ItemRule item_rule) {
    if (report.ranking.empty()) throw UsageError("cannot detect a flaw in an empty report");
    const IfivEntry& top = report.ranking.front();
    FlawPrediction prediction;
    if (granularity == FlawGranularity::pair) {
        prediction.part = top.part;
        prediction.feature = top.feature;
        return prediction;
    }
    if (item_rule == ItemRule::winning_pair) {
        prediction.part = top.part;
        return prediction;
    }
    bool found = false;
    double best = 0.0;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        if (!report.part_totals[p]) continue;
        // strict comparison keeps the earliest part on exact ties
        if (!found || *report.part_totals[p] < best) {
            found = true;
            best = *report.part_totals[p];
            prediction.part = kAllParts[p];
        }
    }
    return prediction;
}

std::string ifiv_to_json(const IfivReport& report) {
    nlohmann::json doc;
    doc["target_class"] = report.target_class == kPositiveClass ? "pos" : "neg";
    doc["temperature"] = report.temperature;
    doc["target_logit_over_t"] = report.target_logit_over_t;

    nlohmann::json pairs = nlohmann::json::array();
    for (const IfivEntry& entry : report.entries) {
        pairs.push_back({{"part", std::string(part_name(entry.part))},
                         {"feature", std::string(feature_name(entry.feature))},
                         {"ifiv", entry.value}});
    }
    doc["pairs"] = pairs;

    nlohmann::json items = nlohmann::json::array();
    for (std::size_t p = 0; p < kPartCount; ++p) {
        if (!report.part_totals[p]) continue;
        items.push_back({{"part", std::string(part_name(kAllParts[p]))},
                         {"ifiv", *report.part_totals[p]}});
    }
    doc["items"] = items;

    nlohmann::json ranking = nlohmann::json::array();
    for (const IfivEntry& entry : report.ranking) {
        ranking.push_back({{"part", std::string(part_name(entry.part))},
                           {"feature", std::string(feature_name(entry.feature))},
                           {"ifiv", entry.value}});
    }
    doc["ranking"] = ranking;

    if (!report.ranking.empty()) {
        const IfivEntry& top = report.ranking.front();
        doc["prediction"] = {{"part", std::string(part_name(top.part))},
                             {"feature", std::string(feature_name(top.feature))}};
    }
    return doc.dump(2);
}

void export_ifiv_json(const IfivReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write attribution report to " + path);
    out << ifiv_to_json(report) << "\n";
    if (!out) throw IoError("failed while writing attribution report to " + path);
}

void export_ifiv_csv(const std::vector<std::string>& outfit_ids,
                     const std::vector<IfivReport>& reports, const std::string& path) {
    if (outfit_ids.size() != reports.size()) {
        throw UsageError("attribution export needs one id per report");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write attribution rows to " + path);
    out << "outfit_id,part,feature,ifiv,rank\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const IfivReport& report = reports[i];
        for (const IfivEntry& entry : report.entries) {
            std::size_t rank = 0;
            for (std::size_t r = 0; r < report.ranking.size(); ++r) {
                if (report.ranking[r].part == entry.part &&
                    report.ranking[r].feature == entry.feature) {
                    rank = r + 1;
                    break;
                }
            }
            out << outfit_ids[i] << "," << part_name(entry.part) << ","
                << feature_name(entry.feature) << "," << format_double(entry.value) << "," << rank
                << "\n";
        }
    }
    if (!out) throw IoError("failed while writing attribution rows to " + path);
}

}  // namespace og
