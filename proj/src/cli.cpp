#include "og/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "og/calibration.hpp"
#include "og/dataset.hpp"
#include "og/edges.hpp"
#include "og/errors.hpp"
#include "og/external.hpp"
#include "og/grader.hpp"
#include "og/ifiv.hpp"
#include "og/image.hpp"
#include "og/model_io.hpp"
#include "og/protocol.hpp"
#include "og/svg.hpp"
#include "og/synth.hpp"
#include "og/trainer.hpp"

namespace og::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw IoError("failed while writing " + path);
}

// The reproducibility ledger every artifact-producing run leaves behind.
void write_run_config(const std::string& dir, const json& resolved) {
    write_text(dir + "/run_config.json", resolved.dump(2) + "\n");
}

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

// Config files are flat {"flag-name": value} JSON objects, keys being long
// option names without the leading dashes. Each entry becomes a --key=value
// token spliced in right after the subcommand name, so flags given explicitly
// on the command line come later and win under the take-last policy.

std::string config_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw UsageError("config values must be scalars or arrays of scalars, got " + v.dump());
}

void append_config_tokens(const std::string& path, std::vector<std::string>& tokens) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config file " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw UsageError("config file " + path + " must hold one JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_array()) {
            for (const json& v : it.value()) tokens.push_back("--" + it.key() + "=" + config_scalar(v));
        } else {
            tokens.push_back("--" + it.key() + "=" + config_scalar(it.value()));
        }
    }
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> rest;
    std::vector<std::string> files;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
            files.push_back(args[++i]);
        } else if (args[i].rfind("--config=", 0) == 0) {
            files.push_back(args[i].substr(9));
        } else {
            rest.push_back(args[i]);
        }
    }
    if (files.empty()) return rest;
    std::size_t insert_at = rest.size();
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (!rest[i].empty() && rest[i][0] != '-') {
            insert_at = i + 1;
            break;
        }
    }
    std::vector<std::string> tokens;
    for (const std::string& file : files) append_config_tokens(file, tokens);
    rest.insert(rest.begin() + (std::ptrdiff_t)insert_at, tokens.begin(), tokens.end());
    return rest;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> widths;
    if (s.empty() || s == "none") return widths;
    for (const std::string& tok : split_list(s)) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(tok, &used);
        } catch (const std::exception&) {
            throw UsageError("bad layer width \"" + tok + "\"; expected comma-separated integers");
        }
        if (used != tok.size() || v == 0)
            throw UsageError("bad layer width \"" + tok + "\"; expected comma-separated integers");
        widths.push_back(v);
    }
    return widths;
}

std::size_t class_from_name(const std::string& name) {
    if (name == "pos" || name == "positive") return kPositiveClass;
    if (name == "neg" || name == "negative") return kNegativeClass;
    throw UsageError("unknown target class \"" + name + "\"; expected pos or neg");
}

ConfidenceMode mode_from_name(const std::string& name) {
    if (name == "positive_score") return ConfidenceMode::positive_score;
    if (name == "max_probability") return ConfidenceMode::max_probability;
    throw UsageError("unknown confidence mode \"" + name +
                     "\"; expected positive_score or max_probability");
}

TemperatureObjective objective_from_name(const std::string& name) {
    if (name == "ece") return TemperatureObjective::ece;
    if (name == "nll") return TemperatureObjective::nll;
    throw UsageError("unknown calibration objective \"" + name + "\"; expected ece or nll");
}

FlawGranularity granularity_from_name(const std::string& name) {
    if (name == "pair") return FlawGranularity::pair;
    if (name == "item") return FlawGranularity::item;
    throw UsageError("unknown granularity \"" + name + "\"; expected pair or item");
}

ItemRule item_rule_from_name(const std::string& name) {
    if (name == "winning_pair") return ItemRule::winning_pair;
    if (name == "part_total") return ItemRule::part_total;
    throw UsageError("unknown item rule \"" + name + "\"; expected winning_pair or part_total");
}

std::vector<ModType> types_from_list(const std::string& list) {
    std::vector<ModType> types;
    for (const std::string& tok : split_list(list)) {
        if (tok.empty()) throw UsageError("empty entry in --types list");
        const ModType t = mod_type_from_name(tok);
        if (std::find(types.begin(), types.end(), t) != types.end())
            throw UsageError("mod type " + std::string(mod_type_name(t)) + " listed twice");
        types.push_back(t);
    }
    return types;
}

// ---------------------------------------------------------------------------
// outfit files: {"id": ..., "slots": {"upper": "shirt.png",
//                                     "lower": {"png": ..., "item_id": ...}}}
// PNG paths are resolved against the file's own directory.

struct LoadedOutfit {
    Outfit outfit;
    std::array<std::optional<RgbImage>, kPartCount> images;
};

LoadedOutfit load_outfit_file(const std::string& path, const PipelineConstants& pipeline,
                              const std::string& external_path, std::ostream& err) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open outfit file " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw UsageError("outfit file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("slots") || !j["slots"].is_object())
        throw UsageError("outfit file " + path + " needs a \"slots\" object mapping parts to PNGs");

    ExternalEmbeddings external;
    const std::size_t edge_dim = pipeline.grid * pipeline.grid;
    if (!external_path.empty()) external = load_external_embeddings(external_path, edge_dim);

    LoadedOutfit loaded;
    loaded.outfit.id = j.value("id", file_stem(path));
    const fs::path base_dir = fs::path(path).parent_path();
    for (auto it = j["slots"].begin(); it != j["slots"].end(); ++it) {
        const PartId part = part_from_name(it.key());
        std::string png, item_id;
        if (it.value().is_string()) {
            png = it.value().get<std::string>();
            item_id = file_stem(png);
        } else if (it.value().is_object() && it.value().contains("png")) {
            png = it.value()["png"].get<std::string>();
            item_id = it.value().value("item_id", file_stem(png));
        } else {
            throw UsageError("slot \"" + it.key() + "\" in " + path +
                             " must be a PNG path or an object with a \"png\" field");
        }
        fs::path resolved(png);
        if (resolved.is_relative()) resolved = base_dir / resolved;
        const RgbImage img = load_png(resolved.string());
        ItemFeatures features = extract_item_features(img, item_id, pipeline);
        if (!external_path.empty()) {
            if (external.count(item_id) != 0) {
                bool zeros = false;
                features.edge = ingest_external_embedding(external, item_id, edge_dim, &zeros);
                if (zeros)
                    err << "warning: external embedding for " << item_id
                        << " is all zeros and reads as an absent item\n";
            } else {
                err << "warning: no external embedding for " << item_id
                    << "; keeping the grid descriptor\n";
            }
        }
        loaded.outfit.slots[part_index(part)] = std::move(features);
        loaded.images[part_index(part)] = img;
    }
    loaded.outfit.require_valid();
    return loaded;
}

// Splits stacked back together, for pools that should span the whole dataset.
std::vector<LabeledOutfit> all_outfits(const SynthDataset& ds) {
    std::vector<LabeledOutfit> all = ds.train;
    all.insert(all.end(), ds.val.begin(), ds.val.end());
    all.insert(all.end(), ds.test.begin(), ds.test.end());
    return all;
}

// ---------------------------------------------------------------------------
// subcommands

struct GenOpts {
    std::string out;
    SynthSpec spec;
};

int run_gen(const GenOpts& o, std::ostream& out) {
    ensure_dir(o.out);
    const SynthManifest manifest = generate_synthetic(o.spec, o.out);
    std::map<std::string, std::size_t> split_counts;
    for (const SynthOutfitRecord& rec : manifest.outfits) split_counts[rec.split] += 1;
    write_run_config(o.out, json{{"subcommand", "gen-data"},
                                 {"out", o.out},
                                 {"seed", o.spec.seed},
                                 {"items-per-part", o.spec.items_per_part},
                                 {"tolerance", o.spec.harmony_tolerance_deg},
                                 {"texture-classes", o.spec.texture_classes},
                                 {"positives", o.spec.positive_count},
                                 {"negatives", o.spec.negative_count},
                                 {"train-ratio", o.spec.train_ratio},
                                 {"val-ratio", o.spec.val_ratio},
                                 {"test-ratio", o.spec.test_ratio},
                                 {"image-size", o.spec.image_size}});
    out << "wrote " << manifest.items.size() << " items and " << manifest.outfits.size()
        << " outfits (train/val/test = " << split_counts["train"] << "/" << split_counts["val"]
        << "/" << split_counts["test"] << ") under " << o.out << "\n";
    return 0;
}

struct TrainOpts {
    std::string data, out;
    int preset_id = 3;
    std::string k_widths, g_widths;
    std::size_t h_width = 0;
    bool no_batchnorm = false;
    bool custom_k = false, custom_g = false, custom_h = false;
    TrainParams params;
    bool sgd = false;
};

int run_train(const TrainOpts& o, std::ostream& out) {
    GraderConfig config = preset(o.preset_id);
    if (o.custom_k) config.k_widths = parse_widths(o.k_widths);
    if (o.custom_g) config.g_widths = parse_widths(o.g_widths);
    if (o.custom_h) config.h_width = o.h_width;
    if (o.no_batchnorm) config.batchnorm = false;
    if (o.custom_k || o.custom_g || o.custom_h || o.no_batchnorm) config.preset_id = 0;
    config.require_valid();

    const SynthDataset ds = load_dataset(o.data);
    TrainParams params = o.params;
    params.use_sgd = o.sgd;
    TrainLog log;
    const GraderModel model = train(ds.train, ds.val, config, params, &log);

    ensure_dir(o.out);
    save_model(model, o.out + "/model.bin");
    export_train_log(log, o.out + "/training_log.csv");
    const EvalStats train_stats = evaluate(model, ds.train);
    const EvalStats val_stats = evaluate(model, ds.val);
    write_run_config(o.out, json{{"subcommand", "train"},
                                 {"data", o.data},
                                 {"out", o.out},
                                 {"preset", config.preset_id},
                                 {"k-widths", config.k_widths},
                                 {"g-widths", config.g_widths},
                                 {"h-width", config.h_width},
                                 {"batchnorm", config.batchnorm},
                                 {"epochs", params.epochs},
                                 {"batch", params.batch_size},
                                 {"lr", params.learning_rate},
                                 {"optimizer", params.use_sgd ? "sgd" : "adam"},
                                 {"seed", params.seed}});
    out << "trained " << model.parameter_count() << " parameters for " << params.epochs
        << " epochs: train acc " << fmt2(100.0 * train_stats.accuracy) << "%, val acc "
        << fmt2(100.0 * val_stats.accuracy) << "%; model -> " << o.out << "/model.bin\n";
    return 0;
}

struct CalibrateOpts {
    std::string model, data, out;
    std::string split = "val";
    std::string objective = "ece";
    std::string mode = "positive_score";
    bool svg = false;
};

int run_calibrate(const CalibrateOpts& o, std::ostream& out) {
    GraderModel model = load_model(o.model);
    const SynthDataset ds = load_dataset(o.data, model.pipeline);
    const std::vector<LabeledOutfit>& set = ds.split(o.split);

    TemperatureSearch search;
    search.objective = objective_from_name(o.objective);
    search.mode = mode_from_name(o.mode);
    model.temperature = fit_temperature(model, set, search);
    save_model(model, o.model);

    const CalibrationReport report = reliability_data(model, set, model.temperature, search.mode);
    ensure_dir(o.out);
    export_reliability_csv(report, o.out + "/reliability.csv");
    export_histogram_csv(report, o.out + "/score_histogram.csv");
    if (o.svg) {
        write_text(o.out + "/reliability.svg", reliability_svg(report));
        write_text(o.out + "/score_histogram.svg", score_histogram_svg(report));
    }
    write_text(o.out + "/calibration.json", json{{"temperature", model.temperature},
                                                 {"objective", o.objective},
                                                 {"mode", o.mode},
                                                 {"ece_before", report.ece_before},
                                                 {"ece_after", report.ece_after},
                                                 {"sample_count", report.sample_count}}
                                                .dump(2) +
                                                "\n");
    write_run_config(o.out, json{{"subcommand", "calibrate"},
                                 {"model", o.model},
                                 {"data", o.data},
                                 {"out", o.out},
                                 {"split", o.split},
                                 {"objective", o.objective},
                                 {"mode", o.mode},
                                 {"svg", o.svg}});
    out << "fitted temperature " << fmt17(model.temperature) << " on " << report.sample_count
        << " " << o.split << " outfits: ECE " << fmt17(report.ece_before) << " -> "
        << fmt17(report.ece_after) << "; model updated in place\n";
    return 0;
}

struct ScoreOpts {
    std::string model, outfit, data, out;
    std::string split = "test";
    std::string external, dump_edges;
};

int run_score(const ScoreOpts& o, std::ostream& out, std::ostream& err) {
    const GraderModel model = load_model(o.model);
    if (o.outfit.empty() && o.data.empty())
        throw UsageError("score needs --outfit FILE or --data DIR");

    if (!o.outfit.empty()) {
        const LoadedOutfit loaded = load_outfit_file(o.outfit, model.pipeline, o.external, err);
        const double s = score(model, loaded.outfit);
        if (!o.dump_edges.empty()) {
            ensure_dir(o.dump_edges);
            const CannyParams params{model.pipeline.canny_sigma, model.pipeline.canny_low,
                                     model.pipeline.canny_high};
            for (PartId p : kAllParts) {
                if (!loaded.outfit.has(p)) continue;
                const GrayImage edge = edge_image(*loaded.images[part_index(p)], params);
                save_png(o.dump_edges + "/" + loaded.outfit.item(p).item_id + "_edge.png", edge);
            }
        }
        const json result{{"id", loaded.outfit.id},
                          {"score", s},
                          {"temperature", model.temperature},
                          {"items", loaded.outfit.item_count()}};
        out << result.dump(2) << "\n";
        if (!o.out.empty()) {
            ensure_dir(o.out);
            write_text(o.out + "/score.json", result.dump(2) + "\n");
            write_run_config(o.out, json{{"subcommand", "score"},
                                         {"model", o.model},
                                         {"outfit", o.outfit},
                                         {"out", o.out},
                                         {"external", o.external},
                                         {"dump-edge-image", o.dump_edges}});
        }
        return 0;
    }

    const SynthDataset ds = load_dataset(o.data, model.pipeline);
    const std::vector<LabeledOutfit>& set = ds.split(o.split);
    std::ostringstream csv;
    csv << "outfit_id,label,score\n";
    for (const LabeledOutfit& lo : set)
        csv << lo.outfit.id << "," << lo.label << "," << fmt17(score(model, lo.outfit)) << "\n";
    if (o.out.empty()) {
        out << csv.str();
        return 0;
    }
    ensure_dir(o.out);
    write_text(o.out + "/scores.csv", csv.str());
    write_run_config(o.out, json{{"subcommand", "score"},
                                 {"model", o.model},
                                 {"data", o.data},
                                 {"split", o.split},
                                 {"out", o.out}});
    const EvalStats stats = evaluate(model, set);
    out << "scored " << set.size() << " " << o.split << " outfits (accuracy "
        << fmt2(100.0 * stats.accuracy) << "%) -> " << o.out << "/scores.csv\n";
    return 0;
}

struct ExplainOpts {
    std::string model, outfit, out;
    std::string target = "pos";
    std::string external;
    bool svg = false;
};

int run_explain(const ExplainOpts& o, std::ostream& out, std::ostream& err) {
    const GraderModel model = load_model(o.model);
    const LoadedOutfit loaded = load_outfit_file(o.outfit, model.pipeline, o.external, err);
    const IfivReport report = compute_ifiv(model, loaded.outfit, class_from_name(o.target));
    out << ifiv_to_json(report);
    if (!o.out.empty()) {
        ensure_dir(o.out);
        export_ifiv_json(report, o.out + "/ifiv.json");
        if (o.svg) write_text(o.out + "/ifiv.svg", ifiv_bars_svg(report));
        write_run_config(o.out, json{{"subcommand", "explain"},
                                     {"model", o.model},
                                     {"outfit", o.outfit},
                                     {"target", o.target},
                                     {"out", o.out},
                                     {"external", o.external},
                                     {"svg", o.svg}});
    }
    return 0;
}

struct BenchOpts {
    std::string model, data, out;
    std::string split = "test";
    std::string types = "item,edge_image,colors";
    std::string target = "pos";
    std::string granularity = "pair";
    std::string item_rule = "winning_pair";
    ProtocolOptions protocol;
};

int run_flawbench(const BenchOpts& o, std::ostream& out) {
    const GraderModel model = load_model(o.model);
    const SynthDataset ds = load_dataset(o.data, model.pipeline);

    ProtocolOptions options = o.protocol;
    options.types = types_from_list(o.types);
    options.detection.target_class = class_from_name(o.target);
    options.detection.feature_granularity = granularity_from_name(o.granularity);
    options.detection.item_rule = item_rule_from_name(o.item_rule);

    // Bases come from the chosen split; replacements may come from anywhere in
    // the dataset, to keep the donor pools as rich as possible.
    std::vector<Outfit> pool;
    for (const LabeledOutfit& lo : ds.split(o.split)) pool.push_back(lo.outfit);
    const auto donors = part_pools(all_outfits(ds));

    const ProtocolResult result = run_protocol(model, pool, donors, options);

    ensure_dir(o.out);
    export_mod_ledger(result.mods, o.out + "/mods.csv");
    export_detection_tables(result.detection, o.out);
    std::ostringstream bases_csv;
    bases_csv << "outfit_id,score,items\n";
    for (const ScoredOutfit& b : result.bases.bases)
        bases_csv << b.outfit.id << "," << fmt17(b.score) << "," << b.outfit.item_count() << "\n";
    write_text(o.out + "/bases.csv", bases_csv.str());
    write_run_config(o.out, json{{"subcommand", "flawbench"},
                                 {"model", o.model},
                                 {"data", o.data},
                                 {"out", o.out},
                                 {"split", o.split},
                                 {"bases", options.base_count},
                                 {"candidates", options.candidate_count},
                                 {"keep", options.mods_per_cell},
                                 {"types", o.types},
                                 {"target", o.target},
                                 {"granularity", o.granularity},
                                 {"item-rule", o.item_rule},
                                 {"seed", options.seed}});

    for (ModType t : options.types) {
        const DetectionStratum& s = result.detection.by_type[mod_type_index(t)];
        out << mod_type_name(t) << ": " << s.correct << "/" << s.total << " = "
            << fmt2(s.accuracy_pct()) << "% (chance " << fmt2(s.chance_item_pct) << "% item-wise, "
            << fmt2(s.chance_feature_pct) << "% feature-wise)\n";
    }
    const DetectionStratum& ov = result.detection.overall;
    out << "overall: " << ov.correct << "/" << ov.total << " = " << fmt2(ov.accuracy_pct())
        << "% -> " << o.out << "\n";
    return 0;
}

struct ReportOpts {
    std::string model, data, out;
    std::string split = "test";
    std::string mode = "positive_score";
    std::string outfit, target = "pos";
    bool no_svg = false;
};

int run_report(const ReportOpts& o, std::ostream& out, std::ostream& err) {
    const GraderModel model = load_model(o.model);
    const SynthDataset ds = load_dataset(o.data, model.pipeline);
    const std::vector<LabeledOutfit>& set = ds.split(o.split);

    const ConfidenceMode mode = mode_from_name(o.mode);
    const CalibrationReport report = reliability_data(model, set, model.temperature, mode);
    const EvalStats stats = evaluate(model, set);

    ensure_dir(o.out);
    export_reliability_csv(report, o.out + "/reliability.csv");
    export_histogram_csv(report, o.out + "/score_histogram.csv");
    if (!o.no_svg) {
        write_text(o.out + "/reliability.svg", reliability_svg(report));
        write_text(o.out + "/score_histogram.svg", score_histogram_svg(report));
    }
    if (!o.outfit.empty()) {
        const LoadedOutfit loaded = load_outfit_file(o.outfit, model.pipeline, "", err);
        const IfivReport ifiv = compute_ifiv(model, loaded.outfit, class_from_name(o.target));
        export_ifiv_json(ifiv, o.out + "/ifiv.json");
        if (!o.no_svg) write_text(o.out + "/ifiv.svg", ifiv_bars_svg(ifiv));
    }
    write_text(o.out + "/summary.json", json{{"split", o.split},
                                             {"sample_count", report.sample_count},
                                             {"accuracy", stats.accuracy},
                                             {"loss", stats.loss},
                                             {"temperature", model.temperature},
                                             {"ece_before", report.ece_before},
                                             {"ece_after", report.ece_after}}
                                            .dump(2) +
                                            "\n");
    write_run_config(o.out, json{{"subcommand", "report"},
                                 {"model", o.model},
                                 {"data", o.data},
                                 {"out", o.out},
                                 {"split", o.split},
                                 {"mode", o.mode},
                                 {"outfit", o.outfit},
                                 {"target", o.target},
                                 {"svg", !o.no_svg}});
    out << "report on " << report.sample_count << " " << o.split << " outfits: accuracy "
        << fmt2(100.0 * stats.accuracy) << "%, ECE " << fmt17(report.ece_after) << " at T="
        << fmt17(model.temperature) << " -> " << o.out << "\n";
    return 0;
}

constexpr const char* kConfigHelp =
    "JSON file {\"flag-name\": value} supplying any flag of this subcommand; "
    "explicit flags win";

void add_config_support(CLI::App* sub, std::string& sink) {
    // repeated flags keep the last value, which is what lets explicit flags
    // override spliced-in config tokens
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    // the file itself is consumed before parsing; this is for --help and for
    // config files that (pointlessly) mention config
    sub->add_option("--config", sink, kConfigHelp);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"outfit grading, explanation and flaw detection", "outfitgrader"};
    app.require_subcommand(1);
    std::string config_sink;

    GenOpts gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "render a synthetic planted-rule dataset");
    add_config_support(gen_cmd, config_sink);
    gen_cmd->add_option("--out", gen.out, "dataset directory")->required();
    gen_cmd->add_option("--seed", gen.spec.seed, "generation seed");
    gen_cmd->add_option("--items-per-part", gen.spec.items_per_part, "items rendered per part");
    gen_cmd->add_option("--tolerance", gen.spec.harmony_tolerance_deg,
                        "hue harmony tolerance in degrees");
    gen_cmd->add_option("--texture-classes", gen.spec.texture_classes,
                        "texture classes in play (1-3)");
    gen_cmd->add_option("--positives", gen.spec.positive_count, "positive outfit count");
    gen_cmd->add_option("--negatives", gen.spec.negative_count, "negative outfit count");
    gen_cmd->add_option("--train-ratio", gen.spec.train_ratio, "train split fraction");
    gen_cmd->add_option("--val-ratio", gen.spec.val_ratio, "validation split fraction");
    gen_cmd->add_option("--test-ratio", gen.spec.test_ratio, "test split fraction");
    gen_cmd->add_option("--image-size", gen.spec.image_size, "square item image size in pixels");

    TrainOpts tr;
    CLI::App* train_cmd = app.add_subcommand("train", "train a grader on a generated dataset");
    add_config_support(train_cmd, config_sink);
    train_cmd->add_option("--data", tr.data, "dataset directory")->required();
    train_cmd->add_option("--out", tr.out, "output directory for model.bin and logs")->required();
    train_cmd->add_option("--preset", tr.preset_id, "stock architecture 1-6 (3 = full scale)");
    CLI::Option* kw = train_cmd->add_option(
        "--k-widths", tr.k_widths, "feature encoder widths, e.g. 1024 or none (overrides preset)");
    CLI::Option* gw = train_cmd->add_option("--g-widths", tr.g_widths,
                                            "item encoder widths (overrides preset)");
    CLI::Option* hw =
        train_cmd->add_option("--h-width", tr.h_width, "outfit encoder width (overrides preset)");
    train_cmd->add_flag("--no-batchnorm", tr.no_batchnorm, "disable outfit-encoder batchnorm");
    train_cmd->add_option("--epochs", tr.params.epochs, "training epochs");
    train_cmd->add_option("--batch", tr.params.batch_size, "mini-batch size");
    train_cmd->add_option("--lr", tr.params.learning_rate, "learning rate");
    train_cmd->add_flag("--sgd", tr.sgd, "plain SGD instead of Adam");
    train_cmd->add_option("--seed", tr.params.seed, "init and shuffle seed");

    CalibrateOpts cal;
    CLI::App* cal_cmd =
        app.add_subcommand("calibrate", "fit the temperature and update the model in place");
    add_config_support(cal_cmd, config_sink);
    cal_cmd->add_option("--model", cal.model, "model file (env OUTFITGRADER_MODEL)")
        ->envname("OUTFITGRADER_MODEL")
        ->required();
    cal_cmd->add_option("--data", cal.data, "dataset directory")->required();
    cal_cmd->add_option("--out", cal.out, "report directory")->required();
    cal_cmd->add_option("--split", cal.split, "split to fit on (train/val/test)");
    cal_cmd->add_option("--objective", cal.objective, "search objective: ece or nll");
    cal_cmd->add_option("--mode", cal.mode, "confidence: positive_score or max_probability");
    cal_cmd->add_flag("--svg", cal.svg, "also write SVG plots");

    ScoreOpts sc;
    CLI::App* score_cmd =
        app.add_subcommand("score", "score one outfit file or a whole dataset split");
    add_config_support(score_cmd, config_sink);
    score_cmd->add_option("--model", sc.model, "model file (env OUTFITGRADER_MODEL)")
        ->envname("OUTFITGRADER_MODEL")
        ->required();
    CLI::Option* sc_outfit = score_cmd->add_option("--outfit", sc.outfit, "outfit JSON file");
    CLI::Option* sc_data = score_cmd->add_option("--data", sc.data, "dataset directory");
    sc_outfit->excludes(sc_data);
    score_cmd->add_option("--split", sc.split, "dataset split to score");
    score_cmd->add_option("--out", sc.out, "output directory (default: stdout only)");
    score_cmd->add_option("--external", sc.external,
                          "externally computed edge embeddings (CSV or JSON), outfit mode only");
    score_cmd->add_option("--dump-edge-image", sc.dump_edges,
                          "directory for the computed edge images, outfit mode only");

    ExplainOpts ex;
    CLI::App* explain_cmd =
        app.add_subcommand("explain", "per-(part, feature) influence report for one outfit");
    add_config_support(explain_cmd, config_sink);
    explain_cmd->add_option("--model", ex.model, "model file (env OUTFITGRADER_MODEL)")
        ->envname("OUTFITGRADER_MODEL")
        ->required();
    explain_cmd->add_option("--outfit", ex.outfit, "outfit JSON file")->required();
    explain_cmd->add_option("--target", ex.target, "class whose logit is explained: pos or neg");
    explain_cmd->add_option("--out", ex.out, "output directory (default: stdout only)");
    explain_cmd->add_option("--external", ex.external,
                            "externally computed edge embeddings (CSV or JSON)");
    explain_cmd->add_flag("--svg", ex.svg, "also write an influence bar chart");

    BenchOpts fb;
    CLI::App* bench_cmd = app.add_subcommand(
        "flawbench", "damage top outfits slot by slot and test whether influence finds the damage");
    add_config_support(bench_cmd, config_sink);
    bench_cmd->add_option("--model", fb.model, "model file (env OUTFITGRADER_MODEL)")
        ->envname("OUTFITGRADER_MODEL")
        ->required();
    bench_cmd->add_option("--data", fb.data, "dataset directory")->required();
    bench_cmd->add_option("--out", fb.out, "output directory")->required();
    bench_cmd->add_option("--split", fb.split, "split the base outfits come from");
    bench_cmd->add_option("--bases", fb.protocol.base_count, "number of base outfits");
    bench_cmd->add_option("--candidates", fb.protocol.candidate_count,
                          "replacement candidates per (base, part, type)");
    bench_cmd->add_option("--keep", fb.protocol.mods_per_cell,
                          "worst-scoring candidates kept per cell");
    bench_cmd->add_option("--types", fb.types, "mod types, comma-separated (item, edge, colors)");
    bench_cmd->add_option("--target", fb.target, "class whose influence is ranked: pos or neg");
    bench_cmd->add_option("--granularity", fb.granularity, "grading granularity: pair or item");
    bench_cmd->add_option("--item-rule", fb.item_rule,
                          "item-mode blame rule: winning_pair or part_total");
    bench_cmd->add_option("--seed", fb.protocol.seed, "candidate-draw seed");

    ReportOpts rp;
    CLI::App* report_cmd =
        app.add_subcommand("report", "calibration and score-distribution plots for a split");
    add_config_support(report_cmd, config_sink);
    report_cmd->add_option("--model", rp.model, "model file (env OUTFITGRADER_MODEL)")
        ->envname("OUTFITGRADER_MODEL")
        ->required();
    report_cmd->add_option("--data", rp.data, "dataset directory")->required();
    report_cmd->add_option("--out", rp.out, "output directory")->required();
    report_cmd->add_option("--split", rp.split, "split to report on");
    report_cmd->add_option("--mode", rp.mode, "confidence: positive_score or max_probability");
    report_cmd->add_option("--outfit", rp.outfit, "outfit JSON file for an influence bar chart");
    report_cmd->add_option("--target", rp.target, "influence target class: pos or neg");
    report_cmd->add_flag("--no-svg", rp.no_svg, "CSV outputs only");

    try {
        const std::vector<std::string> expanded = expand_config(args);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
        out << target->help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run 'outfitgrader --help' for usage\n";
        return 2;
    }
    tr.custom_k = kw->count() > 0;
    tr.custom_g = gw->count() > 0;
    tr.custom_h = hw->count() > 0;

    try {
        if (gen_cmd->parsed()) return run_gen(gen, out);
        if (train_cmd->parsed()) return run_train(tr, out);
        if (cal_cmd->parsed()) return run_calibrate(cal, out);
        if (score_cmd->parsed()) return run_score(sc, out, err);
        if (explain_cmd->parsed()) return run_explain(ex, out, err);
        if (bench_cmd->parsed()) return run_flawbench(fb, out);
        if (report_cmd->parsed()) return run_report(rp, out, err);
        err << "error: no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const InvariantError& e) {
        err << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 5;
    }
}

}  // namespace og::cli
