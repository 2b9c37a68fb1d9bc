#include "og/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "og/softmax.hpp"

namespace og {

namespace {

void check_labels(const std::vector<std::size_t>& labels) {
    for (std::size_t l : labels) {
        if (l != kPositiveClass && l != kNegativeClass) {
            throw UsageError("label " + std::to_string(l) + " is not a valid class index");
        }
    }
}

// lower-bin boundary rule; 1.0 (and anything clamping above) lands on top
std::size_t bin_of(double confidence, std::size_t bins) {
    const double scaled = confidence * static_cast<double>(bins);
    double idx = std::floor(scaled);
    if (idx == scaled && idx > 0.0) idx -= 1.0;
    std::size_t b = static_cast<std::size_t>(idx);
    return b >= bins ? bins - 1 : b;
}

struct Sample {
    double confidence;
    double hit;  // what "accuracy" averages for this sample
};

Sample as_sample(double p_pos, std::size_t label, ConfidenceMode mode) {
    if (mode == ConfidenceMode::positive_score) {
        return {p_pos, label == kPositiveClass ? 1.0 : 0.0};
    }
    const std::size_t predicted = p_pos >= 0.5 ? kPositiveClass : kNegativeClass;
    return {std::max(p_pos, 1.0 - p_pos), predicted == label ? 1.0 : 0.0};
}

double nll(const std::vector<double>& p_pos, const std::vector<std::size_t>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < p_pos.size(); ++i) {
        Tensor probs = Tensor::vector({p_pos[i], 1.0 - p_pos[i]});
        total += cross_entropy_loss(probs, labels[i]);
    }
    return total / static_cast<double>(p_pos.size());
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<double> positive_probabilities(const Tensor& logits, double t) {
    if (logits.rank() != 2 || logits.shape[1] != 2) {
        throw DimensionError("expected logits of shape [n,2], got " + logits.shape_string());
    }
    std::vector<double> out(logits.shape[0]);
    for (std::size_t r = 0; r < logits.shape[0]; ++r) {
        Tensor row = Tensor::vector({logits.at(r, 0), logits.at(r, 1)});
        out[r] = softmax_probability(row, t)[kPositiveClass];
    }
    return out;
}

double ece(const std::vector<double>& positive_probability, const std::vector<std::size_t>& labels,
           std::size_t bins, ConfidenceMode mode) {
    if (positive_probability.empty()) throw UsageError("cannot compute calibration error of nothing");
    if (positive_probability.size() != labels.size()) {
        throw UsageError("got " + std::to_string(positive_probability.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
    }
    if (bins == 0) throw UsageError("need at least one calibration bin");
    check_labels(labels);

    std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < positive_probability.size(); ++i) {
        const double p = positive_probability[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw UsageError("confidence " + std::to_string(p) + " is outside [0,1]");
        }
        Sample s = as_sample(p, labels[i], mode);
        const std::size_t b = bin_of(s.confidence, bins);
        conf_sum[b] += s.confidence;
        hit_sum[b] += s.hit;
        count[b] += 1;
    }
    double weighted_gap = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double n = static_cast<double>(count[b]);
        weighted_gap += n * std::abs(conf_sum[b] / n - hit_sum[b] / n);
    }
    return weighted_gap / static_cast<double>(positive_probability.size());
}

TemperatureFit fit_temperature(const Tensor& logits, const std::vector<std::size_t>& labels,
                               const TemperatureSearch& search) {
    if (logits.rank() != 2 || logits.shape[1] != 2 || logits.shape[0] == 0) {
        throw DimensionError("expected non-empty logits of shape [n,2], got " + logits.shape_string());
    }
    if (logits.shape[0] != labels.size()) {
        throw UsageError("got " + std::to_string(logits.shape[0]) + " logit rows but " +
                         std::to_string(labels.size()) + " labels");
    }
    check_labels(labels);
    std::size_t positives = 0;
    for (std::size_t l : labels) positives += l == kPositiveClass ? 1 : 0;
    if (positives == 0 || positives == labels.size()) {
        throw UsageError("temperature fitting needs both classes in the validation set");
    }
    if (!(search.grid_lo > 0.0) || search.grid_hi < search.grid_lo || !(search.grid_step > 0.0)) {
        throw UsageError("temperature grid must satisfy 0 < lo <= hi with a positive step");
    }

    auto objective = [&](double t) {
        std::vector<double> p = positive_probabilities(logits, t);
        return search.objective == TemperatureObjective::ece ? ece(p, labels, kCalibrationBins, search.mode)
                                                             : nll(p, labels);
    };

    TemperatureFit fit;
    fit.objective_at_unit = objective(1.0);
    // T = 1 seeds the search so scaling can never lose to not scaling
    double best_t = 1.0;
    double best_f = fit.objective_at_unit;
    auto consider = [&](double t) {
        const double f = objective(t);
        if (f < best_f) {
            best_f = f;
            best_t = t;
        }
    };
    const long cells = std::lround(std::floor((search.grid_hi - search.grid_lo) / search.grid_step));
    for (long k = 0; k <= cells; ++k) {
        consider(search.grid_lo + static_cast<double>(k) * search.grid_step);
    }

    // golden-section sweep of the winning cell's neighborhood; the objective
    // may be flat in places, so the best probe seen wins rather than the
    // final bracket midpoint
    double lo = std::max(best_t - search.grid_step, search.grid_lo * 0.5);
    double hi = best_t + search.grid_step;
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - ratio * (hi - lo);
    double d = lo + ratio * (hi - lo);
    double fc = objective(c), fd = objective(d);
    if (fc < best_f) { best_f = fc; best_t = c; }
    if (fd < best_f) { best_f = fd; best_t = d; }
    while (hi - lo > search.refine_tolerance) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = objective(c);
            if (fc < best_f) { best_f = fc; best_t = c; }
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = objective(d);
            if (fd < best_f) { best_f = fd; best_t = d; }
        }
    }

    fit.temperature = best_t;
    fit.objective_at_fit = best_f;
    return fit;
}

double fit_temperature(const GraderModel& model, const std::vector<LabeledOutfit>& validation,
                       const TemperatureSearch& search) {
    if (validation.empty()) throw UsageError("temperature fitting needs a non-empty validation set");
    std::vector<const Outfit*> ptrs;
    std::vector<std::size_t> labels;
    ptrs.reserve(validation.size());
    for (const LabeledOutfit& lo : validation) {
        ptrs.push_back(&lo.outfit);
        labels.push_back(lo.label);
    }
    return fit_temperature(logits_batch(model, ptrs), labels, search).temperature;
}

CalibrationReport reliability_data(const Tensor& logits, const std::vector<std::size_t>& labels,
                                   double temperature, ConfidenceMode mode) {
    if (!(temperature > 0.0)) throw InvariantError("temperature must be positive");
    std::vector<double> before = positive_probabilities(logits, 1.0);
    std::vector<double> after = positive_probabilities(logits, temperature);

    CalibrationReport report;
    report.temperature = temperature;
    report.mode = mode;
    report.ece_before = ece(before, labels, kCalibrationBins, mode);
    report.ece_after = ece(after, labels, kCalibrationBins, mode);
    report.sample_count = after.size();
    report.bins.resize(kCalibrationBins);
    report.pos_histogram.assign(kCalibrationBins, 0);
    report.neg_histogram.assign(kCalibrationBins, 0);

    std::vector<double> conf_sum(kCalibrationBins, 0.0), hit_sum(kCalibrationBins, 0.0);
    for (std::size_t i = 0; i < after.size(); ++i) {
        Sample s = as_sample(after[i], labels[i], mode);
        const std::size_t b = bin_of(s.confidence, kCalibrationBins);
        conf_sum[b] += s.confidence;
        hit_sum[b] += s.hit;
        report.bins[b].count += 1;
        // the score histogram always tracks the positive probability,
        // whatever the confidence mode
        const std::size_t score_bin = bin_of(after[i], kCalibrationBins);
        if (labels[i] == kPositiveClass) report.pos_histogram[score_bin] += 1;
        else report.neg_histogram[score_bin] += 1;
    }
    for (std::size_t b = 0; b < kCalibrationBins; ++b) {
        ReliabilityBin& bin = report.bins[b];
        bin.lo = static_cast<double>(b) / kCalibrationBins;
        bin.hi = static_cast<double>(b + 1) / kCalibrationBins;
        if (bin.count > 0) {
            bin.avg_confidence = conf_sum[b] / static_cast<double>(bin.count);
            bin.accuracy = hit_sum[b] / static_cast<double>(bin.count);
        }
    }
    return report;
}

CalibrationReport reliability_data(const GraderModel& model, const std::vector<LabeledOutfit>& dataset,
                                   double temperature, ConfidenceMode mode) {
    if (dataset.empty()) throw UsageError("cannot build a reliability report from an empty dataset");
    std::vector<const Outfit*> ptrs;
    std::vector<std::size_t> labels;
    ptrs.reserve(dataset.size());
    for (const LabeledOutfit& lo : dataset) {
        ptrs.push_back(&lo.outfit);
        labels.push_back(lo.label);
    }
    return reliability_data(logits_batch(model, ptrs), labels, temperature, mode);
}

void export_reliability_csv(const CalibrationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write reliability data to " + path);
    out << "bin_lo,bin_hi,avg_conf,accuracy,count\n";
    for (const ReliabilityBin& bin : report.bins) {
        out << format_double(bin.lo) << "," << format_double(bin.hi) << ","
            << format_double(bin.avg_confidence) << "," << format_double(bin.accuracy) << ","
            << bin.count << "\n";
    }
    if (!out) throw IoError("failed while writing reliability data to " + path);
}

void export_histogram_csv(const CalibrationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write score histogram to " + path);
    out << "score_bin,pos_count,neg_count\n";
    char label[64];
    for (std::size_t b = 0; b < report.pos_histogram.size(); ++b) {
        std::snprintf(label, sizeof(label), "%.1f-%.1f", static_cast<double>(b) / kCalibrationBins,
                      static_cast<double>(b + 1) / kCalibrationBins);
        out << label << "," << report.pos_histogram[b] << "," << report.neg_histogram[b] << "\n";
    }
    if (!out) throw IoError("failed while writing score histogram to " + path);
}

}  // namespace og
