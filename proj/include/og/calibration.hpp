#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "og/grader.hpp"
#include "og/tensor.hpp"

namespace og {

inline constexpr std::size_t kCalibrationBins = 10;

// What "confidence" means for a binary grader. positive_score treats the
// positive-class probability as the confidence and bins empirical positive
// rates against it; max_probability is the standard definition where the
// confidence is the winning class's probability and accuracy is the fraction
// of correct predictions.
enum class ConfidenceMode { positive_score, max_probability };

enum class TemperatureObjective { ece, nll };

// P(positive) for every logits row under temperature t, on [0,1].
std::vector<double> positive_probabilities(const Tensor& logits, double t);

// Expected calibration error over equal-width bins of [0,1]. Boundary values
// fall into the lower bin except 1.0, which belongs to the top bin.
double ece(const std::vector<double>& positive_probability, const std::vector<std::size_t>& labels,
           std::size_t bins = kCalibrationBins, ConfidenceMode mode = ConfidenceMode::positive_score);

struct TemperatureSearch {
    TemperatureObjective objective = TemperatureObjective::ece;
    ConfidenceMode mode = ConfidenceMode::positive_score;
    double grid_lo = 0.1;
    double grid_hi = 20.0;
    double grid_step = 0.1;
    double refine_tolerance = 1e-3;  // stop when the bracket is this narrow
};

struct TemperatureFit {
    double temperature = 1.0;
    double objective_at_unit = 0.0;  // objective at T = 1
    double objective_at_fit = 0.0;
};

// Coarse grid (always including T = 1, so the fit can never be worse than no
// scaling) followed by golden-section refinement around the best cell.
// Temperature never changes which class wins, so accuracy is preserved by
// construction.
TemperatureFit fit_temperature(const Tensor& logits, const std::vector<std::size_t>& labels,
                               const TemperatureSearch& search = {});
double fit_temperature(const GraderModel& model, const std::vector<LabeledOutfit>& validation,
                       const TemperatureSearch& search = {});

struct ReliabilityBin {
    double lo = 0.0, hi = 0.0;
    double avg_confidence = 0.0;  // 0 when empty
    double accuracy = 0.0;        // 0 when empty
    std::size_t count = 0;
};

struct CalibrationReport {
    double temperature = 1.0;
    ConfidenceMode mode = ConfidenceMode::positive_score;
    double ece_before = 0.0;  // at T = 1
    double ece_after = 0.0;   // at the report's temperature
    std::vector<ReliabilityBin> bins;
    // distribution of the scaled positive probability, split by true label
    std::vector<std::size_t> pos_histogram, neg_histogram;
    std::size_t sample_count = 0;
};

CalibrationReport reliability_data(const Tensor& logits, const std::vector<std::size_t>& labels,
                                   double temperature,
                                   ConfidenceMode mode = ConfidenceMode::positive_score);
CalibrationReport reliability_data(const GraderModel& model, const std::vector<LabeledOutfit>& dataset,
                                   double temperature,
                                   ConfidenceMode mode = ConfidenceMode::positive_score);

// bin_lo,bin_hi,avg_conf,accuracy,count
void export_reliability_csv(const CalibrationReport& report, const std::string& path);
// score_bin,pos_count,neg_count
void export_histogram_csv(const CalibrationReport& report, const std::string& path);

}  // namespace og
