#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "og/grader.hpp"
#include "og/outfit.hpp"

namespace og {

struct TrainParams {
    std::size_t epochs = 50;
    double learning_rate = 1e-4;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    bool use_sgd = false;  // Adam otherwise
};

// Per-epoch curves. Validation columns stay empty when no validation set is
// supplied.
struct TrainLog {
    std::vector<double> train_loss, train_accuracy;
    std::vector<double> val_loss, val_accuracy;
};

// Shuffled mini-batch cross-entropy training, deterministic in params.seed.
// The returned model has temperature 1; calibration is a separate step.
GraderModel train(const std::vector<LabeledOutfit>& train_set,
                  const std::vector<LabeledOutfit>& val_set, const GraderConfig& config,
                  const TrainParams& params, TrainLog* log = nullptr);

// CSV with one row per epoch.
void export_train_log(const TrainLog& log, const std::string& path);

// Mean cross-entropy and accuracy of a model over a labeled set, eval mode.
struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};
EvalStats evaluate(const GraderModel& model, const std::vector<LabeledOutfit>& set);

// Negatives for user datasets that only have positives: each negative is a
// positive outfit with one part's item swapped in from another positive.
std::vector<LabeledOutfit> make_shuffled_negatives(const std::vector<Outfit>& positives,
                                                   std::size_t count, std::uint64_t seed);

}  // namespace og
