#include "og/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "og/optim.hpp"
#include "og/rng.hpp"

namespace og {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

// stable per-row cross entropy from raw logits
double row_xent(double s0, double s1, std::size_t label) {
    const double m = std::max(s0, s1);
    const double lse = m + std::log(std::exp(s0 - m) + std::exp(s1 - m));
    return lse - (label == 0 ? s0 : s1);
}

std::size_t row_argmax(double s0, double s1) { return s0 >= s1 ? 0 : 1; }

EvalStats stats_from_logits(const Tensor& logits, const std::vector<LabeledOutfit>& set) {
    EvalStats stats;
    for (std::size_t r = 0; r < set.size(); ++r) {
        stats.loss += row_xent(logits.at(r, 0), logits.at(r, 1), set[r].label);
        stats.accuracy += row_argmax(logits.at(r, 0), logits.at(r, 1)) == set[r].label ? 1.0 : 0.0;
    }
    stats.loss /= static_cast<double>(set.size());
    stats.accuracy /= static_cast<double>(set.size());
    return stats;
}

}  // namespace

EvalStats evaluate(const GraderModel& model, const std::vector<LabeledOutfit>& set) {
    if (set.empty()) throw UsageError("cannot evaluate on an empty set");
    std::vector<const Outfit*> ptrs;
    ptrs.reserve(set.size());
    for (const LabeledOutfit& lo : set) ptrs.push_back(&lo.outfit);
    return stats_from_logits(logits_batch(model, ptrs), set);
}

GraderModel train(const std::vector<LabeledOutfit>& train_set,
                  const std::vector<LabeledOutfit>& val_set, const GraderConfig& config,
                  const TrainParams& params, TrainLog* log) {
    if (train_set.empty()) throw UsageError("training set is empty");
    if (params.batch_size == 0) throw UsageError("batch size must be positive");
    if (params.batch_size > train_set.size()) {
        throw UsageError("batch size " + std::to_string(params.batch_size) +
                         " exceeds training set size " + std::to_string(train_set.size()));
    }
    std::size_t positives = 0;
    for (const LabeledOutfit& lo : train_set) {
        if (lo.label != kPositiveClass && lo.label != kNegativeClass) {
            throw UsageError("label " + std::to_string(lo.label) + " is not a valid class index");
        }
        positives += lo.label == kPositiveClass ? 1 : 0;
    }
    if (positives == 0 || positives == train_set.size()) {
        throw UsageError("training set must contain both classes");
    }

    GraderModel model = init_model(config, mix_seed(params.seed, kInitStream));
    std::vector<Tensor*> parameters = model.parameters();
    std::vector<AdamState> adam;
    if (!params.use_sgd) {
        adam.reserve(parameters.size());
        for (Tensor* p : parameters) adam.push_back(AdamState::for_param(*p));
    }

    Rng shuffle_rng(mix_seed(params.seed, kShuffleStream));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        double correct = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
            const std::size_t n = std::min(params.batch_size, order.size() - start);
            if (n == 1 && config.batchnorm && order.size() > 1) {
                // batch statistics are undefined over one row; drop the
                // trailing singleton instead of crashing mid-epoch
                continue;
            }
            std::vector<const Outfit*> batch(n);
            std::vector<std::size_t> labels(n);
            for (std::size_t r = 0; r < n; ++r) {
                batch[r] = &train_set[order[start + r]].outfit;
                labels[r] = train_set[order[start + r]].label;
            }
            BatchGraphOptions options;
            options.training = true;
            options.param_grads = true;
            BatchGraph g = build_batch_graph(model, batch.data(), n, options);
            Tape::Id loss = g.tape.softmax_xent(g.logits, labels);
            g.tape.backward(loss, Tensor::scalar(1.0));

            for (std::size_t i = 0; i < parameters.size(); ++i) {
                const Tensor& grad = g.tape.grad(g.params[i]);
                if (params.use_sgd) {
                    sgd_step(*parameters[i], grad, params.learning_rate);
                } else {
                    adam_step(*parameters[i], grad, adam[i], params.learning_rate);
                }
            }

            loss_sum += g.tape.value(loss)[0] * static_cast<double>(n);
            const Tensor& probs = g.tape.saved_probs(loss);
            for (std::size_t r = 0; r < n; ++r) {
                correct += row_argmax(probs.at(r, 0), probs.at(r, 1)) == labels[r] ? 1.0 : 0.0;
            }
            seen += n;
        }
        if (log) {
            log->train_loss.push_back(loss_sum / static_cast<double>(seen));
            log->train_accuracy.push_back(correct / static_cast<double>(seen));
            if (!val_set.empty()) {
                EvalStats val = evaluate(model, val_set);
                log->val_loss.push_back(val.loss);
                log->val_accuracy.push_back(val.accuracy);
            }
        }
    }
    return model;
}

void export_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write training log to " + path);
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t e = 0; e < log.train_loss.size(); ++e) {
        out << e << "," << fmt(log.train_loss[e]) << "," << fmt(log.train_accuracy[e]) << ",";
        if (e < log.val_loss.size()) out << fmt(log.val_loss[e]) << "," << fmt(log.val_accuracy[e]);
        else out << ",";
        out << "\n";
    }
    if (!out) throw IoError("failed while writing training log to " + path);
}

std::vector<LabeledOutfit> make_shuffled_negatives(const std::vector<Outfit>& positives,
                                                   std::size_t count, std::uint64_t seed) {
    if (positives.size() < 2) throw UsageError("need at least two positive outfits to swap items");
    Rng rng(seed);
    std::vector<LabeledOutfit> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const Outfit& base = positives[rng.index(positives.size())];
        // parts that some other outfit could donate a different item for
        std::vector<std::size_t> swappable;
        for (std::size_t p = 0; p < kPartCount; ++p) {
            if (!base.slots[p]) continue;
            for (const Outfit& donor : positives) {
                if (donor.slots[p] && donor.slots[p]->item_id != base.slots[p]->item_id) {
                    swappable.push_back(p);
                    break;
                }
            }
        }
        if (swappable.empty()) {
            throw UsageError("cannot build negatives: no outfit offers an alternative item for any part of " +
                             base.id);
        }
        const std::size_t p = swappable[rng.index(swappable.size())];
        std::vector<const Outfit*> donors;
        for (const Outfit& candidate : positives) {
            if (candidate.slots[p] && candidate.slots[p]->item_id != base.slots[p]->item_id) {
                donors.push_back(&candidate);
            }
        }
        const Outfit* donor = donors[rng.index(donors.size())];
        LabeledOutfit neg;
        neg.outfit = base;
        neg.outfit.id = "neg-shuffle-" + std::to_string(k);
        neg.outfit.slots[p] = donor->slots[p];
        neg.label = kNegativeClass;
        out.push_back(neg);
    }
    return out;
}

}  // namespace og
