#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "og/outfit.hpp"
#include "og/tape.hpp"
#include "og/tensor.hpp"

namespace og {

inline constexpr std::size_t kEdgeDim = 256;  // 16x16 grid descriptor
inline constexpr std::size_t kColorDim = 9;   // 3 centroids x RGB

inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnEps = 1e-5;

// Layer widths of the three encoder stages. Empty stacks mean the stage is
// the identity and passes its input through untouched.
struct GraderConfig {
    std::vector<std::size_t> k_widths;  // per-feature encoders (edge and colors alike)
    std::vector<std::size_t> g_widths;  // per-part item encoders
    std::size_t h_width = 2048;         // shared outfit encoder output width
    bool batchnorm = true;              // batchnorm on the outfit encoder only
    int preset_id = 0;                  // 0 = custom

    std::size_t encoding_dim(std::size_t raw_dim) const {
        return k_widths.empty() ? raw_dim : k_widths.back();
    }
    std::size_t item_input_dim() const { return encoding_dim(kEdgeDim) + encoding_dim(kColorDim); }
    std::size_t item_code_dim() const {
        return g_widths.empty() ? item_input_dim() : g_widths.back();
    }

    void require_valid() const;
};

// The six stock configurations, from the all-identity baseline (1) to the
// deepest stacks (6). 3 is the best-performing one and the default for
// training at full scale; 4 is the small one used for fast checks.
GraderConfig preset(int id);

// Everything the feature pipeline needs to turn a PNG into model inputs.
// Stored inside the model file so a model can never be fed features computed
// under different constants.
struct PipelineConstants {
    double canny_sigma = 1.4;
    double canny_low = 50.0;
    double canny_high = 150.0;
    int whiteness_threshold = 245;
    std::size_t grid = 16;
    std::size_t palette = 3;
};

struct DenseLayer {
    Tensor w;  // [out, in]
    Tensor b;  // [out]
};

struct BatchNormParams {
    Tensor gamma, beta, running_mean, running_var;
};

struct GraderModel {
    GraderConfig config;
    PipelineConstants pipeline;
    double temperature = 1.0;

    // per-part encoder stacks, indexed by part_index
    std::array<std::vector<DenseLayer>, kPartCount> k_edge;
    std::array<std::vector<DenseLayer>, kPartCount> k_colors;
    std::array<std::vector<DenseLayer>, kPartCount> g;
    DenseLayer h;          // outfit encoder
    BatchNormParams h_bn;  // live iff config.batchnorm
    DenseLayer head;       // [2, h_width] -> logits [s_pos, s_neg]

    // Trainable tensors in the fixed canonical order (running stats excluded).
    std::vector<Tensor*> parameters();
    // Every tensor that must survive serialization, running stats included.
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::size_t parameter_count() const;
};

// Glorot-uniform weights, zero biases, unit batchnorm; deterministic in seed.
GraderModel init_model(const GraderConfig& config, std::uint64_t seed);

// All tensors at their final shapes but zero-valued (batchnorm at identity);
// deserialization fills these in.
GraderModel make_model_shell(const GraderConfig& config);

// Every intermediate of one outfit's forward pass, as row vectors.
struct ForwardTrace {
    std::array<std::optional<Tensor>, kPartCount> edge_encoding;    // x_{i,edge}
    std::array<std::optional<Tensor>, kPartCount> colors_encoding;  // x_{i,colors}
    std::array<Tensor, kPartCount> item_code;                       // phi_i, zero when absent
    Tensor outfit_code;                                             // Phi
    Tensor logits;                                                  // [s_pos, s_neg]
};

ForwardTrace forward(const GraderModel& model, const Outfit& outfit);

// 100 * P(positive) with the model's fitted temperature inside the softmax.
double score(const GraderModel& model, const Outfit& outfit);

// Logits for a batch of outfits, one row each. All scoring-at-scale routes
// through this so a dataset is always graded by one code path.
Tensor logits_batch(const GraderModel& model, const std::vector<const Outfit*>& outfits);
std::vector<double> score_batch(const GraderModel& model, const std::vector<const Outfit*>& outfits);

// The tape graph of one batched forward pass. Training wants gradients on the
// parameters; attribution wants them on the feature encodings; plain scoring
// wants neither.
struct BatchGraph {
    Tape tape;
    std::vector<Tape::Id> params;  // aligned with GraderModel::parameters()
    std::array<Tape::Id, kPartCount> edge_leaf{}, colors_leaf{};  // -1 when the part is empty batch-wide
    std::array<Tape::Id, kPartCount> edge_enc{}, colors_enc{};
    std::array<Tape::Id, kPartCount> phi{};
    Tape::Id outfit_code = -1;
    Tape::Id logits = -1;
};

struct BatchGraphOptions {
    bool training = false;       // batchnorm mode; training also updates running stats
    bool feature_grads = false;  // request gradients at the raw-feature leaves
    bool param_grads = false;    // request gradients at the parameter leaves
};

BatchGraph build_batch_graph(GraderModel& model, const Outfit* const* outfits, std::size_t count,
                             const BatchGraphOptions& options);

// Post-encoder inputs of one outfit: the pair (edge encoding, colors
// encoding) for each present part. This is the layer attribution
// differentiates at, and the layer finite-difference checks perturb.
struct EncodingSet {
    std::array<std::optional<Tensor>, kPartCount> edge, colors;
};

EncodingSet encode_features(const GraderModel& model, const Outfit& outfit);

// Evaluates the network from the encodings down to the logits (eval-mode
// batchnorm), bypassing the feature encoders entirely.
Tensor logits_from_encodings(const GraderModel& model, const EncodingSet& encodings);

// x W^T + b applied to every row of x ([rows, in] -> [rows, out]). Shaped as
// a matrix-matrix product even for a single row so the arithmetic order never
// depends on where the buffers happen to sit in memory.
Tensor dense_rows(const Tensor& x, const DenseLayer& layer);

// relu(dense) through a whole stack; an empty stack returns the input as is.
Tensor stack_rows(Tensor x, const std::vector<DenseLayer>& stack);

}  // namespace og
