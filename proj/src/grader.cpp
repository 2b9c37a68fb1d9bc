#include "og/grader.hpp"

#include <Eigen/Dense>

#include <unordered_map>
#include <utility>

#include "og/rng.hpp"
#include "og/softmax.hpp"

namespace og {

namespace {

constexpr std::array<std::string_view, kPartCount> kPartNames = {
    "outer", "upper", "lower", "full", "feet", "accessory0", "accessory1", "accessory2",
};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void relu_inplace(Tensor& t) {
    for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

// y = x W^T + b for a single row vector, without the tape.
Tensor dense_row(const Tensor& x, const DenseLayer& layer) {
    const std::size_t in = layer.w.shape[1];
    if (x.rank() != 1 || x.size() != in) {
        throw DimensionError("dense layer expects input [" + std::to_string(in) + "], got " +
                             x.shape_string());
    }
    Tensor wide = x;
    wide.shape = {1, in};
    Tensor y = dense_rows(wide, layer);
    y.shape = {y.shape[1]};
    return y;
}

Tensor stack_row(Tensor x, const std::vector<DenseLayer>& stack) {
    for (const DenseLayer& layer : stack) {
        x = dense_row(x, layer);
        relu_inplace(x);
    }
    return x;
}

Tensor row_of(const Tensor& t, std::size_t r) {
    const std::size_t width = t.shape[1];
    Tensor out = Tensor::zeros({width});
    for (std::size_t c = 0; c < width; ++c) out[c] = t.at(r, c);
    return out;
}

DenseLayer make_layer(std::size_t out, std::size_t in) {
    return DenseLayer{Tensor::zeros({out, in}), Tensor::zeros({out})};
}

std::vector<DenseLayer> make_stack(std::size_t input, const std::vector<std::size_t>& widths) {
    std::vector<DenseLayer> stack;
    std::size_t prev = input;
    for (std::size_t w : widths) {
        stack.push_back(make_layer(w, prev));
        prev = w;
    }
    return stack;
}

// All tensors at their final shapes, still zero-valued.
GraderModel make_shell(const GraderConfig& config) {
    config.require_valid();
    GraderModel m;
    m.config = config;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        m.k_edge[p] = make_stack(kEdgeDim, config.k_widths);
        m.k_colors[p] = make_stack(kColorDim, config.k_widths);
        m.g[p] = make_stack(config.item_input_dim(), config.g_widths);
    }
    m.h = make_layer(config.h_width, kPartCount * config.item_code_dim());
    if (config.batchnorm) {
        m.h_bn.gamma = Tensor::zeros({config.h_width});
        m.h_bn.beta = Tensor::zeros({config.h_width});
        m.h_bn.running_mean = Tensor::zeros({config.h_width});
        m.h_bn.running_var = Tensor::zeros({config.h_width});
        m.h_bn.gamma.fill(1.0);
        m.h_bn.running_var.fill(1.0);
    }
    m.head = make_layer(2, config.h_width);
    return m;
}

void glorot_fill(DenseLayer& layer, Rng& rng) {
    const double fan_out = static_cast<double>(layer.w.shape[0]);
    const double fan_in = static_cast<double>(layer.w.shape[1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : layer.w.data) v = rng.uniform(-limit, limit);
    // biases stay zero
}

void check_features(const Outfit& outfit, PartId part) {
    const ItemFeatures& item = outfit.item(part);
    if (item.edge.values.size() != kEdgeDim) {
        throw DimensionError("outfit " + outfit.id + " part " + std::string(part_name(part)) +
                             ": edge descriptor has " + std::to_string(item.edge.values.size()) +
                             " values, expected " + std::to_string(kEdgeDim));
    }
}

}  // namespace

std::string_view part_name(PartId p) { return kPartNames[part_index(p)]; }

PartId part_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kPartCount; ++i) {
        if (kPartNames[i] == name) return kAllParts[i];
    }
    throw UsageError("unknown part name '" + std::string(name) + "'");
}

void GraderConfig::require_valid() const {
    for (std::size_t w : k_widths) {
        if (w == 0) throw UsageError("feature encoder widths must be positive");
    }
    for (std::size_t w : g_widths) {
        if (w == 0) throw UsageError("item encoder widths must be positive");
    }
    if (h_width == 0) throw UsageError("outfit encoder width must be positive");
}

GraderConfig preset(int id) {
    GraderConfig c;
    c.preset_id = id;
    switch (id) {
        case 1: c.k_widths = {}; c.g_widths = {}; c.h_width = 4096; break;
        case 2: c.k_widths = {128}; c.g_widths = {1024}; c.h_width = 2048; break;
        case 3: c.k_widths = {1024}; c.g_widths = {1024}; c.h_width = 2048; break;
        case 4: c.k_widths = {128}; c.g_widths = {128}; c.h_width = 128; break;
        case 5: c.k_widths = {128, 64}; c.g_widths = {512, 256}; c.h_width = 2048; break;
        case 6: c.k_widths = {128, 64, 32}; c.g_widths = {512, 256}; c.h_width = 2048; break;
        default: throw UsageError("preset id must be in 1..6, got " + std::to_string(id));
    }
    return c;
}

std::vector<Tensor*> GraderModel::parameters() {
    std::vector<Tensor*> out;
    auto add_stack = [&](std::vector<DenseLayer>& stack) {
        for (DenseLayer& layer : stack) {
            out.push_back(&layer.w);
            out.push_back(&layer.b);
        }
    };
    for (std::size_t p = 0; p < kPartCount; ++p) {
        add_stack(k_edge[p]);
        add_stack(k_colors[p]);
        add_stack(g[p]);
    }
    out.push_back(&h.w);
    out.push_back(&h.b);
    if (config.batchnorm) {
        out.push_back(&h_bn.gamma);
        out.push_back(&h_bn.beta);
    }
    out.push_back(&head.w);
    out.push_back(&head.b);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> GraderModel::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add_stack = [&](const std::string& prefix, std::vector<DenseLayer>& stack) {
        for (std::size_t l = 0; l < stack.size(); ++l) {
            out.emplace_back(prefix + "." + std::to_string(l) + ".w", &stack[l].w);
            out.emplace_back(prefix + "." + std::to_string(l) + ".b", &stack[l].b);
        }
    };
    for (std::size_t p = 0; p < kPartCount; ++p) {
        const std::string part(part_name(kAllParts[p]));
        add_stack("k_edge." + part, k_edge[p]);
        add_stack("k_colors." + part, k_colors[p]);
        add_stack("g." + part, g[p]);
    }
    out.emplace_back("h.w", &h.w);
    out.emplace_back("h.b", &h.b);
    if (config.batchnorm) {
        out.emplace_back("h_bn.gamma", &h_bn.gamma);
        out.emplace_back("h_bn.beta", &h_bn.beta);
        out.emplace_back("h_bn.running_mean", &h_bn.running_mean);
        out.emplace_back("h_bn.running_var", &h_bn.running_var);
    }
    out.emplace_back("head.w", &head.w);
    out.emplace_back("head.b", &head.b);
    return out;
}

std::size_t GraderModel::parameter_count() const {
    std::size_t n = 0;
    for (Tensor* t : const_cast<GraderModel*>(this)->parameters()) n += t->size();
    return n;
}

GraderModel init_model(const GraderConfig& config, std::uint64_t seed) {
    GraderModel m = make_shell(config);
    Rng rng(seed);
    for (std::size_t p = 0; p < kPartCount; ++p) {
        for (DenseLayer& layer : m.k_edge[p]) glorot_fill(layer, rng);
        for (DenseLayer& layer : m.k_colors[p]) glorot_fill(layer, rng);
        for (DenseLayer& layer : m.g[p]) glorot_fill(layer, rng);
    }
    glorot_fill(m.h, rng);
    glorot_fill(m.head, rng);
    return m;
}

GraderModel make_model_shell(const GraderConfig& config) { return make_shell(config); }

BatchGraph build_batch_graph(GraderModel& model, const Outfit* const* outfits, std::size_t count,
                             const BatchGraphOptions& options) {
    if (count == 0) throw UsageError("cannot build a forward graph over zero outfits");
    model.config.require_valid();
    for (std::size_t r = 0; r < count; ++r) outfits[r]->require_valid();

    BatchGraph g;
    Tape& tape = g.tape;

    std::unordered_map<const Tensor*, Tape::Id> leaf_of;
    for (Tensor* p : model.parameters()) {
        Tape::Id id = tape.leaf(p, options.param_grads);
        leaf_of.emplace(p, id);
        g.params.push_back(id);
    }

    auto apply_stack = [&](Tape::Id x, const std::vector<DenseLayer>& stack) {
        for (const DenseLayer& layer : stack) {
            x = tape.relu(tape.linear(x, leaf_of.at(&layer.w), leaf_of.at(&layer.b)));
        }
        return x;
    };

    const std::size_t code_dim = model.config.item_code_dim();
    std::vector<Tape::Id> blocks;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        std::vector<std::uint8_t> present(count, 0);
        std::size_t present_count = 0;
        for (std::size_t r = 0; r < count; ++r) {
            if (outfits[r]->has(kAllParts[p])) {
                present[r] = 1;
                ++present_count;
            }
        }
        if (present_count == 0) {
            // the whole column block is zero; no need to run the encoders
            g.edge_leaf[p] = g.colors_leaf[p] = -1;
            g.edge_enc[p] = g.colors_enc[p] = -1;
            g.phi[p] = tape.leaf(Tensor::zeros({count, code_dim}), false);
            blocks.push_back(g.phi[p]);
            continue;
        }
        Tensor edge_raw = Tensor::zeros({count, kEdgeDim});
        Tensor colors_raw = Tensor::zeros({count, kColorDim});
        for (std::size_t r = 0; r < count; ++r) {
            if (!present[r]) continue;
            check_features(*outfits[r], kAllParts[p]);
            const ItemFeatures& item = outfits[r]->item(kAllParts[p]);
            for (std::size_t c = 0; c < kEdgeDim; ++c) edge_raw.at(r, c) = item.edge.values[c];
            for (std::size_t c = 0; c < kColorDim; ++c) colors_raw.at(r, c) = item.colors.values[c];
        }
        g.edge_leaf[p] = tape.leaf(std::move(edge_raw), options.feature_grads);
        g.colors_leaf[p] = tape.leaf(std::move(colors_raw), options.feature_grads);
        g.edge_enc[p] = apply_stack(g.edge_leaf[p], model.k_edge[p]);
        g.colors_enc[p] = apply_stack(g.colors_leaf[p], model.k_colors[p]);
        Tape::Id item_input = tape.concat_cols({g.edge_enc[p], g.colors_enc[p]});
        Tape::Id phi = apply_stack(item_input, model.g[p]);
        if (present_count < count) phi = tape.row_mask(phi, present);
        g.phi[p] = phi;
        blocks.push_back(phi);
    }

    Tape::Id cat = tape.concat_cols(blocks);
    Tape::Id z = tape.linear(cat, leaf_of.at(&model.h.w), leaf_of.at(&model.h.b));
    if (model.config.batchnorm) {
        z = tape.batchnorm(z, leaf_of.at(&model.h_bn.gamma), leaf_of.at(&model.h_bn.beta),
                           &model.h_bn.running_mean, &model.h_bn.running_var, options.training,
                           kBnMomentum, kBnEps);
    }
    g.outfit_code = tape.relu(z);
    g.logits = tape.linear(g.outfit_code, leaf_of.at(&model.head.w), leaf_of.at(&model.head.b));
    return g;
}

ForwardTrace forward(const GraderModel& model, const Outfit& outfit) {
    // eval-mode batchnorm only reads the running stats, so the model is not
    // actually mutated here
    GraderModel& m = const_cast<GraderModel&>(model);
    const Outfit* ptr = &outfit;
    BatchGraph g = build_batch_graph(m, &ptr, 1, BatchGraphOptions{});

    ForwardTrace trace;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        if (g.edge_enc[p] != -1) {
            trace.edge_encoding[p] = row_of(g.tape.value(g.edge_enc[p]), 0);
            trace.colors_encoding[p] = row_of(g.tape.value(g.colors_enc[p]), 0);
        }
        trace.item_code[p] = row_of(g.tape.value(g.phi[p]), 0);
    }
    trace.outfit_code = row_of(g.tape.value(g.outfit_code), 0);
    trace.logits = row_of(g.tape.value(g.logits), 0);
    return trace;
}

double score(const GraderModel& model, const Outfit& outfit) {
    ForwardTrace trace = forward(model, outfit);
    Tensor probs = softmax_probability(trace.logits, model.temperature);
    return 100.0 * probs[kPositiveClass];
}

Tensor logits_batch(const GraderModel& model, const std::vector<const Outfit*>& outfits) {
    if (outfits.empty()) throw UsageError("cannot score an empty outfit list");
    GraderModel& m = const_cast<GraderModel&>(model);
    Tensor out = Tensor::zeros({outfits.size(), 2});
    // fixed chunk size keeps memory bounded and makes the result independent
    // of how callers assemble their lists
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < outfits.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, outfits.size() - start);
        BatchGraph g = build_batch_graph(m, outfits.data() + start, n, BatchGraphOptions{});
        const Tensor& logits = g.tape.value(g.logits);
        for (std::size_t r = 0; r < n; ++r) {
            out.at(start + r, 0) = logits.at(r, 0);
            out.at(start + r, 1) = logits.at(r, 1);
        }
    }
    return out;
}

std::vector<double> score_batch(const GraderModel& model, const std::vector<const Outfit*>& outfits) {
    Tensor logits = logits_batch(model, outfits);
    std::vector<double> scores(outfits.size());
    for (std::size_t r = 0; r < outfits.size(); ++r) {
        Tensor probs = softmax_probability(row_of(logits, r), model.temperature);
        scores[r] = 100.0 * probs[kPositiveClass];
    }
    return scores;
}

EncodingSet encode_features(const GraderModel& model, const Outfit& outfit) {
    outfit.require_valid();
    EncodingSet enc;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        if (!outfit.has(kAllParts[p])) continue;
        check_features(outfit, kAllParts[p]);
        const ItemFeatures& item = outfit.item(kAllParts[p]);
        enc.edge[p] = stack_row(Tensor::vector(item.edge.values), model.k_edge[p]);
        enc.colors[p] = stack_row(Tensor::vector(item.colors.as_vector()), model.k_colors[p]);
    }
    return enc;
}

Tensor logits_from_encodings(const GraderModel& model, const EncodingSet& encodings) {
    const std::size_t edge_dim = model.config.encoding_dim(kEdgeDim);
    const std::size_t colors_dim = model.config.encoding_dim(kColorDim);
    const std::size_t code_dim = model.config.item_code_dim();

    Tensor cat = Tensor::zeros({kPartCount * code_dim});
    bool any = false;
    for (std::size_t p = 0; p < kPartCount; ++p) {
        const bool has_edge = encodings.edge[p].has_value();
        if (has_edge != encodings.colors[p].has_value()) {
            throw InvariantError("part " + std::string(part_name(kAllParts[p])) +
                                 " has only one of its two feature encodings");
        }
        if (!has_edge) continue;
        any = true;
        if (encodings.edge[p]->size() != edge_dim || encodings.colors[p]->size() != colors_dim) {
            throw DimensionError("encoding sizes " + encodings.edge[p]->shape_string() + "/" +
                                 encodings.colors[p]->shape_string() + " do not match the model");
        }
        Tensor x = Tensor::zeros({edge_dim + colors_dim});
        for (std::size_t i = 0; i < edge_dim; ++i) x[i] = (*encodings.edge[p])[i];
        for (std::size_t i = 0; i < colors_dim; ++i) x[edge_dim + i] = (*encodings.colors[p])[i];
        Tensor phi = stack_row(std::move(x), model.g[p]);
        for (std::size_t i = 0; i < code_dim; ++i) cat[p * code_dim + i] = phi[i];
    }
    if (!any) throw InvariantError("encoding set is empty; at least one part must be present");

    Tensor z = dense_row(cat, model.h);
    if (model.config.batchnorm) {
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double inv_std = 1.0 / std::sqrt(model.h_bn.running_var[i] + kBnEps);
            const double xhat = (z[i] - model.h_bn.running_mean[i]) * inv_std;
            z[i] = xhat * model.h_bn.gamma[i] + model.h_bn.beta[i];
        }
    }
    relu_inplace(z);
    return dense_row(z, model.head);
}

Tensor dense_rows(const Tensor& x, const DenseLayer& layer) {
    const std::size_t out = layer.w.shape[0];
    const std::size_t in = layer.w.shape[1];
    if (x.rank() != 2 || x.shape[1] != in) {
        throw DimensionError("dense layer expects input [*x" + std::to_string(in) + "], got " +
                             x.shape_string());
    }
    const std::size_t rows = x.shape[0];
    Tensor y = Tensor::zeros({rows, out});
    Eigen::Map<const RowMajor> w(layer.w.data.data(), static_cast<Eigen::Index>(out),
                                 static_cast<Eigen::Index>(in));
    Eigen::Map<const RowMajor> xm(x.data.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(in));
    Eigen::Map<RowMajor> ym(y.data.data(), static_cast<Eigen::Index>(rows),
                            static_cast<Eigen::Index>(out));
    ym.noalias() = xm * w.transpose();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < out; ++i) y.at(r, i) += layer.b[i];
    }
    return y;
}

Tensor stack_rows(Tensor x, const std::vector<DenseLayer>& stack) {
    for (const DenseLayer& layer : stack) {
        x = dense_rows(x, layer);
        relu_inplace(x);
    }
    return x;
}

}  // namespace og
