#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "og/grader.hpp"
#include "og/model_io.hpp"
#include "og/rng.hpp"
#include "og/softmax.hpp"
#include "og/trainer.hpp"

namespace {

bool close(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

og::ItemFeatures random_item(og::Rng& rng, const std::string& id) {
    og::ItemFeatures f;
    f.item_id = id;
    f.edge.values.resize(og::kEdgeDim);
    for (auto& v : f.edge.values) v = rng.uniform();
    for (auto& v : f.colors.values) v = rng.uniform(1.0, 2.0);
    return f;
}

og::Outfit random_outfit(og::Rng& rng, const std::string& id) {
    og::Outfit o;
    o.id = id;
    while (o.item_count() == 0) {
        for (std::size_t p = 0; p < og::kPartCount; ++p) {
            if (rng.uniform() < 0.6) o.slots[p] = random_item(rng, id + "-" + std::to_string(p));
        }
    }
    return o;
}

og::GraderConfig tiny_config(bool batchnorm) {
    og::GraderConfig c;
    c.k_widths = {5};
    c.g_widths = {7};
    c.h_width = 11;
    c.batchnorm = batchnorm;
    return c;
}

// plain-loop re-implementation of the whole eval-mode forward pass
std::vector<double> naive_dense(const std::vector<double>& x, const og::DenseLayer& l) {
    const std::size_t out = l.w.shape[0];
    const std::size_t in = l.w.shape[1];
    REQUIRE(x.size() == in);
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < in; ++i) s += l.w.at(o, i) * x[i];
        y[o] = s + l.b[o];
    }
    return y;
}

std::vector<double> naive_stack(std::vector<double> x, const std::vector<og::DenseLayer>& stack) {
    for (const auto& l : stack) {
        x = naive_dense(x, l);
        for (auto& v : x) v = v > 0.0 ? v : 0.0;
    }
    return x;
}

std::vector<double> naive_logits(const og::GraderModel& m, const og::Outfit& o) {
    const std::size_t code = m.config.item_code_dim();
    std::vector<double> cat(og::kPartCount * code, 0.0);
    for (std::size_t p = 0; p < og::kPartCount; ++p) {
        if (!o.slots[p]) continue;
        std::vector<double> e = naive_stack(o.slots[p]->edge.values, m.k_edge[p]);
        std::vector<double> c = naive_stack(o.slots[p]->colors.as_vector(), m.k_colors[p]);
        std::vector<double> x = e;
        x.insert(x.end(), c.begin(), c.end());
        std::vector<double> phi = naive_stack(x, m.g[p]);
        for (std::size_t i = 0; i < code; ++i) cat[p * code + i] = phi[i];
    }
    std::vector<double> z = naive_dense(cat, m.h);
    if (m.config.batchnorm) {
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double inv = 1.0 / std::sqrt(m.h_bn.running_var[i] + og::kBnEps);
            z[i] = (z[i] - m.h_bn.running_mean[i]) * inv * m.h_bn.gamma[i] + m.h_bn.beta[i];
        }
    }
    for (auto& v : z) v = v > 0.0 ? v : 0.0;
    return naive_dense(z, m.head);
}

// toy set: label decided by the first two edge cells with a wide margin;
// classes alternate so any prefix of length >= 2 contains both
std::vector<og::LabeledOutfit> separable_toy(std::size_t count, og::Rng& rng) {
    std::vector<og::LabeledOutfit> set;
    while (set.size() < count) {
        double a = rng.uniform();
        double b = rng.uniform();
        if (std::abs(a - b) < 0.15) continue;
        if ((a > b) != (set.size() % 2 == 0)) std::swap(a, b);
        og::LabeledOutfit lo;
        lo.outfit.id = "toy-" + std::to_string(set.size());
        og::ItemFeatures f;
        f.item_id = lo.outfit.id;
        f.edge.values.assign(og::kEdgeDim, 0.0);
        f.edge.values[0] = a;
        f.edge.values[1] = b;
        for (auto& v : f.colors.values) v = 1.5;
        lo.outfit.slots[og::part_index(og::PartId::upper)] = f;
        lo.label = a > b ? og::kPositiveClass : og::kNegativeClass;
        set.push_back(lo);
    }
    return set;
}

bool tensors_equal(const og::Tensor& a, const og::Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
}

bool models_equal(og::GraderModel& a, og::GraderModel& b) {
    auto ta = a.named_tensors();
    auto tb = b.named_tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].first != tb[i].first) return false;
        if (!tensors_equal(*ta[i].second, *tb[i].second)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("part names round-trip and reject strangers") {
    for (og::PartId p : og::kAllParts) {
        CHECK(og::part_from_name(og::part_name(p)) == p);
    }
    CHECK(og::part_name(og::PartId::outer) == "outer");
    CHECK(og::part_name(og::PartId::accessory2) == "accessory2");
    CHECK_THROWS_AS(og::part_from_name("hat"), og::UsageError);
}

TEST_CASE("stock configurations match the published table") {
    og::GraderConfig c3 = og::preset(3);
    CHECK(c3.k_widths == std::vector<std::size_t>{1024});
    CHECK(c3.g_widths == std::vector<std::size_t>{1024});
    CHECK(c3.h_width == 2048);

    og::GraderConfig c1 = og::preset(1);
    CHECK(c1.k_widths.empty());
    CHECK(c1.g_widths.empty());
    CHECK(c1.h_width == 4096);

    CHECK(og::preset(2).k_widths == std::vector<std::size_t>{128});
    CHECK(og::preset(2).g_widths == std::vector<std::size_t>{1024});
    CHECK(og::preset(4).h_width == 128);
    CHECK(og::preset(5).k_widths == std::vector<std::size_t>{128, 64});
    CHECK(og::preset(5).g_widths == std::vector<std::size_t>{512, 256});
    CHECK(og::preset(6).k_widths == std::vector<std::size_t>{128, 64, 32});
    CHECK(og::preset(6).g_widths == std::vector<std::size_t>{512, 256});
    CHECK(og::preset(6).h_width == 2048);

    CHECK_THROWS_AS(og::preset(0), og::UsageError);
    CHECK_THROWS_AS(og::preset(7), og::UsageError);
}

TEST_CASE("the full-scale configuration carries the expected dense parameter count") {
    og::GraderConfig config = og::preset(3);
    config.batchnorm = false;
    og::GraderModel plain = og::make_model_shell(config);
    CHECK(plain.parameter_count() == 35756034);

    config.batchnorm = true;
    og::GraderModel bn = og::make_model_shell(config);
    // batchnorm adds scale and shift over the outfit code
    CHECK(bn.parameter_count() == 35756034 + 2 * 2048);
}

TEST_CASE("config validation rejects zero widths") {
    og::GraderConfig c = tiny_config(false);
    c.h_width = 0;
    CHECK_THROWS_AS(og::make_model_shell(c), og::UsageError);
    c = tiny_config(false);
    c.k_widths = {4, 0};
    CHECK_THROWS_AS(og::make_model_shell(c), og::UsageError);
    c = tiny_config(false);
    c.g_widths = {0};
    CHECK_THROWS_AS(og::make_model_shell(c), og::UsageError);
}

TEST_CASE("forward matches a straight-line reimplementation") {
    og::Rng rng(801);
    for (int trial = 0; trial < 12; ++trial) {
        og::GraderConfig config = tiny_config(trial % 2 == 0);
        og::GraderModel model = og::init_model(config, rng.next_u64());
        if (config.batchnorm) {
            for (auto& v : model.h_bn.running_mean.data) v = rng.uniform(-0.5, 0.5);
            for (auto& v : model.h_bn.running_var.data) v = rng.uniform(0.5, 1.5);
            for (auto& v : model.h_bn.gamma.data) v = rng.uniform(0.5, 1.5);
            for (auto& v : model.h_bn.beta.data) v = rng.uniform(-0.2, 0.2);
        }
        og::Outfit outfit = random_outfit(rng, "fx-" + std::to_string(trial));
        og::ForwardTrace trace = og::forward(model, outfit);
        std::vector<double> expected = naive_logits(model, outfit);
        REQUIRE(trace.logits.size() == 2);
        CHECK(close(trace.logits[0], expected[0], 1e-12));
        CHECK(close(trace.logits[1], expected[1], 1e-12));
    }
}

TEST_CASE("identity encoders pass raw features through bitwise") {
    og::GraderConfig config;
    config.k_widths = {};
    config.g_widths = {};
    config.h_width = 16;
    config.batchnorm = false;
    og::GraderModel model = og::init_model(config, 5);
    og::Rng rng(6);
    og::Outfit outfit = random_outfit(rng, "identity");
    og::ForwardTrace trace = og::forward(model, outfit);
    for (std::size_t p = 0; p < og::kPartCount; ++p) {
        if (!outfit.slots[p]) {
            CHECK(!trace.edge_encoding[p].has_value());
            continue;
        }
        REQUIRE(trace.edge_encoding[p].has_value());
        CHECK(trace.edge_encoding[p]->data == outfit.slots[p]->edge.values);
        CHECK(trace.colors_encoding[p]->data == outfit.slots[p]->colors.as_vector());
        // with no item encoder the item code is the plain concatenation
        std::vector<double> cat = outfit.slots[p]->edge.values;
        auto colors = outfit.slots[p]->colors.as_vector();
        cat.insert(cat.end(), colors.begin(), colors.end());
        CHECK(trace.item_code[p].data == cat);
    }
}

TEST_CASE("absent parts produce exactly zero item codes") {
    og::Rng rng(7);
    og::GraderModel model = og::init_model(tiny_config(false), 7);
    og::Outfit outfit;
    outfit.id = "sparse";
    outfit.slots[og::part_index(og::PartId::feet)] = random_item(rng, "feet-item");
    og::ForwardTrace trace = og::forward(model, outfit);
    for (std::size_t p = 0; p < og::kPartCount; ++p) {
        if (og::kAllParts[p] == og::PartId::feet) continue;
        CHECK(!trace.edge_encoding[p].has_value());
        for (double v : trace.item_code[p].data) CHECK(v == 0.0);
    }

    // mixed batch: the absent row of a partially-present part is zeroed too
    og::Outfit other = random_outfit(rng, "dense");
    other.slots[og::part_index(og::PartId::feet)] = random_item(rng, "feet-2");
    other.slots[og::part_index(og::PartId::upper)] = random_item(rng, "upper-2");
    const og::Outfit* batch[2] = {&outfit, &other};
    og::BatchGraph g = og::build_batch_graph(model, batch, 2, og::BatchGraphOptions{});
    const std::size_t upper = og::part_index(og::PartId::upper);
    const og::Tensor& phi = g.tape.value(g.phi[upper]);
    for (std::size_t c = 0; c < phi.shape[1]; ++c) CHECK(phi.at(0, c) == 0.0);
}

TEST_CASE("slot identity rather than insertion order decides the forward pass") {
    og::Rng rng(8);
    og::GraderModel model = og::init_model(tiny_config(true), 9);
    og::ItemFeatures upper = random_item(rng, "u");
    og::ItemFeatures feet = random_item(rng, "f");
    og::Outfit a, b;
    a.id = b.id = "same";
    a.slots[og::part_index(og::PartId::upper)] = upper;
    a.slots[og::part_index(og::PartId::feet)] = feet;
    b.slots[og::part_index(og::PartId::feet)] = feet;
    b.slots[og::part_index(og::PartId::upper)] = upper;
    og::ForwardTrace ta = og::forward(model, a);
    og::ForwardTrace tb = og::forward(model, b);
    CHECK(ta.logits.data == tb.logits.data);
    CHECK(ta.outfit_code.data == tb.outfit_code.data);
}

TEST_CASE("repeated forward passes are bitwise deterministic") {
    og::Rng rng(10);
    og::GraderModel model = og::init_model(tiny_config(true), 11);
    og::Outfit outfit = random_outfit(rng, "det");
    og::ForwardTrace t1 = og::forward(model, outfit);
    og::ForwardTrace t2 = og::forward(model, outfit);
    CHECK(t1.logits.data == t2.logits.data);
}

TEST_CASE("zero outfit-encoder weights reduce the logits to the head bias") {
    og::GraderConfig config;
    config.k_widths = {};
    config.g_widths = {};
    config.h_width = 8;
    config.batchnorm = false;
    og::GraderModel model = og::init_model(config, 12);
    model.h.w.fill(0.0);
    model.head.w.fill(0.0);
    model.head.b[0] = 0.3;
    model.head.b[1] = -0.2;
    og::Rng rng(13);
    for (int i = 0; i < 5; ++i) {
        og::ForwardTrace t = og::forward(model, random_outfit(rng, "bias-" + std::to_string(i)));
        CHECK(t.logits[0] == 0.3);
        CHECK(t.logits[1] == -0.2);
    }
}

TEST_CASE("score is the temperature-scaled positive probability on a 0..100 scale") {
    og::GraderConfig config;
    config.k_widths = {};
    config.g_widths = {};
    config.h_width = 4;
    config.batchnorm = false;
    og::GraderModel model = og::init_model(config, 14);
    model.h.w.fill(0.0);
    model.head.w.fill(0.0);
    og::Rng rng(15);
    og::Outfit outfit = random_outfit(rng, "score");

    model.head.b[0] = model.head.b[1] = 1.0;
    for (double t : {0.5, 1.0, 6.77}) {
        model.temperature = t;
        CHECK(og::score(model, outfit) == 50.0);  // equal logits stay at the fence for any T
    }

    model.head.b[0] = 2.0;
    model.head.b[1] = 0.0;
    model.temperature = 1.0;
    CHECK(close(og::score(model, outfit), 100.0 / (1.0 + std::exp(-2.0)), 1e-12));
    model.temperature = 2.0;
    CHECK(close(og::score(model, outfit), 100.0 / (1.0 + std::exp(-1.0)), 1e-12));

    // strictly increasing in the logit gap at fixed temperature
    model.temperature = 1.0;
    double prev = -1.0;
    for (double gap : {-1.0, 0.0, 0.5, 2.0, 5.0}) {
        model.head.b[0] = gap;
        model.head.b[1] = 0.0;
        double s = og::score(model, outfit);
        CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("forward rejects feature vectors of the wrong width") {
    og::GraderModel model = og::init_model(tiny_config(false), 16);
    og::Outfit outfit;
    outfit.id = "bad";
    og::ItemFeatures f;
    f.edge.values.assign(5, 0.25);
    outfit.slots[0] = f;
    CHECK_THROWS_AS(og::forward(model, outfit), og::DimensionError);

    og::Outfit empty;
    empty.id = "empty";
    CHECK_THROWS_AS(og::forward(model, empty), og::InvariantError);
}

TEST_CASE("training separates a linearly separable toy problem") {
    og::Rng rng(17);
    std::vector<og::LabeledOutfit> train_set = separable_toy(60, rng);
    std::vector<og::LabeledOutfit> val_set = separable_toy(20, rng);

    og::GraderConfig config;
    config.k_widths = {};
    config.g_widths = {};
    config.h_width = 16;
    config.batchnorm = false;

    og::TrainParams params;
    params.epochs = 120;
    params.learning_rate = 0.01;
    params.batch_size = 16;
    params.seed = 18;

    og::TrainLog log;
    og::GraderModel model = og::train(train_set, val_set, config, params, &log);
    REQUIRE(log.train_loss.size() == params.epochs);
    REQUIRE(log.val_loss.size() == params.epochs);
    CHECK(log.train_loss.back() < log.train_loss.front());
    CHECK(log.train_accuracy.back() == 1.0);
    CHECK(og::evaluate(model, train_set).accuracy == 1.0);
    CHECK(og::evaluate(model, val_set).accuracy == 1.0);
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
    og::Rng rng(19);
    std::vector<og::LabeledOutfit> set = separable_toy(24, rng);
    og::GraderConfig config = tiny_config(false);

    og::TrainParams frozen;
    frozen.epochs = 3;
    frozen.learning_rate = 0.0;
    frozen.batch_size = 8;
    frozen.seed = 20;
    og::GraderModel trained = og::train(set, {}, config, frozen, nullptr);

    og::TrainParams untouched = frozen;
    untouched.epochs = 0;
    og::GraderModel fresh = og::train(set, {}, config, untouched, nullptr);

    CHECK(models_equal(trained, fresh));
}

TEST_CASE("identical seeds give bit-identical trained models") {
    og::Rng rng(21);
    std::vector<og::LabeledOutfit> set = separable_toy(30, rng);
    og::GraderConfig config = tiny_config(true);
    og::TrainParams params;
    params.epochs = 4;
    params.learning_rate = 0.01;
    params.batch_size = 10;
    params.seed = 22;

    og::GraderModel a = og::train(set, {}, config, params, nullptr);
    og::GraderModel b = og::train(set, {}, config, params, nullptr);
    CHECK(models_equal(a, b));

    params.seed = 23;
    og::GraderModel c = og::train(set, {}, config, params, nullptr);
    CHECK(!models_equal(a, c));
}

TEST_CASE("degenerate training requests are rejected") {
    og::Rng rng(24);
    std::vector<og::LabeledOutfit> set = separable_toy(10, rng);
    og::GraderConfig config = tiny_config(false);
    og::TrainParams params;
    params.epochs = 1;
    params.batch_size = 4;

    std::vector<og::LabeledOutfit> single;
    for (const auto& lo : set) {
        if (lo.label == og::kPositiveClass) single.push_back(lo);
    }
    CHECK_THROWS_AS(og::train(single, {}, config, params, nullptr), og::UsageError);

    params.batch_size = set.size() + 1;
    CHECK_THROWS_AS(og::train(set, {}, config, params, nullptr), og::UsageError);

    params.batch_size = 4;
    CHECK_THROWS_AS(og::train({}, {}, config, params, nullptr), og::UsageError);
}

TEST_CASE("a trailing batch of one row does not break batchnorm training") {
    og::Rng rng(25);
    std::vector<og::LabeledOutfit> set = separable_toy(5, rng);
    og::GraderConfig config = tiny_config(true);
    og::TrainParams params;
    params.epochs = 2;
    params.learning_rate = 0.01;
    params.batch_size = 2;  // 2+2+1: the singleton is dropped, not crashed on
    params.seed = 26;
    og::TrainLog log;
    og::GraderModel model = og::train(set, {}, config, params, &log);
    CHECK(log.train_loss.size() == 2);
    CHECK(std::isfinite(log.train_loss.back()));
    CHECK(og::evaluate(model, set).loss > 0.0);
}

TEST_CASE("shuffled negatives replace exactly one part with a different item") {
    og::Rng rng(27);
    std::vector<og::Outfit> positives;
    for (int i = 0; i < 6; ++i) positives.push_back(random_outfit(rng, "pos-" + std::to_string(i)));
    std::vector<og::LabeledOutfit> negatives = og::make_shuffled_negatives(positives, 25, 28);
    REQUIRE(negatives.size() == 25);
    for (const auto& neg : negatives) {
        CHECK(neg.label == og::kNegativeClass);
        // find the template it was built from and count differing parts
        bool matched = false;
        for (const auto& pos : positives) {
            std::size_t differing = 0;
            bool same_layout = true;
            for (std::size_t p = 0; p < og::kPartCount; ++p) {
                const bool has_a = pos.slots[p].has_value();
                if (has_a != neg.outfit.slots[p].has_value()) {
                    same_layout = false;
                    break;
                }
                if (has_a && pos.slots[p]->item_id != neg.outfit.slots[p]->item_id) ++differing;
            }
            if (same_layout && differing == 1) {
                matched = true;
                break;
            }
        }
        CHECK(matched);
    }
    CHECK_THROWS_AS(og::make_shuffled_negatives({positives[0]}, 1, 29), og::UsageError);
}

TEST_CASE("evaluation helpers agree with the tape forward pass") {
    og::Rng rng(30);
    for (int trial = 0; trial < 6; ++trial) {
        og::GraderConfig config = tiny_config(trial % 2 == 1);
        og::GraderModel model = og::init_model(config, rng.next_u64());
        if (config.batchnorm) {
            for (auto& v : model.h_bn.running_mean.data) v = rng.uniform(-0.5, 0.5);
            for (auto& v : model.h_bn.running_var.data) v = rng.uniform(0.5, 1.5);
        }
        og::Outfit outfit = random_outfit(rng, "agree-" + std::to_string(trial));
        og::ForwardTrace trace = og::forward(model, outfit);

        og::EncodingSet enc = og::encode_features(model, outfit);
        og::Tensor direct = og::logits_from_encodings(model, enc);
        CHECK(close(direct[0], trace.logits[0], 1e-9));
        CHECK(close(direct[1], trace.logits[1], 1e-9));

        // the encodings the helper produces are the ones the trace retains
        for (std::size_t p = 0; p < og::kPartCount; ++p) {
            if (!outfit.slots[p]) continue;
            for (std::size_t i = 0; i < enc.edge[p]->size(); ++i) {
                CHECK(close((*enc.edge[p])[i], (*trace.edge_encoding[p])[i], 1e-12));
            }
        }
    }
}

TEST_CASE("batched logits agree with one-at-a-time forwards") {
    og::Rng rng(31);
    og::GraderModel model = og::init_model(tiny_config(true), 32);
    std::vector<og::Outfit> outfits;
    for (int i = 0; i < 9; ++i) outfits.push_back(random_outfit(rng, "b-" + std::to_string(i)));
    std::vector<const og::Outfit*> ptrs;
    for (const auto& o : outfits) ptrs.push_back(&o);

    og::Tensor logits = og::logits_batch(model, ptrs);
    std::vector<double> scores = og::score_batch(model, ptrs);
    REQUIRE(logits.shape == std::vector<std::size_t>{9, 2});
    for (std::size_t r = 0; r < outfits.size(); ++r) {
        og::ForwardTrace t = og::forward(model, outfits[r]);
        CHECK(close(logits.at(r, 0), t.logits[0], 1e-12));
        CHECK(close(logits.at(r, 1), t.logits[1], 1e-12));
        CHECK(close(scores[r], og::score(model, outfits[r]), 1e-9));
    }
    CHECK_THROWS_AS(og::logits_batch(model, {}), og::UsageError);
}

TEST_CASE("model files round-trip every field bit-exactly") {
    og::Rng rng(33);
    og::GraderConfig config;
    config.k_widths = {3};
    config.g_widths = {4};
    config.h_width = 6;
    config.batchnorm = true;
    og::GraderModel model = og::init_model(config, 34);
    model.temperature = 6.77;
    model.pipeline.canny_sigma = 1.25;
    model.pipeline.canny_low = 40.0;
    model.pipeline.whiteness_threshold = 240;
    for (auto& v : model.h_bn.running_mean.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : model.h_bn.running_var.data) v = rng.uniform(0.5, 2.0);

    const std::string path = "roundtrip_model.bin";
    og::save_model(model, path);
    og::GraderModel loaded = og::load_model(path);

    CHECK(loaded.temperature == 6.77);
    CHECK(loaded.config.k_widths == config.k_widths);
    CHECK(loaded.config.g_widths == config.g_widths);
    CHECK(loaded.config.h_width == config.h_width);
    CHECK(loaded.config.batchnorm == config.batchnorm);
    CHECK(loaded.pipeline.canny_sigma == 1.25);
    CHECK(loaded.pipeline.canny_low == 40.0);
    CHECK(loaded.pipeline.whiteness_threshold == 240);
    CHECK(models_equal(model, loaded));

    // and the behavior is identical, not just the bytes
    for (int i = 0; i < 20; ++i) {
        og::Outfit outfit = random_outfit(rng, "rt-" + std::to_string(i));
        og::ForwardTrace a = og::forward(model, outfit);
        og::ForwardTrace b = og::forward(loaded, outfit);
        CHECK(a.logits.data == b.logits.data);
    }
    std::remove(path.c_str());
}

TEST_CASE("saving twice produces byte-identical files") {
    og::GraderModel model = og::init_model(tiny_config(true), 35);
    og::save_model(model, "det_a.bin");
    og::save_model(model, "det_b.bin");
    std::ifstream fa("det_a.bin", std::ios::binary), fb("det_b.bin", std::ios::binary);
    std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(a == b);
    CHECK(!a.empty());
    std::remove("det_a.bin");
    std::remove("det_b.bin");
}

TEST_CASE("model loading detects corruption, truncation, and future versions") {
    og::GraderModel model = og::init_model(tiny_config(false), 36);
    const std::string path = "tamper_model.bin";
    og::save_model(model, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    REQUIRE(bytes.size() > 64);

    auto write_bytes = [&](const std::string& data) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
    };

    // flip one byte in the middle of the blob
    std::string corrupted = bytes;
    corrupted[bytes.size() / 2] = static_cast<char>(corrupted[bytes.size() / 2] ^ 0x40);
    write_bytes(corrupted);
    CHECK_THROWS_WITH_AS(og::load_model(path), doctest::Contains("checksum"), og::IoError);

    // bump the major version and re-stamp the checksum so only the version trips
    std::string future = bytes;
    future[8] = 2;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(future.data()), static_cast<uInt>(future.size() - 4));
    for (int i = 0; i < 4; ++i) future[future.size() - 4 + i] = static_cast<char>((crc >> (8 * i)) & 0xff);
    write_bytes(future);
    CHECK_THROWS_WITH_AS(og::load_model(path), doctest::Contains("newer"), og::IoError);

    write_bytes(bytes.substr(0, 10));
    CHECK_THROWS_AS(og::load_model(path), og::IoError);

    write_bytes("this is not a model");
    CHECK_THROWS_AS(og::load_model(path), og::IoError);

    CHECK_THROWS_AS(og::load_model("no_such_file.bin"), og::IoError);
    std::remove(path.c_str());
}

TEST_CASE("initialization is deterministic in the seed and biases start at zero") {
    og::GraderModel a = og::init_model(tiny_config(true), 37);
    og::GraderModel b = og::init_model(tiny_config(true), 37);
    og::GraderModel c = og::init_model(tiny_config(true), 38);
    CHECK(models_equal(a, b));
    CHECK(!models_equal(a, c));
    for (const auto& layer : a.k_edge[0]) {
        for (double v : layer.b.data) CHECK(v == 0.0);
    }
    for (double v : a.h.b.data) CHECK(v == 0.0);
    for (double v : a.head.b.data) CHECK(v == 0.0);
    for (double v : a.h_bn.gamma.data) CHECK(v == 1.0);
    for (double v : a.h_bn.running_var.data) CHECK(v == 1.0);
}
