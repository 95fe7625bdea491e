#include <doctest.h>

#include <cmath>

#include "propex/grad_check.hpp"
#include "propex/infer.hpp"
#include "propex/train.hpp"
#include "propex/transformer.hpp"

using namespace propex;

namespace {

DualSourceConfig toy_config() {
    DualSourceConfig cfg;
    cfg.model_dim = 16;
    cfg.heads = 2;
    cfg.ffn_dim = 32;
    cfg.depth = 2;
    cfg.vocab_size = 50;
    cfg.max_positions = 32;
    return cfg;
}

TrainingExample toy_example(uint64_t seed, int vocab) {
    SplitMix64 rng(seed);
    auto seq = [&](size_t len) {
        std::vector<int> ids{Specials{}.bos};
        for (size_t i = 0; i < len; ++i)
            ids.push_back(Specials::count + static_cast<int>(rng.below(
                static_cast<uint64_t>(vocab - Specials::count))));
        ids.push_back(Specials{}.eos);
        return ids;
    };
    TrainingExample ex;
    ex.article_ids = seq(6);
    ex.property_ids = seq(3);
    ex.target_ids = seq(4);
    ex.target_ids.erase(ex.target_ids.begin());  // targets carry EOS only
    return ex;
}

}  // namespace

TEST_CASE("identical sources produce bitwise-identical encoder states") {
    DualSourceModel<double> model(toy_config(), 5);
    Graph<double> g;
    std::vector<int> ids{1, 10, 11, 12, 2};
    auto [a, p] = model.encode_pair(g, ids, ids);
    CHECK(g.value(a).shape == g.value(p).shape);
    for (size_t i = 0; i < g.value(a).data.size(); ++i)
        CHECK(g.value(a).data[i] == g.value(p).data[i]);
}

TEST_CASE("encoder output shapes follow the inputs") {
    DualSourceModel<double> model(toy_config(), 5);
    Graph<double> g;
    auto [a, p] = model.encode_pair(g, {1, 10, 11, 12, 2}, {1, 20, 2});
    CHECK(g.value(a).shape == std::vector<int64_t>{5, 16});
    CHECK(g.value(p).shape == std::vector<int64_t>{3, 16});
}

TEST_CASE("overlong articles are truncated, properties never") {
    auto cfg = toy_config();
    cfg.max_positions = 8;
    DualSourceModel<double> model(cfg, 5);
    Graph<double> g;
    std::vector<int> long_ids(12, 10);
    long_ids.front() = Specials{}.bos;
    auto [a, p] = model.encode_pair(g, long_ids, {1, 20, 2});
    CHECK(g.value(a).shape[0] == 8);
    CHECK(model.truncation_warnings() == 1);
    CHECK_THROWS_AS(model.encode_pair(g, {1, 10, 2}, long_ids), DataError);
}

TEST_CASE("with zeroed positions the encoder is permutation-equivariant") {
    auto cfg = toy_config();
    cfg.sinusoidal_positions = false;
    DualSourceModel<double> model(cfg, 9);
    Graph<double> g;
    std::vector<int> ids{10, 11, 12, 13};
    std::vector<int> perm{13, 10, 12, 11};
    std::vector<size_t> where{1, 3, 2, 0};  // perm[where[i]] == ids[i]
    Var a = model.encode(g, ids);
    Var b = model.encode(g, perm);
    for (size_t i = 0; i < ids.size(); ++i)
        for (int64_t j = 0; j < 16; ++j)
            CHECK(g.value(a).at(static_cast<int64_t>(i), j) ==
                  doctest::Approx(g.value(b).at(static_cast<int64_t>(where[i]), j)).epsilon(1e-12));

    // and with positions on, permutation changes the states
    DualSourceModel<double> pos_model(toy_config(), 9);
    Graph<double> g2;
    Var ap = pos_model.encode(g2, ids);
    Var bp = pos_model.encode(g2, perm);
    double diff = 0;
    for (size_t i = 0; i < g2.value(ap).data.size(); ++i)
        diff += std::abs(g2.value(ap).data[i] - g2.value(bp).data[i]);
    CHECK(diff > 1e-3);
}

TEST_CASE("decoder causality: future target tokens cannot move earlier logits") {
    DualSourceModel<double> model(toy_config(), 7);
    TrainingExample ex = toy_example(3, 50);
    Graph<double> g;
    auto [art, prop] = model.encode_pair(g, ex.article_ids, ex.property_ids);
    std::vector<int> in1{1, 10, 11, 12};
    std::vector<int> in2{1, 10, 11, 40};  // differs only at the last position
    Var s1 = model.decode_states(g, in1, art, prop);
    auto [art2, prop2] = model.encode_pair(g, ex.article_ids, ex.property_ids);
    Var s2 = model.decode_states(g, in2, art2, prop2);
    for (int64_t t = 0; t < 3; ++t)
        for (int64_t j = 0; j < 16; ++j)
            CHECK(g.value(s1).at(t, j) == doctest::Approx(g.value(s2).at(t, j)).epsilon(1e-12));
}

TEST_CASE("embedding is tied to the output projection") {
    DualSourceModel<double> model(toy_config(), 7);
    // single parameter tensor named emb serves input and output
    int emb_count = 0;
    for (size_t i = 0; i < model.params().size(); ++i)
        if (model.params()[i].name.find("emb") != std::string::npos) ++emb_count;
    CHECK(emb_count == 1);

    Graph<double> g;
    Var s = model.encode(g, {1, 10, 2});
    Var l1 = model.logits(g, s);
    const double before = g.value(l1).at(0, 10);
    model.params().get("emb").value.at(10, 0) += 0.5;
    Graph<double> g2;
    Var s2 = model.encode(g2, {1, 10, 2});
    Var l2 = model.logits(g2, s2);
    CHECK(g2.value(l2).at(0, 10) != before);
}

TEST_CASE("parameter sharing: shared encoder grads are the sum of per-source path grads") {
    DualSourceModel<double> model(toy_config(), 13);
    TrainingExample ex = toy_example(4, 50);

    auto loss_with = [&](bool detach_article, bool detach_property) {
        Graph<double> g;
        Var art = model.encode(g, ex.article_ids);
        Var prop = model.encode(g, ex.property_ids);
        if (detach_article) art = g.input(g.value(art));
        if (detach_property) prop = g.input(g.value(prop));
        std::vector<int> dec_in{Specials{}.bos};
        dec_in.insert(dec_in.end(), ex.target_ids.begin(), ex.target_ids.end() - 1);
        Var states = model.decode_states(g, dec_in, art, prop);
        std::vector<uint8_t> keep(ex.target_ids.size(), 1);
        g.backward(g.cross_entropy_mean(model.logits(g, states), ex.target_ids, keep));
    };

    auto grab_encoder_grads = [&]() {
        std::map<std::string, Tensor<double>> grads;
        for (size_t i = 0; i < model.params().size(); ++i) {
            const auto& p = model.params()[i];
            if (p.name.rfind("enc.", 0) == 0) grads[p.name] = p.grad;
        }
        model.params().zero_grads();
        return grads;
    };

    loss_with(false, false);
    auto shared = grab_encoder_grads();
    loss_with(false, true);  // only the article path reaches the encoder
    auto art_path = grab_encoder_grads();
    loss_with(true, false);  // only the property path
    auto prop_path = grab_encoder_grads();

    for (const auto& [name, g] : shared) {
        const auto& ga = art_path.at(name);
        const auto& gp = prop_path.at(name);
        for (size_t i = 0; i < g.data.size(); ++i)
            CHECK(g.data[i] == doctest::Approx(ga.data[i] + gp.data[i]).epsilon(1e-9));
    }
}

TEST_CASE("fresh model loss is close to ln(vocab)") {
    auto cfg = toy_config();
    DualSourceModel<double> model(cfg, 21);
    TrainingExample ex = toy_example(9, 50);
    Graph<double> g;
    const double loss = g.value(model.example_loss(g, ex)).data[0];
    const double uniform = std::log(50.0);
    CHECK(std::abs(loss - uniform) / uniform < 0.05);
}

TEST_CASE("toy dual-source model passes the gradient check") {
    DualSourceModel<double> model(toy_config(), 31);
    TrainingExample ex = toy_example(17, 50);
    auto loss_fn = [&](ParameterStore<double>&) {
        Graph<double> g;
        return g.backward(model.example_loss(g, ex));
    };
    auto report = grad_check<double>(loss_fn, model.params(), 1e-5, /*max_coords_per_param=*/6,
                                     /*seed=*/1);
    INFO("max rel err ", report.max_rel_err);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("deterministic replay: identical seeds give identical loss traces") {
    auto run = [](uint64_t seed) {
        auto cfg = toy_config();
        DualSourceModel<double> model(cfg, seed);
        std::vector<BuiltExample> examples;
        for (uint64_t i = 0; i < 8; ++i) {
            BuiltExample b;
            b.ex = toy_example(100 + i, 50);
            b.article_id = "a" + std::to_string(i);
            examples.push_back(b);
        }
        DualTrainOptions opts;
        opts.steps = 12;
        opts.token_budget = 64;
        opts.seed = 42;
        opts.optim = OptimizerSettings{1e-3, 10};
        opts.log_every = 0;
        return train_dual(model, examples, opts).loss_trace;
    };
    auto t1 = run(3);
    auto t2 = run(3);
    REQUIRE(t1.size() == t2.size());
    for (size_t i = 0; i < t1.size(); ++i) CHECK(std::abs(t1[i] - t2[i]) <= 1e-6);
    CHECK(t1 != run(4));  // different init seed moves the trace
}

TEST_CASE("nan loss skips the update and halves the rate") {
    auto cfg = toy_config();
    DualSourceModel<double> model(cfg, 3);
    // poison one parameter so the first loss is non-finite
    model.params().get("emb").value.data[0] = std::numeric_limits<double>::quiet_NaN();
    std::vector<BuiltExample> examples(1);
    examples[0].ex = toy_example(5, 50);
    DualTrainOptions opts;
    opts.steps = 1;
    opts.log_every = 0;
    auto result = train_dual(model, examples, opts);
    CHECK(result.nan_steps == 1);
}

TEST_CASE("paper-scale preset is constructible and runs a forward pass") {
    DualPreset preset = dual_preset("paper");
    CHECK(preset.model.depth == 4);
    CHECK(preset.model.model_dim == 512);
    CHECK(preset.vocab_size_cap == 32000);
    DualSourceConfig cfg = preset.model;
    cfg.vocab_size = 32000;
    DualSourceModel<float> model(cfg, 1);
    Graph<float> g;
    auto [art, prop] = model.encode_pair(g, {1, 100, 200, 2}, {1, 300, 2});
    CHECK(g.value(art).shape == std::vector<int64_t>{4, 512});
    CHECK(g.value(prop).shape == std::vector<int64_t>{3, 512});
    // config json round trip
    auto j = cfg.to_json();
    auto back = DualSourceConfig::from_json(j);
    CHECK(back.depth == cfg.depth);
    CHECK(back.label_smoothing == cfg.label_smoothing);
}
