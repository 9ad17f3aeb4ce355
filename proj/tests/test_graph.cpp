#include <doctest.h>

#include <filesystem>

#include "leantta/graph.hpp"
#include "leantta/io.hpp"
#include "test_util.hpp"

using namespace leantta;
using testutil::random_tensor;
using TempDir = testutil::TempDir;

TEST_CASE("validation catches broken models") {
    graph::ModelGraph m = testutil::random_mlp(4, 6, 3, 1);
    SUBCASE("non-contiguous ids") {
        m.layers[2].id = 9;
        CHECK_THROWS_AS(m.validate(), Error);
    }
    SUBCASE("shape break") {
        m.layers[3].weights = Tensor::zeros({6, 5});
        CHECK_THROWS_AS(m.validate(), Error);
    }
    SUBCASE("unpaired residual") {
        m.layers[2] = testutil::plain(2, graph::LayerKind::ResidualBegin);
        CHECK_THROWS_AS(m.validate(), Error);
    }
}

TEST_CASE("residual pairing executes") {
    Rng rng(5);
    graph::ModelGraph m;
    m.meta.name = "res";
    m.meta.input_shape = {3};
    m.meta.class_count = 3;
    m.layers.push_back(testutil::plain(0, graph::LayerKind::ResidualBegin));
    m.layers.push_back(testutil::linear_layer(1, 3, 3, rng));
    m.layers.push_back(testutil::plain(2, graph::LayerKind::ResidualEnd));
    m.validate();
    const Tensor x({1, 3}, {1.0f, 2.0f, 3.0f});
    const Tensor direct = linear(x, m.layers[1].weights, m.layers[1].bias);
    const Tensor got = graph::forward(m, x).logits;
    for (int i = 0; i < 3; ++i) {
        CHECK(got.at(0, i) == doctest::Approx(direct.at(0, i) + x.at(0, i)));
    }
}

TEST_CASE("adapt with tau=1 equals source bitwise") {
    graph::ModelGraph m = graph::replace_norm_layers(testutil::random_mlp(4, 6, 3, 7));
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({1, 4}, rng, -2.0, 2.0);
        graph::ForwardOptions adapt_opts;
        adapt_opts.mode = graph::RunMode::Adapt;
        adapt_opts.cfg.tau = 1.0;
        adapt_opts.cfg.lambda = rng.next_double();
        adapt_opts.cfg.eps_norm = m.layers[1].norm.eps;
        const Tensor a = graph::forward(m, x, adapt_opts).logits;
        const Tensor s = graph::forward(m, x).logits;
        CHECK(a.values() == s.values());
    }
}

TEST_CASE("adapt mode is stateless: repeated calls agree bitwise") {
    graph::ModelGraph m = graph::replace_norm_layers(testutil::random_cnn(2, 6, 3, 9));
    Rng rng(10);
    const Tensor x = random_tensor({1, 2, 6, 6}, rng);
    graph::ForwardOptions opts;
    opts.mode = graph::RunMode::Adapt;
    const Tensor first = graph::forward(m, x, opts).logits;
    const Tensor second = graph::forward(m, x, opts).logits;
    CHECK(first.values() == second.values());
}

TEST_CASE("multiset of adapt logits is order independent") {
    graph::ModelGraph m = graph::replace_norm_layers(testutil::random_cnn(1, 6, 2, 11));
    Rng rng(12);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 12; ++i) inputs.push_back(random_tensor({1, 1, 6, 6}, rng));

    graph::ForwardOptions opts;
    opts.mode = graph::RunMode::Adapt;
    std::vector<std::vector<float>> forward_order, reverse_order(inputs.size());
    for (const auto& x : inputs) forward_order.push_back(graph::forward(m, x, opts).logits.values());
    for (std::size_t i = inputs.size(); i-- > 0;) {
        reverse_order[i] = graph::forward(m, inputs[i], opts).logits.values();
    }
    CHECK(forward_order == reverse_order);
}

TEST_CASE("self-normalization shows up in the trace") {
    // conv -> adaptive norm(gamma=1, beta=0) -> GAP; with tau=0, lambda=0 the
    // normalized activation has per-channel mean 0, so the pooled logits
    // should vanish and the traced stats should match the instance stats.
    Rng rng(13);
    graph::ModelGraph m;
    m.meta.name = "norm-probe";
    m.meta.input_shape = {2, 6, 6};
    m.meta.class_count = 4;
    m.layers.push_back(testutil::conv_layer(0, 4, 2, rng));
    m.layers.push_back(testutil::norm_layer(1, 4, rng, true));
    for (int c = 0; c < 4; ++c) {
        m.layers[1].norm.gamma[static_cast<std::size_t>(c)] = 1.0f;
        m.layers[1].norm.beta[static_cast<std::size_t>(c)] = 0.0f;
    }
    m.layers.push_back(testutil::plain(2, graph::LayerKind::GlobalAvgPool));
    m.validate();

    graph::ForwardOptions opts;
    opts.mode = graph::RunMode::Adapt;
    opts.cfg.tau = 0.0;
    opts.cfg.lambda = 0.0;
    opts.trace = true;
    const Tensor x = random_tensor({1, 2, 6, 6}, rng, 0.0, 2.0);
    const auto res = graph::forward(m, x, opts);
    REQUIRE(res.trace.has_value());
    REQUIRE(res.trace->records.size() == 1);
    const auto& rec = res.trace->records[0];
    CHECK(rec.layer_id == 1);
    for (int c = 0; c < 4; ++c) {
        CHECK(std::abs(res.logits.at(0, c)) <= 1e-4);  // pooled mean of the normalized activation
        CHECK(rec.blended.mu[c] == doctest::Approx(rec.instance.mu[c]));     // lambda = 0
        CHECK(rec.blended.sigma2[c] == doctest::Approx(rec.instance.sigma2[c]));
    }
}

TEST_CASE("adapt restricted to a subset leaves other layers frozen") {
    graph::ModelGraph m = graph::replace_norm_layers(testutil::random_mlp(4, 6, 3, 21));
    Rng rng(22);
    const Tensor x = random_tensor({1, 4}, rng);

    graph::ForwardOptions opts;
    opts.mode = graph::RunMode::Adapt;
    opts.trace = true;
    const std::vector<int> only_first = {1};
    opts.adapt_ids = &only_first;
    const auto res = graph::forward(m, x, opts);
    REQUIRE(res.trace.has_value());
    CHECK(res.trace->records.size() == 1);
    CHECK(res.trace->records[0].layer_id == 1);

    const std::vector<int> none = {};
    opts.adapt_ids = &none;
    const auto res2 = graph::forward(m, x, opts);
    CHECK(res2.logits.values() == graph::forward(m, x).logits.values());
}

TEST_CASE("replace_norm_layers") {
    graph::ModelGraph m = testutil::random_mlp(4, 6, 3, 31);

    SUBCASE("no BatchNorm present is an error") {
        graph::ModelGraph plainm;
        plainm.meta.name = "plain";
        plainm.meta.input_shape = {4};
        plainm.meta.class_count = 3;
        Rng rng(1);
        plainm.layers.push_back(testutil::linear_layer(0, 3, 4, rng));
        plainm.validate();
        CHECK_THROWS_AS(graph::replace_norm_layers(plainm), Error);
    }

    SUBCASE("replace-all preserves source behaviour exactly") {
        const graph::ModelGraph replaced = graph::replace_norm_layers(m);
        int adaptive = 0;
        for (const auto& l : replaced.layers) {
            adaptive += l.kind == graph::LayerKind::AdaptiveNorm;
        }
        CHECK(adaptive == 2);
        Rng rng(33);
        for (int trial = 0; trial < 10; ++trial) {
            const Tensor x = random_tensor({1, 4}, rng);
            CHECK(graph::forward(m, x).logits.values() ==
                  graph::forward(replaced, x).logits.values());
        }
    }

    SUBCASE("subset replacement") {
        const std::vector<int> subset = {1};
        const graph::ModelGraph replaced = graph::replace_norm_layers(m, &subset);
        CHECK(replaced.layers[1].kind == graph::LayerKind::AdaptiveNorm);
        CHECK(replaced.layers[4].kind == graph::LayerKind::BatchNorm);
        const std::vector<int> bogus = {2};
        CHECK_THROWS_AS(graph::replace_norm_layers(m, &bogus), Error);
    }
}

TEST_CASE("model save/load round trip is forward exact") {
    TempDir tmp("graph");
    const graph::ModelGraph m = testutil::random_cnn(2, 6, 3, 41);
    const std::string path = tmp.file("model.bin");
    graph::save_model(m, path);
    const graph::ModelGraph loaded = graph::load_model(path);
    CHECK(loaded.meta.name == m.meta.name);
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = random_tensor({1, 2, 6, 6}, rng);
        CHECK(graph::forward(m, x).logits.values() == graph::forward(loaded, x).logits.values());
    }
    CHECK(std::filesystem::exists(path + ".manifest"));
}

TEST_CASE("truncated model file yields a parse error") {
    TempDir tmp("graph");
    const graph::ModelGraph m = testutil::random_mlp(4, 6, 3, 51);
    const std::string path = tmp.file("model.bin");
    graph::save_model(m, path);
    const auto full_size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full_size / 2);
    CHECK_THROWS_AS(graph::load_model(path), Error);
    try {
        graph::load_model(path);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("unknown layer kind tag yields a version error naming the tag") {
    TempDir tmp("graph");
    const std::string path = tmp.file("bad.bin");
    {
        io::Writer w(path);
        w.bytes("LTTA", 4);
        w.u32(graph::kModelFormatVersion);
        w.str("bad");
        w.u32(1);
        w.i64(4);
        w.u32(3);
        w.u64(1);
        w.u8(99);  // no such layer kind
        w.close();
    }
    try {
        graph::load_model(path);
        FAIL("expected a version error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Version);
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("format version mismatch is reported as a version error") {
    TempDir tmp("graph");
    const std::string path = tmp.file("vers.bin");
    {
        io::Writer w(path);
        w.bytes("LTTA", 4);
        w.u32(77);
        w.close();
    }
    try {
        graph::load_model(path);
        FAIL("expected a version error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Version);
    }
}

TEST_CASE("non-finite activations are reported with the layer id") {
    graph::ModelGraph m = testutil::random_mlp(4, 6, 3, 61);
    for (auto& v : m.layers[3].weights.values()) v = 3e38f;
    const Tensor x = Tensor::full({1, 4}, 10.0f);
    try {
        graph::forward(m, x);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("layer 3") != std::string::npos);
    }
}

TEST_CASE("batch pooling is flagged in trace records") {
    graph::ModelGraph m = graph::replace_norm_layers(testutil::random_cnn(1, 6, 2, 71));
    Rng rng(72);
    graph::ForwardOptions opts;
    opts.mode = graph::RunMode::Adapt;
    opts.trace = true;
    const auto res1 = graph::forward(m, random_tensor({1, 1, 6, 6}, rng), opts);
    CHECK_FALSE(res1.trace->records[0].pooled_batch);
    const auto res2 = graph::forward(m, random_tensor({3, 1, 6, 6}, rng), opts);
    CHECK(res2.trace->records[0].pooled_batch);
}
