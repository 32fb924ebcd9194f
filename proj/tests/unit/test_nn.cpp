#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "varest/error.hpp"
#include "varest/nn.hpp"

using namespace varest;
using fixtures::small_spec;

TEST_CASE("init_params is deterministic and seed-sensitive") {
    const auto spec = small_spec(TaskKind::regression);
    const auto a = init_params(spec, 7), b = init_params(spec, 7), c = init_params(spec, 8);
    CHECK(a.values == b.values);
    std::size_t differing = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) differing += a.values[i] != c.values[i];
    CHECK(differing > 0);
    const ParamLayout layout(spec);
    for (std::size_t l = 0; l < layout.bias_offset.size(); ++l)
        for (std::size_t j = 0; j < layout.layer_out[l]; ++j) CHECK(a.values[layout.bias_offset[l] + j] == 0.0);
    // Glorot bound per dense layer.
    for (std::size_t l = 0; l < layout.weight_offset.size(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layout.layer_in[l] + layout.layer_out[l]));
        for (std::size_t j = 0; j < layout.layer_in[l] * layout.layer_out[l]; ++j)
            CHECK(std::abs(a.values[layout.weight_offset[l] + j]) <= bound);
    }
}

TEST_CASE("invalid specs are configuration errors") {
    auto spec = small_spec(TaskKind::regression);
    spec.hidden_sizes = {4, 0};
    CHECK_THROWS_AS(init_params(spec, 1), ConfigError);
    spec = small_spec(TaskKind::regression);
    spec.embeddings[0].vocab_size = 0;
    CHECK_THROWS_AS(init_params(spec, 1), ConfigError);
}

TEST_CASE("output heads") {
    auto spec = small_spec(TaskKind::multiclass, {4}, 5);
    spec.temperature = 3.0;
    const std::vector<double> zeros(5, 0.0);
    for (double p : head_to_prediction(zeros, spec).values) CHECK(p == doctest::Approx(0.2));

    auto bin = small_spec(TaskKind::binary);
    const std::vector<double> zero{0.0};
    CHECK(head_to_prediction(zero, bin).value() == doctest::Approx(0.5));

    auto two = small_spec(TaskKind::multiclass, {4}, 2);
    two.temperature = 0.5;
    const std::vector<double> logits{1.0, 0.0};
    const auto p = head_to_prediction(logits, two).values;
    const double e2 = std::exp(2.0);
    CHECK(p[0] == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.1192).epsilon(1e-3));
}

TEST_CASE("temperature monotonicity of the max-class probability") {
    auto spec = small_spec(TaskKind::multiclass, {4}, 4);
    const std::vector<double> logits{0.3, -1.0, 0.9, 0.2};
    double previous = 0.0;
    for (double t : {10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1}) {
        spec.temperature = t;
        const auto p = head_to_prediction(logits, spec).values;
        const double top = *std::max_element(p.begin(), p.end());
        CHECK(top > previous);
        previous = top;
    }
}

TEST_CASE("losses") {
    auto reg = small_spec(TaskKind::regression);
    const std::vector<double> three{3.0};
    CHECK(loss(three, 3.0, reg) == 0.0);
    const std::vector<double> zero{0.0};
    auto bin = small_spec(TaskKind::binary);
    CHECK(loss(zero, 1.0, bin) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
    auto two = small_spec(TaskKind::multiclass, {4}, 2);
    two.temperature = 1.0;
    const std::vector<double> zz{0.0, 0.0};
    CHECK(loss(zz, 0.0, two) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Large logits stay finite (log-sum-exp form).
    const std::vector<double> big{800.0};
    CHECK(std::isfinite(loss(big, 0.0, bin)));
    CHECK_THROWS_AS(loss(zero, 2.0, bin), InputError);
    CHECK_THROWS_AS(loss(zz, 2.0, two), InputError);
    CHECK_THROWS_AS(loss(three, std::nan(""), reg), InputError);
}

TEST_CASE("forward checks ids and captures post-ReLU outputs") {
    for (auto task : {TaskKind::regression, TaskKind::binary, TaskKind::multiclass}) {
        const auto spec = small_spec(task, {6, 4, 3});
        const auto params = init_params(spec, 3);
        CounterRng rng(5, "fwd");
        for (int i = 0; i < 20; ++i) {
            const auto ex = fixtures::random_example(task, rng, i);
            const auto r = forward(params, spec, ex, true);
            REQUIRE(r.activations.size() == 13);
            for (double a : r.activations) CHECK(a >= 0.0);
            if (task == TaskKind::multiclass) {
                const double s = std::accumulate(r.prediction.values.begin(), r.prediction.values.end(), 0.0);
                CHECK(std::abs(s - 1.0) < 1e-9);
            }
            if (task == TaskKind::binary) {
                CHECK(r.prediction.value() > 0.0);
                CHECK(r.prediction.value() < 1.0);
            }
        }
        auto bad = fixtures::random_example(task, rng, 99);
        bad.categorical[0] = 5;
        CHECK_THROWS_AS(forward(params, spec, bad), InputError);
    }
}

TEST_CASE("gradient check passes on random small nets and catches a corrupted entry") {
    std::size_t k = 0;
    for (auto task : {TaskKind::regression, TaskKind::binary, TaskKind::multiclass}) {
        for (std::uint64_t seed = 1; seed <= 4; ++seed, ++k) {
            const auto spec = small_spec(task, {4, 3});
            CounterRng rng(seed, "gc");
            const auto ex = fixtures::random_example(task, rng, 1);
            const auto r = grad_check(spec, seed, ex, 1e-5, 1e-4);
            CHECK(r.max_relative_error < 1e-4);
            CHECK(r.passed);
        }
    }
    const auto spec = small_spec(TaskKind::binary, {4, 3});
    const auto params = init_params(spec, 9);
    CounterRng rng(9, "gc");
    const auto ex = fixtures::random_example(TaskKind::binary, rng, 1);
    const ParamLayout layout(spec);
    // Pick a weight whose gradient is non-zero.
    const auto g = gradient(params, spec, ex);
    std::size_t target = layout.weight_offset.back();
    while (std::abs(g[target]) < 1e-6) ++target;
    const auto bad = grad_check(spec, params, ex, 1e-5, 1e-4, target);
    CHECK_FALSE(bad.passed);
}

TEST_CASE("gradient vanishes at a zero-weight network whose output equals the label") {
    auto spec = small_spec(TaskKind::regression, {4});
    auto params = init_params(spec, 1);
    std::fill(params.values.begin(), params.values.end(), 0.0);
    const ParamLayout layout(spec);
    params.values[layout.bias_offset.back()] = 3.0;  // output bias
    CounterRng rng(2, "zero");
    auto ex = fixtures::random_example(TaskKind::regression, rng, 1);
    ex.label = 3.0;
    for (double v : gradient(params, spec, ex)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto data = fixtures::small_dataset(TaskKind::binary, 600, 4);
    const auto spec = small_spec(TaskKind::binary, {8, 4});
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.01;
    SeedBundle seeds{11, 12, std::nullopt};
    const auto a = train(spec, cfg, data, seeds);
    const auto b = train(spec, cfg, data, seeds);
    CHECK(a.params.values == b.params.values);
    CHECK(a.history.final_loss < a.history.initial_loss);
    CHECK(a.history.train_rows + a.history.validation_rows == data.size());
}

TEST_CASE("dropout inference") {
    auto spec = small_spec(TaskKind::regression, {8, 4});
    const auto data = fixtures::small_dataset(TaskKind::regression, 20, 1);
    const auto params = init_params(spec, 1);
    const auto plain = predict(params, spec, data);
    CHECK(predict_with_dropout(params, spec, data, 5) == plain);  // rate 0
    spec.dropout_rate = 0.5;
    const auto p1 = predict_with_dropout(params, spec, data, 5);
    CHECK(p1 == predict_with_dropout(params, spec, data, 5));
    CHECK(p1 != predict_with_dropout(params, spec, data, 6));
}

TEST_CASE("model artifacts round-trip bit-exactly") {
    const auto dir = fixtures::temp_dir("nn");
    auto spec = small_spec(TaskKind::multiclass, {4, 3}, 3);
    spec.temperature = 0.2;
    ModelArtifact m{spec, init_params(spec, 42), SeedBundle{42, 7, 3}};
    save_model(dir / "m.model", m);
    const auto back = load_model(dir / "m.model");
    CHECK(back.spec == spec);
    CHECK(back.params.values == m.params.values);
    CHECK(back.seeds == m.seeds);
    CHECK(in_validation_slice(12345, 0.1) == in_validation_slice(12345, 0.1));
}
