#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "varest/error.hpp"
#include "varest/probe.hpp"

using namespace varest;

TEST_CASE("neuron statistics from raw outputs") {
    // Three neurons over two examples: outputs [0,2], constant 4, never active.
    const std::vector<double> acts{0.0, 4.0, 0.0, 2.0, 4.0, 0.0};
    const std::vector<std::size_t> layers{0, 0, 1};
    const auto s = neuron_stats_from(acts, 3, layers);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.std[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(s.std[0] == doctest::Approx(1.41421).epsilon(1e-5));
    CHECK(s.activation_rate[0] == 0.5);
    CHECK(s.mean[1] == 4.0);
    CHECK(s.std[1] == 0.0);
    CHECK(s.mean[2] == 0.0);
    CHECK(s.std[2] == 0.0);
    CHECK(s.activation_rate[2] == 0.0);
    CHECK(s.layer == layers);
}

TEST_CASE("normalization rules") {
    NeuronStats s;
    s.mean = {0.0, 1.0, 0.0};
    s.std = {1.0, 0.5, 0.0};
    s.activation_rate = {0.5, 0.5, 0.0};
    s.layer = {0, 0, 0};
    const auto v = normalize_activations(std::vector<double>{0.0, 2.0, 0.0}, s);
    CHECK(v.binary == std::vector<double>{0, 1, 0});
    CHECK(v.value[0] == 0.0);
    CHECK(v.value[1] == doctest::Approx(2.0));
    CHECK(v.value[2] == 0.0);
    CHECK_THROWS_AS(normalize_activations(std::vector<double>{0.0, 1.0}, s), ConfigError);
}

TEST_CASE("features from a real network") {
    const auto spec = fixtures::small_spec(TaskKind::regression, {6, 4});
    const auto params = init_params(spec, 5);
    const auto data = fixtures::small_dataset(TaskKind::regression, 80, 2);
    const auto stats = neuron_stats(params, spec, data);
    CHECK(stats.size() == 10);
    CHECK(neuron_layers(spec) == std::vector<std::size_t>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
    const auto bv = activation_features(params, spec, stats, data, FeatureMode::BV);
    const auto b = activation_features(params, spec, stats, data, FeatureMode::B);
    CHECK(bv.width == 20);
    CHECK(b.width == 10);
    const auto raw = capture_activations(params, spec, data);
    // Binary indicator tracks raw > 0; on the reference set each live neuron's
    // normalized values have mean 0 and std 1.
    for (std::size_t j = 0; j < 10; ++j) {
        double sum = 0, sq = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            CHECK(bv.row(i)[j] == (raw[i * 10 + j] > 0 ? 1.0 : 0.0));
            CHECK(b.row(i)[j] == bv.row(i)[j]);
            const double v = bv.row(i)[10 + j];
            sum += v;
            sq += v * v;
        }
        if (stats.std[j] > 0) {
            const double n = static_cast<double>(data.size());
            CHECK(std::abs(sum / n) < 1e-9);
            CHECK(std::abs((sq - sum * sum / n) / (n - 1) - 1.0) < 1e-9);
        }
    }
    const auto single = activation_vector(params, spec, stats, data.rows[3]);
    for (std::size_t j = 0; j < 10; ++j) CHECK(single.value[j] == bv.row(3)[10 + j]);

    Dataset empty;
    empty.schema = data.schema;
    CHECK_THROWS_AS(neuron_stats(params, spec, empty), UsageError);

    const auto dir = fixtures::temp_dir("probe");
    save_neuron_stats(dir / "s.tsv", stats);
    CHECK(load_neuron_stats(dir / "s.tsv") == stats);
}

TEST_CASE("feature modes parse") {
    CHECK(parse_feature_mode("B") == FeatureMode::B);
    CHECK(parse_feature_mode("BV") == FeatureMode::BV);
    CHECK(to_string(FeatureMode::BV) == "BV");
    CHECK_THROWS_AS(parse_feature_mode("V"), ConfigError);
}
