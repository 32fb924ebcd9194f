#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "varest/error.hpp"
#include "varest/estimator.hpp"

using namespace varest;

namespace {

FeatureMatrix random_features(std::size_t rows, std::size_t width, std::uint64_t seed, FeatureMode mode = FeatureMode::BV) {
    FeatureMatrix f;
    f.mode = mode;
    f.width = width;
    CounterRng rng(seed, "features");
    for (std::size_t i = 0; i < rows; ++i) {
        f.row_ids.push_back(static_cast<std::int64_t>(i));
        for (std::size_t j = 0; j < width; ++j) f.values.push_back(rng.uniform(-1, 1));
    }
    return f;
}

EstimatorSpec fast_spec() {
    EstimatorSpec s;
    s.hidden_sizes = {16, 8};
    s.max_epochs = 30;
    s.batch_size = 32;
    s.learning_rate = 3e-3;
    return s;
}

PVTable table(std::vector<double> pvs) {
    PVTable t;
    for (std::size_t i = 0; i < pvs.size(); ++i) t.rows.push_back({static_cast<std::int64_t>(i), pvs[i], {1.0}, 0.0});
    return t;
}

}  // namespace

TEST_CASE("spec defaults and key-value round trip") {
    EstimatorSpec s;
    CHECK(s.hidden_sizes == std::vector<std::size_t>{100, 50});
    CHECK(s.batch_size == 256);
    CHECK(s.learning_rate == 1e-3);
    CHECK(s.max_epochs == 150);
    CHECK(s.buckets == 5);
    s.objective = Objective::classification;
    s.feature_mode = FeatureMode::B;
    CHECK(estimator_spec_from_key_values(to_key_values(s)) == s);
    s.buckets = 1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(parse_objective("cls") == Objective::classification);
    CHECK(parse_objective("reg") == Objective::regression);
}

TEST_CASE("clamp and regression metrics") {
    const std::vector<double> labels{1, 2, 3};
    const auto c = regression_clamp(labels);
    CHECK(c.lower == 0.0);
    CHECK(c.upper == doctest::Approx(2.0 + 3.0 * 1.0));
    const auto m = regression_metrics(std::vector<double>{1, 2, 4}, labels);
    CHECK(m.mse == doctest::Approx(1.0 / 3.0));
    CHECK(*m.r2 == doctest::Approx(0.5));
    CHECK(*regression_metrics(labels, labels).r2 == 1.0);
    CHECK(*regression_metrics(std::vector<double>{2, 2, 2}, labels).r2 == doctest::Approx(0.0));
    CHECK_FALSE(regression_metrics(labels, std::vector<double>{2, 2, 2}).r2);
}

TEST_CASE("regressor fits signal, respects the clamp, and handles constant labels") {
    const auto f = random_features(400, 6, 1);
    std::vector<double> y(400);
    for (std::size_t i = 0; i < 400; ++i) y[i] = 0.2 + 0.1 * std::max(0.0, f.row(i)[0] + f.row(i)[1]);
    const auto model = train_regressor(f, y, fast_spec(), 3);
    const auto m = eval_regression(model, f, y);
    CHECK(*m.r2 > 0.5);
    // Outputs stay inside [0, mean + 3 std] on arbitrary inputs.
    const auto clamp = regression_clamp(y);
    auto wild = random_features(200, 6, 2);
    for (auto& v : wild.values) v *= 50.0;
    for (double e : estimate(model, wild)) {
        CHECK(e >= 0.0);
        CHECK(e <= clamp.upper + 1e-12);
    }
    const auto again = train_regressor(f, y, fast_spec(), 3);
    CHECK(again.params.values == model.params.values);

    const std::vector<double> constant(400, 0.3);
    const auto flat = train_regressor(f, constant, fast_spec(), 1);
    const auto mc = eval_regression(flat, random_features(100, 6, 9), std::vector<double>(100, 0.3));
    CHECK(mc.mse < 1e-6);
    CHECK_FALSE(mc.r2);

    const std::vector<double> negative(400, -1.0);
    CHECK_THROWS(train_regressor(f, negative, fast_spec(), 1));
    auto b_spec = fast_spec();
    b_spec.feature_mode = FeatureMode::B;
    CHECK_THROWS_AS(train_regressor(f, y, b_spec, 1), ConfigError);
}

TEST_CASE("classifier on separable and on random features") {
    // One-hot features encoding the bucket.
    FeatureMatrix f;
    f.width = 5;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 300; ++i) {
        const int b = static_cast<int>(i % 5) + 1;
        labels.push_back(b);
        f.row_ids.push_back(static_cast<std::int64_t>(i));
        for (int j = 1; j <= 5; ++j) f.values.push_back(j == b ? 1.0 : 0.0);
    }
    auto spec = fast_spec();
    spec.objective = Objective::classification;
    const auto model = train_classifier(f, labels, spec, 1);
    const auto m = eval_classification(model, f, labels);
    CHECK(m.accuracy == 1.0);
    for (const auto& a : m.auc) CHECK(*a == 1.0);
    for (std::size_t i = 0; i < 5; ++i) CHECK(m.confusion[i][i] == 1.0);

    const auto noise = random_features(2000, 6, 3);
    CounterRng rng(4, "labels");
    std::vector<int> random_labels;
    for (std::size_t i = 0; i < 2000; ++i) random_labels.push_back(1 + static_cast<int>(rng.below(5)));
    spec.max_epochs = 3;
    const auto rm = eval_classification(train_classifier(noise, random_labels, spec, 1), noise, random_labels);
    for (const auto& a : rm.auc) CHECK(std::abs(*a - 0.5) < 0.1);

    std::vector<int> missing(labels.size(), 1);
    for (std::size_t i = 0; i < missing.size(); i += 2) missing[i] = 2;
    const auto warned = train_classifier(f, missing, spec, 1);
    CHECK(warned.warnings.size() == 3);
}

TEST_CASE("classification metrics by hand") {
    const std::vector<double> uniform(4 * 3, 1.0 / 3.0);
    const std::vector<int> labels{1, 2, 3, 3};
    const auto m = classification_metrics(uniform, labels, 3);
    for (const auto& a : m.auc) CHECK(*a == 0.5);
    for (const auto& row : m.confusion) {
        const double s = std::accumulate(row.begin(), row.end(), 0.0);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
    const std::vector<int> no_third{1, 2, 2, 1};
    CHECK_FALSE(classification_metrics(uniform, no_third, 3).auc[2]);
    const auto text = format_confusion(m);
    CHECK(text.rfind("#varest-confusion\t1\t3\n", 0) == 0);
}

TEST_CASE("pv comparison") {
    const auto a = table({0.1, 0.3, 0.2});
    auto c = compare_pv(a, a);
    CHECK(*c.pearson == doctest::Approx(1.0));
    CHECK(c.rmse == 0.0);
    CHECK(*c.r2 == 1.0);
    c = compare_pv(table({0.2, 0.4, 0.3}), a);
    CHECK(*c.pearson == doctest::Approx(1.0));
    CHECK(c.rmse == doctest::Approx(0.1));
    CHECK_FALSE(compare_pv(table({0.2, 0.2, 0.2}), a).pearson);
}

TEST_CASE("mc dropout") {
    const auto data = fixtures::small_dataset(TaskKind::regression, 200, 1);
    const auto spec = fixtures::small_spec(TaskKind::regression, {8, 4});
    TrainConfig cfg;
    cfg.max_epochs = 2;
    CHECK_THROWS_AS(mc_dropout_pv(spec, cfg, data, data, 0.0, 10, 1), ConfigError);
    CHECK_THROWS_AS(mc_dropout_pv(spec, cfg, data, data, 1.0, 10, 1), ConfigError);
    const auto base = mc_dropout_pv(spec, cfg, data, data, 0.2, 10, 1);
    CHECK(base.pv.rows.size() == data.size());
    CHECK(base.pv.mean_pv() > 0.0);
    // Same model with dropout off at inference: no variation.
    for (double pv : dropout_pv(base.params, spec, data, 5, 1).pv_values()) CHECK(pv == 0.0);
    const auto w = mc_dropout_pv(spec, cfg, data, data, 0.2, 10, 1, 3);
    CHECK(w.pv.rows == base.pv.rows);
}

TEST_CASE("reports and estimator artifacts") {
    RegressionMetrics m{0.25, std::nullopt};
    const auto text = format_report("estimator", report_fields(m));
    CHECK(text.rfind("#varest-report\t1\testimator\n", 0) == 0);
    const auto kv = parse_report(text);
    CHECK(kv.at("mse") == "0.25");
    CHECK(kv.at("r2") == "undefined");

    const auto f = random_features(100, 4, 1);
    std::vector<double> y(100);
    for (std::size_t i = 0; i < 100; ++i) y[i] = 0.1 + 0.05 * f.row(i)[0] * f.row(i)[0];
    auto spec = fast_spec();
    spec.max_epochs = 3;
    const auto model = train_regressor(f, y, spec, 5);
    const auto dir = fixtures::temp_dir("est");
    save_estimator(dir, model);
    const auto back = load_estimator(dir);
    CHECK(back.spec == model.spec);
    CHECK(back.params.values == model.params.values);
    CHECK(back.label_shift == model.label_shift);
    CHECK(back.label_scale == model.label_scale);
    CHECK(estimate(back, f) == estimate(model, f));
}
