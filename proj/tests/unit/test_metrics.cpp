#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "varest/error.hpp"
#include "varest/metrics.hpp"

using namespace varest;

namespace {
double brute_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& pos) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (pos[i] && !pos[j]) {
                pairs += 1;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return wins / pairs;
}
}  // namespace

TEST_CASE("auc") {
    const std::vector<double> scores{0.9, 0.4, 0.6, 0.1};
    const std::vector<std::uint8_t> pos{1, 1, 0, 0};
    CHECK(*auc(scores, pos) == doctest::Approx(0.75));
    CHECK_FALSE(auc(scores, std::vector<std::uint8_t>{1, 1, 1, 1}));
    CounterRng rng(1, "auc");
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(199);
        std::vector<double> s(n), neg(n), labels(n);
        std::vector<std::uint8_t> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(10));  // plenty of ties
            p[i] = static_cast<std::uint8_t>(rng.below(2));
            neg[i] = -s[i];
            labels[i] = p[i];
        }
        const auto a = auc(s, p);
        if (!a) continue;
        CHECK(*a == brute_auc(s, p));
        CHECK(*auc(neg, p) == doctest::Approx(1.0 - *a));
        CHECK(*auc(labels, p) == 1.0);
    }
}

TEST_CASE("rounding and target metrics") {
    CHECK(round_rating(2.5) == 3.0);
    CHECK(round_rating(0.2) == 1.0);
    CHECK(round_rating(7.0) == 5.0);
    const auto r = target_metrics(std::vector<double>{2.4, 3.6}, std::vector<double>{2, 4}, TaskKind::regression);
    CHECK(*r.accuracy == 1.0);
    CHECK(*r.mse == doctest::Approx(0.16));
    // Perturbations that stay inside a rounding cell leave accuracy alone.
    const auto r2 = target_metrics(std::vector<double>{2.1, 3.9}, std::vector<double>{2, 4}, TaskKind::regression);
    CHECK(*r2.accuracy == 1.0);

    const std::vector<double> onehot{1, 0, 0, 0, 0, 1}, labels{0, 2};
    const auto m = target_metrics(onehot, labels, TaskKind::multiclass, 3);
    CHECK(*m.brier == 0.0);
    CHECK(*m.accuracy == 1.0);
    const std::vector<double> wrong{0, 1, 0, 1, 0, 0};
    CHECK(brier_score(wrong, labels, 3) == doctest::Approx(2.0));

    const auto b = target_metrics(std::vector<double>{0.9, 0.2, 0.6}, std::vector<double>{1, 0, 0}, TaskKind::binary);
    CHECK(*b.auc == 1.0);
    CHECK(*b.accuracy == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(target_metrics(std::vector<double>{0.5}, std::vector<double>{2}, TaskKind::binary), InputError);
    CHECK_THROWS_AS(target_metrics(std::vector<double>{3}, std::vector<double>{0}, TaskKind::regression),
                    InputError);
}

TEST_CASE("temperature selection") {
    const std::vector<TemperaturePoint> one{{0.7, 0.3, 0.5}};
    CHECK(select_temperature(one) == 0.7);
    const std::vector<TemperaturePoint> pts{{0.1, 0.5, 0.4}, {0.2, 0.4, 0.4}, {0.5, 0.4, 0.45}, {1.0, 0.4, 0.45}};
    CHECK(select_temperature(pts) == 0.5);

    const auto data = fixtures::small_dataset(TaskKind::multiclass, 200, 1);
    const auto spec = fixtures::small_spec(TaskKind::multiclass, {4}, 3);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    const std::vector<double> grid{0.5, 1.0};
    const auto sweep = temperature_sweep(spec, cfg, data, data, grid, SeedBundle{1, 2, std::nullopt});
    CHECK(sweep.points.size() == 2);
    CHECK((sweep.selected == 0.5 || sweep.selected == 1.0));
    const auto reg = fixtures::small_spec(TaskKind::regression);
    CHECK_THROWS_AS(temperature_sweep(reg, cfg, data, data, grid, SeedBundle{}), ConfigError);
}
