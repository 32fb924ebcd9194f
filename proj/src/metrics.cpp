#include "varest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varest/error.hpp"

namespace varest {

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
    if (scores.size() != positive.size()) throw InputError("auc: length mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of mid-ranks of the positives (Mann-Whitney U).
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (positive[order[k]]) {
                rank_sum += mid;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double round_rating(double prediction) { return std::round(std::clamp(prediction, 1.0, 5.0)); }

double brier_score(std::span<const double> probabilities, std::span<const double> labels, std::size_t classes) {
    if (classes == 0 || probabilities.size() != labels.size() * classes)
        throw InputError("brier_score: shape mismatch");
    if (labels.empty()) throw UsageError("brier_score: no examples");
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        for (std::size_t c = 0; c < classes; ++c) {
            const double d = probabilities[i * classes + c] - (c == y ? 1.0 : 0.0);
            total += d * d;
        }
    }
    return total / static_cast<double>(labels.size());
}

TargetReport target_metrics(std::span<const double> predictions, std::span<const double> labels, TaskKind task,
                            std::size_t width) {
    if (task != TaskKind::multiclass) width = 1;
    if (predictions.size() != labels.size() * width) throw InputError("target_metrics: predictions and labels differ in length");
    if (labels.empty()) throw UsageError("target_metrics: no examples");
    TargetReport report;
    report.task = task;
    const double n = static_cast<double>(labels.size());
    switch (task) {
        case TaskKind::regression: {
            double se = 0.0, hits = 0.0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] < 1.0 || labels[i] > 5.0) throw InputError("target_metrics: rating label outside 1..5");
                const double d = predictions[i] - labels[i];
                se += d * d;
                hits += round_rating(predictions[i]) == labels[i] ? 1.0 : 0.0;
            }
            report.mse = se / n;
            report.accuracy = hits / n;
            break;
        }
        case TaskKind::binary: {
            std::vector<std::uint8_t> pos(labels.size());
            double hits = 0.0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] != 0.0 && labels[i] != 1.0) throw InputError("target_metrics: binary label outside {0,1}");
                pos[i] = labels[i] == 1.0;
                hits += ((predictions[i] >= 0.5) == (labels[i] == 1.0)) ? 1.0 : 0.0;
            }
            report.auc = auc(predictions, pos);
            report.accuracy = hits / n;
            break;
        }
        case TaskKind::multiclass: {
            double hits = 0.0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] < 0 || labels[i] >= static_cast<double>(width))
                    throw InputError("target_metrics: class label out of range");
                const auto row = predictions.subspan(i * width, width);
                const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
                hits += static_cast<double>(arg) == labels[i] ? 1.0 : 0.0;
            }
            report.accuracy = hits / n;
            report.brier = brier_score(predictions, labels, width);
            break;
        }
    }
    return report;
}

double select_temperature(std::span<const TemperaturePoint> points) {
    if (points.empty()) throw UsageError("temperature sweep: empty grid");
    const TemperaturePoint* best = &points.front();
    for (const auto& p : points) {
        if (p.brier < best->brier ||
            (p.brier == best->brier &&
             (p.accuracy > best->accuracy || (p.accuracy == best->accuracy && p.temperature < best->temperature))))
            best = &p;
    }
    return best->temperature;
}

TemperatureSweep temperature_sweep(const ModelSpec& spec, const TrainConfig& config, const Dataset& train_data,
                                   const Dataset& valid, std::span<const double> grid, const SeedBundle& seeds) {
    if (spec.task != TaskKind::multiclass) throw ConfigError("temperature sweep requires a multiclass task");
    TemperatureSweep sweep;
    std::vector<double> labels;
    for (const auto& r : valid.rows) labels.push_back(r.label);
    for (double t : grid) {
        ModelSpec s = spec;
        s.temperature = t;
        const auto trained = train(s, config, train_data, seeds);
        const auto probs = predict(trained.params, s, valid);
        const auto report = target_metrics(probs, labels, TaskKind::multiclass, s.output_width());
        sweep.points.push_back({t, *report.brier, *report.accuracy});
    }
    sweep.selected = select_temperature(sweep.points);
    return sweep;
}

}  // namespace varest
