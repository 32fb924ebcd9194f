#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varest/data.hpp"
#include "varest/nn.hpp"

namespace varest {

// Rank-statistic ROC AUC with tied scores counted 1/2. Empty when either
// class is absent.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

// Ratings are clipped to [1, 5], then rounded half away from zero.
double round_rating(double prediction);

// Mean squared distance between probability vectors (row-major, `classes`
// wide) and the one-hot labels.
double brier_score(std::span<const double> probabilities, std::span<const double> labels, std::size_t classes);

struct TargetReport {
    TaskKind task = TaskKind::regression;
    std::optional<double> mse;       // regression
    std::optional<double> accuracy;  // all tasks
    std::optional<double> auc;       // binary
    std::optional<double> brier;     // multiclass
};

// predictions: n x width (width = classes for multiclass, else 1).
TargetReport target_metrics(std::span<const double> predictions, std::span<const double> labels,
                            TaskKind task, std::size_t width = 1);

struct TemperaturePoint {
    double temperature = 1.0;
    double brier = 0.0;
    double accuracy = 0.0;
};

struct TemperatureSweep {
    std::vector<TemperaturePoint> points;
    double selected = 1.0;
};

// One model per temperature, all trained from the same seeds. Selection: lowest
// Brier, then higher accuracy, then smaller temperature.
TemperatureSweep temperature_sweep(const ModelSpec& spec, const TrainConfig& config, const Dataset& train,
                                   const Dataset& valid, std::span<const double> grid, const SeedBundle& seeds);

// Selection rule on already-measured points.
double select_temperature(std::span<const TemperaturePoint> points);

}  // namespace varest
