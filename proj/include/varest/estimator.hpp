#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varest/nn.hpp"
#include "varest/probe.hpp"
#include "varest/variation.hpp"

namespace varest {

enum class Objective { regression, classification };
std::string to_string(Objective objective);
Objective parse_objective(const std::string& text);  // reg|regression|cls|classification

struct EstimatorSpec {
    std::vector<std::size_t> hidden_sizes{100, 50};
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 150;
    std::size_t patience = 5;
    double validation_fraction = 0.1;
    Objective objective = Objective::regression;
    std::size_t buckets = 5;
    FeatureMode feature_mode = FeatureMode::BV;

    void validate() const;
    TrainConfig train_config() const;
    bool operator==(const EstimatorSpec&) const = default;
};

std::map<std::string, std::string> to_key_values(const EstimatorSpec& spec);
EstimatorSpec estimator_spec_from_key_values(const std::map<std::string, std::string>& kv);

// [0, mean + 3 std] of the training labels (sample std).
OutputClamp regression_clamp(std::span<const double> pv_labels);

struct EstimatorModel {
    EstimatorSpec spec;
    ModelSpec net;
    ModelParams params;
    SeedBundle seeds;
    TrainingHistory history;
    std::vector<std::string> warnings;
    // Regression nets train on (pv - label_shift) / label_scale; estimates are
    // mapped back, so the clamp holds in PV units.
    double label_shift = 0.0;
    double label_scale = 1.0;
};

// Numeric-only dataset over the feature rows; labels as given.
Dataset feature_dataset(const FeatureMatrix& features, std::span<const double> labels, TaskKind task,
                        std::size_t classes = 1);

EstimatorModel train_regressor(const FeatureMatrix& features, std::span<const double> pv_labels,
                               const EstimatorSpec& spec, std::uint64_t seed);
// bucket_labels are 1..K.
EstimatorModel train_classifier(const FeatureMatrix& features, std::span<const int> bucket_labels,
                                const EstimatorSpec& spec, std::uint64_t seed);

// Regression: one estimate per row. Classification: rows x K probabilities.
std::vector<double> estimate(const EstimatorModel& model, const FeatureMatrix& features);

struct RegressionMetrics {
    double mse = 0.0;
    std::optional<double> r2;  // undefined when the labels have zero spread
};

RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> labels);
RegressionMetrics eval_regression(const EstimatorModel& model, const FeatureMatrix& features,
                                  std::span<const double> pv_labels);

struct ClassificationMetrics {
    std::size_t buckets = 0;
    std::vector<std::optional<double>> auc;       // one-vs-rest, per bucket
    std::vector<std::vector<double>> confusion;   // rows = true bucket, normalized by row count
    std::vector<std::size_t> support;             // true-bucket counts
    double accuracy = 0.0;
};

// probabilities: rows x K; labels 1..K.
ClassificationMetrics classification_metrics(std::span<const double> probabilities, std::span<const int> labels,
                                             std::size_t k);
ClassificationMetrics eval_classification(const EstimatorModel& model, const FeatureMatrix& features,
                                          std::span<const int> bucket_labels);

// PV over `passes` stochastic forward passes of an already-trained dropout model.
PVTable dropout_pv(const ModelParams& params, const ModelSpec& spec, const Dataset& test, std::size_t passes,
                   std::uint64_t seed, std::size_t workers = 1);

struct DropoutBaseline {
    ModelParams params;
    TrainingHistory history;
    PVTable pv;
};

// Trains one model with dropout on its hidden layers, then runs dropout_pv.
DropoutBaseline mc_dropout_pv(ModelSpec spec, const TrainConfig& config, const Dataset& train_data,
                              const Dataset& test, double rate, std::size_t passes, std::uint64_t seed,
                              std::size_t workers = 1);

struct PVComparison {
    std::optional<double> pearson;  // undefined when either side is constant
    double rmse = 0.0;
    std::optional<double> r2;
};

// pv_b is treated as the ground truth.
PVComparison compare_pv(const PVTable& pv_a, const PVTable& pv_b);

using ReportFields = std::vector<std::pair<std::string, std::string>>;

std::string format_optional(const std::optional<double>& value);  // "undefined" when empty
ReportFields report_fields(const RegressionMetrics& metrics);
ReportFields report_fields(const ClassificationMetrics& metrics);
ReportFields report_fields(const PVComparison& comparison);

// "#varest-report\t1\t<kind>" followed by key=value lines.
std::string format_report(const std::string& kind, const ReportFields& fields);
std::map<std::string, std::string> parse_report(const std::string& text);
std::string format_confusion(const ClassificationMetrics& metrics);

// Writes <dir>/estimator.txt (spec, seeds, training summary) and
// <dir>/estimator.model.
void save_estimator(const std::filesystem::path& dir, const EstimatorModel& model);
EstimatorModel load_estimator(const std::filesystem::path& dir);

}  // namespace varest
