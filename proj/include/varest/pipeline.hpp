#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varest/config.hpp"
#include "varest/data.hpp"
#include "varest/ensemble.hpp"
#include "varest/estimator.hpp"
#include "varest/metrics.hpp"
#include "varest/nn.hpp"
#include "varest/probe.hpp"
#include "varest/variation.hpp"

namespace varest {

// D_t (target training), D_e (ground-truth PV) and its halves D_e1 (estimator
// training) and D_e2 (estimator test).
struct PreparedData {
    std::string task;  // ml-r | ml-c | synth-binary
    Dataset train;
    Dataset eval;
    Dataset eval1;
    Dataset eval2;
};

PreparedData prepare_splits(const Dataset& all, const std::string& task, std::span<const double> splits,
                            std::span<const double> estimator_splits, std::uint64_t seed);
void save_prepared(const std::filesystem::path& dir, const PreparedData& data);
PreparedData load_prepared(const std::filesystem::path& dir);

// Keeps `rows` examples chosen by a seeded permutation, in their original order.
Dataset limit_rows(const Dataset& data, std::size_t rows, std::uint64_t seed);

TaskKind task_kind(const std::string& task);

// Task preset spec with config overrides (model.hidden_sizes, model.temperature,
// model.embedding_init, model.embedding_dim for synth-binary).
ModelSpec model_spec_for(const std::string& task, const Config& config, const FeatureSchema& schema);
TrainConfig train_config_for(const Config& config);
EstimatorSpec estimator_spec_for(const Config& config);

struct SettingRun {
    Ensemble ensemble;
    PredictionMatrix predictions;  // over D_e
    PVTable pv;                    // over D_e
    PVTable pv1;                   // over D_e1
    PVTable pv2;                   // over D_e2
    TargetReport metrics;          // ensemble-mean prediction over D_e
};

SettingRun run_setting(const ModelSpec& spec, const TrainConfig& config, const PreparedData& data,
                       const RandomnessSetting& setting, std::size_t n, std::uint64_t master_seed,
                       std::size_t workers = 1, const MemberCallback& on_member = {});

// PV tables and target metrics for an already-trained ensemble.
SettingRun evaluate_ensemble(Ensemble ensemble, const PreparedData& data, std::size_t workers = 1);

struct Table1Row {
    std::string code;
    std::string sources;
    std::size_t n = 0;
    double mean_pv = 0.0;
    double std_pv = 0.0;
    double pv_coefficient = 0.0;  // NaN for multiclass
    TargetReport metrics;
};

Table1Row table1_row(const SettingRun& run);
std::string format_table1(std::span<const Table1Row> rows);

struct EstimationResult {
    NeuronStats stats;
    FeatureMatrix train_features;
    FeatureMatrix test_features;
    std::vector<double> train_pv;
    std::vector<double> test_pv;
    EstimatorModel model;
    std::vector<double> estimates;  // on the test rows; probabilities for classification
    std::optional<RegressionMetrics> regression;
    std::optional<BucketScheme> scheme;
    std::optional<ClassificationMetrics> classification;
};

// Target model probes D_e1 (statistics and training features) and D_e2 (test
// features); the estimator learns the ensemble PV of D_e1 and is scored on D_e2.
EstimationResult run_estimation(const ModelSpec& spec, const ModelParams& target, const Dataset& train_rows,
                                const PVTable& train_pv, const Dataset& test_rows, const PVTable& test_pv,
                                const EstimatorSpec& estimator, std::uint64_t seed);

// PV values of `table` in the row order of `data`.
std::vector<double> pv_in_order(const PVTable& table, const Dataset& data);

}  // namespace varest
