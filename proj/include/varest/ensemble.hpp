#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "varest/data.hpp"
#include "varest/nn.hpp"

namespace varest {

// Which randomness sources are live. Codes follow the table order:
// R0 none, R1 R, R2 S, R3 R+S, R4 J, R5 R+J, R6 S+J, R7 R+S+J.
struct RandomnessSetting {
    bool rand_init = false;
    bool shuffle = false;
    bool jackknife = false;

    int index() const { return (rand_init ? 1 : 0) + (shuffle ? 2 : 0) + (jackknife ? 4 : 0); }
    std::string code() const { return "R" + std::to_string(index()); }
    std::string sources() const;  // "None", "R+S", ...

    static RandomnessSetting from_index(int index);
    static RandomnessSetting from_code(const std::string& code);

    bool operator==(const RandomnessSetting&) const = default;
};

// Init seed used by every member when RandInit is off.
std::uint64_t global_init_seed(std::uint64_t master_seed);

// Member i's seeds depend only on (master_seed, i, setting flags), so members
// shared between settings or between ensembles of different size agree.
std::vector<SeedBundle> make_seed_bundles(const RandomnessSetting& setting, std::size_t n,
                                          std::uint64_t master_seed);

struct Ensemble {
    ModelSpec spec;
    TrainConfig config;
    RandomnessSetting setting;
    std::uint64_t master_seed = 0;
    std::vector<SeedBundle> seeds;
    std::vector<ModelParams> members;
    std::vector<TrainingHistory> histories;

    std::size_t size() const noexcept { return members.size(); }
};

using MemberCallback = std::function<void(std::size_t member, const TrainingHistory&)>;

// Jackknife (when live) leaves out fold i of n for member i.
Ensemble train_ensemble(const ModelSpec& spec, const TrainConfig& config, const Dataset& train_data,
                        const RandomnessSetting& setting, std::size_t n, std::uint64_t master_seed,
                        std::size_t workers = 1, const MemberCallback& on_member = {});

// Dataset that member `index` trains on.
Dataset member_training_data(const Dataset& train_data, const RandomnessSetting& setting,
                             std::size_t n, std::size_t index);

// Predictions of every member over a dataset, stored [member][example][class].
struct PredictionMatrix {
    TaskKind task = TaskKind::regression;
    std::size_t members = 0;
    std::size_t examples = 0;
    std::size_t width = 1;  // classes for multiclass, else 1
    std::vector<std::int64_t> row_ids;
    std::vector<double> values;

    std::span<const double> at(std::size_t member, std::size_t example) const {
        return {values.data() + (member * examples + example) * width, width};
    }
    // Member-mean prediction, examples x width.
    std::vector<double> mean() const;
    PredictionMatrix select_members(std::span<const std::size_t> members) const;
    bool operator==(const PredictionMatrix&) const = default;
};

PredictionMatrix predict_matrix(const Ensemble& ensemble, const Dataset& examples, std::size_t workers = 1);
PredictionMatrix predict_matrix(const ModelSpec& spec, std::span<const ModelParams> members,
                                const Dataset& examples, std::size_t workers = 1);

// One line per example: row_id then one column per member (multiclass cells
// are ';'-joined probabilities).
void save_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& matrix);
PredictionMatrix load_prediction_matrix(const std::filesystem::path& path);

// Ensemble manifest: flat key=value text. Member models are stored as
// separate artifacts next to it.
struct EnsembleManifest {
    RandomnessSetting setting;
    std::size_t n = 0;
    std::uint64_t master_seed = 0;
    ModelSpec spec;
    TrainConfig config;
    std::vector<SeedBundle> seeds;
    std::vector<std::string> artifacts;  // relative to the manifest directory
};

std::string format_manifest(const EnsembleManifest& manifest);
EnsembleManifest parse_manifest(const std::string& text);

std::map<std::string, std::string> to_key_values(const TrainConfig& config);
TrainConfig train_config_from_key_values(const std::map<std::string, std::string>& kv);

// Writes manifest.txt and models/member_XXX.model under dir.
void save_ensemble(const std::filesystem::path& dir, const Ensemble& ensemble);
Ensemble load_ensemble(const std::filesystem::path& dir);

}  // namespace varest
