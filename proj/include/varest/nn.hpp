#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varest/data.hpp"

namespace varest {

struct EmbeddingSpec {
    std::string feature;
    std::size_t vocab_size = 0;
    std::size_t dim = 0;

    bool operator==(const EmbeddingSpec&) const = default;
};

struct OutputClamp {
    double lower = 0.0;
    double upper = 0.0;

    bool operator==(const OutputClamp&) const = default;
};

// Architecture of a ReLU MLP over embedded categorical ids and numeric inputs.
// Embedding i reads categorical feature i of the dataset schema.
struct ModelSpec {
    TaskKind task = TaskKind::regression;
    std::size_t num_classes = 1;
    std::vector<EmbeddingSpec> embeddings;
    std::size_t numeric_inputs = 0;
    std::vector<std::size_t> hidden_sizes;
    double temperature = 1.0;
    double dropout_rate = 0.0;
    double embedding_init = 0.05;  // embeddings start uniform in +-embedding_init
    std::optional<OutputClamp> clamp;  // regression only

    void validate() const;
    // Throws InputError unless the schema's features line up with this spec.
    void check_schema(const FeatureSchema& schema) const;

    std::size_t input_width() const;
    std::size_t neuron_count() const;
    std::size_t output_width() const { return task == TaskKind::multiclass ? num_classes : 1; }

    bool operator==(const ModelSpec&) const = default;
};

std::map<std::string, std::string> to_key_values(const ModelSpec& spec);
ModelSpec spec_from_key_values(const std::map<std::string, std::string>& kv);

// Offsets into the flat parameter vector. Embedding tables come first, then
// weight matrices (row-major, out x in) and biases per layer; the last layer
// is the output head.
struct ParamLayout {
    std::vector<std::size_t> embedding_offset;
    std::vector<std::size_t> embedding_dim;
    std::vector<std::size_t> weight_offset;
    std::vector<std::size_t> bias_offset;
    std::vector<std::size_t> layer_in;
    std::vector<std::size_t> layer_out;
    std::size_t dense_begin = 0;
    std::size_t total = 0;

    explicit ParamLayout(const ModelSpec& spec);
    ParamLayout() = default;
    bool operator==(const ParamLayout&) const = default;
};

struct ModelParams {
    ParamLayout layout;
    std::vector<double> values;

    bool operator==(const ModelParams& other) const { return values == other.values; }
};

// Glorot-uniform dense weights, uniform(+-embedding_init) embeddings, zero biases.
// Each tensor draws from its own stream keyed by (seed, tensor path).
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

struct Prediction {
    std::vector<double> values;  // 1 entry for value tasks, C for multiclass

    double value() const { return values.front(); }
};

struct ForwardResult {
    Prediction prediction;
    std::vector<double> head;         // pre-activation head output (logits)
    std::vector<double> activations;  // raw post-ReLU outputs, layer order (capture only)
};

ForwardResult forward(const ModelParams& params, const ModelSpec& spec, const Example& example,
                      bool capture = false);

// Loss of one example from the head output (logits / raw regression output).
double loss(std::span<const double> head, double label, const ModelSpec& spec);
Prediction head_to_prediction(std::span<const double> head, const ModelSpec& spec);

// Row-major n x output_width predictions.
std::vector<double> predict(const ModelParams& params, const ModelSpec& spec, const Dataset& data);

// Inverted-dropout inference, one Bernoulli mask per (pass_seed, row_id, neuron).
std::vector<double> predict_with_dropout(const ModelParams& params, const ModelSpec& spec,
                                         const Dataset& data, std::uint64_t pass_seed);

// Row-major n x neuron_count raw post-ReLU outputs.
std::vector<double> capture_activations(const ModelParams& params, const ModelSpec& spec,
                                        const Dataset& data);

struct TrainConfig {
    std::size_t max_epochs = 20;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::size_t patience = 2;
    double validation_fraction = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// Seeds realizing one training run. The jackknife index is applied by the
// caller (ensemble) before training.
struct SeedBundle {
    std::uint64_t init_seed = 0;
    std::optional<std::uint64_t> shuffle_seed;
    std::optional<std::size_t> jackknife_index;

    bool operator==(const SeedBundle&) const = default;
};

struct TrainingHistory {
    std::vector<double> train_loss;  // mean batch loss per epoch
    std::vector<double> validation_loss;
    double initial_loss = 0.0;  // mean loss over the fitted rows before training
    double final_loss = 0.0;    // same, after restoring the best epoch
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::size_t train_rows = 0;
    std::size_t validation_rows = 0;
    bool stopped_early = false;
};

struct TrainResult {
    ModelParams params;
    TrainingHistory history;
};

// Rows whose row_id hashes below the fraction form the early-stopping slice.
bool in_validation_slice(std::int64_t row_id, double fraction);

// Sequential mini-batch Adam. Embedding rows use lazy (touched-rows-only)
// moment updates. Pure function of its arguments.
TrainResult train(const ModelSpec& spec, const TrainConfig& config, const Dataset& data,
                  const SeedBundle& seeds);

// Gradient of one example's loss with respect to every parameter.
std::vector<double> gradient(const ModelParams& params, const ModelSpec& spec,
                             const Example& example);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0;
    bool passed = false;
};

// Central finite differences against the analytic gradient. When
// corrupt_parameter is set, that analytic entry is sign-flipped first
// (negative control).
GradCheckResult grad_check(const ModelSpec& spec, const ModelParams& params,
                           const Example& example, double epsilon, double tolerance,
                           std::optional<std::size_t> corrupt_parameter = std::nullopt);
GradCheckResult grad_check(const ModelSpec& spec, std::uint64_t seed, const Example& example,
                           double epsilon, double tolerance);

struct ModelArtifact {
    ModelSpec spec;
    ModelParams params;
    SeedBundle seeds;
};

void save_model(const std::filesystem::path& path, const ModelArtifact& model);
ModelArtifact load_model(const std::filesystem::path& path);

}  // namespace varest
