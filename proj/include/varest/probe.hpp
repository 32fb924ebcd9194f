#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "varest/data.hpp"
#include "varest/nn.hpp"

namespace varest {

struct NeuronStats {
    std::vector<double> mean;
    std::vector<double> std;  // divisor n-1
    std::vector<double> activation_rate;
    std::vector<std::size_t> layer;

    std::size_t size() const { return mean.size(); }
    bool operator==(const NeuronStats&) const = default;
};

// Accumulates from a row-major n x neurons matrix of raw post-ReLU outputs.
NeuronStats neuron_stats_from(std::span<const double> activations, std::size_t neurons,
                              std::span<const std::size_t> layer_of);
NeuronStats neuron_stats(const ModelParams& params, const ModelSpec& spec, const Dataset& reference);

// Layer index of every neuron, in activation order.
std::vector<std::size_t> neuron_layers(const ModelSpec& spec);

struct ActivationVector {
    std::vector<double> binary;
    std::vector<double> value;
};

ActivationVector normalize_activations(std::span<const double> raw, const NeuronStats& stats);
ActivationVector activation_vector(const ModelParams& params, const ModelSpec& spec, const NeuronStats& stats,
                                   const Example& example);

enum class FeatureMode { B, BV };
std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& text);

struct FeatureMatrix {
    FeatureMode mode = FeatureMode::BV;
    std::size_t width = 0;
    std::vector<std::int64_t> row_ids;
    std::vector<double> values;  // row-major rows x width

    std::size_t rows() const { return row_ids.size(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }
};

// Binary features first, then (BV) the normalized values.
FeatureMatrix activation_features(const ModelParams& params, const ModelSpec& spec, const NeuronStats& stats,
                                  const Dataset& data, FeatureMode mode);

void save_neuron_stats(const std::filesystem::path& path, const NeuronStats& stats);
NeuronStats load_neuron_stats(const std::filesystem::path& path);
void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& features);

}  // namespace varest
