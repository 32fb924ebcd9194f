#include "varest/probe.hpp"

#include <cmath>
#include <sstream>

#include "varest/error.hpp"
#include "varest/io.hpp"

namespace varest {

std::vector<std::size_t> neuron_layers(const ModelSpec& spec) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < spec.hidden_sizes.size(); ++l) out.insert(out.end(), spec.hidden_sizes[l], l);
    return out;
}

NeuronStats neuron_stats_from(std::span<const double> activations, std::size_t neurons,
                              std::span<const std::size_t> layer_of) {
    if (neurons == 0 || activations.size() % neurons != 0) throw ConfigError("neuron_stats: bad activation shape");
    if (layer_of.size() != neurons) throw ConfigError("neuron_stats: layer map length mismatch");
    const std::size_t n = activations.size() / neurons;
    if (n == 0) throw UsageError("neuron_stats: empty reference data");
    NeuronStats s;
    s.mean.assign(neurons, 0.0);
    std::vector<double> m2(neurons, 0.0);
    std::vector<double> active(neurons, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double count = static_cast<double>(i + 1);
        for (std::size_t j = 0; j < neurons; ++j) {
            const double x = activations[i * neurons + j];
            const double d = x - s.mean[j];
            s.mean[j] += d / count;
            m2[j] += d * (x - s.mean[j]);
            if (x > 0) active[j] += 1.0;
        }
    }
    s.std.resize(neurons);
    s.activation_rate.resize(neurons);
    for (std::size_t j = 0; j < neurons; ++j) {
        s.std[j] = n > 1 ? std::sqrt(std::max(0.0, m2[j] / static_cast<double>(n - 1))) : 0.0;
        s.activation_rate[j] = active[j] / static_cast<double>(n);
    }
    s.layer.assign(layer_of.begin(), layer_of.end());
    return s;
}

NeuronStats neuron_stats(const ModelParams& params, const ModelSpec& spec, const Dataset& reference) {
    if (reference.empty()) throw UsageError("neuron_stats: empty reference data");
    const auto acts = capture_activations(params, spec, reference);
    const auto layers = neuron_layers(spec);
    return neuron_stats_from(acts, spec.neuron_count(), layers);
}

ActivationVector normalize_activations(std::span<const double> raw, const NeuronStats& stats) {
    if (raw.size() != stats.size()) throw ConfigError("activation vector: stats length does not match the model");
    ActivationVector v;
    v.binary.resize(raw.size());
    v.value.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        v.binary[i] = raw[i] > 0 ? 1.0 : 0.0;
        v.value[i] = stats.std[i] > 0 ? (raw[i] - stats.mean[i]) / stats.std[i] : 0.0;
    }
    return v;
}

ActivationVector activation_vector(const ModelParams& params, const ModelSpec& spec, const NeuronStats& stats,
                                   const Example& example) {
    if (stats.size() != spec.neuron_count()) throw ConfigError("activation vector: stats length does not match the model");
    const auto fr = forward(params, spec, example, true);
    return normalize_activations(fr.activations, stats);
}

std::string to_string(FeatureMode mode) { return mode == FeatureMode::B ? "B" : "BV"; }

FeatureMode parse_feature_mode(const std::string& text) {
    if (text == "B") return FeatureMode::B;
    if (text == "BV") return FeatureMode::BV;
    throw ConfigError("unknown feature mode '" + text + "' (expected B or BV)");
}

FeatureMatrix activation_features(const ModelParams& params, const ModelSpec& spec, const NeuronStats& stats,
                                  const Dataset& data, FeatureMode mode) {
    const std::size_t neurons = spec.neuron_count();
    if (stats.size() != neurons) throw ConfigError("activation features: stats length does not match the model");
    const auto acts = capture_activations(params, spec, data);
    FeatureMatrix fm;
    fm.mode = mode;
    fm.width = mode == FeatureMode::BV ? 2 * neurons : neurons;
    fm.row_ids = data.row_ids();
    fm.values.resize(fm.rows() * fm.width);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto v = normalize_activations(std::span<const double>(acts).subspan(i * neurons, neurons), stats);
        double* out = fm.values.data() + i * fm.width;
        std::copy(v.binary.begin(), v.binary.end(), out);
        if (mode == FeatureMode::BV) std::copy(v.value.begin(), v.value.end(), out + neurons);
    }
    return fm;
}

void save_neuron_stats(const std::filesystem::path& path, const NeuronStats& stats) {
    std::ostringstream out;
    out << "#varest-neuron-stats\t1\n";
    out << "neuron\tlayer\tmean\tstd\tactivation_rate\n";
    for (std::size_t i = 0; i < stats.size(); ++i)
        out << i << '\t' << stats.layer[i] << '\t' << format_double(stats.mean[i]) << '\t'
            << format_double(stats.std[i]) << '\t' << format_double(stats.activation_rate[i]) << '\n';
    write_file(path, out.str());
}

NeuronStats load_neuron_stats(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "#varest-neuron-stats\t1")
        throw ParseError(path.string() + ":1: not a neuron stats file");
    std::getline(in, line);
    NeuronStats s;
    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_string(line, "\t");
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != 5) throw ParseError(where + ": expected 5 columns");
        if (parse_u64(f[0]) != s.size()) throw ParseError(where + ": neuron indices must be consecutive");
        s.layer.push_back(static_cast<std::size_t>(parse_u64(f[1])));
        s.mean.push_back(parse_double(f[2]));
        s.std.push_back(parse_double(f[3]));
        s.activation_rate.push_back(parse_double(f[4]));
    }
    return s;
}

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& features) {
    std::ostringstream out;
    out << "#varest-features\t1\t" << to_string(features.mode) << '\t' << features.width << '\n';
    for (std::size_t i = 0; i < features.rows(); ++i) {
        out << features.row_ids[i];
        for (double v : features.row(i)) out << '\t' << format_double(v);
        out << '\n';
    }
    write_file(path, out.str());
}

}  // namespace varest
