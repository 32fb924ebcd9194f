#include "varest/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/rng.hpp"

namespace varest {

// ---------------------------------------------------------------------------
// Spec

void ModelSpec::validate() const {
    if (hidden_sizes.empty()) throw ConfigError("model spec: hidden_sizes must be non-empty");
    for (auto h : hidden_sizes)
        if (h == 0) throw ConfigError("model spec: zero-size hidden layer");
    for (const auto& e : embeddings) {
        if (e.vocab_size == 0) throw ConfigError("model spec: embedding '" + e.feature + "' has vocab 0");
        if (e.dim == 0) throw ConfigError("model spec: embedding '" + e.feature + "' has dim 0");
    }
    if (input_width() == 0) throw ConfigError("model spec: no inputs");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ConfigError("model spec: temperature must be positive");
    if (task != TaskKind::multiclass && temperature != 1.0)
        throw ConfigError("model spec: temperature is only meaningful for multiclass tasks");
    if (task == TaskKind::multiclass && num_classes < 2)
        throw ConfigError("model spec: multiclass task needs at least 2 classes");
    if (task != TaskKind::multiclass && num_classes != 1)
        throw ConfigError("model spec: value tasks have a single output");
    if (!(embedding_init >= 0.0) || !std::isfinite(embedding_init))
        throw ConfigError("model spec: embedding_init must be a finite non-negative half-width");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("model spec: dropout rate must lie in [0, 1)");
    if (clamp) {
        if (task != TaskKind::regression) throw ConfigError("model spec: clamp applies to regression only");
        if (!(clamp->upper > clamp->lower)) throw ConfigError("model spec: clamp upper must exceed lower");
    }
}

void ModelSpec::check_schema(const FeatureSchema& schema) const {
    if (schema.categorical_names.size() != embeddings.size())
        throw InputError("schema has " + std::to_string(schema.categorical_names.size()) +
                         " categorical features, model expects " + std::to_string(embeddings.size()));
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (schema.categorical_names[i] != embeddings[i].feature)
            throw InputError("schema feature '" + schema.categorical_names[i] +
                             "' does not match model embedding '" + embeddings[i].feature + "'");
        if (schema.vocab_sizes[i] > embeddings[i].vocab_size)
            throw InputError("vocabulary of '" + embeddings[i].feature + "' exceeds the model's");
    }
    if (schema.numeric_count != numeric_inputs)
        throw InputError("schema has " + std::to_string(schema.numeric_count) +
                         " numeric features, model expects " + std::to_string(numeric_inputs));
}

std::size_t ModelSpec::input_width() const {
    std::size_t w = numeric_inputs;
    for (const auto& e : embeddings) w += e.dim;
    return w;
}

std::size_t ModelSpec::neuron_count() const {
    return std::accumulate(hidden_sizes.begin(), hidden_sizes.end(), std::size_t{0});
}

std::map<std::string, std::string> to_key_values(const ModelSpec& spec) {
    std::map<std::string, std::string> kv;
    kv["task"] = to_string(spec.task);
    kv["num_classes"] = std::to_string(spec.num_classes);
    std::string emb;
    for (std::size_t i = 0; i < spec.embeddings.size(); ++i) {
        const auto& e = spec.embeddings[i];
        if (i) emb += ';';
        emb += e.feature + ":" + std::to_string(e.vocab_size) + ":" + std::to_string(e.dim);
    }
    kv["embeddings"] = emb;
    kv["numeric_inputs"] = std::to_string(spec.numeric_inputs);
    std::string hidden;
    for (std::size_t i = 0; i < spec.hidden_sizes.size(); ++i) {
        if (i) hidden += ',';
        hidden += std::to_string(spec.hidden_sizes[i]);
    }
    kv["hidden_sizes"] = hidden;
    kv["temperature"] = format_double(spec.temperature);
    kv["dropout_rate"] = format_double(spec.dropout_rate);
    kv["embedding_init"] = format_double(spec.embedding_init);
    if (spec.clamp) {
        kv["clamp_lower"] = format_double(spec.clamp->lower);
        kv["clamp_upper"] = format_double(spec.clamp->upper);
    }
    return kv;
}

ModelSpec spec_from_key_values(const std::map<std::string, std::string>& kv) {
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError("model spec: missing key '" + key + "'");
        return it->second;
    };
    ModelSpec spec;
    spec.task = parse_task_kind(get("task"));
    spec.num_classes = parse_u64(get("num_classes"));
    const auto& emb = get("embeddings");
    if (!emb.empty())
        for (auto item : split_view(emb, ";")) {
            auto f = split_view(item, ":");
            if (f.size() != 3) throw ConfigError("model spec: bad embedding entry '" + std::string(item) + "'");
            spec.embeddings.push_back({std::string(f[0]), parse_u64(f[1]), parse_u64(f[2])});
        }
    spec.numeric_inputs = parse_u64(get("numeric_inputs"));
    for (auto h : split_view(get("hidden_sizes"), ",")) spec.hidden_sizes.push_back(parse_u64(h));
    spec.temperature = parse_double(get("temperature"));
    spec.dropout_rate = parse_double(get("dropout_rate"));
    spec.embedding_init = parse_double(get("embedding_init"));
    if (kv.count("clamp_lower") || kv.count("clamp_upper"))
        spec.clamp = OutputClamp{parse_double(get("clamp_lower")), parse_double(get("clamp_upper"))};
    spec.validate();
    return spec;
}

ParamLayout::ParamLayout(const ModelSpec& spec) {
    std::size_t offset = 0;
    for (const auto& e : spec.embeddings) {
        embedding_offset.push_back(offset);
        embedding_dim.push_back(e.dim);
        offset += e.vocab_size * e.dim;
    }
    dense_begin = offset;
    std::size_t in = spec.input_width();
    std::vector<std::size_t> outs = spec.hidden_sizes;
    outs.push_back(spec.output_width());
    for (auto out : outs) {
        layer_in.push_back(in);
        layer_out.push_back(out);
        weight_offset.push_back(offset);
        offset += in * out;
        bias_offset.push_back(offset);
        offset += out;
        in = out;
    }
    total = offset;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelParams params{ParamLayout(spec), {}};
    const auto& L = params.layout;
    params.values.assign(L.total, 0.0);
    for (std::size_t t = 0; t < spec.embeddings.size(); ++t) {
        CounterRng rng(seed, "init/embedding", t);
        const double limit = spec.embedding_init;
        const std::size_t count = spec.embeddings[t].vocab_size * spec.embeddings[t].dim;
        double* p = params.values.data() + L.embedding_offset[t];
        for (std::size_t i = 0; i < count; ++i) p[i] = rng.uniform(-limit, limit);
    }
    for (std::size_t l = 0; l < L.layer_in.size(); ++l) {
        CounterRng rng(seed, "init/dense", l);
        const double limit =
            std::sqrt(6.0 / static_cast<double>(L.layer_in[l] + L.layer_out[l]));
        double* w = params.values.data() + L.weight_offset[l];
        for (std::size_t i = 0; i < L.layer_in[l] * L.layer_out[l]; ++i)
            w[i] = rng.uniform(-limit, limit);
    }
    return params;
}

// ---------------------------------------------------------------------------
// Heads

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void softmax_scaled(std::span<const double> logits, double temperature, std::span<double> out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double z : logits) mx = std::max(mx, z / temperature);
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] / temperature - mx);
        sum += out[c];
    }
    for (auto& p : out) p /= sum;
}

void check_label(double label, const ModelSpec& spec) {
    bool ok = std::isfinite(label);
    if (ok && spec.task == TaskKind::binary) ok = label == 0.0 || label == 1.0;
    if (ok && spec.task == TaskKind::multiclass)
        ok = label >= 0 && label < static_cast<double>(spec.num_classes) && label == std::floor(label);
    if (!ok) throw InputError("label " + format_double(label) + " out of range for " + to_string(spec.task));
}

double regression_output(double z, const ModelSpec& spec) {
    return spec.clamp ? std::clamp(z, spec.clamp->lower, spec.clamp->upper) : z;
}

// Loss and d loss / d head for one example.
double head_loss_grad(std::span<const double> head, double label, const ModelSpec& spec,
                      std::span<double> grad, std::span<double> scratch) {
    switch (spec.task) {
        case TaskKind::regression: {
            const double z = head[0];
            const double out = regression_output(z, spec);
            const double diff = out - label;
            const bool clamped = spec.clamp && (z < spec.clamp->lower || z > spec.clamp->upper);
            grad[0] = clamped ? 0.0 : 2.0 * diff;
            return diff * diff;
        }
        case TaskKind::binary: {
            const double z = head[0];
            grad[0] = sigmoid(z) - label;
            return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
        }
        case TaskKind::multiclass: {
            const double T = spec.temperature;
            const auto y = static_cast<std::size_t>(label);
            double mx = -std::numeric_limits<double>::infinity();
            for (double z : head) mx = std::max(mx, z / T);
            double sum = 0.0;
            for (std::size_t c = 0; c < head.size(); ++c) {
                scratch[c] = std::exp(head[c] / T - mx);
                sum += scratch[c];
            }
            for (std::size_t c = 0; c < head.size(); ++c)
                grad[c] = (scratch[c] / sum - (c == y ? 1.0 : 0.0)) / T;
            return std::log(sum) + mx - head[y] / T;
        }
    }
    return 0.0;
}

}  // namespace

double loss(std::span<const double> head, double label, const ModelSpec& spec) {
    check_label(label, spec);
    if (head.size() != spec.output_width()) throw InputError("loss: head width mismatch");
    std::vector<double> grad(head.size()), scratch(head.size());
    return head_loss_grad(head, label, spec, grad, scratch);
}

Prediction head_to_prediction(std::span<const double> head, const ModelSpec& spec) {
    Prediction p;
    switch (spec.task) {
        case TaskKind::regression: p.values = {regression_output(head[0], spec)}; break;
        case TaskKind::binary: p.values = {sigmoid(head[0])}; break;
        case TaskKind::multiclass:
            p.values.resize(head.size());
            softmax_scaled(head, spec.temperature, p.values);
            break;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward / backward engine

namespace {

class Engine {
public:
    Engine(const ModelSpec& spec, const ParamLayout& layout) : spec_(spec), L_(layout) {
        const std::size_t layers = L_.layer_in.size();
        act_.resize(layers + 1);
        act_[0].resize(spec.input_width());
        for (std::size_t l = 0; l < layers; ++l) act_[l + 1].resize(L_.layer_out[l]);
        raw_.resize(layers - 1);
        scale_.resize(layers - 1);
        delta_.resize(layers);
        for (std::size_t l = 0; l < layers; ++l) delta_[l].resize(L_.layer_out[l]);
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            raw_[l].resize(L_.layer_out[l]);
            scale_[l].assign(L_.layer_out[l], 1.0);
        }
        dinput_.resize(spec.input_width());
        head_grad_.resize(spec.output_width());
        scratch_.resize(spec.output_width());
    }

    // dropout_key: when set, hidden outputs are masked with inverted dropout.
    void forward(const double* p, const Example& ex, std::optional<std::uint64_t> dropout_key) {
        double* x = act_[0].data();
        std::size_t pos = 0;
        for (std::size_t t = 0; t < spec_.embeddings.size(); ++t) {
            const auto id = ex.categorical[t];
            if (id < 0 || static_cast<std::size_t>(id) >= spec_.embeddings[t].vocab_size)
                throw InputError("row " + std::to_string(ex.row_id) + ": id " + std::to_string(id) +
                                 " of '" + spec_.embeddings[t].feature + "' outside vocabulary");
            const std::size_t dim = L_.embedding_dim[t];
            const double* row = p + L_.embedding_offset[t] + static_cast<std::size_t>(id) * dim;
            std::copy(row, row + dim, x + pos);
            pos += dim;
        }
        std::copy(ex.numeric.begin(), ex.numeric.end(), x + pos);

        const std::size_t layers = L_.layer_in.size();
        const bool drop = dropout_key.has_value() && spec_.dropout_rate > 0.0;
        const double keep_scale = drop ? 1.0 / (1.0 - spec_.dropout_rate) : 1.0;
        std::size_t neuron = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            const std::size_t in = L_.layer_in[l], out = L_.layer_out[l];
            const double* w = p + L_.weight_offset[l];
            const double* b = p + L_.bias_offset[l];
            const double* src = act_[l].data();
            double* dst = act_[l + 1].data();
            for (std::size_t o = 0; o < out; ++o) {
                const double* row = w + o * in;
                double s = 0.0;
                for (std::size_t i = 0; i < in; ++i) s += row[i] * src[i];
                dst[o] = s + b[o];
            }
            if (l + 1 < layers) {
                double* raw = raw_[l].data();
                double* scale = scale_[l].data();
                for (std::size_t o = 0; o < out; ++o) {
                    const double r = dst[o] > 0.0 ? dst[o] : 0.0;
                    raw[o] = r;
                    if (drop) {
                        scale[o] = uniform_at(*dropout_key, neuron + o) >= spec_.dropout_rate ? keep_scale : 0.0;
                        dst[o] = r * scale[o];
                    } else {
                        scale[o] = 1.0;
                        dst[o] = r;
                    }
                }
                neuron += out;
            }
        }
    }

    std::span<const double> head() const { return act_.back(); }

    void copy_activations(double* out) const {
        for (const auto& layer : raw_) out = std::copy(layer.begin(), layer.end(), out);
    }

    // Computes loss of the last forward pass, then accumulates weight * dloss
    // into grad. Embedding rows touched are reported through on_touch.
    template <typename OnTouch>
    double backward(const double* p, const Example& ex, double label, double weight, double* grad,
                    OnTouch&& on_touch) {
        const double l = head_loss_grad(act_.back(), label, spec_, head_grad_, scratch_);
        const std::size_t layers = L_.layer_in.size();
        for (std::size_t c = 0; c < head_grad_.size(); ++c) delta_[layers - 1][c] = head_grad_[c] * weight;
        const bool need_input_grad = !spec_.embeddings.empty();
        for (std::size_t li = layers; li-- > 0;) {
            const std::size_t in = L_.layer_in[li], out = L_.layer_out[li];
            const double* w = p + L_.weight_offset[li];
            double* gw = grad + L_.weight_offset[li];
            double* gb = grad + L_.bias_offset[li];
            const double* src = act_[li].data();
            const double* d = delta_[li].data();
            double* dprev = li > 0 ? delta_[li - 1].data() : dinput_.data();
            const bool propagate = li > 0 || need_input_grad;
            if (propagate) std::fill(dprev, dprev + in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double g = d[o];
                if (g == 0.0) continue;
                gb[o] += g;
                double* grow = gw + o * in;
                for (std::size_t i = 0; i < in; ++i) grow[i] += g * src[i];
                if (propagate) {
                    const double* wrow = w + o * in;
                    for (std::size_t i = 0; i < in; ++i) dprev[i] += g * wrow[i];
                }
            }
            if (li > 0) {
                const double* raw = raw_[li - 1].data();
                const double* scale = scale_[li - 1].data();
                for (std::size_t i = 0; i < in; ++i) dprev[i] = raw[i] > 0.0 ? dprev[i] * scale[i] : 0.0;
            }
        }
        if (need_input_grad) {
            std::size_t pos = 0;
            for (std::size_t t = 0; t < spec_.embeddings.size(); ++t) {
                const std::size_t dim = L_.embedding_dim[t];
                const auto id = static_cast<std::size_t>(ex.categorical[t]);
                double* g = grad + L_.embedding_offset[t] + id * dim;
                for (std::size_t k = 0; k < dim; ++k) g[k] += dinput_[pos + k];
                on_touch(t, id);
                pos += dim;
            }
        }
        return l;
    }

    double example_loss(double label) {
        return head_loss_grad(act_.back(), label, spec_, head_grad_, scratch_);
    }

private:
    const ModelSpec& spec_;
    const ParamLayout& L_;
    std::vector<std::vector<double>> act_;
    std::vector<std::vector<double>> raw_;
    std::vector<std::vector<double>> scale_;
    std::vector<std::vector<double>> delta_;
    std::vector<double> dinput_;
    std::vector<double> head_grad_;
    std::vector<double> scratch_;
};

void check_example(const ModelSpec& spec, const Example& ex) {
    if (ex.categorical.size() != spec.embeddings.size() || ex.numeric.size() != spec.numeric_inputs)
        throw InputError("row " + std::to_string(ex.row_id) + " does not match the model's feature schema");
}

void check_params(const ModelParams& params, const ModelSpec& spec) {
    if (!(params.layout == ParamLayout(spec)) || params.values.size() != params.layout.total)
        throw ConfigError("model parameters do not match the model spec");
}

}  // namespace

ForwardResult forward(const ModelParams& params, const ModelSpec& spec, const Example& example,
                      bool capture) {
    check_params(params, spec);
    check_example(spec, example);
    Engine engine(spec, params.layout);
    engine.forward(params.values.data(), example, std::nullopt);
    ForwardResult result;
    result.head.assign(engine.head().begin(), engine.head().end());
    result.prediction = head_to_prediction(result.head, spec);
    if (capture) {
        result.activations.resize(spec.neuron_count());
        engine.copy_activations(result.activations.data());
    }
    return result;
}

namespace {

std::vector<double> predict_impl(const ModelParams& params, const ModelSpec& spec, const Dataset& data,
                                 std::optional<std::uint64_t> pass_seed) {
    check_params(params, spec);
    spec.check_schema(data.schema);
    Engine engine(spec, params.layout);
    const std::size_t width = spec.output_width();
    std::vector<double> out(data.size() * width);
    std::vector<double> probs(width);
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto& ex = data.rows[r];
        check_example(spec, ex);
        std::optional<std::uint64_t> key;
        if (pass_seed) key = derive_key(*pass_seed, "dropout-pass", static_cast<std::uint64_t>(ex.row_id));
        engine.forward(params.values.data(), ex, key);
        const auto head = engine.head();
        switch (spec.task) {
            case TaskKind::regression: out[r] = regression_output(head[0], spec); break;
            case TaskKind::binary: out[r] = sigmoid(head[0]); break;
            case TaskKind::multiclass:
                softmax_scaled(head, spec.temperature, probs);
                std::copy(probs.begin(), probs.end(), out.begin() + static_cast<std::ptrdiff_t>(r * width));
                break;
        }
    }
    return out;
}

}  // namespace

std::vector<double> predict(const ModelParams& params, const ModelSpec& spec, const Dataset& data) {
    return predict_impl(params, spec, data, std::nullopt);
}

std::vector<double> predict_with_dropout(const ModelParams& params, const ModelSpec& spec,
                                         const Dataset& data, std::uint64_t pass_seed) {
    if (!(spec.dropout_rate > 0.0)) return predict(params, spec, data);
    return predict_impl(params, spec, data, pass_seed);
}

std::vector<double> capture_activations(const ModelParams& params, const ModelSpec& spec,
                                        const Dataset& data) {
    check_params(params, spec);
    spec.check_schema(data.schema);
    Engine engine(spec, params.layout);
    const std::size_t width = spec.neuron_count();
    std::vector<double> out(data.size() * width);
    for (std::size_t r = 0; r < data.size(); ++r) {
        check_example(spec, data.rows[r]);
        engine.forward(params.values.data(), data.rows[r], std::nullopt);
        engine.copy_activations(out.data() + r * width);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (max_epochs == 0) throw ConfigError("train config: max_epochs must be positive");
    if (batch_size == 0) throw ConfigError("train config: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("train config: validation_fraction must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
        throw ConfigError("train config: invalid Adam hyper-parameters");
}

bool in_validation_slice(std::int64_t row_id, double fraction) {
    static constexpr std::uint64_t key = derive_key(0, "validation-slice");
    return uniform_at(key, static_cast<std::uint64_t>(row_id)) < fraction;
}

namespace {

double mean_loss(const ModelParams& params, Engine& engine,
                 std::span<const Example* const> rows) {
    if (rows.empty()) return 0.0;
    double total = 0.0;
    for (const Example* ex : rows) {
        engine.forward(params.values.data(), *ex, std::nullopt);
        total += engine.example_loss(ex->label);
    }
    return total / static_cast<double>(rows.size());
}

}  // namespace

TrainResult train(const ModelSpec& spec, const TrainConfig& config, const Dataset& data,
                  const SeedBundle& seeds) {
    spec.validate();
    config.validate();
    if (data.empty()) throw UsageError("train: empty dataset");
    spec.check_schema(data.schema);

    std::vector<const Example*> fit_rows, val_rows;
    for (const auto& ex : data.rows) {
        check_example(spec, ex);
        check_label(ex.label, spec);
        (in_validation_slice(ex.row_id, config.validation_fraction) ? val_rows : fit_rows).push_back(&ex);
    }
    if (fit_rows.empty()) {
        fit_rows.swap(val_rows);
    }

    TrainResult result{init_params(spec, seeds.init_seed), {}};
    ModelParams& params = result.params;
    TrainingHistory& history = result.history;
    history.train_rows = fit_rows.size();
    history.validation_rows = val_rows.size();
    const ParamLayout& L = params.layout;
    Engine engine(spec, L);

    history.initial_loss = mean_loss(params, engine, fit_rows);

    std::vector<double> grad(L.total, 0.0), m(L.total, 0.0), v(L.total, 0.0);
    std::vector<std::vector<std::uint8_t>> touched_flag(spec.embeddings.size());
    std::vector<std::vector<std::uint32_t>> touched(spec.embeddings.size());
    for (std::size_t t = 0; t < spec.embeddings.size(); ++t)
        touched_flag[t].assign(spec.embeddings[t].vocab_size, 0);
    auto on_touch = [&](std::size_t t, std::size_t id) {
        if (!touched_flag[t][id]) {
            touched_flag[t][id] = 1;
            touched[t].push_back(static_cast<std::uint32_t>(id));
        }
    };

    const std::uint64_t dropout_seed = derive_key(seeds.init_seed, "dropout-train");
    const bool dropout = spec.dropout_rate > 0.0;
    const double b1 = config.beta1, b2 = config.beta2;
    double b1_pow = 1.0, b2_pow = 1.0;
    std::uint64_t step = 0;

    auto adam_range = [&](std::size_t begin, std::size_t end, double lr_t) {
        double* p = params.values.data();
        for (std::size_t i = begin; i < end; ++i) {
            const double g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + config.epsilon);
        }
    };

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_values;
    std::size_t since_best = 0;
    const std::size_t n = fit_rows.size();

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto order = shuffle_epoch(n, seeds.shuffle_seed, epoch);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            const double weight = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin() + static_cast<std::ptrdiff_t>(L.dense_begin), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t j = start; j < end; ++j) {
                const Example& ex = *fit_rows[order[j]];
                std::optional<std::uint64_t> key;
                if (dropout) key = derive_key(dropout_seed, "mask", step, j - start);
                engine.forward(params.values.data(), ex, key);
                batch_loss += engine.backward(params.values.data(), ex, ex.label, weight, grad.data(), on_touch);
            }
            batch_loss *= weight;
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches));
            ++step;
            b1_pow *= b1;
            b2_pow *= b2;
            const double lr_t = config.learning_rate * std::sqrt(1.0 - b2_pow) / (1.0 - b1_pow);
            for (std::size_t t = 0; t < spec.embeddings.size(); ++t) {
                const std::size_t dim = L.embedding_dim[t];
                for (auto id : touched[t]) {
                    const std::size_t begin = L.embedding_offset[t] + id * dim;
                    adam_range(begin, begin + dim, lr_t);
                    std::fill(grad.begin() + static_cast<std::ptrdiff_t>(begin),
                              grad.begin() + static_cast<std::ptrdiff_t>(begin + dim), 0.0);
                    touched_flag[t][id] = 0;
                }
                touched[t].clear();
            }
            adam_range(L.dense_begin, L.total, lr_t);
            epoch_loss += batch_loss;
            ++batches;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
        history.epochs_run = epoch + 1;

        if (val_rows.empty()) {
            history.best_epoch = epoch;
            continue;
        }
        const double val = mean_loss(params, engine, val_rows);
        if (!std::isfinite(val))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        history.validation_loss.push_back(val);
        if (val < best_val) {
            best_val = val;
            best_values = params.values;
            history.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            history.stopped_early = epoch + 1 < config.max_epochs;
            break;
        }
    }
    if (!best_values.empty()) params.values = std::move(best_values);
    history.final_loss = mean_loss(params, engine, fit_rows);
    return result;
}

// ---------------------------------------------------------------------------
// Gradient check

std::vector<double> gradient(const ModelParams& params, const ModelSpec& spec, const Example& example) {
    check_params(params, spec);
    check_example(spec, example);
    check_label(example.label, spec);
    Engine engine(spec, params.layout);
    std::vector<double> grad(params.layout.total, 0.0);
    engine.forward(params.values.data(), example, std::nullopt);
    engine.backward(params.values.data(), example, example.label, 1.0, grad.data(),
                    [](std::size_t, std::size_t) {});
    return grad;
}

GradCheckResult grad_check(const ModelSpec& spec, const ModelParams& params, const Example& example,
                           double epsilon, double tolerance, std::optional<std::size_t> corrupt_parameter) {
    if (!(epsilon > 0.0)) throw UsageError("grad_check: epsilon must be positive");
    auto analytic = gradient(params, spec, example);
    if (corrupt_parameter) analytic.at(*corrupt_parameter) = -analytic.at(*corrupt_parameter);
    Engine engine(spec, params.layout);
    std::vector<double> probe = params.values;
    auto loss_at = [&]() {
        engine.forward(probe.data(), example, std::nullopt);
        return engine.example_loss(example.label);
    };
    GradCheckResult result;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + epsilon;
        const double up = loss_at();
        probe[i] = saved - epsilon;
        const double down = loss_at();
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > result.max_relative_error) {
            result.max_relative_error = rel;
            result.worst_parameter = i;
        }
    }
    result.passed = result.max_relative_error < tolerance;
    return result;
}

GradCheckResult grad_check(const ModelSpec& spec, std::uint64_t seed, const Example& example,
                           double epsilon, double tolerance) {
    return grad_check(spec, init_params(spec, seed), example, epsilon, tolerance);
}

// ---------------------------------------------------------------------------
// Artifact: text header of key=value lines, "params=<count>", then raw
// little-endian IEEE-754 doubles.

namespace {

constexpr std::string_view kModelMagic = "varest-model 1";

}  // namespace

void save_model(const std::filesystem::path& path, const ModelArtifact& model) {
    static_assert(std::endian::native == std::endian::little);
    check_params(model.params, model.spec);
    std::ostringstream header;
    header << kModelMagic << '\n';
    for (const auto& [k, v] : to_key_values(model.spec)) header << k << '=' << v << '\n';
    header << "init_seed=" << model.seeds.init_seed << '\n';
    if (model.seeds.shuffle_seed) header << "shuffle_seed=" << *model.seeds.shuffle_seed << '\n';
    if (model.seeds.jackknife_index) header << "jackknife_index=" << *model.seeds.jackknife_index << '\n';
    header << "params=" << model.params.values.size() << '\n';
    std::string blob = header.str();
    const auto* bytes = reinterpret_cast<const char*>(model.params.values.data());
    blob.append(bytes, model.params.values.size() * sizeof(double));
    write_file(path, blob);
}

ModelArtifact load_model(const std::filesystem::path& path) {
    const std::string blob = read_file(path);
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string_view {
        const auto nl = blob.find('\n', pos);
        if (nl == std::string::npos) throw ParseError(path.string() + ": truncated model header");
        std::string_view line(blob.data() + pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    if (next_line() != kModelMagic) throw ParseError(path.string() + ": not a model artifact");
    std::map<std::string, std::string> kv;
    std::size_t count = 0;
    while (true) {
        const auto line = next_line();
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(path.string() + ": bad header line");
        const std::string key(line.substr(0, eq));
        const std::string value(line.substr(eq + 1));
        if (key == "params") {
            count = parse_u64(value);
            break;
        }
        kv[key] = value;
    }
    ModelArtifact model;
    model.seeds.init_seed = parse_u64(kv.at("init_seed"));
    if (kv.count("shuffle_seed")) model.seeds.shuffle_seed = parse_u64(kv["shuffle_seed"]);
    if (kv.count("jackknife_index")) model.seeds.jackknife_index = parse_u64(kv["jackknife_index"]);
    for (const char* k : {"init_seed", "shuffle_seed", "jackknife_index"}) kv.erase(k);
    model.spec = spec_from_key_values(kv);
    model.params.layout = ParamLayout(model.spec);
    if (count != model.params.layout.total || blob.size() - pos != count * sizeof(double))
        throw ParseError(path.string() + ": parameter block does not match the spec");
    model.params.values.resize(count);
    std::memcpy(model.params.values.data(), blob.data() + pos, count * sizeof(double));
    return model;
}

}  // namespace varest
