#include "varest/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/metrics.hpp"
#include "varest/parallel.hpp"
#include "varest/rng.hpp"

namespace varest {

std::string to_string(Objective objective) {
    return objective == Objective::regression ? "regression" : "classification";
}

Objective parse_objective(const std::string& text) {
    if (text == "reg" || text == "regression") return Objective::regression;
    if (text == "cls" || text == "classification") return Objective::classification;
    throw ConfigError("unknown objective '" + text + "' (expected reg or cls)");
}

void EstimatorSpec::validate() const {
    if (hidden_sizes.empty()) throw ConfigError("estimator: hidden_sizes must be non-empty");
    if (objective == Objective::classification && buckets < 2)
        throw ConfigError("estimator: classification needs at least 2 buckets");
    train_config().validate();
}

TrainConfig EstimatorSpec::train_config() const {
    TrainConfig c;
    c.max_epochs = max_epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.patience = patience;
    c.validation_fraction = validation_fraction;
    return c;
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

}  // namespace

std::map<std::string, std::string> to_key_values(const EstimatorSpec& s) {
    return {{"hidden_sizes", join_sizes(s.hidden_sizes)},
            {"batch_size", std::to_string(s.batch_size)},
            {"learning_rate", format_double(s.learning_rate)},
            {"max_epochs", std::to_string(s.max_epochs)},
            {"patience", std::to_string(s.patience)},
            {"validation_fraction", format_double(s.validation_fraction)},
            {"objective", to_string(s.objective)},
            {"buckets", std::to_string(s.buckets)},
            {"features", to_string(s.feature_mode)}};
}

EstimatorSpec estimator_spec_from_key_values(const std::map<std::string, std::string>& kv) {
    EstimatorSpec s;
    auto get = [&](const char* key) -> const std::string* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("hidden_sizes")) {
        s.hidden_sizes.clear();
        for (auto part : split_view(*v, ",")) s.hidden_sizes.push_back(parse_u64(trim(part)));
    }
    if (auto v = get("batch_size")) s.batch_size = parse_u64(*v);
    if (auto v = get("learning_rate")) s.learning_rate = parse_double(*v);
    if (auto v = get("max_epochs")) s.max_epochs = parse_u64(*v);
    if (auto v = get("patience")) s.patience = parse_u64(*v);
    if (auto v = get("validation_fraction")) s.validation_fraction = parse_double(*v);
    if (auto v = get("objective")) s.objective = parse_objective(*v);
    if (auto v = get("buckets")) s.buckets = parse_u64(*v);
    if (auto v = get("features")) s.feature_mode = parse_feature_mode(*v);
    s.validate();
    return s;
}

OutputClamp regression_clamp(std::span<const double> pv_labels) {
    if (pv_labels.empty()) throw UsageError("regression clamp: no training labels");
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < pv_labels.size(); ++i) {
        const double d = pv_labels[i] - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (pv_labels[i] - mean);
    }
    const double sd = pv_labels.size() > 1 ? std::sqrt(m2 / static_cast<double>(pv_labels.size() - 1)) : 0.0;
    return {0.0, std::max(mean + 3.0 * sd, 1e-12)};
}

Dataset feature_dataset(const FeatureMatrix& features, std::span<const double> labels, TaskKind task,
                        std::size_t classes) {
    if (labels.size() != features.rows())
        throw InputError("estimator: " + std::to_string(features.rows()) + " feature rows but " +
                         std::to_string(labels.size()) + " labels");
    Dataset d;
    d.schema.numeric_count = features.width;
    d.schema.task = task;
    d.schema.num_classes = task == TaskKind::multiclass ? classes : 1;
    d.provenance.source = "activation-features";
    d.rows.resize(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto r = features.row(i);
        d.rows[i].numeric.assign(r.begin(), r.end());
        d.rows[i].label = labels[i];
        d.rows[i].row_id = features.row_ids[i];
    }
    return d;
}

namespace {

SeedBundle estimator_seeds(std::uint64_t seed) {
    return {derive_key(seed, "estimator-init"), derive_key(seed, "estimator-shuffle"), std::nullopt};
}

void check_mode(const EstimatorSpec& spec, const FeatureMatrix& features) {
    if (spec.feature_mode != features.mode)
        throw ConfigError("estimator expects " + to_string(spec.feature_mode) + " features, got " +
                          to_string(features.mode));
}

}  // namespace

EstimatorModel train_regressor(const FeatureMatrix& features, std::span<const double> pv_labels,
                               const EstimatorSpec& spec, std::uint64_t seed) {
    spec.validate();
    check_mode(spec, features);
    for (double y : pv_labels)
        if (!(y >= 0.0) || !std::isfinite(y)) throw InputError("estimator: PV labels must be finite and >= 0");
    EstimatorModel m;
    m.spec = spec;
    m.spec.objective = Objective::regression;
    m.net.task = TaskKind::regression;
    m.net.numeric_inputs = features.width;
    m.net.hidden_sizes = spec.hidden_sizes;
    const OutputClamp clamp = regression_clamp(pv_labels);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < pv_labels.size(); ++i) {
        const double d = pv_labels[i] - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (pv_labels[i] - mean);
    }
    const double sd = pv_labels.size() > 1 ? std::sqrt(m2 / static_cast<double>(pv_labels.size() - 1)) : 0.0;
    m.label_shift = mean;
    m.label_scale = sd > 0.0 ? sd : 1.0;
    m.net.clamp = OutputClamp{(clamp.lower - m.label_shift) / m.label_scale, (clamp.upper - m.label_shift) / m.label_scale};
    m.seeds = estimator_seeds(seed);
    std::vector<double> z(pv_labels.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (pv_labels[i] - m.label_shift) / m.label_scale;
    const auto data = feature_dataset(features, z, TaskKind::regression);
    auto result = train(m.net, spec.train_config(), data, m.seeds);
    m.params = std::move(result.params);
    m.history = std::move(result.history);
    return m;
}

EstimatorModel train_classifier(const FeatureMatrix& features, std::span<const int> bucket_labels,
                                const EstimatorSpec& spec, std::uint64_t seed) {
    spec.validate();
    check_mode(spec, features);
    const std::size_t k = spec.buckets;
    std::vector<double> labels(bucket_labels.size());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < bucket_labels.size(); ++i) {
        const int b = bucket_labels[i];
        if (b < 1 || static_cast<std::size_t>(b) > k)
            throw InputError("estimator: bucket label " + std::to_string(b) + " outside 1.." + std::to_string(k));
        labels[i] = static_cast<double>(b - 1);
        ++counts[static_cast<std::size_t>(b - 1)];
    }
    EstimatorModel m;
    m.spec = spec;
    m.spec.objective = Objective::classification;
    for (std::size_t b = 0; b < k; ++b)
        if (counts[b] == 0) m.warnings.push_back("bucket " + std::to_string(b + 1) + " has no training examples");
    m.net.task = TaskKind::multiclass;
    m.net.num_classes = k;
    m.net.numeric_inputs = features.width;
    m.net.hidden_sizes = spec.hidden_sizes;
    m.seeds = estimator_seeds(seed);
    const auto data = feature_dataset(features, labels, TaskKind::multiclass, k);
    auto result = train(m.net, spec.train_config(), data, m.seeds);
    m.params = std::move(result.params);
    m.history = std::move(result.history);
    return m;
}

std::vector<double> estimate(const EstimatorModel& model, const FeatureMatrix& features) {
    check_mode(model.spec, features);
    if (features.width != model.net.numeric_inputs)
        throw InputError("estimator: feature width " + std::to_string(features.width) + " does not match model width " +
                         std::to_string(model.net.numeric_inputs));
    const std::vector<double> zeros(features.rows(), 0.0);
    const auto data = feature_dataset(features, zeros, model.net.task, model.net.num_classes);
    auto out = predict(model.params, model.net, data);
    if (model.net.task == TaskKind::regression) {
        const double lo = model.label_shift + model.label_scale * model.net.clamp->lower;
        const double hi = model.label_shift + model.label_scale * model.net.clamp->upper;
        for (double& v : out) v = std::clamp(model.label_shift + model.label_scale * v, std::max(lo, 0.0), hi);
    }
    return out;
}

RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.size() != labels.size()) throw InputError("regression metrics: length mismatch");
    if (labels.empty()) throw UsageError("regression metrics: no examples");
    const double n = static_cast<double>(labels.size());
    double mean = 0.0;
    for (double y : labels) mean += y;
    mean /= n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ss_res += (labels[i] - predictions[i]) * (labels[i] - predictions[i]);
        ss_tot += (labels[i] - mean) * (labels[i] - mean);
    }
    RegressionMetrics m;
    m.mse = ss_res / n;
    const bool constant = std::all_of(labels.begin(), labels.end(), [&](double y) { return y == labels.front(); });
    if (!constant && ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;
    return m;
}

RegressionMetrics eval_regression(const EstimatorModel& model, const FeatureMatrix& features,
                                  std::span<const double> pv_labels) {
    if (model.net.task != TaskKind::regression) throw UsageError("eval_regression: not a regression estimator");
    return regression_metrics(estimate(model, features), pv_labels);
}

ClassificationMetrics classification_metrics(std::span<const double> probabilities, std::span<const int> labels,
                                             std::size_t k) {
    if (k < 2) throw ConfigError("classification metrics: need at least 2 buckets");
    if (probabilities.size() != labels.size() * k) throw InputError("classification metrics: shape mismatch");
    if (labels.empty()) throw UsageError("classification metrics: no examples");
    ClassificationMetrics m;
    m.buckets = k;
    m.confusion.assign(k, std::vector<double>(k, 0.0));
    m.support.assign(k, 0);
    double hits = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int b = labels[i];
        if (b < 1 || static_cast<std::size_t>(b) > k) throw InputError("classification metrics: label out of range");
        const auto row = probabilities.subspan(i * k, k);
        const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        const auto truth = static_cast<std::size_t>(b - 1);
        m.confusion[truth][arg] += 1.0;
        ++m.support[truth];
        if (arg == truth) hits += 1.0;
    }
    for (std::size_t t = 0; t < k; ++t)
        if (m.support[t] > 0)
            for (double& c : m.confusion[t]) c /= static_cast<double>(m.support[t]);
    m.accuracy = hits / static_cast<double>(labels.size());
    std::vector<double> scores(labels.size());
    std::vector<std::uint8_t> positive(labels.size());
    for (std::size_t b = 0; b < k; ++b) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probabilities[i * k + b];
            positive[i] = static_cast<std::size_t>(labels[i] - 1) == b;
        }
        m.auc.push_back(auc(scores, positive));
    }
    return m;
}

ClassificationMetrics eval_classification(const EstimatorModel& model, const FeatureMatrix& features,
                                          std::span<const int> bucket_labels) {
    if (model.net.task != TaskKind::multiclass) throw UsageError("eval_classification: not a classifier");
    return classification_metrics(estimate(model, features), bucket_labels, model.net.num_classes);
}

PVTable dropout_pv(const ModelParams& params, const ModelSpec& spec, const Dataset& test, std::size_t passes,
                   std::uint64_t seed, std::size_t workers) {
    if (passes < 2) throw ConfigError("dropout PV: need at least 2 passes");
    if (test.empty()) throw UsageError("dropout PV: empty test data");
    PredictionMatrix pm;
    pm.task = spec.task;
    pm.members = passes;
    pm.examples = test.size();
    pm.width = spec.output_width();
    pm.row_ids = test.row_ids();
    pm.values.resize(passes * pm.examples * pm.width);
    parallel_for(passes, workers, [&](std::size_t p) {
        const auto out = predict_with_dropout(params, spec, test, derive_key(seed, "dropout-pass", p));
        std::copy(out.begin(), out.end(), pm.values.begin() + static_cast<std::ptrdiff_t>(p * out.size()));
    });
    return pv_table(pm);
}

DropoutBaseline mc_dropout_pv(ModelSpec spec, const TrainConfig& config, const Dataset& train_data,
                              const Dataset& test, double rate, std::size_t passes, std::uint64_t seed,
                              std::size_t workers) {
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in (0, 1)");
    if (passes < 2) throw ConfigError("dropout PV: need at least 2 passes");
    spec.dropout_rate = rate;
    const SeedBundle seeds{derive_key(seed, "dropout-init"), derive_key(seed, "dropout-shuffle"), std::nullopt};
    auto trained = train(spec, config, train_data, seeds);
    DropoutBaseline out;
    out.pv = dropout_pv(trained.params, spec, test, passes, seed, workers);
    out.params = std::move(trained.params);
    out.history = std::move(trained.history);
    return out;
}

PVComparison compare_pv(const PVTable& pv_a, const PVTable& pv_b) {
    const auto truth = aligned_pv(pv_a, pv_b);
    const auto est = pv_a.pv_values();
    PVComparison c;
    try {
        c.pearson = pearson(est, truth);
    } catch (const NumericError&) {
    }
    const auto rm = regression_metrics(est, truth);
    c.rmse = std::sqrt(rm.mse);
    c.r2 = rm.r2;
    return c;
}

std::string format_optional(const std::optional<double>& value) {
    return value ? format_double(*value) : std::string("undefined");
}

ReportFields report_fields(const RegressionMetrics& m) {
    return {{"mse", format_double(m.mse)}, {"r2", format_optional(m.r2)}};
}

ReportFields report_fields(const ClassificationMetrics& m) {
    ReportFields f;
    f.emplace_back("buckets", std::to_string(m.buckets));
    f.emplace_back("accuracy", format_double(m.accuracy));
    for (std::size_t b = 0; b < m.buckets; ++b) {
        const std::string p = "bucket." + std::to_string(b + 1) + ".";
        f.emplace_back(p + "auc", format_optional(m.auc[b]));
        f.emplace_back(p + "support", std::to_string(m.support[b]));
        f.emplace_back(p + "confusion", join_doubles(m.confusion[b], ","));
    }
    return f;
}

ReportFields report_fields(const PVComparison& c) {
    return {{"pearson", format_optional(c.pearson)}, {"rmse", format_double(c.rmse)}, {"r2", format_optional(c.r2)}};
}

std::string format_report(const std::string& kind, const ReportFields& fields) {
    std::ostringstream out;
    out << "#varest-report\t1\t" << kind << '\n';
    for (const auto& [k, v] : fields) out << k << '=' << v << '\n';
    return out.str();
}

std::map<std::string, std::string> parse_report(const std::string& text) {
    if (text.rfind("#varest-report\t1\t", 0) != 0) throw ParseError("not a varest report");
    return parse_key_values(text);
}

std::string format_confusion(const ClassificationMetrics& m) {
    std::ostringstream out;
    out << "#varest-confusion\t1\t" << m.buckets << '\n';
    out << "true\\predicted";
    for (std::size_t b = 1; b <= m.buckets; ++b) out << '\t' << b;
    out << '\n';
    for (std::size_t t = 0; t < m.buckets; ++t) out << (t + 1) << '\t' << join_doubles(m.confusion[t], "\t") << '\n';
    return out.str();
}

void save_estimator(const std::filesystem::path& dir, const EstimatorModel& model) {
    ReportFields f{{"format", "varest-estimator-1"}};
    for (const auto& [k, v] : to_key_values(model.spec)) f.emplace_back("estimator." + k, v);
    f.emplace_back("label_shift", format_double(model.label_shift));
    f.emplace_back("label_scale", format_double(model.label_scale));
    f.emplace_back("epochs_run", std::to_string(model.history.epochs_run));
    f.emplace_back("best_epoch", std::to_string(model.history.best_epoch));
    f.emplace_back("initial_loss", format_double(model.history.initial_loss));
    f.emplace_back("final_loss", format_double(model.history.final_loss));
    f.emplace_back("train_rows", std::to_string(model.history.train_rows));
    f.emplace_back("validation_rows", std::to_string(model.history.validation_rows));
    for (std::size_t i = 0; i < model.warnings.size(); ++i)
        f.emplace_back("warning." + std::to_string(i), model.warnings[i]);
    std::string text;
    for (const auto& [k, v] : f) text += k + "=" + v + "\n";
    write_file(dir / "estimator.txt", text);
    save_model(dir / "estimator.model", ModelArtifact{model.net, model.params, model.seeds});
}

EstimatorModel load_estimator(const std::filesystem::path& dir) {
    const auto kv = parse_key_values(read_file(dir / "estimator.txt"));
    const auto fmt = kv.find("format");
    if (fmt == kv.end() || fmt->second != "varest-estimator-1")
        throw ParseError((dir / "estimator.txt").string() + ": unknown estimator format");
    std::map<std::string, std::string> spec_kv;
    EstimatorModel m;
    for (const auto& [k, v] : kv) {
        if (k.rfind("estimator.", 0) == 0) spec_kv[k.substr(10)] = v;
        else if (k.rfind("warning.", 0) == 0) m.warnings.push_back(v);
    }
    m.spec = estimator_spec_from_key_values(spec_kv);
    auto get_u = [&](const char* key) { return kv.count(key) ? parse_u64(kv.at(key)) : 0; };
    m.history.epochs_run = get_u("epochs_run");
    m.history.best_epoch = get_u("best_epoch");
    m.history.train_rows = get_u("train_rows");
    m.history.validation_rows = get_u("validation_rows");
    if (kv.count("label_shift")) m.label_shift = parse_double(kv.at("label_shift"));
    if (kv.count("label_scale")) m.label_scale = parse_double(kv.at("label_scale"));
    if (kv.count("initial_loss")) m.history.initial_loss = parse_double(kv.at("initial_loss"));
    if (kv.count("final_loss")) m.history.final_loss = parse_double(kv.at("final_loss"));
    auto artifact = load_model(dir / "estimator.model");
    m.net = std::move(artifact.spec);
    m.params = std::move(artifact.params);
    m.seeds = artifact.seeds;
    return m;
}

}  // namespace varest
