#include "varest/pipeline.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/presets.hpp"
#include "varest/rng.hpp"

namespace varest {

TaskKind task_kind(const std::string& task) {
    if (task == "ml-r") return TaskKind::regression;
    if (task == "ml-c") return TaskKind::multiclass;
    if (task == "synth-binary") return TaskKind::binary;
    throw ConfigError("unknown task '" + task + "' (expected ml-r, ml-c or synth-binary)");
}

Dataset limit_rows(const Dataset& data, std::size_t rows, std::uint64_t seed) {
    if (rows == 0) throw ConfigError("row limit must be positive");
    if (rows >= data.size()) return data;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(seed, "row-limit");
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    order.resize(rows);
    std::sort(order.begin(), order.end());
    return subset(data, order, data.provenance.split_name);
}

PreparedData prepare_splits(const Dataset& all, const std::string& task, std::span<const double> splits,
                            std::span<const double> estimator_splits, std::uint64_t seed) {
    if (splits.size() != 2) throw ConfigError("splits: expected two fractions (target, ground truth)");
    if (estimator_splits.size() != 2) throw ConfigError("estimator splits: expected two fractions");
    task_kind(task);
    PreparedData out;
    out.task = task;
    auto parts = split(all, splits, derive_key(seed, "split/target"));
    auto halves = split(parts[1], estimator_splits, derive_key(seed, "split/estimator"));
    out.train = std::move(parts[0]);
    out.eval = std::move(parts[1]);
    out.eval1 = std::move(halves[0]);
    out.eval2 = std::move(halves[1]);
    out.train.provenance.split_name = "d_t";
    out.eval.provenance.split_name = "d_e";
    out.eval1.provenance.split_name = "d_e1";
    out.eval2.provenance.split_name = "d_e2";
    return out;
}

void save_prepared(const std::filesystem::path& dir, const PreparedData& d) {
    save_dataset(dir / "d_t.tsv", d.train);
    save_dataset(dir / "d_e.tsv", d.eval);
    save_dataset(dir / "d_e1.tsv", d.eval1);
    save_dataset(dir / "d_e2.tsv", d.eval2);
    std::ostringstream m;
    m << "format=varest-data-1\n"
      << "task=" << d.task << '\n'
      << "source=" << d.train.provenance.source << '\n';
    for (const char* name : {"d_t", "d_e", "d_e1", "d_e2"}) {
        const auto& ds = std::string(name) == "d_t" ? d.train
                         : std::string(name) == "d_e" ? d.eval
                         : std::string(name) == "d_e1" ? d.eval1 : d.eval2;
        m << name << ".rows=" << ds.size() << '\n'
          << name << ".hash=" << file_hash(dir / (std::string(name) + ".tsv")) << '\n';
    }
    write_file(dir / "manifest.txt", m.str());
}

PreparedData load_prepared(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "manifest.txt"))
        throw InputError("no prepared data in '" + dir.string() + "' (missing manifest.txt)");
    const auto kv = parse_key_values(read_file(dir / "manifest.txt"));
    if (!kv.count("format") || kv.at("format") != "varest-data-1")
        throw ParseError((dir / "manifest.txt").string() + ": unknown data manifest format");
    PreparedData d;
    d.task = kv.count("task") ? kv.at("task") : "";
    task_kind(d.task);
    d.train = load_dataset(dir / "d_t.tsv");
    d.eval = load_dataset(dir / "d_e.tsv");
    d.eval1 = load_dataset(dir / "d_e1.tsv");
    d.eval2 = load_dataset(dir / "d_e2.tsv");
    return d;
}

namespace {

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    for (auto part : split_view(text, ",")) out.push_back(parse_u64(trim(part)));
    return out;
}

}  // namespace

ModelSpec model_spec_for(const std::string& task, const Config& config, const FeatureSchema& schema) {
    const TaskKind kind = task_kind(task);
    if (schema.task != kind)
        throw InputError("data holds a " + to_string(schema.task) + " task but '" + task + "' was requested");
    ModelSpec spec = kind == TaskKind::binary
                         ? synthetic_binary_spec(schema)
                         : movielens_spec(schema, kind, config.get_double_or("model.temperature", 0.2));
    if (kind == TaskKind::binary && config.has("model.embedding_dim")) {
        const auto dim = config.get_u64("model.embedding_dim");
        for (auto& e : spec.embeddings) e.dim = dim;
    }
    if (config.has("model.hidden_sizes")) spec.hidden_sizes = parse_sizes(config.get("model.hidden_sizes"));
    spec.embedding_init = config.get_double_or("model.embedding_init", spec.embedding_init);
    spec.validate();
    return spec;
}

TrainConfig train_config_for(const Config& config) {
    TrainConfig c;
    c.max_epochs = config.get_u64_or("train.max_epochs", c.max_epochs);
    c.batch_size = config.get_u64_or("train.batch_size", c.batch_size);
    c.learning_rate = config.get_double_or("train.learning_rate", c.learning_rate);
    c.patience = config.get_u64_or("train.patience", c.patience);
    c.validation_fraction = config.get_double_or("train.validation_fraction", c.validation_fraction);
    c.validate();
    return c;
}

EstimatorSpec estimator_spec_for(const Config& config) {
    return estimator_spec_from_key_values(config.section("estimator."));
}

SettingRun evaluate_ensemble(Ensemble ensemble, const PreparedData& data, std::size_t workers) {
    SettingRun run;
    run.ensemble = std::move(ensemble);
    run.predictions = predict_matrix(run.ensemble, data.eval, workers);
    run.pv = pv_table(run.predictions);
    run.pv1 = pv_table(predict_matrix(run.ensemble, data.eval1, workers));
    run.pv2 = pv_table(predict_matrix(run.ensemble, data.eval2, workers));
    std::vector<double> labels;
    labels.reserve(data.eval.size());
    for (const auto& r : data.eval.rows) labels.push_back(r.label);
    run.metrics = target_metrics(run.predictions.mean(), labels, run.ensemble.spec.task, run.predictions.width);
    return run;
}

SettingRun run_setting(const ModelSpec& spec, const TrainConfig& config, const PreparedData& data,
                       const RandomnessSetting& setting, std::size_t n, std::uint64_t master_seed,
                       std::size_t workers, const MemberCallback& on_member) {
    auto ensemble = train_ensemble(spec, config, data.train, setting, n, master_seed, workers, on_member);
    return evaluate_ensemble(std::move(ensemble), data, workers);
}

Table1Row table1_row(const SettingRun& run) {
    Table1Row row;
    row.code = run.ensemble.setting.code();
    row.sources = run.ensemble.setting.sources();
    row.n = run.ensemble.size();
    row.mean_pv = run.pv.mean_pv();
    row.std_pv = run.pv.rows.size() > 1 ? run.pv.std_pv() : 0.0;
    row.pv_coefficient = run.pv.task == TaskKind::multiclass ? std::nan("") : run.pv.mean_coefficient();
    row.metrics = run.metrics;
    return row;
}

std::string format_table1(std::span<const Table1Row> rows) {
    std::ostringstream out;
    out << "#varest-table1\t1\n";
    out << "setting\tsources\tn\tmean_pv\tstd_pv\tpv_coefficient\tmse\taccuracy\tauc\tbrier\n";
    for (const auto& r : rows) {
        out << r.code << '\t' << r.sources << '\t' << r.n << '\t' << format_double(r.mean_pv) << '\t'
            << format_double(r.std_pv) << '\t' << format_double(r.pv_coefficient) << '\t'
            << format_optional(r.metrics.mse) << '\t' << format_optional(r.metrics.accuracy) << '\t'
            << format_optional(r.metrics.auc) << '\t' << format_optional(r.metrics.brier) << '\n';
    }
    return out.str();
}

std::vector<double> pv_in_order(const PVTable& table, const Dataset& data) {
    std::unordered_map<std::int64_t, double> by_id;
    by_id.reserve(table.rows.size());
    for (const auto& r : table.rows) by_id.emplace(r.row_id, r.pv);
    if (by_id.size() != data.size()) throw InputError("PV table and dataset cover different rows");
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& r : data.rows) {
        const auto it = by_id.find(r.row_id);
        if (it == by_id.end()) throw InputError("PV table has no row " + std::to_string(r.row_id));
        out.push_back(it->second);
    }
    return out;
}

EstimationResult run_estimation(const ModelSpec& spec, const ModelParams& target, const Dataset& train_rows,
                                const PVTable& train_pv, const Dataset& test_rows, const PVTable& test_pv,
                                const EstimatorSpec& estimator, std::uint64_t seed) {
    EstimationResult r;
    r.train_pv = pv_in_order(train_pv, train_rows);
    r.test_pv = pv_in_order(test_pv, test_rows);
    r.stats = neuron_stats(target, spec, train_rows);
    r.train_features = activation_features(target, spec, r.stats, train_rows, estimator.feature_mode);
    r.test_features = activation_features(target, spec, r.stats, test_rows, estimator.feature_mode);
    if (estimator.objective == Objective::regression) {
        r.model = train_regressor(r.train_features, r.train_pv, estimator, seed);
        r.estimates = estimate(r.model, r.test_features);
        r.regression = regression_metrics(r.estimates, r.test_pv);
    } else {
        r.scheme = bucketize(r.train_pv, estimator.buckets);
        std::vector<int> train_labels, test_labels;
        for (double v : r.train_pv) train_labels.push_back(r.scheme->assign(v));
        for (double v : r.test_pv) test_labels.push_back(r.scheme->assign(v));
        r.model = train_classifier(r.train_features, train_labels, estimator, seed);
        r.estimates = estimate(r.model, r.test_features);
        r.classification = classification_metrics(r.estimates, test_labels, estimator.buckets);
    }
    return r;
}

}  // namespace varest
