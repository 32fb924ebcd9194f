#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "varest/cli.hpp"
#include "varest/config.hpp"
#include "varest/data.hpp"
#include "varest/ensemble.hpp"
#include "varest/error.hpp"
#include "varest/estimator.hpp"
#include "varest/io.hpp"
#include "varest/pipeline.hpp"
#include "varest/probe.hpp"
#include "varest/variation.hpp"

namespace fs = std::filesystem;
using namespace varest;

namespace {

// Everything a command needs to be replayed: its argv, and a hash of every
// file it wrote.
struct RunRecord {
    std::string command;
    std::vector<std::string> args;

    void write(const fs::path& out_dir) const {
        std::ostringstream s;
        s << "#varest-run\t1\n";
        s << "command=" << command << '\n';
        s << "argc=" << args.size() << '\n';
        for (std::size_t i = 0; i < args.size(); ++i) s << "arg." << i << '=' << args[i] << '\n';
        for (const auto& [rel, hash] : output_hashes(out_dir)) s << "output." << rel << '=' << hash << '\n';
        write_file(out_dir / "run.txt", s.str());
    }

    static std::map<std::string, std::string> output_hashes(const fs::path& out_dir) {
        std::map<std::string, std::string> hashes;
        for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
            if (!entry.is_regular_file()) continue;
            const auto rel = fs::relative(entry.path(), out_dir).generic_string();
            if (rel == "run.txt") continue;
            hashes[rel] = file_hash(entry.path());
        }
        return hashes;
    }
};

struct Common {
    std::string out;
    std::string config_file;
    std::vector<std::string> overrides;
    std::size_t workers = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_config = true) {
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_option("--workers", c.workers, "Worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);
    if (with_config) {
        cmd->add_option("--config", c.config_file, "Config file (key = value, include = <preset|file>)");
        cmd->add_option("--set", c.overrides, "Config override key=value (repeatable)");
    }
}

Config load_config(const std::string& task, const Common& c) {
    Config cfg = Config::preset(task);
    if (!c.config_file.empty()) cfg.merge(Config::from_file(c.config_file));
    cfg.apply_overrides(c.overrides);
    return cfg;
}

std::vector<double> parse_fractions(const std::string& text) {
    try {
        return parse_double_list(text, ",");
    } catch (const ParseError& e) {
        throw ConfigError(std::string("bad fraction list: ") + e.what());
    }
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (auto part : split_view(text, ",")) {
        try {
            out.push_back(parse_u64(trim(part)));
        } catch (const ParseError& e) {
            throw ConfigError(std::string("bad size list: ") + e.what());
        }
    }
    return out;
}

std::vector<RandomnessSetting> parse_settings(const std::string& text) {
    std::vector<RandomnessSetting> out;
    if (text == "all") {
        for (int i = 0; i < 8; ++i) out.push_back(RandomnessSetting::from_index(i));
        return out;
    }
    for (auto part : split_view(text, ",")) out.push_back(RandomnessSetting::from_code(std::string(trim(part))));
    return out;
}

fs::path setting_dir(const std::string& root, const std::string& setting) {
    const fs::path p(root);
    if (fs::exists(p / "manifest.txt")) return p;
    if (fs::exists(p / setting / "manifest.txt")) return p / setting;
    throw InputError("no ensemble found at '" + root + "' (looked for manifest.txt and " + setting + "/manifest.txt)");
}

void add_meta(ReportFields& f, const std::string& command, const Config* cfg) {
    f.emplace_back("meta.command", command);
    if (cfg)
        for (const auto& [k, v] : cfg->values())
            if (k != "include") f.emplace_back("config." + k, v);
}

void add_input(ReportFields& f, const std::string& name, const fs::path& path) {
    f.emplace_back("input." + name + ".path", path.generic_string());
    f.emplace_back("input." + name + ".hash", file_hash(path));
}

std::ostream& log() { return std::cerr; }

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    MovielensStyleConfig gen{1500, 1000, 125000};
    std::uint64_t seed = 7;
};

void cmd_synth_movielens(const SynthArgs& a) {
    write_movielens_style(a.out, a.gen, a.seed);
    std::ostringstream s;
    s << "format=varest-synth-movielens-1\nseed=" << a.seed << "\nusers=" << a.gen.users
      << "\nmovies=" << a.gen.movies << "\nratings=" << a.gen.ratings << "\nlatent_dim=" << a.gen.latent_dim
      << "\nnoise_std=" << format_double(a.gen.noise_std) << "\nactivity_sigma=" << format_double(a.gen.activity_sigma)
      << "\npopularity_sigma=" << format_double(a.gen.popularity_sigma)
      << "\npopularity_bias=" << format_double(a.gen.popularity_bias)
      << "\nactivity_bias=" << format_double(a.gen.activity_bias) << '\n';
    write_file(fs::path(a.out) / "generator.txt", s.str());
    log() << "wrote ml-1m style files to " << a.out << "\n";
}

struct PrepareArgs {
    Common c;
    std::string source = "movielens";
    std::string movielens_dir;
    std::string task;
    std::size_t rows = 125000;
    std::size_t limit = 0;
    std::uint64_t seed = 1;
    std::string splits = "0.6,0.4";
    std::string estimator_splits = "0.5,0.5";
};

void cmd_prepare(const PrepareArgs& a) {
    const auto splits = parse_fractions(a.splits);
    const auto est_splits = parse_fractions(a.estimator_splits);
    Dataset all;
    std::string task = a.task;
    if (a.source == "movielens") {
        if (a.movielens_dir.empty()) throw UsageError("--movielens-dir is required for --source movielens");
        const fs::path d(a.movielens_dir);
        for (const char* f : {"ratings.dat", "users.dat", "movies.dat"})
            if (!fs::exists(d / f)) throw InputError("missing " + (d / f).string());
        if (task.empty()) task = "ml-r";
        if (task == "synth-binary") throw ConfigError("movielens source supports tasks ml-r and ml-c");
        all = load_movielens(d / "ratings.dat", d / "users.dat", d / "movies.dat");
        all = as_task(std::move(all), task_kind(task));
    } else if (a.source == "synthetic") {
        if (task.empty()) task = "synth-binary";
        if (task != "synth-binary") throw ConfigError("synthetic source produces the synth-binary task");
        SyntheticBinaryConfig sc;
        sc.rows = a.rows;
        all = gen_synthetic_binary(sc, a.seed);
    } else {
        throw ConfigError("unknown source '" + a.source + "' (expected movielens or synthetic)");
    }
    if (a.limit > 0) all = limit_rows(all, a.limit, a.seed);
    const auto prepared = prepare_splits(all, task, splits, est_splits, a.seed);
    save_prepared(a.c.out, prepared);
    log() << "d_t " << prepared.train.size() << " rows, d_e " << prepared.eval.size() << " rows (d_e1 "
          << prepared.eval1.size() << ", d_e2 " << prepared.eval2.size() << ")\n";
}

struct EnsembleArgs {
    Common c;
    std::string data;
    std::string task;
    std::string settings = "R3";
    std::size_t n = 30;
    std::uint64_t master_seed = 42;
};

void cmd_run_ensemble(const EnsembleArgs& a) {
    const auto data = load_prepared(a.data);
    const std::string task = a.task.empty() ? data.task : a.task;
    if (task != data.task) throw InputError("data was prepared for task " + data.task + ", not " + task);
    const Config cfg = load_config(task, a.c);
    if (cfg.get_or("task", task) != task)
        throw ConfigError("config is for task " + cfg.get("task") + " but the data is " + task);
    const ModelSpec spec = model_spec_for(task, cfg, data.train.schema);
    const TrainConfig train_cfg = train_config_for(cfg);
    if (a.n < 2) throw ConfigError("--n must be at least 2");
    std::vector<Table1Row> rows;
    const fs::path out(a.c.out);
    for (const auto& setting : parse_settings(a.settings)) {
        log() << setting.code() << " (" << setting.sources() << "): training " << a.n << " members\n";
        auto run = run_setting(spec, train_cfg, data, setting, a.n, a.master_seed, a.c.workers,
                               [&](std::size_t m, const TrainingHistory& h) {
                                   log() << "  member " << m << ": " << h.epochs_run << " epochs, best "
                                         << h.best_epoch << "\n";
                               });
        const fs::path dir = out / setting.code();
        save_ensemble(dir, run.ensemble);
        save_prediction_matrix(dir / "predictions_d_e.tsv", run.predictions);
        save_pv_table(dir / "pv_d_e.tsv", run.pv);
        save_pv_table(dir / "pv_d_e1.tsv", run.pv1);
        save_pv_table(dir / "pv_d_e2.tsv", run.pv2);
        const auto row = table1_row(run);
        ReportFields f;
        add_meta(f, "run-ensemble", &cfg);
        f.emplace_back("task", task);
        f.emplace_back("setting", row.code);
        f.emplace_back("sources", row.sources);
        f.emplace_back("n", std::to_string(a.n));
        f.emplace_back("master_seed", std::to_string(a.master_seed));
        add_input(f, "d_t", fs::path(a.data) / "d_t.tsv");
        add_input(f, "d_e", fs::path(a.data) / "d_e.tsv");
        f.emplace_back("mean_pv", format_double(row.mean_pv));
        f.emplace_back("std_pv", format_double(row.std_pv));
        f.emplace_back("pv_coefficient", format_double(row.pv_coefficient));
        f.emplace_back("mse", format_optional(row.metrics.mse));
        f.emplace_back("accuracy", format_optional(row.metrics.accuracy));
        f.emplace_back("auc", format_optional(row.metrics.auc));
        f.emplace_back("brier", format_optional(row.metrics.brier));
        write_file(dir / "metrics.txt", format_report("target-metrics", f));
        rows.push_back(row);
        log() << "  mean PV " << format_double(row.mean_pv) << "\n";
    }
    write_file(out / "table1.tsv", format_table1(rows));
}

struct CorrelateArgs {
    Common c;
    std::vector<std::string> tables;
    std::vector<std::string> labels;
};

void cmd_correlate(const CorrelateArgs& a) {
    if (a.tables.size() < 2) throw UsageError("correlate needs at least two --pv tables");
    std::vector<PVTable> tables;
    for (const auto& t : a.tables) tables.push_back(load_pv_table(t));
    std::vector<std::string> labels = a.labels;
    if (labels.empty())
        for (const auto& t : a.tables) labels.push_back(fs::path(t).parent_path().filename().string());
    if (labels.size() != tables.size()) throw UsageError("--label count must match --pv count");
    const auto matrix = correlation_matrix(tables);
    std::string text = "#varest-correlation\t1\n" + format_correlation_matrix(labels, matrix);
    write_file(fs::path(a.c.out) / "correlation.tsv", text);
    ReportFields f;
    add_meta(f, "correlate", nullptr);
    for (std::size_t i = 0; i < a.tables.size(); ++i) add_input(f, labels[i], a.tables[i]);
    write_file(fs::path(a.c.out) / "report.txt", format_report("correlation", f));
    std::cout << text;
}

struct FitArgs {
    Common c;
    std::string data;
    std::string ensemble;
    std::string setting = "R3";
    std::string objective = "reg";
    std::string features = "BV";
    std::size_t target_member = 0;
    std::uint64_t seed = 0;
};

void write_estimates(const fs::path& path, const EstimationResult& r, Objective objective,
                     const std::vector<std::int64_t>& row_ids) {
    std::ostringstream s;
    const std::size_t width = r.estimates.size() / row_ids.size();
    s << "#varest-estimates\t1\t" << to_string(objective) << '\t' << width << '\n';
    s << "row_id\tpv\testimate\n";
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        s << row_ids[i] << '\t' << format_double(r.test_pv[i]) << '\t'
          << join_doubles(std::span<const double>(r.estimates).subspan(i * width, width), ";") << '\n';
    }
    write_file(path, s.str());
}

void cmd_fit_estimator(const FitArgs& a) {
    const auto data = load_prepared(a.data);
    const fs::path edir = setting_dir(a.ensemble, a.setting);
    const auto ens = load_ensemble(edir);
    if (a.target_member >= ens.size())
        throw ConfigError("--target-member " + std::to_string(a.target_member) + " but the ensemble has " +
                          std::to_string(ens.size()) + " members");
    Config cfg;
    if (!a.c.config_file.empty()) cfg = Config::from_file(a.c.config_file);
    cfg.apply_overrides(a.c.overrides);
    cfg.set("estimator.objective", a.objective);
    cfg.set("estimator.features", a.features);
    const EstimatorSpec es = estimator_spec_for(cfg);
    const auto pv1 = load_pv_table(edir / "pv_d_e1.tsv");
    const auto pv2 = load_pv_table(edir / "pv_d_e2.tsv");
    if (pv1.task != TaskKind::regression && pv1.task != TaskKind::binary && pv1.task != TaskKind::multiclass)
        throw InputError("unexpected PV table task");
    const auto r = run_estimation(ens.spec, ens.members[a.target_member], data.eval1, pv1, data.eval2, pv2, es, a.seed);
    const fs::path out(a.c.out);
    for (const auto& w : r.model.warnings) log() << "warning: " << w << "\n";
    ReportFields f;
    add_meta(f, "fit-estimator", &cfg);
    f.emplace_back("setting", ens.setting.code());
    f.emplace_back("objective", to_string(es.objective));
    f.emplace_back("features", to_string(es.feature_mode));
    f.emplace_back("target_member", std::to_string(a.target_member));
    f.emplace_back("target_init_seed", std::to_string(ens.seeds[a.target_member].init_seed));
    f.emplace_back("estimator_seed", std::to_string(a.seed));
    add_input(f, "ensemble_manifest", edir / "manifest.txt");
    add_input(f, "pv_d_e1", edir / "pv_d_e1.tsv");
    add_input(f, "pv_d_e2", edir / "pv_d_e2.tsv");
    add_input(f, "d_e1", fs::path(a.data) / "d_e1.tsv");
    add_input(f, "d_e2", fs::path(a.data) / "d_e2.tsv");
    f.emplace_back("train_rows", std::to_string(r.train_features.rows()));
    f.emplace_back("test_rows", std::to_string(r.test_features.rows()));
    f.emplace_back("epochs_run", std::to_string(r.model.history.epochs_run));
    if (r.regression) {
        for (auto& kv : report_fields(*r.regression)) f.push_back(kv);
        std::cout << "mse=" << format_double(r.regression->mse) << " r2=" << format_optional(r.regression->r2) << "\n";
    }
    if (r.classification) {
        f.emplace_back("thresholds", join_doubles(r.scheme->thresholds, ","));
        for (auto& kv : report_fields(*r.classification)) f.push_back(kv);
        write_file(out / "confusion.tsv", format_confusion(*r.classification));
        std::cout << "accuracy=" << format_double(r.classification->accuracy);
        for (std::size_t b = 0; b < r.classification->auc.size(); ++b)
            std::cout << " auc" << b + 1 << "=" << format_optional(r.classification->auc[b]);
        std::cout << "\n";
    }
    for (std::size_t i = 0; i < r.model.warnings.size(); ++i)
        f.emplace_back("warning." + std::to_string(i), r.model.warnings[i]);
    write_file(out / "report.txt", format_report("estimator", f));
    write_estimates(out / "estimates.tsv", r, es.objective, data.eval2.row_ids());
    save_neuron_stats(out / "neuron_stats.tsv", r.stats);
    save_estimator(out / "estimator", r.model);
}

struct DeltaArgs {
    Common c;
    std::string ensemble;
    std::string setting = "R3";
    std::string sizes = "10,30,60,100";
    std::size_t resamples = 20;
    std::uint64_t seed = 0;
};

void cmd_delta_ratio(const DeltaArgs& a) {
    const fs::path edir = setting_dir(a.ensemble, a.setting);
    const auto universe = load_prediction_matrix(edir / "predictions_d_e.tsv");
    const auto sizes = parse_size_list(a.sizes);
    const auto points = size_sweep(universe, sizes, a.resamples, a.seed);
    std::ostringstream s;
    s << "#varest-delta-ratio\t1\tuniverse=" << universe.members << "\n";
    s << "size\tmean\tstd\tratios\n";
    for (const auto& p : points)
        s << p.size << '\t' << format_double(p.mean) << '\t' << format_double(p.std) << '\t'
          << join_doubles(p.ratios, ",") << '\n';
    write_file(fs::path(a.c.out) / "sweep.tsv", s.str());
    ReportFields f;
    add_meta(f, "delta-ratio", nullptr);
    f.emplace_back("universe_members", std::to_string(universe.members));
    f.emplace_back("sizes", a.sizes);
    f.emplace_back("resamples", std::to_string(a.resamples));
    f.emplace_back("seed", std::to_string(a.seed));
    add_input(f, "predictions", edir / "predictions_d_e.tsv");
    for (const auto& p : points) f.emplace_back("delta_ratio." + std::to_string(p.size), format_double(p.mean));
    write_file(fs::path(a.c.out) / "report.txt", format_report("delta-ratio", f));
    std::cout << s.str();
}

struct DropoutArgs {
    Common c;
    std::string data;
    std::string ensemble;
    std::string setting = "R3";
    std::string estimates;
    double rate = 0.2;
    std::size_t passes = 100;
    std::uint64_t seed = 0;
};

std::vector<double> read_estimates(const fs::path& path, const std::vector<std::int64_t>& row_ids) {
    const auto text = read_file(path);
    std::map<std::int64_t, double> by_id;
    std::size_t lineno = 0;
    for (auto line : split_view(text, "\n")) {
        ++lineno;
        if (lineno <= 2 || line.empty()) {
            if (lineno == 1 && line.rfind("#varest-estimates\t1\tregression", 0) != 0)
                throw ParseError(path.string() + ": expected regression estimates");
            continue;
        }
        const auto cols = split_view(line, "\t");
        if (cols.size() != 3) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
        by_id[parse_int(cols[0])] = parse_double(cols[2]);
    }
    std::vector<double> out;
    for (auto id : row_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw InputError("estimates lack row " + std::to_string(id));
        out.push_back(it->second);
    }
    if (by_id.size() != row_ids.size()) throw InputError("estimates cover different rows than the PV table");
    return out;
}

void cmd_dropout_baseline(const DropoutArgs& a) {
    const auto data = load_prepared(a.data);
    const fs::path edir = setting_dir(a.ensemble, a.setting);
    const auto ens = load_ensemble(edir);
    const auto ensemble_pv = load_pv_table(edir / "pv_d_e2.tsv");
    const auto baseline = mc_dropout_pv(ens.spec, ens.config, data.train, data.eval2, a.rate, a.passes, a.seed, a.c.workers);
    const auto cmp = compare_pv(baseline.pv, ensemble_pv);
    const fs::path out(a.c.out);
    save_pv_table(out / "pv_dropout.tsv", baseline.pv);
    ReportFields f;
    add_meta(f, "dropout-baseline", nullptr);
    f.emplace_back("rate", format_double(a.rate));
    f.emplace_back("passes", std::to_string(a.passes));
    f.emplace_back("seed", std::to_string(a.seed));
    add_input(f, "ensemble_manifest", edir / "manifest.txt");
    add_input(f, "pv_d_e2", edir / "pv_d_e2.tsv");
    add_input(f, "d_t", fs::path(a.data) / "d_t.tsv");
    for (auto& [k, v] : report_fields(cmp)) f.emplace_back("dropout." + k, v);
    std::cout << "dropout pearson=" << format_optional(cmp.pearson);
    if (!a.estimates.empty()) {
        const auto est = read_estimates(a.estimates, ensemble_pv.row_ids());
        add_input(f, "estimates", a.estimates);
        std::optional<double> p;
        try {
            p = pearson(est, ensemble_pv.pv_values());
        } catch (const NumericError&) {
        }
        f.emplace_back("estimator.pearson", format_optional(p));
        std::cout << " estimator pearson=" << format_optional(p);
    }
    std::cout << "\n";
    write_file(out / "report.txt", format_report("dropout-baseline", f));
}

struct ReplayArgs {
    std::string run;
    std::string out;
    std::size_t workers = 0;
};

int cmd_replay(const ReplayArgs& a) {
    const auto kv = parse_key_values(read_file(a.run));
    if (!kv.count("argc")) throw ParseError(a.run + ": not a run record");
    const std::size_t argc = parse_u64(kv.at("argc"));
    std::vector<std::string> argv;
    for (std::size_t i = 0; i < argc; ++i) {
        const auto it = kv.find("arg." + std::to_string(i));
        if (it == kv.end()) throw ParseError(a.run + ": missing arg." + std::to_string(i));
        argv.push_back(it->second);
    }
    bool saw_out = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
        if (argv[i] == "--out") {
            argv[i + 1] = a.out;
            saw_out = true;
        }
        if (argv[i] == "--workers" && a.workers > 0) argv[i + 1] = std::to_string(a.workers);
    }
    if (!saw_out) throw ParseError(a.run + ": recorded command has no --out");
    if (a.workers > 0 && std::find(argv.begin(), argv.end(), "--workers") == argv.end()) {
        argv.push_back("--workers");
        argv.push_back(std::to_string(a.workers));
    }
    const int rc = run_cli(argv);
    if (rc != 0) return rc;
    const auto now = RunRecord::output_hashes(a.out);
    std::size_t mismatches = 0, checked = 0;
    for (const auto& [k, v] : kv) {
        if (k.rfind("output.", 0) != 0) continue;
        ++checked;
        const auto rel = k.substr(7);
        const auto it = now.find(rel);
        if (it == now.end() || it->second != v) {
            ++mismatches;
            std::cout << "MISMATCH " << rel << "\n";
        }
    }
    std::cout << "replayed " << checked << " outputs, " << mismatches << " mismatches\n";
    if (mismatches > 0) throw NumericError("replay produced different outputs");
    return 0;
}

}  // namespace

int varest::run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Ensemble prediction variation and its estimation from neuron activations"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth-movielens", "Write a synthetic ml-1m style rating corpus");
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_option("--users", synth.gen.users);
    c_synth->add_option("--movies", synth.gen.movies);
    c_synth->add_option("--ratings", synth.gen.ratings);
    c_synth->add_option("--latent-dim", synth.gen.latent_dim);
    c_synth->add_option("--noise", synth.gen.noise_std);
    c_synth->add_option("--seed", synth.seed);

    PrepareArgs prep;
    auto* c_prep = app.add_subcommand("prepare-data", "Split a corpus into D_t / D_e / D_e1 / D_e2 dumps");
    add_common(c_prep, prep.c, false);
    c_prep->add_option("--source", prep.source, "movielens | synthetic");
    c_prep->add_option("--movielens-dir", prep.movielens_dir, "Directory with ratings.dat, users.dat, movies.dat");
    c_prep->add_option("--task", prep.task, "ml-r | ml-c | synth-binary");
    c_prep->add_option("--rows", prep.rows, "Rows to generate (synthetic source)");
    c_prep->add_option("--limit", prep.limit, "Keep a seeded random subset of this many rows");
    c_prep->add_option("--seed", prep.seed);
    c_prep->add_option("--splits", prep.splits, "Target / ground-truth fractions");
    c_prep->add_option("--estimator-splits", prep.estimator_splits, "Split of the ground-truth part");

    EnsembleArgs ens;
    auto* c_ens = app.add_subcommand("run-ensemble", "Train ensembles under randomness settings");
    add_common(c_ens, ens.c);
    c_ens->add_option("--data", ens.data, "Prepared data directory")->required();
    c_ens->add_option("--task", ens.task);
    c_ens->add_option("--setting", ens.settings, "R0..R7, comma list, or all");
    c_ens->add_option("--n", ens.n, "Members per ensemble");
    c_ens->add_option("--master-seed", ens.master_seed);

    CorrelateArgs corr;
    auto* c_corr = app.add_subcommand("correlate", "Pearson correlation between PV tables");
    add_common(c_corr, corr.c, false);
    c_corr->add_option("--pv", corr.tables, "PV table (repeatable)")->required();
    c_corr->add_option("--label", corr.labels, "Label per table (repeatable)");

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit-estimator", "Train and score the variation estimator");
    add_common(c_fit, fit.c);
    c_fit->add_option("--data", fit.data)->required();
    c_fit->add_option("--ensemble", fit.ensemble, "run-ensemble output or one setting directory")->required();
    c_fit->add_option("--setting", fit.setting);
    c_fit->add_option("--objective", fit.objective, "reg | cls");
    c_fit->add_option("--features", fit.features, "B | BV");
    c_fit->add_option("--target-member", fit.target_member);
    c_fit->add_option("--seed", fit.seed);

    DeltaArgs delta;
    auto* c_delta = app.add_subcommand("delta-ratio", "Delta ratio of sub-ensembles against the full universe");
    add_common(c_delta, delta.c, false);
    c_delta->add_option("--universe", delta.ensemble, "run-ensemble output or one setting directory")->required();
    c_delta->add_option("--setting", delta.setting);
    c_delta->add_option("--sizes", delta.sizes);
    c_delta->add_option("--resamples", delta.resamples);
    c_delta->add_option("--seed", delta.seed);

    DropoutArgs drop;
    auto* c_drop = app.add_subcommand("dropout-baseline", "MC-dropout PV compared with ensemble PV");
    add_common(c_drop, drop.c, false);
    c_drop->add_option("--data", drop.data)->required();
    c_drop->add_option("--ensemble", drop.ensemble)->required();
    c_drop->add_option("--setting", drop.setting);
    c_drop->add_option("--estimates", drop.estimates, "estimates.tsv from a regression fit-estimator run");
    c_drop->add_option("--rate", drop.rate);
    c_drop->add_option("--passes", drop.passes);
    c_drop->add_option("--seed", drop.seed);

    ReplayArgs replay;
    auto* c_replay = app.add_subcommand("replay", "Re-run a recorded command and compare its outputs");
    c_replay->add_option("--run", replay.run, "run.txt of an earlier command")->required();
    c_replay->add_option("--out", replay.out)->required();
    c_replay->add_option("--workers", replay.workers);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "replay") return cmd_replay(replay);
        RunRecord record{name, args};
        fs::path out;
        if (name == "synth-movielens") {
            cmd_synth_movielens(synth);
            out = synth.out;
        } else if (name == "prepare-data") {
            cmd_prepare(prep);
            out = prep.c.out;
        } else if (name == "run-ensemble") {
            cmd_run_ensemble(ens);
            out = ens.c.out;
        } else if (name == "correlate") {
            cmd_correlate(corr);
            out = corr.c.out;
        } else if (name == "fit-estimator") {
            cmd_fit_estimator(fit);
            out = fit.c.out;
        } else if (name == "delta-ratio") {
            cmd_delta_ratio(delta);
            out = delta.c.out;
        } else if (name == "dropout-baseline") {
            cmd_dropout_baseline(drop);
            out = drop.c.out;
        }
        record.write(out);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

