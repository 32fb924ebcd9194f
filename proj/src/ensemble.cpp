#include "varest/ensemble.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/parallel.hpp"
#include "varest/rng.hpp"

namespace varest {

std::string RandomnessSetting::sources() const {
    std::string s;
    auto add = [&](const char* part) {
        if (!s.empty()) s += '+';
        s += part;
    };
    if (rand_init) add("R");
    if (shuffle) add("S");
    if (jackknife) add("J");
    return s.empty() ? "None" : s;
}

RandomnessSetting RandomnessSetting::from_index(int index) {
    if (index < 0 || index > 7) throw ConfigError("randomness setting index must lie in 0..7");
    return {(index & 1) != 0, (index & 2) != 0, (index & 4) != 0};
}

RandomnessSetting RandomnessSetting::from_code(const std::string& code) {
    if (code.size() != 2 || (code[0] != 'R' && code[0] != 'r') || code[1] < '0' || code[1] > '7')
        throw ConfigError("unknown randomness setting '" + code + "' (expected R0..R7)");
    return from_index(code[1] - '0');
}

std::uint64_t global_init_seed(std::uint64_t master_seed) {
    return derive_key(master_seed, "global-init");
}

std::vector<SeedBundle> make_seed_bundles(const RandomnessSetting& setting, std::size_t n,
                                          std::uint64_t master_seed) {
    if (n == 0) throw UsageError("make_seed_bundles: N must be at least 1");
    std::vector<SeedBundle> bundles(n);
    const std::uint64_t fixed = global_init_seed(master_seed);
    std::set<std::uint64_t> init_seen{fixed}, shuffle_seen;
    for (std::size_t i = 0; i < n; ++i) {
        auto& b = bundles[i];
        if (setting.rand_init) {
            b.init_seed = derive_key(master_seed, "init", i);
            if (!init_seen.insert(b.init_seed).second)
                throw ConfigError("init seed collision; choose another master seed");
        } else {
            b.init_seed = fixed;
        }
        if (setting.shuffle) {
            b.shuffle_seed = derive_key(master_seed, "shuffle", i);
            if (!shuffle_seen.insert(*b.shuffle_seed).second)
                throw ConfigError("shuffle seed collision; choose another master seed");
        }
        if (setting.jackknife) b.jackknife_index = i;
    }
    return bundles;
}

Dataset member_training_data(const Dataset& train_data, const RandomnessSetting& setting,
                             std::size_t n, std::size_t index) {
    if (!setting.jackknife) return train_data;
    return jackknife_subsample(train_data, n, index);
}

Ensemble train_ensemble(const ModelSpec& spec, const TrainConfig& config, const Dataset& train_data,
                        const RandomnessSetting& setting, std::size_t n, std::uint64_t master_seed,
                        std::size_t workers, const MemberCallback& on_member) {
    if (n < 2) throw UsageError("train_ensemble: need at least 2 members");
    if (setting.jackknife && n > train_data.size())
        throw ConfigError("train_ensemble: " + std::to_string(n) + " jackknife folds exceed " +
                          std::to_string(train_data.size()) + " rows");
    spec.validate();
    config.validate();
    Ensemble ensemble;
    ensemble.spec = spec;
    ensemble.config = config;
    ensemble.setting = setting;
    ensemble.master_seed = master_seed;
    ensemble.seeds = make_seed_bundles(setting, n, master_seed);
    ensemble.members.resize(n);
    ensemble.histories.resize(n);
    parallel_for(n, workers, [&](std::size_t i) {
        try {
            const auto& seeds = ensemble.seeds[i];
            TrainResult r;
            if (setting.jackknife) {
                r = train(spec, config, jackknife_subsample(train_data, n, *seeds.jackknife_index), seeds);
            } else {
                r = train(spec, config, train_data, seeds);
            }
            ensemble.members[i] = std::move(r.params);
            ensemble.histories[i] = std::move(r.history);
            if (on_member) on_member(i, ensemble.histories[i]);
        } catch (const TrainingError& e) {
            throw TrainingError("ensemble member " + std::to_string(i) + ": " + e.what());
        }
    });
    return ensemble;
}

// ---------------------------------------------------------------------------
// Prediction matrix

std::vector<double> PredictionMatrix::mean() const {
    std::vector<double> out(examples * width, 0.0);
    for (std::size_t x = 0; x < examples; ++x)
        for (std::size_t c = 0; c < width; ++c) {
            double s = 0.0;
            for (std::size_t m = 0; m < members; ++m) s += values[(m * examples + x) * width + c];
            out[x * width + c] = s / static_cast<double>(members);
        }
    return out;
}

PredictionMatrix PredictionMatrix::select_members(std::span<const std::size_t> chosen) const {
    PredictionMatrix out;
    out.task = task;
    out.members = chosen.size();
    out.examples = examples;
    out.width = width;
    out.row_ids = row_ids;
    out.values.reserve(chosen.size() * examples * width);
    for (auto m : chosen) {
        if (m >= members) throw UsageError("select_members: member index out of range");
        const auto first = values.begin() + static_cast<std::ptrdiff_t>(m * examples * width);
        out.values.insert(out.values.end(), first, first + static_cast<std::ptrdiff_t>(examples * width));
    }
    return out;
}

PredictionMatrix predict_matrix(const ModelSpec& spec, std::span<const ModelParams> members,
                                const Dataset& examples, std::size_t workers) {
    spec.check_schema(examples.schema);
    PredictionMatrix matrix;
    matrix.task = spec.task;
    matrix.members = members.size();
    matrix.examples = examples.size();
    matrix.width = spec.output_width();
    matrix.row_ids = examples.row_ids();
    matrix.values.resize(matrix.members * matrix.examples * matrix.width);
    parallel_for(members.size(), workers, [&](std::size_t m) {
        const auto preds = predict(members[m], spec, examples);
        std::copy(preds.begin(), preds.end(),
                  matrix.values.begin() + static_cast<std::ptrdiff_t>(m * matrix.examples * matrix.width));
    });
    return matrix;
}

PredictionMatrix predict_matrix(const Ensemble& ensemble, const Dataset& examples, std::size_t workers) {
    return predict_matrix(ensemble.spec, ensemble.members, examples, workers);
}

void save_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& matrix) {
    std::ostringstream out;
    out << "#varest-predictions\t1\t" << to_string(matrix.task) << '\t' << matrix.members << '\t'
        << matrix.width << '\n';
    out << "row_id";
    for (std::size_t m = 0; m < matrix.members; ++m) out << "\tm" << m;
    out << '\n';
    for (std::size_t x = 0; x < matrix.examples; ++x) {
        out << matrix.row_ids[x];
        for (std::size_t m = 0; m < matrix.members; ++m) out << '\t' << join_doubles(matrix.at(m, x), ";");
        out << '\n';
    }
    write_file(path, out.str());
}

PredictionMatrix load_prediction_matrix(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    auto fail = [&](const std::string& what) { throw ParseError(path.string() + ": " + what); };
    if (!std::getline(in, line)) fail("empty file");
    auto head = split_view(line, "\t");
    if (head.size() != 5 || head[0] != "#varest-predictions" || head[1] != "1") fail("bad header");
    PredictionMatrix matrix;
    matrix.task = parse_task_kind(std::string(head[2]));
    matrix.members = parse_u64(head[3]);
    matrix.width = parse_u64(head[4]);
    std::getline(in, line);
    std::vector<std::vector<double>> per_example;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_view(line, "\t");
        if (f.size() != matrix.members + 1) fail("wrong column count");
        matrix.row_ids.push_back(parse_int(f[0]));
        std::vector<double> cells;
        for (std::size_t m = 0; m < matrix.members; ++m) {
            auto probs = parse_double_list(f[m + 1], ";");
            if (probs.size() != matrix.width) fail("wrong cell width");
            cells.insert(cells.end(), probs.begin(), probs.end());
        }
        per_example.push_back(std::move(cells));
    }
    matrix.examples = per_example.size();
    matrix.values.resize(matrix.members * matrix.examples * matrix.width);
    for (std::size_t x = 0; x < matrix.examples; ++x)
        for (std::size_t m = 0; m < matrix.members; ++m)
            for (std::size_t c = 0; c < matrix.width; ++c)
                matrix.values[(m * matrix.examples + x) * matrix.width + c] =
                    per_example[x][m * matrix.width + c];
    return matrix;
}

// ---------------------------------------------------------------------------
// Manifest

std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
    return {{"max_epochs", std::to_string(c.max_epochs)},
            {"batch_size", std::to_string(c.batch_size)},
            {"learning_rate", format_double(c.learning_rate)},
            {"patience", std::to_string(c.patience)},
            {"validation_fraction", format_double(c.validation_fraction)},
            {"beta1", format_double(c.beta1)},
            {"beta2", format_double(c.beta2)},
            {"epsilon", format_double(c.epsilon)}};
}

TrainConfig train_config_from_key_values(const std::map<std::string, std::string>& kv) {
    TrainConfig c;
    auto get = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(std::string("train config: missing key '") + key + "'");
        return it->second;
    };
    c.max_epochs = parse_u64(get("max_epochs"));
    c.batch_size = parse_u64(get("batch_size"));
    c.learning_rate = parse_double(get("learning_rate"));
    c.patience = parse_u64(get("patience"));
    c.validation_fraction = parse_double(get("validation_fraction"));
    c.beta1 = parse_double(get("beta1"));
    c.beta2 = parse_double(get("beta2"));
    c.epsilon = parse_double(get("epsilon"));
    c.validate();
    return c;
}

std::string format_manifest(const EnsembleManifest& m) {
    std::ostringstream out;
    out << "# varest ensemble manifest\n";
    out << "format=varest-ensemble-1\n";
    out << "setting=" << m.setting.code() << '\n';
    out << "sources=" << m.setting.sources() << '\n';
    out << "n=" << m.n << '\n';
    out << "master_seed=" << m.master_seed << '\n';
    for (const auto& [k, v] : to_key_values(m.spec)) out << "model." << k << '=' << v << '\n';
    for (const auto& [k, v] : to_key_values(m.config)) out << "train." << k << '=' << v << '\n';
    for (std::size_t i = 0; i < m.seeds.size(); ++i) {
        const auto& s = m.seeds[i];
        const std::string p = "member." + std::to_string(i) + ".";
        out << p << "init_seed=" << s.init_seed << '\n';
        if (s.shuffle_seed) out << p << "shuffle_seed=" << *s.shuffle_seed << '\n';
        if (s.jackknife_index) out << p << "jackknife_index=" << *s.jackknife_index << '\n';
        if (i < m.artifacts.size()) out << p << "artifact=" << m.artifacts[i] << '\n';
    }
    return out.str();
}

EnsembleManifest parse_manifest(const std::string& text) {
    std::map<std::string, std::string> kv, model_kv, train_kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ParseError("manifest: bad line '" + std::string(t) + "'");
        const std::string key(trim(t.substr(0, eq)));
        const std::string value(trim(t.substr(eq + 1)));
        if (key.rfind("model.", 0) == 0) model_kv[key.substr(6)] = value;
        else if (key.rfind("train.", 0) == 0) train_kv[key.substr(6)] = value;
        else kv[key] = value;
    }
    if (kv["format"] != "varest-ensemble-1") throw ParseError("manifest: unknown format");
    EnsembleManifest m;
    m.setting = RandomnessSetting::from_code(kv.at("setting"));
    m.n = parse_u64(kv.at("n"));
    m.master_seed = parse_u64(kv.at("master_seed"));
    m.spec = spec_from_key_values(model_kv);
    m.config = train_config_from_key_values(train_kv);
    m.seeds.resize(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        const std::string p = "member." + std::to_string(i) + ".";
        auto& s = m.seeds[i];
        const auto init = kv.find(p + "init_seed");
        if (init == kv.end()) throw ParseError("manifest: missing seeds for member " + std::to_string(i));
        s.init_seed = parse_u64(init->second);
        if (auto it = kv.find(p + "shuffle_seed"); it != kv.end()) s.shuffle_seed = parse_u64(it->second);
        if (auto it = kv.find(p + "jackknife_index"); it != kv.end()) s.jackknife_index = parse_u64(it->second);
        if (auto it = kv.find(p + "artifact"); it != kv.end()) m.artifacts.push_back(it->second);
    }
    return m;
}

void save_ensemble(const std::filesystem::path& dir, const Ensemble& ensemble) {
    EnsembleManifest m{ensemble.setting, ensemble.size(), ensemble.master_seed, ensemble.spec,
                       ensemble.config, ensemble.seeds, {}};
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "models/member_%03zu.model", i);
        m.artifacts.emplace_back(name);
        save_model(dir / name, {ensemble.spec, ensemble.members[i], ensemble.seeds[i]});
    }
    write_file(dir / "manifest.txt", format_manifest(m));
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
    const auto m = parse_manifest(read_file(dir / "manifest.txt"));
    if (m.artifacts.size() != m.n) throw InputError("manifest lists " + std::to_string(m.artifacts.size()) +
                                                    " artifacts for " + std::to_string(m.n) + " members");
    Ensemble e;
    e.spec = m.spec;
    e.config = m.config;
    e.setting = m.setting;
    e.master_seed = m.master_seed;
    e.seeds = m.seeds;
    for (const auto& a : m.artifacts) {
        auto model = load_model(dir / a);
        if (!(model.spec == m.spec)) throw InputError("member artifact " + a + " has a different spec");
        e.members.push_back(std::move(model.params));
    }
    e.histories.resize(e.members.size());
    return e;
}

}  // namespace varest
