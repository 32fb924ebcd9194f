#include "varest/config.hpp"

#include <set>

#include "varest/error.hpp"
#include "varest/io.hpp"

namespace varest {

namespace {

const std::map<std::string, std::string>& presets() {
    static const std::map<std::string, std::string> table = {
        {"ml-r",
         "task = ml-r\n"
         "model.hidden_sizes = 50,20,10\n"
         "model.embedding_init = 0.05\n"
         "train.max_epochs = 20\n"
         "train.batch_size = 256\n"
         "train.learning_rate = 0.001\n"
         "train.patience = 2\n"
         "train.validation_fraction = 0.1\n"},
        {"ml-c",
         "include = ml-r\n"
         "task = ml-c\n"
         "model.temperature = 0.2\n"},
        {"synth-binary",
         "task = synth-binary\n"
         "model.hidden_sizes = 50,20,10\n"
         "model.embedding_dim = 4\n"
         "model.embedding_init = 0.05\n"
         "train.max_epochs = 1\n"
         "train.batch_size = 256\n"
         "train.learning_rate = 0.001\n"
         "train.patience = 1\n"
         "train.validation_fraction = 0.1\n"},
    };
    return table;
}

void load_into(std::map<std::string, std::string>& out, const std::string& text,
               const std::filesystem::path& base_dir, std::set<std::string>& stack, const std::string& origin) {
    std::size_t lineno = 0;
    for (auto raw : split_view(text, "\n")) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (key != "include") {
            out[key] = value;
            continue;
        }
        std::string id;
        std::string body;
        std::filesystem::path next_dir = base_dir;
        if (presets().count(value)) {
            id = "preset:" + value;
            body = presets().at(value);
        } else {
            const auto path = base_dir.empty() ? std::filesystem::path(value) : base_dir / value;
            id = std::filesystem::weakly_canonical(path).string();
            if (!std::filesystem::exists(path))
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": include '" + value + "' not found");
            body = read_file(path);
            next_dir = path.parent_path();
        }
        if (stack.count(id)) throw ConfigError(origin + ": include cycle through '" + value + "'");
        stack.insert(id);
        load_into(out, body, next_dir, stack, value);
        stack.erase(id);
    }
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"ml-r", "ml-c", "synth-binary"};
    return names;
}

std::string preset_text(const std::string& name) {
    const auto it = presets().find(name);
    if (it == presets().end()) throw ConfigError("unknown preset '" + name + "'");
    return it->second;
}

Config Config::from_text(const std::string& text, const std::filesystem::path& base_dir) {
    std::map<std::string, std::string> values;
    std::set<std::string> stack;
    load_into(values, text, base_dir, stack, "<config>");
    return Config(std::move(values));
}

Config Config::from_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' not found");
    std::map<std::string, std::string> values;
    std::set<std::string> stack{std::filesystem::weakly_canonical(path).string()};
    load_into(values, read_file(path), path.parent_path(), stack, path.string());
    return Config(std::move(values));
}

Config Config::preset(const std::string& name) { return from_text("include = " + name + "\n"); }

const std::string& Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    try {
        return parse_double(get(key));
    } catch (const ParseError& e) {
        throw ConfigError("config: key '" + key + "': " + e.what());
    }
}

double Config::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    try {
        return parse_u64(get(key));
    } catch (const ParseError& e) {
        throw ConfigError("config: key '" + key + "': " + e.what());
    }
}

std::uint64_t Config::get_u64_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

void Config::apply_overrides(const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' is not key=value");
        values_[std::string(trim(std::string_view(a).substr(0, eq)))] = std::string(trim(std::string_view(a).substr(eq + 1)));
    }
}

std::map<std::string, std::string> Config::section(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : values_)
        if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) out[k.substr(prefix.size())] = v;
    return out;
}

std::string Config::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

}  // namespace varest
