#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace varest {

// Flat key=value configuration. A line "include = <name>" pulls in a built-in
// preset (ml-r, ml-c, synth-binary) or another file, resolved relative to the
// including file; keys after the include override it.
class Config {
public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    static Config from_text(const std::string& text, const std::filesystem::path& base_dir = {});
    static Config from_file(const std::filesystem::path& path);
    static Config preset(const std::string& name);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void merge(const Config& other);
    // "key=value" strings, as given on the command line.
    void apply_overrides(const std::vector<std::string>& assignments);

    // Entries whose key starts with prefix, with the prefix removed.
    std::map<std::string, std::string> section(const std::string& prefix) const;
    const std::map<std::string, std::string>& values() const { return values_; }
    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
};

const std::vector<std::string>& preset_names();
std::string preset_text(const std::string& name);

}  // namespace varest
