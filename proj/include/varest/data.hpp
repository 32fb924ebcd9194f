#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace varest {

enum class TaskKind { regression, binary, multiclass };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

struct FeatureSchema {
    std::vector<std::string> categorical_names;
    std::vector<std::size_t> vocab_sizes;
    // Original tokens per categorical feature, indexed by dense id. May be
    // empty for generated data (identity mapping).
    std::vector<std::vector<std::string>> vocab_tokens;
    std::size_t numeric_count = 0;
    TaskKind task = TaskKind::regression;
    std::size_t num_classes = 1;  // multiclass only

    void validate() const;
    std::size_t categorical_index(const std::string& name) const;
    bool operator==(const FeatureSchema& other) const;
};

struct Example {
    std::vector<std::int32_t> categorical;  // aligned with FeatureSchema::categorical_names
    std::vector<double> numeric;
    double label = 0.0;  // rating / {0,1} / class index
    std::int64_t row_id = 0;

    bool operator==(const Example&) const = default;
};

struct Provenance {
    std::string source;
    std::string split_name;
    std::uint64_t parent_seed = 0;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<Example> rows;
    Provenance provenance;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }
    std::vector<std::int64_t> row_ids() const;

    // Checks schema conformance of every row and row_id uniqueness.
    void validate() const;
};

// ml-1m genre vocabulary, in README order.
const std::vector<std::string>& movielens_genres();

// Reads the "::"-separated ml-1m files. Title is not used.
Dataset load_movielens(const std::filesystem::path& ratings_path,
                       const std::filesystem::path& users_path,
                       const std::filesystem::path& movies_path);

struct MovielensStyleConfig {
    std::size_t users = 6040;
    std::size_t movies = 3706;
    std::size_t ratings = 1000209;
    std::size_t latent_dim = 6;
    double noise_std = 0.6;
    double activity_sigma = 1.1;    // log-normal spread of user activity
    double popularity_sigma = 1.4;  // log-normal spread of movie popularity
    // Rating bias per unit of log popularity / log activity (popular movies
    // rate higher, heavy raters are harsher).
    double popularity_bias = 0.3;
    double activity_bias = -0.2;
};

// Writes ratings.dat, users.dat and movies.dat in ml-1m layout, generated from a
// latent-factor model with long-tailed user activity and movie popularity.
void write_movielens_style(const std::filesystem::path& dir, const MovielensStyleConfig& config,
                           std::uint64_t seed);

struct SyntheticBinaryConfig {
    std::size_t rows = 10000;
    std::size_t numeric = 13;
    std::vector<std::size_t> cat_cardinalities;  // empty: 26 default cardinalities
};

std::vector<std::size_t> default_cat_cardinalities();

// Desk-scale click-through stand-in: 13 numeric and 26 categorical features and
// a label drawn from a hidden sparse logistic model.
Dataset gen_synthetic_binary(const SyntheticBinaryConfig& config, std::uint64_t seed);

// Rating labels -> task labels (regression: rating; multiclass: rating-1 over 5
// classes). Binary datasets pass through unchanged.
Dataset as_task(Dataset data, TaskKind task);

// Seeded permutation followed by contiguous cuts; parts keep the permuted order.
std::vector<Dataset> split(const Dataset& data, std::span<const double> fractions,
                           std::uint64_t seed);

// Identity when seed is empty (Shuffle off).
std::vector<std::size_t> shuffle_epoch(std::size_t size, std::optional<std::uint64_t> base_seed,
                                       std::uint64_t epoch_index);

// Fold of each row under a delete-1 Jackknife with k folds. Folds are exact
// near-equal partitions ranked by a hash of (fold_seed, row_id).
std::vector<std::size_t> jackknife_folds(const Dataset& data, std::size_t k);

// All rows except fold leave_out_index, in original relative order.
Dataset jackknife_subsample(const Dataset& data, std::size_t k, std::size_t leave_out_index);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices, std::string split_name);

// Canonical delimited-text dump.
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace varest
