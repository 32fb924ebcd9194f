#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "varest/data.hpp"
#include "varest/ensemble.hpp"

namespace varest {

// Sample standard deviation (divisor N-1) of the member predictions.
double value_pv(std::span<const double> predictions);

// Sum over members of KL(p_m || p_mean), natural log. `distributions` holds
// N row-major probability vectors of length `classes`.
double dist_pv(std::span<const double> distributions, std::size_t classes);

struct PVRow {
    std::int64_t row_id = 0;
    double pv = 0.0;
    std::vector<double> mean_prediction;  // 1 value, or the mean distribution
    double coefficient = 0.0;             // pv / |mean|; NaN when undefined

    bool operator==(const PVRow&) const = default;
};

struct PVTable {
    TaskKind task = TaskKind::regression;
    std::vector<PVRow> rows;

    std::vector<double> pv_values() const;
    std::vector<std::int64_t> row_ids() const;
    double mean_pv() const;
    double std_pv() const;  // sample std
    // Mean of per-example coefficients over rows where it is defined.
    double mean_coefficient() const;
};

PVTable pv_table(const PredictionMatrix& matrix);

// Product-moment correlation. Throws NumericError on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Values of b reordered to follow a's row ids; throws InputError if the row id
// sets differ.
std::vector<double> aligned_pv(const PVTable& a, const PVTable& b);

struct BucketScheme {
    std::vector<double> thresholds;  // strictly ascending upper bounds of buckets 1..K-1

    std::size_t buckets() const { return thresholds.size() + 1; }
    // 1-based bucket; a value equal to a threshold falls in the lower bucket.
    int assign(double pv) const;
};

// Thresholds at nearest-rank percentiles i*100/K, i = 1..K-1.
BucketScheme bucketize(std::span<const double> train_pvs, std::size_t k);
int assign(const BucketScheme& scheme, double pv);

// mean_x |pv_sub(x) - pv_gt(x)| / mean_x pv_gt(x)
double delta_ratio(const PVTable& pv_sub, const PVTable& pv_gt);

struct SweepPoint {
    std::size_t size = 0;
    double mean = 0.0;
    double std = 0.0;  // sample std over resamples (0 for a single resample)
    std::vector<double> ratios;
};

// For each size, draws `resamples` member subsets without replacement from the
// universe and measures their delta ratio against the full universe.
std::vector<SweepPoint> size_sweep(const PredictionMatrix& universe, std::span<const std::size_t> sizes,
                                   std::size_t resamples, std::uint64_t seed);

// Pairwise Pearson correlation of aligned PV tables. NaN where a table has
// zero variance (written as "undefined").
std::vector<std::vector<double>> correlation_matrix(std::span<const PVTable> tables);

void save_pv_table(const std::filesystem::path& path, const PVTable& table);
PVTable load_pv_table(const std::filesystem::path& path);
std::string format_correlation_matrix(std::span<const std::string> labels,
                                      const std::vector<std::vector<double>>& matrix);

}  // namespace varest
