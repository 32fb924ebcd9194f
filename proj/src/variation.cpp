#include "varest/variation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/rng.hpp"

namespace varest {

double value_pv(std::span<const double> predictions) {
    if (predictions.size() < 2) throw UsageError("value_pv: need at least 2 predictions");
    // Welford: identical inputs give exactly zero.
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double y : predictions) {
        ++k;
        const double d = y - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (y - mean);
    }
    return std::sqrt(std::max(0.0, m2) / static_cast<double>(predictions.size() - 1));
}

double dist_pv(std::span<const double> distributions, std::size_t classes) {
    if (classes == 0 || distributions.size() % classes != 0)
        throw InputError("dist_pv: distribution block is not a multiple of the class count");
    const std::size_t n = distributions.size() / classes;
    if (n < 2) throw UsageError("dist_pv: need at least 2 distributions");
    for (std::size_t m = 0; m < n; ++m) {
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = distributions[m * classes + c];
            if (!(p >= 0.0)) throw InputError("dist_pv: negative or non-finite probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InputError("dist_pv: distribution does not sum to 1");
    }
    bool identical = true;
    for (std::size_t m = 1; m < n && identical; ++m)
        identical = std::equal(distributions.begin(), distributions.begin() + static_cast<std::ptrdiff_t>(classes),
                               distributions.begin() + static_cast<std::ptrdiff_t>(m * classes));
    if (identical) return 0.0;
    std::vector<double> mean(classes, 0.0);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t c = 0; c < classes; ++c) mean[c] += distributions[m * classes + c];
    for (auto& p : mean) p /= static_cast<double>(n);
    double total = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        double kl = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = distributions[m * classes + c];
            if (p == 0.0) continue;
            if (!(mean[c] > 0.0)) throw NumericError("dist_pv: member mass outside the ensemble mean support");
            kl += p * std::log(p / mean[c]);
        }
        total += kl;
    }
    return std::max(0.0, total);
}

std::vector<double> PVTable::pv_values() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.pv);
    return out;
}

std::vector<std::int64_t> PVTable::row_ids() const {
    std::vector<std::int64_t> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.row_id);
    return out;
}

double PVTable::mean_pv() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.pv;
    return s / static_cast<double>(rows.size());
}

double PVTable::std_pv() const {
    if (rows.size() < 2) return 0.0;
    return value_pv(pv_values());
}

double PVTable::mean_coefficient() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows)
        if (std::isfinite(r.coefficient)) {
            s += r.coefficient;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::nan("");
}

PVTable pv_table(const PredictionMatrix& matrix) {
    if (matrix.members == 0 || matrix.examples == 0) throw UsageError("pv_table: empty prediction matrix");
    PVTable table;
    table.task = matrix.task;
    table.rows.resize(matrix.examples);
    std::vector<double> column(matrix.members * matrix.width);
    const auto mean = matrix.mean();
    for (std::size_t x = 0; x < matrix.examples; ++x) {
        for (std::size_t m = 0; m < matrix.members; ++m) {
            const auto cell = matrix.at(m, x);
            std::copy(cell.begin(), cell.end(), column.begin() + static_cast<std::ptrdiff_t>(m * matrix.width));
        }
        PVRow& row = table.rows[x];
        row.row_id = matrix.row_ids[x];
        try {
            row.pv = matrix.task == TaskKind::multiclass ? dist_pv(column, matrix.width) : value_pv(column);
        } catch (const Error& e) {
            throw InputError("row " + std::to_string(row.row_id) + ": " + e.what());
        }
        row.mean_prediction.assign(mean.begin() + static_cast<std::ptrdiff_t>(x * matrix.width),
                                   mean.begin() + static_cast<std::ptrdiff_t>((x + 1) * matrix.width));
        row.coefficient = std::nan("");
        if (matrix.task != TaskKind::multiclass && row.mean_prediction[0] != 0.0)
            row.coefficient = row.pv / std::abs(row.mean_prediction[0]);
    }
    return table;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("pearson: length mismatch");
    if (a.size() < 2) throw UsageError("pearson: need at least 2 points");
    // Exact test: summation residue must not turn a constant vector into a
    // tiny spurious variance.
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(a) || constant(b)) throw NumericError("pearson: correlation undefined for zero variance");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw NumericError("pearson: correlation undefined for zero variance");
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> aligned_pv(const PVTable& a, const PVTable& b) {
    if (a.rows.size() != b.rows.size()) throw InputError("PV tables cover different row sets");
    bool same_order = true;
    for (std::size_t i = 0; i < a.rows.size() && same_order; ++i) same_order = a.rows[i].row_id == b.rows[i].row_id;
    if (same_order) return b.pv_values();
    std::unordered_map<std::int64_t, double> lookup;
    for (const auto& r : b.rows) lookup.emplace(r.row_id, r.pv);
    std::vector<double> out;
    out.reserve(a.rows.size());
    for (const auto& r : a.rows) {
        const auto it = lookup.find(r.row_id);
        if (it == lookup.end()) throw InputError("PV tables cover different row sets (row " + std::to_string(r.row_id) + ")");
        out.push_back(it->second);
    }
    return out;
}

int BucketScheme::assign(double pv) const {
    return 1 + static_cast<int>(std::lower_bound(thresholds.begin(), thresholds.end(), pv) - thresholds.begin());
}

int assign(const BucketScheme& scheme, double pv) { return scheme.assign(pv); }

BucketScheme bucketize(std::span<const double> train_pvs, std::size_t k) {
    if (train_pvs.empty()) throw UsageError("bucketize: no training values");
    if (k < 2) throw UsageError("bucketize: need at least 2 buckets");
    std::vector<double> sorted(train_pvs.begin(), train_pvs.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> uniq = sorted;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (k > uniq.size())
        throw InputError("bucketize: " + std::to_string(k) + " buckets requested but only " +
                         std::to_string(uniq.size()) + " distinct values (degenerate buckets)");
    const std::size_t n = sorted.size();
    BucketScheme scheme;
    for (std::size_t i = 1; i < k; ++i) {
        const std::size_t rank = (i * n + k - 1) / k;  // ceil(i * n / k), nearest rank
        const double t = sorted[std::max<std::size_t>(rank, 1) - 1];
        if (scheme.thresholds.empty() || t > scheme.thresholds.back()) scheme.thresholds.push_back(t);
    }
    return scheme;
}

double delta_ratio(const PVTable& pv_sub, const PVTable& pv_gt) {
    const auto sub = aligned_pv(pv_gt, pv_sub);
    if (sub.empty()) throw UsageError("delta_ratio: empty tables");
    double delta = 0.0, gt = 0.0;
    for (std::size_t i = 0; i < sub.size(); ++i) {
        delta += std::abs(sub[i] - pv_gt.rows[i].pv);
        gt += pv_gt.rows[i].pv;
    }
    if (!(gt > 0.0)) throw NumericError("delta_ratio: ground-truth mean PV is zero");
    return delta / gt;
}

std::vector<SweepPoint> size_sweep(const PredictionMatrix& universe, std::span<const std::size_t> sizes,
                                   std::size_t resamples, std::uint64_t seed) {
    if (resamples == 0) throw ConfigError("size_sweep: resamples must be at least 1");
    const PVTable gt = pv_table(universe);
    std::vector<SweepPoint> points;
    for (auto size : sizes) {
        if (size < 2 || size > universe.members)
            throw ConfigError("size_sweep: size " + std::to_string(size) + " outside [2, " +
                              std::to_string(universe.members) + "]");
        SweepPoint point;
        point.size = size;
        const std::size_t draws = size == universe.members ? 1 : resamples;
        for (std::size_t r = 0; r < draws; ++r) {
            CounterRng rng(seed, "size-sweep", size, r);
            std::vector<std::size_t> pool(universe.members);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            for (std::size_t i = 0; i < size; ++i)
                std::swap(pool[i], pool[i + rng.below(universe.members - i)]);
            pool.resize(size);
            std::sort(pool.begin(), pool.end());
            point.ratios.push_back(delta_ratio(pv_table(universe.select_members(pool)), gt));
        }
        point.mean = std::accumulate(point.ratios.begin(), point.ratios.end(), 0.0) /
                     static_cast<double>(point.ratios.size());
        point.std = point.ratios.size() > 1 ? value_pv(point.ratios) : 0.0;
        points.push_back(std::move(point));
    }
    return points;
}

std::vector<std::vector<double>> correlation_matrix(std::span<const PVTable> tables) {
    const std::size_t k = tables.size();
    std::vector<std::vector<double>> out(k, std::vector<double>(k, 1.0));
    std::vector<std::vector<double>> values;
    for (const auto& t : tables) values.push_back(aligned_pv(tables.front(), t));
    const double undefined = std::numeric_limits<double>::quiet_NaN();
    auto corr = [&](std::size_t i, std::size_t j) {
        try {
            return pearson(values[i], values[j]);
        } catch (const NumericError&) {
            return undefined;
        }
    };
    for (std::size_t i = 0; i < k; ++i) {
        if (std::isnan(corr(i, i))) out[i][i] = undefined;
        for (std::size_t j = i + 1; j < k; ++j) out[i][j] = out[j][i] = corr(i, j);
    }
    return out;
}

void save_pv_table(const std::filesystem::path& path, const PVTable& table) {
    std::ostringstream out;
    out << "#varest-pv\t1\t" << to_string(table.task) << '\n';
    out << "row_id\tpv\tmean_prediction\tpv_coefficient\n";
    for (const auto& r : table.rows)
        out << r.row_id << '\t' << format_double(r.pv) << '\t' << join_doubles(r.mean_prediction, ";") << '\t'
            << format_double(r.coefficient) << '\n';
    write_file(path, out.str());
}

PVTable load_pv_table(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    const auto head = split_view(line, "\t");
    if (head.size() != 3 || head[0] != "#varest-pv" || head[1] != "1")
        throw ParseError(path.string() + ": not a PV table");
    PVTable table;
    table.task = parse_task_kind(std::string(head[2]));
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_view(line, "\t");
        if (f.size() != 4) throw ParseError(path.string() + ": expected 4 columns");
        table.rows.push_back({parse_int(f[0]), parse_double(f[1]), parse_double_list(f[2], ";"), parse_double(f[3])});
    }
    return table;
}

std::string format_correlation_matrix(std::span<const std::string> labels,
                                      const std::vector<std::vector<double>>& matrix) {
    std::ostringstream out;
    out << "setting";
    for (const auto& l : labels) out << '\t' << l;
    out << '\n';
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << labels[i];
        for (double v : matrix[i]) out << '\t' << (std::isnan(v) ? std::string("undefined") : format_double(v));
        out << '\n';
    }
    return out.str();
}

}  // namespace varest
