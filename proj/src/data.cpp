#include "varest/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/rng.hpp"

namespace varest {

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::regression: return "regression";
        case TaskKind::binary: return "binary";
        case TaskKind::multiclass: return "multiclass";
    }
    return "unknown";
}

TaskKind parse_task_kind(const std::string& text) {
    if (text == "regression") return TaskKind::regression;
    if (text == "binary") return TaskKind::binary;
    if (text == "multiclass") return TaskKind::multiclass;
    throw ConfigError("unknown task kind '" + text + "'");
}

void FeatureSchema::validate() const {
    if (categorical_names.size() != vocab_sizes.size())
        throw ConfigError("schema: categorical names and vocab sizes differ in length");
    for (std::size_t i = 0; i < vocab_sizes.size(); ++i)
        if (vocab_sizes[i] == 0)
            throw ConfigError("schema: vocab size of '" + categorical_names[i] + "' is zero");
    if (task == TaskKind::multiclass && num_classes < 2)
        throw ConfigError("schema: multiclass task needs at least 2 classes");
}

std::size_t FeatureSchema::categorical_index(const std::string& name) const {
    for (std::size_t i = 0; i < categorical_names.size(); ++i)
        if (categorical_names[i] == name) return i;
    throw ConfigError("schema has no categorical feature '" + name + "'");
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
    return categorical_names == other.categorical_names && vocab_sizes == other.vocab_sizes &&
           numeric_count == other.numeric_count && task == other.task &&
           num_classes == other.num_classes;
}

std::vector<std::int64_t> Dataset::row_ids() const {
    std::vector<std::int64_t> ids;
    ids.reserve(rows.size());
    for (const auto& r : rows) ids.push_back(r.row_id);
    return ids;
}

namespace {

void check_label(const FeatureSchema& schema, double label, std::int64_t row_id) {
    bool ok = std::isfinite(label);
    if (ok && schema.task == TaskKind::binary) ok = (label == 0.0 || label == 1.0);
    if (ok && schema.task == TaskKind::multiclass)
        ok = label >= 0 && label < static_cast<double>(schema.num_classes) &&
             label == std::floor(label);
    if (!ok)
        throw InputError("row " + std::to_string(row_id) + ": label " + format_double(label) +
                         " out of range for " + to_string(schema.task) + " task");
}

}  // namespace

void Dataset::validate() const {
    schema.validate();
    std::unordered_set<std::int64_t> seen;
    seen.reserve(rows.size());
    for (const auto& r : rows) {
        if (!seen.insert(r.row_id).second)
            throw InputError("duplicate row_id " + std::to_string(r.row_id));
        if (r.categorical.size() != schema.categorical_names.size() ||
            r.numeric.size() != schema.numeric_count)
            throw InputError("row " + std::to_string(r.row_id) + " does not match schema");
        for (std::size_t f = 0; f < r.categorical.size(); ++f)
            if (r.categorical[f] < 0 ||
                static_cast<std::size_t>(r.categorical[f]) >= schema.vocab_sizes[f])
                throw InputError("row " + std::to_string(r.row_id) + ": id of '" +
                                 schema.categorical_names[f] + "' outside vocabulary");
        check_label(schema, r.label, r.row_id);
    }
}

// ---------------------------------------------------------------------------
// MovieLens ingestion

const std::vector<std::string>& movielens_genres() {
    static const std::vector<std::string> genres = {
        "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
        "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
        "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western"};
    return genres;
}

namespace {

constexpr int kMovielensAges[] = {1, 18, 25, 35, 45, 50, 56};

struct LineReader {
    std::ifstream in;
    std::filesystem::path path;
    std::size_t line_no = 0;

    explicit LineReader(const std::filesystem::path& p) : in(p), path(p) {
        if (!in) throw InputError("cannot open " + p.string());
    }
    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path.filename().string() + ":" + std::to_string(line_no) + ": " + what);
    }
    std::int64_t integer(std::string_view field, const char* name) const {
        try {
            return parse_int(field);
        } catch (const ParseError&) {
            fail(std::string("malformed ") + name + " '" + std::string(field) + "'");
        }
    }
};

}  // namespace

Dataset load_movielens(const std::filesystem::path& ratings_path,
                       const std::filesystem::path& users_path,
                       const std::filesystem::path& movies_path) {
    Dataset data;
    auto& schema = data.schema;
    schema.categorical_names = {"user_id", "gender", "age", "occupation", "movie_id"};
    schema.vocab_tokens.assign(5, {});
    schema.numeric_count = movielens_genres().size();
    schema.task = TaskKind::regression;

    struct UserInfo {
        std::int32_t dense, gender, age, occupation;
    };
    std::unordered_map<std::int64_t, UserInfo> users;
    {
        LineReader reader(users_path);
        std::string line;
        while (reader.next(line)) {
            auto f = split_view(line, "::");
            if (f.size() != 5) reader.fail("expected 5 '::'-separated fields");
            const auto uid = reader.integer(f[0], "user id");
            std::int32_t gender = 0;
            if (f[1] == "F") gender = 0;
            else if (f[1] == "M") gender = 1;
            else reader.fail("unknown gender '" + std::string(f[1]) + "'");
            const auto age_value = reader.integer(f[2], "age");
            const auto* age_it = std::find(std::begin(kMovielensAges), std::end(kMovielensAges),
                                           static_cast<int>(age_value));
            if (age_it == std::end(kMovielensAges)) reader.fail("unknown age bucket");
            const auto occupation = reader.integer(f[3], "occupation");
            if (occupation < 0 || occupation > 20) reader.fail("occupation outside 0..20");
            const auto dense = static_cast<std::int32_t>(users.size());
            if (!users.emplace(uid, UserInfo{dense, gender,
                                             static_cast<std::int32_t>(age_it - kMovielensAges),
                                             static_cast<std::int32_t>(occupation)})
                     .second)
                reader.fail("duplicate user id");
            schema.vocab_tokens[0].emplace_back(f[0]);
        }
    }

    const auto& genres = movielens_genres();
    struct MovieInfo {
        std::int32_t dense;
        std::vector<double> genres;
    };
    std::unordered_map<std::int64_t, MovieInfo> movies;
    {
        LineReader reader(movies_path);
        std::string line;
        while (reader.next(line)) {
            auto f = split_view(line, "::");
            if (f.size() < 3) reader.fail("expected 3 '::'-separated fields");
            const auto mid = reader.integer(f.front(), "movie id");
            std::vector<double> hot(genres.size(), 0.0);
            for (auto token : split_view(f.back(), "|")) {
                const auto it = std::find(genres.begin(), genres.end(), token);
                if (it == genres.end()) reader.fail("unknown genre '" + std::string(token) + "'");
                hot[static_cast<std::size_t>(it - genres.begin())] = 1.0;
            }
            const auto dense = static_cast<std::int32_t>(movies.size());
            if (!movies.emplace(mid, MovieInfo{dense, std::move(hot)}).second)
                reader.fail("duplicate movie id");
            schema.vocab_tokens[4].emplace_back(f.front());
        }
    }

    schema.vocab_tokens[1] = {"F", "M"};
    for (int a : kMovielensAges) schema.vocab_tokens[2].push_back(std::to_string(a));
    for (int o = 0; o <= 20; ++o) schema.vocab_tokens[3].push_back(std::to_string(o));
    schema.vocab_sizes = {users.size(), 2, 7, 21, movies.size()};
    if (users.empty() || movies.empty()) throw InputError("empty users or movies file");

    LineReader reader(ratings_path);
    std::string line;
    std::int64_t row = 0;
    while (reader.next(line)) {
        auto f = split_view(line, "::");
        if (f.size() != 4) reader.fail("expected 4 '::'-separated fields");
        const auto uid = reader.integer(f[0], "user id");
        const auto mid = reader.integer(f[1], "movie id");
        const auto rating = reader.integer(f[2], "rating");
        reader.integer(f[3], "timestamp");
        if (rating < 1 || rating > 5) reader.fail("rating outside 1..5");
        const auto u = users.find(uid);
        if (u == users.end()) reader.fail("unknown user id " + std::to_string(uid));
        const auto m = movies.find(mid);
        if (m == movies.end()) reader.fail("unknown movie id " + std::to_string(mid));
        Example ex;
        ex.categorical = {u->second.dense, u->second.gender, u->second.age,
                          u->second.occupation, m->second.dense};
        ex.numeric = m->second.genres;
        ex.label = static_cast<double>(rating);
        ex.row_id = row++;
        data.rows.push_back(std::move(ex));
    }
    data.provenance = {"movielens", "all", 0};
    return data;
}

namespace {

// Index sampler over a fixed weight vector.
class WeightedSampler {
public:
    explicit WeightedSampler(const std::vector<double>& weights) : cdf_(weights.size()) {
        std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
    }
    std::size_t draw(CounterRng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

}  // namespace

void write_movielens_style(const std::filesystem::path& dir, const MovielensStyleConfig& cfg,
                           std::uint64_t seed) {
    if (cfg.users == 0 || cfg.movies == 0 || cfg.ratings == 0)
        throw ConfigError("synthetic movielens: users, movies and ratings must be positive");
    if (cfg.ratings > cfg.users * cfg.movies / 2)
        throw ConfigError("synthetic movielens: too many ratings for the user/movie grid");
    const auto& genres = movielens_genres();
    const std::size_t G = genres.size();
    const std::size_t d = cfg.latent_dim;
    const double factor_scale = std::pow(0.3 / static_cast<double>(std::max<std::size_t>(d, 1)), 0.25);

    CounterRng truth(seed, "movielens-truth");
    // Genre prevalence loosely follows ml-1m (Drama and Comedy dominate).
    const std::vector<double> genre_weight = {5, 3, 1, 2, 8, 2, 1, 10, 1, 0.5, 3, 1,
                                              1, 3, 2, 3, 1, 0.5};
    std::vector<double> genre_bias(G);
    for (auto& g : genre_bias) g = 0.25 * truth.normal();

    struct User {
        int gender, age, occupation;
        double bias, activity;
        std::vector<double> factors, taste;
    };
    std::vector<User> users(cfg.users);
    const std::vector<double> age_weight = {0.04, 0.18, 0.35, 0.2, 0.09, 0.08, 0.06};
    WeightedSampler age_sampler(age_weight);
    // Age/gender shift the genre taste so the side features carry signal.
    std::vector<std::vector<double>> age_taste(7, std::vector<double>(G));
    std::vector<std::vector<double>> gender_taste(2, std::vector<double>(G));
    for (auto& row : age_taste)
        for (auto& v : row) v = 0.2 * truth.normal();
    for (auto& row : gender_taste)
        for (auto& v : row) v = 0.2 * truth.normal();
    for (std::size_t u = 0; u < cfg.users; ++u) {
        CounterRng rng(seed, "movielens-user", u);
        User& user = users[u];
        user.gender = rng.uniform() < 0.72 ? 1 : 0;
        user.age = static_cast<int>(age_sampler.draw(rng));
        user.occupation = static_cast<int>(rng.below(21));
        user.bias = 0.35 * rng.normal() + 0.05 * (user.age - 3);
        const double log_activity = cfg.activity_sigma * rng.normal();
        user.activity = std::exp(log_activity);
        user.bias += cfg.activity_bias * log_activity;
        user.factors.resize(d);
        for (auto& f : user.factors) f = factor_scale * rng.normal();
        user.taste.resize(G);
        for (std::size_t g = 0; g < G; ++g)
            user.taste[g] = age_taste[static_cast<std::size_t>(user.age)][g] +
                            gender_taste[static_cast<std::size_t>(user.gender)][g] +
                            0.25 * rng.normal();
    }

    struct Movie {
        std::vector<std::size_t> genres;
        double bias, popularity;
        std::vector<double> factors;
    };
    std::vector<Movie> movies(cfg.movies);
    WeightedSampler genre_sampler(genre_weight);
    for (std::size_t m = 0; m < cfg.movies; ++m) {
        CounterRng rng(seed, "movielens-movie", m);
        Movie& movie = movies[m];
        const std::size_t count = 1 + rng.below(3);
        while (movie.genres.size() < count) {
            const auto g = genre_sampler.draw(rng);
            if (std::find(movie.genres.begin(), movie.genres.end(), g) == movie.genres.end())
                movie.genres.push_back(g);
        }
        std::sort(movie.genres.begin(), movie.genres.end());
        double gb = 0.0;
        for (auto g : movie.genres) gb += genre_bias[g];
        movie.bias = 0.4 * rng.normal() + gb / static_cast<double>(movie.genres.size());
        const double log_popularity = cfg.popularity_sigma * rng.normal();
        movie.popularity = std::exp(log_popularity);
        movie.bias += cfg.popularity_bias * log_popularity;
        movie.factors.resize(d);
        for (auto& f : movie.factors) f = factor_scale * rng.normal();
    }

    std::vector<double> user_w(cfg.users), movie_w(cfg.movies);
    for (std::size_t u = 0; u < cfg.users; ++u) user_w[u] = users[u].activity;
    for (std::size_t m = 0; m < cfg.movies; ++m) movie_w[m] = movies[m].popularity;
    WeightedSampler user_sampler(user_w), movie_sampler(movie_w);

    struct Rating {
        std::size_t user, movie;
        int value;
        std::int64_t timestamp;
    };
    std::vector<Rating> ratings;
    ratings.reserve(cfg.ratings);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(cfg.ratings * 2);
    CounterRng draw(seed, "movielens-ratings");
    while (ratings.size() < cfg.ratings) {
        const auto u = user_sampler.draw(draw);
        const auto m = movie_sampler.draw(draw);
        if (!seen.insert(static_cast<std::uint64_t>(u) * cfg.movies + m).second) continue;
        const auto& user = users[u];
        const auto& movie = movies[m];
        double score = 3.58 + user.bias + movie.bias;
        double taste = 0.0;
        for (auto g : movie.genres) taste += user.taste[g];
        score += taste / static_cast<double>(movie.genres.size());
        for (std::size_t k = 0; k < d; ++k) score += user.factors[k] * movie.factors[k];
        score += cfg.noise_std * draw.normal();
        const int value = static_cast<int>(std::clamp(std::lround(score), 1L, 5L));
        ratings.push_back({u, m, value, 978300000 + static_cast<std::int64_t>(ratings.size())});
    }
    std::stable_sort(ratings.begin(), ratings.end(),
                     [](const Rating& a, const Rating& b) { return a.user < b.user; });

    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "users.dat");
        for (std::size_t u = 0; u < cfg.users; ++u)
            out << (u + 1) << "::" << (users[u].gender ? 'M' : 'F') << "::"
                << kMovielensAges[users[u].age] << "::" << users[u].occupation << "::00000\n";
    }
    {
        std::ofstream out(dir / "movies.dat");
        for (std::size_t m = 0; m < cfg.movies; ++m) {
            out << (m + 1) << "::Movie " << (m + 1) << " (" << (1930 + (m * 7) % 70) << ")::";
            for (std::size_t i = 0; i < movies[m].genres.size(); ++i)
                out << (i ? "|" : "") << genres[movies[m].genres[i]];
            out << "\n";
        }
    }
    {
        std::ofstream out(dir / "ratings.dat");
        for (const auto& r : ratings)
            out << (r.user + 1) << "::" << (r.movie + 1) << "::" << r.value << "::" << r.timestamp
                << "\n";
    }
}

// ---------------------------------------------------------------------------
// Synthetic click-through stand-in

std::vector<std::size_t> default_cat_cardinalities() {
    return {1000, 800, 600, 400, 300, 200, 150, 100, 80, 60, 50, 40, 30,
            25,   20,  15,  12,  10,  8,   6,   5,   4,  3,  3,  2,  2};
}

Dataset gen_synthetic_binary(const SyntheticBinaryConfig& config, std::uint64_t seed) {
    if (config.rows == 0) throw ConfigError("synthetic binary: rows must be positive");
    const auto cards =
        config.cat_cardinalities.empty() ? default_cat_cardinalities() : config.cat_cardinalities;
    const std::size_t n_cat = cards.size();
    const std::size_t n_num = config.numeric;

    Dataset data;
    auto& schema = data.schema;
    for (std::size_t f = 0; f < n_cat; ++f) schema.categorical_names.push_back("C" + std::to_string(f + 1));
    schema.vocab_sizes = cards;
    schema.vocab_tokens.assign(n_cat, {});
    schema.numeric_count = n_num;
    schema.task = TaskKind::binary;
    schema.validate();

    // Hidden sparse logistic model.
    CounterRng truth(seed, "binary-truth");
    std::vector<double> numeric_weight(n_num, 0.0);
    for (std::size_t j = 0; j < n_num; ++j)
        if (j % 3 == 0) numeric_weight[j] = 0.6 * truth.normal();
    std::vector<std::vector<double>> cat_effect(n_cat);
    std::vector<std::vector<double>> zipf_cdf(n_cat);
    for (std::size_t f = 0; f < n_cat; ++f) {
        const bool live = f % 2 == 0;
        cat_effect[f].assign(cards[f], 0.0);
        if (live)
            for (auto& e : cat_effect[f]) e = 0.7 * truth.normal();
        auto& cdf = zipf_cdf[f];
        cdf.resize(cards[f]);
        double acc = 0.0;
        for (std::size_t k = 0; k < cards[f]; ++k) {
            acc += 1.0 / std::pow(static_cast<double>(k + 1), 1.1);
            cdf[k] = acc;
        }
    }
    const double interaction = n_num >= 2 ? 0.5 : 0.0;
    const double bias = -0.8;

    data.rows.resize(config.rows);
    for (std::size_t r = 0; r < config.rows; ++r) {
        CounterRng rng(seed, "binary-row", r);
        Example& ex = data.rows[r];
        ex.row_id = static_cast<std::int64_t>(r);
        ex.numeric.resize(n_num);
        for (auto& x : ex.numeric) x = rng.normal();
        ex.categorical.resize(n_cat);
        double logit = bias;
        for (std::size_t j = 0; j < n_num; ++j) logit += numeric_weight[j] * ex.numeric[j];
        if (interaction != 0.0) logit += interaction * ex.numeric[0] * ex.numeric[1];
        for (std::size_t f = 0; f < n_cat; ++f) {
            const auto& cdf = zipf_cdf[f];
            const double u = rng.uniform() * cdf.back();
            const auto id = std::min<std::size_t>(
                static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()),
                cards[f] - 1);
            ex.categorical[f] = static_cast<std::int32_t>(id);
            logit += cat_effect[f][id];
        }
        logit += 0.5 * rng.normal();
        const double p = 1.0 / (1.0 + std::exp(-logit));
        ex.label = rng.uniform() < p ? 1.0 : 0.0;
    }
    data.provenance = {"synthetic-binary", "all", seed};
    return data;
}

Dataset as_task(Dataset data, TaskKind task) {
    if (data.schema.task == TaskKind::binary || task == TaskKind::binary) {
        if (data.schema.task != task)
            throw ConfigError("cannot convert " + to_string(data.schema.task) + " data to " +
                              to_string(task));
        return data;
    }
    if (data.schema.task == task) return data;
    if (task == TaskKind::multiclass) {
        for (auto& r : data.rows) r.label -= 1.0;
        data.schema.num_classes = 5;
    } else {
        for (auto& r : data.rows) r.label += 1.0;
        data.schema.num_classes = 1;
    }
    data.schema.task = task;
    return data;
}

// ---------------------------------------------------------------------------
// Splits and sampling

namespace {

std::vector<std::size_t> seeded_permutation(std::size_t n, CounterRng rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm;
}

}  // namespace

Dataset subset(const Dataset& data, std::span<const std::size_t> indices, std::string split_name) {
    Dataset out;
    out.schema = data.schema;
    out.provenance = data.provenance;
    out.provenance.split_name = std::move(split_name);
    out.rows.reserve(indices.size());
    for (auto i : indices) out.rows.push_back(data.rows.at(i));
    return out;
}

std::vector<Dataset> split(const Dataset& data, std::span<const double> fractions,
                           std::uint64_t seed) {
    if (fractions.empty()) throw ConfigError("split: no fractions given");
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw ConfigError("split: fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("split: fractions sum to " + format_double(total) + ", expected 1");
    const auto perm = seeded_permutation(data.size(), CounterRng(seed, "split"));
    std::vector<Dataset> parts;
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
        cumulative += fractions[p];
        const std::size_t end =
            p + 1 == fractions.size()
                ? data.size()
                : std::min<std::size_t>(
                      data.size(),
                      static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(data.size()))));
        std::span<const std::size_t> slice(perm.data() + begin, end - begin);
        auto part = subset(data, slice, data.provenance.split_name + "/" + std::to_string(p));
        part.provenance.parent_seed = seed;
        parts.push_back(std::move(part));
        begin = end;
    }
    return parts;
}

std::vector<std::size_t> shuffle_epoch(std::size_t size, std::optional<std::uint64_t> base_seed,
                                       std::uint64_t epoch_index) {
    if (!base_seed) {
        std::vector<std::size_t> identity(size);
        std::iota(identity.begin(), identity.end(), std::size_t{0});
        return identity;
    }
    return seeded_permutation(size, CounterRng(*base_seed, "shuffle", epoch_index));
}

std::vector<std::size_t> jackknife_folds(const Dataset& data, std::size_t k) {
    if (k == 0 || k > data.size())
        throw ConfigError("jackknife: fold count " + std::to_string(k) + " invalid for " +
                          std::to_string(data.size()) + " rows");
    const std::uint64_t key = derive_key(data.provenance.parent_seed, "jackknife");
    std::vector<std::pair<std::uint64_t, std::size_t>> order(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        order[i] = {mix64(key ^ static_cast<std::uint64_t>(data.rows[i].row_id)), i};
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> fold(data.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) fold[order[rank].second] = rank % k;
    return fold;
}

Dataset jackknife_subsample(const Dataset& data, std::size_t k, std::size_t leave_out_index) {
    if (leave_out_index >= k)
        throw ConfigError("jackknife: leave-out index " + std::to_string(leave_out_index) +
                          " outside [0, " + std::to_string(k) + ")");
    const auto fold = jackknife_folds(data, k);
    std::vector<std::size_t> keep;
    keep.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        if (fold[i] != leave_out_index) keep.push_back(i);
    return subset(data, keep,
                  data.provenance.split_name + "/jk" + std::to_string(leave_out_index));
}

// ---------------------------------------------------------------------------
// Dump format:
//   #varest-dataset<TAB>1
//   #task<TAB><kind><TAB><num_classes>
//   #categorical<TAB>name:vocab<TAB>...
//   #numeric<TAB><count>
//   #provenance<TAB><source><TAB><split><TAB><seed>
//   row_id<TAB>cat...<TAB>num...<TAB>label
//   one line per row

void write_dataset(std::ostream& out, const Dataset& data) {
    const auto& s = data.schema;
    out << "#varest-dataset\t1\n";
    out << "#task\t" << to_string(s.task) << '\t' << s.num_classes << '\n';
    out << "#categorical";
    for (std::size_t f = 0; f < s.categorical_names.size(); ++f)
        out << '\t' << s.categorical_names[f] << ':' << s.vocab_sizes[f];
    out << '\n';
    out << "#numeric\t" << s.numeric_count << '\n';
    out << "#provenance\t" << data.provenance.source << '\t' << data.provenance.split_name << '\t'
        << data.provenance.parent_seed << '\n';
    out << "row_id";
    for (const auto& name : s.categorical_names) out << '\t' << name;
    for (std::size_t j = 0; j < s.numeric_count; ++j) out << "\tx" << j;
    out << "\tlabel\n";
    std::string line;
    for (const auto& r : data.rows) {
        line = std::to_string(r.row_id);
        for (auto c : r.categorical) {
            line += '\t';
            line += std::to_string(c);
        }
        for (double x : r.numeric) {
            line += '\t';
            line += format_double(x);
        }
        line += '\t';
        line += format_double(r.label);
        line += '\n';
        out << line;
    }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ostringstream ss;
    write_dataset(ss, data);
    write_file(path, ss.str());
}

Dataset read_dataset(std::istream& in) {
    Dataset data;
    auto& s = data.schema;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw ParseError("dataset dump line " + std::to_string(line_no) + ": " + what);
    };
    auto next = [&]() {
        if (!std::getline(in, line)) fail("unexpected end of file");
        ++line_no;
        return split_view(line, "\t");
    };
    auto f = next();
    if (f.size() != 2 || f[0] != "#varest-dataset" || f[1] != "1") fail("bad magic header");
    f = next();
    if (f.size() != 3 || f[0] != "#task") fail("bad task line");
    s.task = parse_task_kind(std::string(f[1]));
    s.num_classes = parse_u64(f[2]);
    f = next();
    if (f.empty() || f[0] != "#categorical") fail("bad categorical line");
    for (std::size_t i = 1; i < f.size(); ++i) {
        const auto colon = f[i].rfind(':');
        if (colon == std::string_view::npos) fail("bad categorical entry");
        s.categorical_names.emplace_back(f[i].substr(0, colon));
        s.vocab_sizes.push_back(parse_u64(f[i].substr(colon + 1)));
    }
    s.vocab_tokens.assign(s.categorical_names.size(), {});
    f = next();
    if (f.size() != 2 || f[0] != "#numeric") fail("bad numeric line");
    s.numeric_count = parse_u64(f[1]);
    f = next();
    if (f.size() != 4 || f[0] != "#provenance") fail("bad provenance line");
    data.provenance = {std::string(f[1]), std::string(f[2]), parse_u64(f[3])};
    next();  // column header
    const std::size_t n_cat = s.categorical_names.size();
    const std::size_t width = 2 + n_cat + s.numeric_count;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        f = split_view(line, "\t");
        if (f.size() != width) fail("expected " + std::to_string(width) + " columns");
        Example ex;
        ex.row_id = parse_int(f[0]);
        ex.categorical.resize(n_cat);
        for (std::size_t c = 0; c < n_cat; ++c)
            ex.categorical[c] = static_cast<std::int32_t>(parse_int(f[1 + c]));
        ex.numeric.resize(s.numeric_count);
        for (std::size_t j = 0; j < s.numeric_count; ++j) ex.numeric[j] = parse_double(f[1 + n_cat + j]);
        ex.label = parse_double(f.back());
        data.rows.push_back(std::move(ex));
    }
    data.validate();
    return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_dataset(in);
}

}  // namespace varest
