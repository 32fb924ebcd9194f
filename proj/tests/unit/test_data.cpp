#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "varest/data.hpp"
#include "varest/error.hpp"

using namespace varest;

namespace {
std::multiset<std::int64_t> ids(const Dataset& d) {
    const auto v = d.row_ids();
    return {v.begin(), v.end()};
}
}  // namespace

TEST_CASE("load_movielens keeps file order and encodes genres") {
    const auto dir = fixtures::temp_dir("ml");
    fixtures::write_movielens_fixture(dir);
    const auto d = load_movielens(dir / "ratings.dat", dir / "users.dat", dir / "movies.dat");
    REQUIRE(d.size() == 3);
    CHECK(d.rows[0].label == 5.0);
    CHECK(d.rows[1].label == 3.0);
    CHECK(d.rows[2].label == 4.0);
    CHECK(d.schema.numeric_count == 18);
    CHECK(d.schema.vocab_sizes[1] == 2);
    CHECK(d.schema.vocab_sizes[2] == 7);
    CHECK(d.schema.vocab_sizes[3] == 21);
    // Row 0 rates movie 3, "Comedy|Drama".
    CHECK(std::accumulate(d.rows[0].numeric.begin(), d.rows[0].numeric.end(), 0.0) == 2.0);
    d.validate();

    write_file(dir / "ratings.dat", "1::3::5::978300760\n2::1\n");
    try {
        load_movielens(dir / "ratings.dat", dir / "users.dat", dir / "movies.dat");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    fixtures::write_movielens_fixture(dir);
    write_file(dir / "movies.dat", "1::X (1995)::Comedy|Telenovela\n2::Y::Drama\n3::Z::Drama\n");
    CHECK_THROWS_AS(load_movielens(dir / "ratings.dat", dir / "users.dat", dir / "movies.dat"), ParseError);
}

TEST_CASE("generated ml-1m style files load back") {
    const auto dir = fixtures::temp_dir("gen");
    MovielensStyleConfig cfg{50, 40, 500};
    write_movielens_style(dir, cfg, 3);
    const auto d = load_movielens(dir / "ratings.dat", dir / "users.dat", dir / "movies.dat");
    CHECK(d.size() == 500);
    d.validate();
    const auto again = fixtures::temp_dir("gen2");
    write_movielens_style(again, cfg, 3);
    CHECK(read_file(dir / "ratings.dat") == read_file(again / "ratings.dat"));
}

TEST_CASE("synthetic binary data") {
    const auto a = gen_synthetic_binary({1000}, 1), b = gen_synthetic_binary({1000}, 1);
    CHECK(a.rows == b.rows);
    double pos = 0;
    for (const auto& r : a.rows) {
        CHECK(r.numeric.size() == 13);
        CHECK(r.categorical.size() == 26);
        pos += r.label;
    }
    const double rate = pos / 1000.0;
    CHECK(rate > 0.2);
    CHECK(rate < 0.8);
    a.validate();
}

TEST_CASE("split partitions rows") {
    const auto d = fixtures::small_dataset(TaskKind::regression, 10, 1);
    const std::vector<double> f{0.6, 0.4};
    const auto parts = split(d, f, 5);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 6);
    CHECK(parts[1].size() == 4);
    auto all = ids(parts[0]);
    for (auto id : parts[1].row_ids()) all.insert(id);
    CHECK(all == ids(d));
    const auto again = split(d, f, 5);
    CHECK(again[0].rows == parts[0].rows);
    // Different seeds move rows between parts.
    const auto big = fixtures::small_dataset(TaskKind::regression, 200, 1);
    CHECK(split(big, f, 5)[0].row_ids() != split(big, f, 6)[0].row_ids());
    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_AS(split(d, bad, 5), ConfigError);
}

TEST_CASE("shuffle_epoch") {
    const auto id = shuffle_epoch(5, std::nullopt, 3);
    CHECK(id == std::vector<std::size_t>{0, 1, 2, 3, 4});
    const auto p0 = shuffle_epoch(5, 3, 0);
    CHECK(p0 == shuffle_epoch(5, 3, 0));
    auto sorted = p0;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == id);
    CHECK(shuffle_epoch(50, 3, 0) != shuffle_epoch(50, 3, 1));
}

TEST_CASE("jackknife folds are an exact partition") {
    const auto d = fixtures::small_dataset(TaskKind::regression, 8, 1);
    std::multiset<std::int64_t> left_out;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto sub = jackknife_subsample(d, 4, i);
        CHECK(sub.size() == 6);
        // Relative order preserved.
        const auto all = d.row_ids();
        auto it = all.begin();
        for (auto id : sub.row_ids()) {
            it = std::find(it, all.end(), id);
            CHECK(it != all.end());
        }
        auto kept = ids(sub);
        for (auto id : d.row_ids())
            if (!kept.count(id)) left_out.insert(id);
    }
    CHECK(left_out == ids(d));
    CHECK_THROWS_AS(jackknife_subsample(d, 4, 4), ConfigError);
    const auto big = fixtures::small_dataset(TaskKind::regression, 1000, 2);
    CHECK(jackknife_subsample(big, 100, 17).size() == 990);
}

TEST_CASE("dataset dump round-trips") {
    const auto d = fixtures::small_dataset(TaskKind::multiclass, 25, 3);
    std::stringstream s;
    write_dataset(s, d);
    const auto back = read_dataset(s);
    CHECK(back.rows == d.rows);
    CHECK(back.schema == d.schema);
    const auto ratings = fixtures::small_dataset(TaskKind::regression, 25, 3);
    const auto mc = as_task(ratings, TaskKind::multiclass);
    for (std::size_t i = 0; i < mc.size(); ++i) CHECK(mc.rows[i].label == ratings.rows[i].label - 1.0);
}
