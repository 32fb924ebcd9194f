#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "varest/config.hpp"
#include "varest/error.hpp"
#include "varest/io.hpp"
#include "varest/pipeline.hpp"

using namespace varest;

TEST_CASE("doubles round-trip through text") {
    CounterRng rng(1, "io");
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
        CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(std::isinf(parse_double("-inf")));
    CHECK_THROWS_AS(parse_double("1.5x"), ParseError);
    CHECK(parse_double_list("0.6, 0.4") == std::vector<double>{0.6, 0.4});
    CHECK_THROWS_AS(parse_key_values("a = 1\nbroken\n"), ParseError);
    const auto kv = parse_key_values("# comment\n\na = 1\nb=x y\na = 2\n");
    CHECK(kv.at("a") == "2");
    CHECK(kv.at("b") == "x y");
}

TEST_CASE("config presets, includes, and overrides") {
    const auto r = Config::preset("ml-r");
    CHECK(r.get("train.max_epochs") == "20");
    CHECK(Config::preset("ml-c").get("model.temperature") == "0.2");
    CHECK(Config::preset("ml-c").get("train.max_epochs") == "20");
    CHECK(Config::preset("synth-binary").get("train.max_epochs") == "1");
    CHECK_THROWS_AS(Config::preset("nope"), ConfigError);

    const auto dir = fixtures::temp_dir("cfg");
    write_file(dir / "base.cfg", "include = ml-r\ntrain.patience = 4\n");
    write_file(dir / "exp.cfg", "include = base.cfg\ntrain.max_epochs = 7\n");
    auto c = Config::from_file(dir / "exp.cfg");
    CHECK(c.get("train.max_epochs") == "7");
    CHECK(c.get("train.patience") == "4");
    CHECK(c.get("train.batch_size") == "256");
    c.apply_overrides({"train.max_epochs=3"});
    CHECK(c.get_u64("train.max_epochs") == 3);
    CHECK(train_config_for(c).max_epochs == 3);
    CHECK_THROWS_AS(c.apply_overrides({"nokey"}), ConfigError);
    c.set("train.learning_rate", "fast");
    CHECK_THROWS_AS(c.get_double("train.learning_rate"), ConfigError);

    write_file(dir / "loop_a.cfg", "include = loop_b.cfg\n");
    write_file(dir / "loop_b.cfg", "include = loop_a.cfg\n");
    CHECK_THROWS_AS(Config::from_file(dir / "loop_a.cfg"), ConfigError);
    write_file(dir / "missing.cfg", "include = nowhere.cfg\n");
    CHECK_THROWS_AS(Config::from_file(dir / "missing.cfg"), ConfigError);

    const auto round = Config::from_text(c.to_text());
    CHECK(round.values() == c.values());
    CHECK(c.section("train.").count("patience") == 1);
}

TEST_CASE("prepared splits") {
    const auto all = fixtures::small_dataset(TaskKind::regression, 200, 1);
    const std::vector<double> s{0.6, 0.4}, e{0.5, 0.5};
    const auto p = prepare_splits(all, "ml-r", s, e, 3);
    CHECK(p.train.size() == 120);
    CHECK(p.eval.size() == 80);
    CHECK(p.eval1.size() == 40);
    CHECK(p.eval2.size() == 40);
    const auto dir = fixtures::temp_dir("prep");
    save_prepared(dir, p);
    const auto back = load_prepared(dir);
    CHECK(back.task == "ml-r");
    CHECK(back.eval2.rows == p.eval2.rows);
    const auto lim = limit_rows(all, 50, 2);
    CHECK(lim.size() == 50);
    CHECK(limit_rows(all, 50, 2).rows == lim.rows);
    CHECK(task_kind("ml-c") == TaskKind::multiclass);
    CHECK_THROWS_AS(task_kind("criteo"), ConfigError);
}
