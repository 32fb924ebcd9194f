#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "varest/ensemble.hpp"
#include "varest/error.hpp"
#include "varest/variation.hpp"

using namespace varest;

namespace {
TrainConfig quick_config() {
    TrainConfig c;
    c.max_epochs = 2;
    c.batch_size = 32;
    c.learning_rate = 0.01;
    return c;
}
}  // namespace

TEST_CASE("setting codes follow the table order") {
    CHECK(RandomnessSetting::from_index(3).code() == "R3");
    CHECK(RandomnessSetting::from_code("R5").rand_init);
    CHECK(RandomnessSetting::from_code("R5").jackknife);
    CHECK_FALSE(RandomnessSetting::from_code("R5").shuffle);
    CHECK(RandomnessSetting::from_code("R7").sources() == "R+S+J");
    CHECK(RandomnessSetting::from_code("R0").sources() == "None");
    CHECK_THROWS_AS(RandomnessSetting::from_code("R8"), ConfigError);
}

TEST_CASE("seed bundles") {
    const auto r0 = make_seed_bundles(RandomnessSetting::from_code("R0"), 3, 9);
    for (const auto& b : r0) {
        CHECK(b == r0.front());
        CHECK_FALSE(b.shuffle_seed);
        CHECK_FALSE(b.jackknife_index);
        CHECK(b.init_seed == global_init_seed(9));
    }
    const auto r7 = make_seed_bundles(RandomnessSetting::from_code("R7"), 100, 9);
    std::set<std::uint64_t> inits, shuffles;
    for (std::size_t i = 0; i < r7.size(); ++i) {
        inits.insert(r7[i].init_seed);
        shuffles.insert(*r7[i].shuffle_seed);
        CHECK(*r7[i].jackknife_index == i);
    }
    CHECK(inits.size() == 100);
    CHECK(shuffles.size() == 100);
    const auto r4 = make_seed_bundles(RandomnessSetting::from_code("R4"), 5, 9);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(r4[i].init_seed == r4[0].init_seed);
        CHECK_FALSE(r4[i].shuffle_seed);
        CHECK(*r4[i].jackknife_index == i);
    }
    // Members shared by settings with RandInit live share init seeds.
    const auto r1 = make_seed_bundles(RandomnessSetting::from_code("R1"), 5, 9);
    const auto r3 = make_seed_bundles(RandomnessSetting::from_code("R3"), 5, 9);
    const auto r5 = make_seed_bundles(RandomnessSetting::from_code("R5"), 5, 9);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(r1[i].init_seed == r3[i].init_seed);
        CHECK(r3[i].init_seed == r5[i].init_seed);
        CHECK(r1[i].init_seed == r7[i].init_seed);
    }
    // Prefix property across ensemble sizes.
    const auto r3_big = make_seed_bundles(RandomnessSetting::from_code("R3"), 50, 9);
    for (std::size_t i = 0; i < 5; ++i) CHECK(r3_big[i] == r3[i]);
    CHECK(global_init_seed(9) != r1[0].init_seed);
}

TEST_CASE("R0 ensembles are identical, R1 members differ") {
    const auto data = fixtures::small_dataset(TaskKind::regression, 300, 1);
    const auto spec = fixtures::small_spec(TaskKind::regression, {6, 3});
    const auto r0 = train_ensemble(spec, quick_config(), data, RandomnessSetting::from_code("R0"), 5, 3);
    for (const auto& m : r0.members) CHECK(m.values == r0.members[0].values);
    const auto pm = predict_matrix(r0, data);
    CHECK(pm.members == 5);
    CHECK(pm.examples == data.size());
    for (double pv : pv_table(pm).pv_values()) CHECK(pv == 0.0);

    const auto r1 = train_ensemble(spec, quick_config(), data, RandomnessSetting::from_code("R1"), 5, 3);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) CHECK(r1.members[i].values != r1.members[j].values);
}

TEST_CASE("worker count does not change results") {
    const auto data = fixtures::small_dataset(TaskKind::multiclass, 200, 2);
    const auto spec = fixtures::small_spec(TaskKind::multiclass, {5}, 3);
    const auto setting = RandomnessSetting::from_code("R7");
    const auto serial = train_ensemble(spec, quick_config(), data, setting, 4, 8, 1);
    const auto parallel = train_ensemble(spec, quick_config(), data, setting, 4, 8, 3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(serial.members[i].values == parallel.members[i].values);
    CHECK(predict_matrix(serial, data, 1) == predict_matrix(parallel, data, 4));
    // Member data under the jackknife drops one fold.
    CHECK(member_training_data(data, setting, 4, 2).size() == 150);
}

TEST_CASE("ensembles and prediction matrices persist exactly") {
    const auto dir = fixtures::temp_dir("ens");
    const auto data = fixtures::small_dataset(TaskKind::multiclass, 60, 2);
    const auto spec = fixtures::small_spec(TaskKind::multiclass, {5}, 3);
    const auto e = train_ensemble(spec, quick_config(), data, RandomnessSetting::from_code("R3"), 3, 1);
    save_ensemble(dir, e);
    const auto back = load_ensemble(dir);
    CHECK(back.spec == e.spec);
    CHECK(back.config == e.config);
    CHECK(back.seeds == e.seeds);
    CHECK(back.setting == e.setting);
    for (std::size_t i = 0; i < 3; ++i) CHECK(back.members[i].values == e.members[i].values);
    const auto pm = predict_matrix(e, data);
    save_prediction_matrix(dir / "p.tsv", pm);
    CHECK(load_prediction_matrix(dir / "p.tsv") == pm);
    const auto manifest = read_file(dir / "manifest.txt");
    CHECK(parse_manifest(manifest).n == 3);
}
