#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "varest/cli.hpp"
#include "varest/estimator.hpp"
#include "varest/io.hpp"
#include "varest/variation.hpp"

using namespace varest;
namespace fs = std::filesystem;

namespace {

struct CliFixture {
    fs::path root = fixtures::temp_dir("cli");

    CliFixture() {
        REQUIRE(run({"synth-movielens", "--out", s(root / "ml"), "--users", "60", "--movies", "50", "--ratings",
                     "1500", "--seed", "3"}) == 0);
        REQUIRE(run({"prepare-data", "--source", "movielens", "--movielens-dir", s(root / "ml"), "--task", "ml-r",
                     "--seed", "5", "--out", s(root / "data")}) == 0);
    }
    static int run(std::vector<std::string> args) { return run_cli(args); }
    static std::string s(const fs::path& p) { return p.string(); }
};

}  // namespace

TEST_CASE_FIXTURE(CliFixture, "prepare-data splits and errors") {
    const auto manifest = parse_key_values(read_file(root / "data" / "manifest.txt"));
    CHECK(parse_u64(manifest.at("d_t.rows")) == 900);
    CHECK(parse_u64(manifest.at("d_e.rows")) == 600);
    REQUIRE(run({"prepare-data", "--source", "movielens", "--movielens-dir", s(root / "ml"), "--task", "ml-r",
                 "--seed", "5", "--out", s(root / "data2")}) == 0);
    for (const char* f : {"d_t.tsv", "d_e.tsv", "d_e1.tsv", "d_e2.tsv"})
        CHECK(read_file(root / "data" / f) == read_file(root / "data2" / f));
    CHECK(run({"prepare-data", "--source", "movielens", "--movielens-dir", s(root / "ml"), "--splits", "0.5,0.6",
               "--out", s(root / "bad")}) == 1);
    CHECK(run({"prepare-data", "--source", "movielens", "--movielens-dir", s(root / "none"), "--out",
               s(root / "bad")}) == 2);
    CHECK(run({"no-such-command"}) == 1);
}

TEST_CASE_FIXTURE(CliFixture, "run-ensemble and downstream commands") {
    const auto ens = root / "ens";
    REQUIRE(run({"run-ensemble", "--data", s(root / "data"), "--setting", "R0,R3,R5", "--n", "5", "--out", s(ens),
                 "--set", "train.max_epochs=2"}) == 0);
    for (double pv : load_pv_table(ens / "R0" / "pv_d_e.tsv").pv_values()) CHECK(pv == 0.0);
    // R3 and R5 record the same init seeds.
    const auto m3 = parse_key_values(read_file(ens / "R3" / "manifest.txt"));
    const auto m5 = parse_key_values(read_file(ens / "R5" / "manifest.txt"));
    std::size_t shared = 0;
    for (const auto& [k, v] : m3)
        if (k.find("init_seed") != std::string::npos) {
            CHECK(m5.at(k) == v);
            ++shared;
        }
    CHECK(shared == 5);
    const auto table1 = read_file(ens / "table1.tsv");
    CHECK(split_view(trim(table1), "\n").size() == 2 + 3);

    CHECK(run({"correlate", "--pv", s(ens / "R3" / "pv_d_e.tsv"), "--pv", s(ens / "R3" / "pv_d_e.tsv"), "--out",
               s(root / "corr")}) == 0);
    const auto corr = read_file(root / "corr" / "correlation.tsv");
    CHECK(corr.find("R3\t1\t1\n") != std::string::npos);

    CHECK(run({"delta-ratio", "--universe", s(ens), "--setting", "R3", "--sizes", "5", "--resamples", "3", "--out",
               s(root / "dr")}) == 0);
    CHECK(read_file(root / "dr" / "sweep.tsv").find("\n5\t0\t0\t") != std::string::npos);
    CHECK(run({"delta-ratio", "--universe", s(ens), "--setting", "R3", "--sizes", "6", "--out", s(root / "dr2")}) ==
          1);

    for (const char* mode : {"B", "BV"}) {
        CHECK(run({"fit-estimator", "--data", s(root / "data"), "--ensemble", s(ens), "--setting", "R3",
                   "--features", mode, "--seed", "1", "--out", s(root / (std::string("fit_") + mode)), "--set",
                   "estimator.max_epochs=3"}) == 0);
        const auto kv = parse_report(read_file(root / (std::string("fit_") + mode) / "report.txt"));
        CHECK(kv.at("features") == mode);
        CHECK(kv.count("mse") == 1);
        CHECK(kv.count("input.pv_d_e1.hash") == 1);
    }
    CHECK(run({"fit-estimator", "--data", s(root / "data"), "--ensemble", s(ens), "--setting", "R3",
               "--target-member", "9", "--out", s(root / "bad")}) == 1);

    // Replay under another worker count reproduces every output.
    CHECK(run({"replay", "--run", s(ens / "run.txt"), "--out", s(root / "ens_replay"), "--workers", "3"}) == 0);
    CHECK(run({"replay", "--run", s(root / "fit_BV" / "run.txt"), "--out", s(root / "fit_replay")}) == 0);
    // A tampered record is detected.
    auto text = read_file(root / "dr" / "run.txt");
    const auto pos = text.find("output.sweep.tsv=");
    REQUIRE(pos != std::string::npos);
    text[pos + 17] = text[pos + 17] == '0' ? '1' : '0';
    write_file(root / "tampered.txt", text);
    CHECK(run({"replay", "--run", s(root / "tampered.txt"), "--out", s(root / "dr_replay")}) == 3);
}
