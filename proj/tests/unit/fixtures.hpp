#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "varest/data.hpp"
#include "varest/io.hpp"
#include "varest/nn.hpp"
#include "varest/rng.hpp"

namespace fixtures {

using namespace varest;

inline FeatureSchema small_schema(TaskKind task, std::size_t classes = 1) {
    FeatureSchema s;
    s.categorical_names = {"a", "b"};
    s.vocab_sizes = {5, 3};
    s.numeric_count = 3;
    s.task = task;
    s.num_classes = task == TaskKind::multiclass ? classes : 1;
    return s;
}

inline ModelSpec small_spec(TaskKind task, std::vector<std::size_t> hidden = {4, 3}, std::size_t classes = 3) {
    ModelSpec spec;
    spec.task = task;
    spec.num_classes = task == TaskKind::multiclass ? classes : 1;
    spec.embeddings = {{"a", 5, 2}, {"b", 3, 2}};
    spec.numeric_inputs = 3;
    spec.hidden_sizes = std::move(hidden);
    spec.temperature = task == TaskKind::multiclass ? 0.7 : 1.0;
    return spec;
}

inline double random_label(TaskKind task, CounterRng& rng, std::size_t classes = 3) {
    switch (task) {
        case TaskKind::regression: return 1.0 + static_cast<double>(rng.below(5));
        case TaskKind::binary: return static_cast<double>(rng.below(2));
        case TaskKind::multiclass: return static_cast<double>(rng.below(classes));
    }
    return 0.0;
}

inline Example random_example(TaskKind task, CounterRng& rng, std::int64_t row_id, std::size_t classes = 3) {
    Example e;
    e.categorical = {static_cast<std::int32_t>(rng.below(5)), static_cast<std::int32_t>(rng.below(3))};
    e.numeric = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    e.label = random_label(task, rng, classes);
    e.row_id = row_id;
    return e;
}

// Label depends on the features so training has signal.
inline Dataset small_dataset(TaskKind task, std::size_t n, std::uint64_t seed, std::size_t classes = 3) {
    Dataset d;
    d.schema = small_schema(task, classes);
    d.provenance = {"fixture", "all", seed};
    CounterRng rng(seed, "fixture");
    for (std::size_t i = 0; i < n; ++i) {
        Example e = random_example(task, rng, static_cast<std::int64_t>(i) * 3 + 11, classes);
        const double score = e.numeric[0] + 0.5 * e.numeric[1] + 0.3 * (e.categorical[0] - 2);
        if (task == TaskKind::regression) e.label = std::clamp(std::round(3.0 + 1.5 * score), 1.0, 5.0);
        if (task == TaskKind::binary) e.label = score > 0 ? 1.0 : 0.0;
        if (task == TaskKind::multiclass)
            e.label = static_cast<double>(std::min<std::size_t>(classes - 1, static_cast<std::size_t>(
                                                                               std::clamp(score + 1.5, 0.0, 10.0))));
        d.rows.push_back(std::move(e));
    }
    return d;
}

// Tiny ml-1m style corpus on disk.
inline void write_movielens_fixture(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "users.dat", "1::F::1::10::48067\n2::M::56::16::70072\n3::M::25::15::55117\n");
    write_file(dir / "movies.dat",
               "1::Toy Story (1995)::Animation|Children's|Comedy\n2::Heat (1995)::Action|Crime|Thriller\n"
               "3::Sabrina (1995)::Comedy|Drama\n");
    write_file(dir / "ratings.dat", "1::3::5::978300760\n2::1::3::978302109\n3::2::4::978301968\n");
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("varest-unit-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixtures
