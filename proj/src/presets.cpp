#include "varest/presets.hpp"

#include "varest/error.hpp"

namespace varest {

ModelSpec movielens_spec(const FeatureSchema& schema, TaskKind task, double temperature) {
    static const std::vector<std::pair<std::string, std::size_t>> dims = {
        {"user_id", 8}, {"gender", 2}, {"age", 3}, {"occupation", 5}, {"movie_id", 8}};
    if (task == TaskKind::binary) throw ConfigError("movielens preset: binary task not supported");
    ModelSpec spec;
    spec.task = task;
    spec.num_classes = task == TaskKind::multiclass ? 5 : 1;
    spec.temperature = task == TaskKind::multiclass ? temperature : 1.0;
    for (const auto& [name, dim] : dims) {
        const std::size_t i = schema.categorical_index(name);
        spec.embeddings.push_back({name, schema.vocab_sizes[i], dim});
    }
    spec.numeric_inputs = schema.numeric_count;
    spec.hidden_sizes = {50, 20, 10};
    spec.check_schema(schema);
    return spec;
}

ModelSpec synthetic_binary_spec(const FeatureSchema& schema) {
    ModelSpec spec;
    spec.task = TaskKind::binary;
    for (std::size_t i = 0; i < schema.categorical_names.size(); ++i)
        spec.embeddings.push_back({schema.categorical_names[i], schema.vocab_sizes[i], 4});
    spec.numeric_inputs = schema.numeric_count;
    spec.hidden_sizes = {50, 20, 10};
    spec.check_schema(schema);
    return spec;
}

TrainConfig movielens_train_config() {
    TrainConfig c;
    c.max_epochs = 20;
    c.patience = 2;
    return c;
}

TrainConfig synthetic_binary_train_config() {
    TrainConfig c;
    c.max_epochs = 1;
    c.patience = 1;
    return c;
}

}  // namespace varest
