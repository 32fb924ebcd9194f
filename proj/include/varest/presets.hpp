#pragma once

#include "varest/data.hpp"
#include "varest/nn.hpp"

namespace varest {

// Rating model: embeddings user 8, gender 2, age 3, occupation 5, movie 8; genre
// multi-hot as numeric input; hidden [50, 20, 10].
ModelSpec movielens_spec(const FeatureSchema& schema, TaskKind task, double temperature = 0.2);

// Click model: every categorical feature embedded with dim 4; hidden [50, 20, 10].
ModelSpec synthetic_binary_spec(const FeatureSchema& schema);

TrainConfig movielens_train_config();         // 20 epochs, early stopping
TrainConfig synthetic_binary_train_config();  // a single epoch

}  // namespace varest
