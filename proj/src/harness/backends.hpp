#pragma once

#include <memory>
#include <vector>

#include <json.hpp>

#include "retroid/harness/classifier.hpp"

namespace retroid::harness::detail {

struct TrainData {
  const std::vector<Image>* images = nullptr;
  std::vector<int> labels;
  int num_classes = 0;
};

std::shared_ptr<const Model> train_nearest_centroid(const TrainData& data, const Hyperparams& hp, int jobs);
std::shared_ptr<const Model> load_nearest_centroid(const nlohmann::json& desc, const std::vector<float>& blob);

/// `init` (optional) is a trained small-cnn whose feature layers seed the new model.
std::shared_ptr<const Model> train_small_cnn(const TrainData& data, const Hyperparams& hp, int jobs,
                                             const Model* init = nullptr);
std::shared_ptr<const Model> load_small_cnn(const nlohmann::json& desc, const std::vector<float>& blob);

}  // namespace retroid::harness::detail
