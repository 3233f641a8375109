#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace retroid::harness {

/// Training configuration. Defaults are the published fine-tuning recipe:
/// Adam, lr 1e-3, weight decay 1e-4, 100 epochs, cross-entropy loss.
struct Hyperparams {
  std::string optimizer = "adam";
  double learning_rate = 0.001;
  double weight_decay = 0.0001;
  int epochs = 100;
  std::string loss = "cross-entropy";
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
  bool operator==(const Hyperparams&) const = default;
};

}  // namespace retroid::harness
