#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "retroid/harness/dataset.hpp"
#include "retroid/harness/hyperparams.hpp"
#include "retroid/harness/metrics.hpp"
#include "retroid/image.hpp"

namespace retroid::harness {

/// Shape every input image must have.
struct InputSpec {
  int out_px = 256;
  int channels = 1;
  bool operator==(const InputSpec&) const = default;
};

/// A trained backend. Immutable; safe to share across threads.
class Model {
 public:
  virtual ~Model() = default;
  virtual int num_classes() const = 0;
  /// Probability vector (sums to 1) for a shape-checked input image.
  virtual std::vector<double> predict(const Image& img) const = 0;
  /// Architecture and normalization, enough to rebuild from the blob.
  virtual nlohmann::json describe() const = 0;
  virtual std::vector<float> blob() const = 0;
};

struct TrainOptions {
  /// Root holding pretrained backbones as saved classifier directories
  /// (<root>/<name>/spec.json + params.bin). Falls back to $RETROID_BACKBONE_DIR.
  std::filesystem::path backbone_dir;
  int jobs = 1;
};

class Classifier {
 public:
  std::string backend;
  std::vector<std::string> labels;  // ordered individual ids
  InputSpec input;
  Hyperparams hp;
  std::shared_ptr<const Model> model;

  /// Distribution over `labels`. Throws ValidationError on shape mismatch.
  std::vector<double> predict(const Image& img) const;
  int predict_index(const Image& img) const;
  int label_index(const std::string& label) const;  // -1 when unknown

  void save(const std::filesystem::path& dir) const;
  static Classifier load(const std::filesystem::path& dir);
};

std::vector<std::string> registered_backends();

/// Trains `backend` ("nearest-centroid", "small-cnn" or "pretrained-backbone:<name>").
/// Requires >= 2 classes. Deterministic in (backend, hp.seed, data order).
Classifier train(const LabeledSet& train_set, std::string_view backend, const Hyperparams& hp,
                 const TrainOptions& opts = {});

/// Metrics over `test_set`; its labels must be a subset of the classifier's.
Metrics evaluate(const Classifier& clf, const LabeledSet& test_set, int jobs = 1);

}  // namespace retroid::harness
