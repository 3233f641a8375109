#pragma once

#include <string>
#include <vector>

#include "retroid/data/image_store.hpp"
#include "retroid/data/manifest.hpp"
#include "retroid/image.hpp"

namespace retroid::harness {

/// Images with string identity labels, ready for training or evaluation.
struct LabeledSet {
  std::vector<Image> images;
  std::vector<std::string> labels;
  std::vector<std::string> crop_ids;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  /// Sorted distinct labels.
  std::vector<std::string> label_set() const;
  void add(Image img, std::string label, std::string crop_id = {});
};

/// Loads every record of `m` through `source`. Rejects discarded crops and any
/// record not at the enhanced stage (ValidationError).
LabeledSet load_labeled(const data::Manifest& m, const data::ImageSource& source, int jobs = 1);

}  // namespace retroid::harness
