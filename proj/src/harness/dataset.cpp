#include "retroid/harness/dataset.hpp"

#include <algorithm>
#include <set>

#include "retroid/parallel.hpp"

namespace retroid::harness {

std::vector<std::string> LabeledSet::label_set() const {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

void LabeledSet::add(Image img, std::string label, std::string crop_id) {
  images.push_back(std::move(img));
  labels.push_back(std::move(label));
  crop_ids.push_back(std::move(crop_id));
}

LabeledSet load_labeled(const data::Manifest& m, const data::ImageSource& source, int jobs) {
  data::require_usable(m, data::Stage::enhanced);
  LabeledSet out;
  out.images.resize(m.records.size());
  parallel_for(m.records.size(), jobs, [&](std::size_t i) { out.images[i] = source.load(m.records[i]); });
  for (const auto& r : m.records) {
    out.labels.push_back(r.individual);
    out.crop_ids.push_back(r.crop_id);
  }
  return out;
}

}  // namespace retroid::harness
