#include "retroid/data/image_store.hpp"

#include "retroid/errors.hpp"

namespace retroid::data {

std::filesystem::path DirectoryImageStore::crop_path(const std::string& crop_id) const {
  return root_ / "crops" / (crop_id + ".png");
}

std::filesystem::path DirectoryImageStore::path_for(const CropRecord& r) const {
  if (r.stage == Stage::raw) {
    std::filesystem::path p(r.source);
    return p.is_absolute() ? p : root_ / p;
  }
  return crop_path(r.crop_id);
}

Image DirectoryImageStore::load(const CropRecord& r) const { return read_png(path_for(r)); }

void MemoryImageStore::put(const std::string& crop_id, Image img) {
  std::lock_guard lock(mu_);
  images_[crop_id] = std::move(img);
}

Image MemoryImageStore::load(const CropRecord& r) const {
  std::lock_guard lock(mu_);
  auto it = images_.find(r.crop_id);
  if (it == images_.end()) throw ValidationError("no image for crop " + r.crop_id);
  return it->second;
}

std::size_t MemoryImageStore::size() const {
  std::lock_guard lock(mu_);
  return images_.size();
}

}  // namespace retroid::data
