#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "retroid/data/manifest.hpp"
#include "retroid/image.hpp"

namespace retroid::data {

/// Resolves the pixels behind a manifest record.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual Image load(const CropRecord& r) const = 0;
};

/// On-disk layout: crops live at <root>/crops/<crop_id>.png; raw records
/// point at their source frame (relative paths resolve against root).
class DirectoryImageStore : public ImageSource {
 public:
  explicit DirectoryImageStore(std::filesystem::path root) : root_(std::move(root)) {}

  Image load(const CropRecord& r) const override;
  std::filesystem::path path_for(const CropRecord& r) const;
  std::filesystem::path crop_path(const std::string& crop_id) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// In-memory store keyed by crop_id; used by tests and in-process pipelines.
class MemoryImageStore : public ImageSource {
 public:
  void put(const std::string& crop_id, Image img);
  Image load(const CropRecord& r) const override;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Image> images_;
};

}  // namespace retroid::data
