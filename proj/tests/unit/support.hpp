#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "retroid/data/manifest.hpp"
#include "retroid/rng.hpp"

namespace retroid::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "retroid-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(RETROID_FIXTURES) / name;
}

/// 64 hex chars derived from an integer; distinct inputs give distinct strings.
inline std::string fake_sha(std::uint64_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (int part = 0; part < 4; ++part) {
    std::uint64_t v = mix64(n * 4 + part + 1);
    for (int i = 0; i < 16; ++i, v >>= 4) s.push_back(kHex[v & 15]);
  }
  return s;
}

inline data::CropRecord make_record(const std::string& individual, int day, int set, int frame, std::uint64_t hash_seed,
                                    data::Stage stage = data::Stage::enhanced) {
  data::CropRecord r;
  r.crop_id = individual + "_d" + std::to_string(day) + "_s" + std::to_string(set) + "_f" + std::to_string(frame);
  r.sha256 = fake_sha(hash_seed);
  r.individual = individual;
  r.session = {day, set};
  r.frame_index = frame;
  r.source = "frames/" + individual + "/f" + std::to_string(frame) + ".png";
  r.stage = stage;
  return r;
}

}  // namespace retroid::test
