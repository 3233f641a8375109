#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "retroid/data/image_store.hpp"
#include "retroid/data/manifest.hpp"
#include "retroid/qc/decisions.hpp"

namespace httplib {
class Server;
}

namespace retroid::qc {

struct ServiceOptions {
  std::filesystem::path image_root;              // defaults to the manifest's directory
  std::optional<std::filesystem::path> static_dir;  // front-end assets served under /
};

/// Review service over a read-only manifest. Decisions are appended to a JSONL
/// log (one writer, flushed per request); the current qc of each crop is the
/// manifest qc with the log applied.
class QcService {
 public:
  QcService(data::Manifest manifest, std::filesystem::path decisions_path, ServiceOptions opts);
  ~QcService();
  QcService(const QcService&) = delete;
  QcService& operator=(const QcService&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// Throws IoError if the address is unavailable.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();
  bool running() const;

  nlohmann::json sessions_json() const;
  data::QcStatus current_qc(const std::string& crop_id) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  void install_routes();

  data::Manifest manifest_;
  std::filesystem::path decisions_path_;
  ServiceOptions opts_;
  data::DirectoryImageStore store_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;

  mutable std::shared_mutex state_mu_;
  std::vector<data::QcStatus> qc_;  // parallel to manifest_.records
  std::mutex log_mu_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<bool> listen_active_{false};
  std::atomic<bool> stop_requested_{false};
};

/// "host:port" -> pair; ValidationError on malformed input.
std::pair<std::string, int> parse_bind(const std::string& s);

}  // namespace retroid::qc
