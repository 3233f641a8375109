#include <chrono>
#include <thread>
#include "retroid/qc/service.hpp"

#include <charconv>
#include <fstream>

#include <httplib.h>

#include "retroid/errors.hpp"
#include "retroid/image.hpp"

namespace retroid::qc {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, {{"ok", false}, {"error", msg}});
}

std::optional<int> int_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  const auto s = req.get_param_value(name);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ValidationError(std::string("bad integer for ") + name);
  return v;
}

constexpr const char* kFallbackIndex =
    "<!doctype html><title>retroid qc</title><p>QC API is running. Endpoints: "
    "/api/sessions, /api/crops, /api/image/{crop_id}, POST /api/decision.</p>\n";

}  // namespace

std::pair<std::string, int> parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ValidationError("bind address must be host:port, got '" + s + "'");
  int port = 0;
  const auto ps = s.substr(colon + 1);
  auto [p, ec] = std::from_chars(ps.data(), ps.data() + ps.size(), port);
  if (ec != std::errc{} || p != ps.data() + ps.size() || port < 0 || port > 65535) {
    throw ValidationError("bad port in bind address '" + s + "'");
  }
  return {s.substr(0, colon), port};
}

QcService::QcService(data::Manifest manifest, std::filesystem::path decisions_path, ServiceOptions opts)
    : manifest_(std::move(manifest)),
      decisions_path_(std::move(decisions_path)),
      opts_(std::move(opts)),
      store_(opts_.image_root),
      server_(std::make_unique<httplib::Server>()) {
  manifest_.validate();
  for (std::size_t i = 0; i < manifest_.records.size(); ++i) index_.emplace(manifest_.records[i].crop_id, i);

  if (!decisions_path_.parent_path().empty()) std::filesystem::create_directories(decisions_path_.parent_path());
  if (std::filesystem::exists(decisions_path_)) {
    const auto applied = apply_decisions(manifest_, decisions_path_, &warnings_);
    for (const auto& r : applied.records) qc_.push_back(r.qc);
  } else {
    std::ofstream touch(decisions_path_, std::ios::app);
    if (!touch) throw IoError("cannot create decisions file " + decisions_path_.string());
    for (const auto& r : manifest_.records) qc_.push_back(r.qc);
  }
  // httplib defaults to SO_REUSEPORT, which lets a second server share a
  // busy port; plain SO_REUSEADDR makes "port in use" an error again.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

QcService::~QcService() { stop(); }

data::QcStatus QcService::current_qc(const std::string& crop_id) const {
  std::shared_lock lock(state_mu_);
  return qc_.at(index_.at(crop_id));
}

json QcService::sessions_json() const {
  std::map<data::SessionKey, int> counts;
  for (const auto& r : manifest_.records) ++counts[r.session];
  json out = json::array();
  for (const auto& [s, n] : counts) out.push_back({{"day", s.day}, {"set", s.set}, {"count", n}});
  return out;
}

void QcService::install_routes() {
  auto& srv = *server_;

  srv.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, sessions_json());
  });

  srv.Get("/api/crops", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto day = int_param(req, "day");
      const auto set = int_param(req, "set");
      std::optional<data::QcStatus> status;
      if (req.has_param("status")) status = data::parse_qc(req.get_param_value("status"));
      const int page = int_param(req, "page").value_or(1);
      const int page_size = int_param(req, "page_size").value_or(100);
      if (page < 1 || page_size < 1 || page_size > 10000) throw ValidationError("page must be >= 1 and page_size in [1, 10000]");

      std::shared_lock lock(state_mu_);
      std::vector<std::size_t> hits;
      for (std::size_t i = 0; i < manifest_.records.size(); ++i) {
        const auto& r = manifest_.records[i];
        if (day && r.session.day != *day) continue;
        if (set && r.session.set != *set) continue;
        if (status && qc_[i] != *status) continue;
        hits.push_back(i);
      }
      json items = json::array();
      const std::size_t begin = static_cast<std::size_t>(page - 1) * page_size;
      for (std::size_t k = begin; k < hits.size() && k < begin + page_size; ++k) {
        const auto& r = manifest_.records[hits[k]];
        items.push_back({{"crop_id", r.crop_id},
                         {"individual", r.individual},
                         {"day", r.session.day},
                         {"set", r.session.set},
                         {"qc", data::to_string(qc_[hits[k]])},
                         {"url", "/api/image/" + r.crop_id}});
      }
      send_json(res, 200, {{"items", items}, {"page", page}, {"page_size", page_size}, {"total", hits.size()}});
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    }
  });

  srv.Get(R"(/api/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto it = index_.find(req.matches[1].str());
    if (it == index_.end()) return send_error(res, 404, "unknown crop");
    try {
      const auto bytes = read_file_bytes(store_.path_for(manifest_.records[it->second]));
      res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "image/png");
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Post("/api/decision", [this](const httplib::Request& req, httplib::Response& res) {
    Decision d;
    try {
      auto body = json::parse(req.body);
      if (!body.is_object()) throw ValidationError("decision must be a JSON object");
      if (!body.contains("timestamp")) body["timestamp"] = utc_now();
      d = Decision::from_json(body);
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what());
    }
    const auto it = index_.find(d.crop_id);
    if (it == index_.end()) return send_error(res, 404, "unknown crop '" + d.crop_id + "'");

    {
      std::lock_guard lock(log_mu_);
      std::ofstream out(decisions_path_, std::ios::app | std::ios::binary);
      out << d.to_json().dump() << '\n';
      out.flush();
      if (!out) return send_error(res, 500, "cannot append to decisions log");
      std::unique_lock state(state_mu_);
      qc_[it->second] = d.status;
    }
    send_json(res, 200, {{"ok", true}});
  });

  if (opts_.static_dir) {
    if (!srv.set_mount_point("/", opts_.static_dir->string())) {
      throw IoError("static asset directory not found: " + opts_.static_dir->string());
    }
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kFallbackIndex, "text/html"); });
  }
}

int QcService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return bound;
}

void QcService::listen() {
  listen_active_ = true;
  if (stop_requested_) {
    listen_active_ = false;
    return;
  }
  bool ok = server_->listen_after_bind();
  listen_active_ = false;
  if (!ok && !stop_requested_) throw IoError("qc service stopped unexpectedly");
}

void QcService::stop() {
  if (!server_) return;
  // httplib ignores stop() until the accept loop runs, so a stop racing a
  // starting listen() waits for it.
  stop_requested_ = true;
  while (listen_active_ && !server_->is_running())
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  server_->stop();
}

bool QcService::running() const { return server_->is_running(); }

}  // namespace retroid::qc
