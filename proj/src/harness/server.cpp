// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "harness/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "zoo/errors.hpp"

namespace trojanscope::harness {
namespace fs = std::filesystem;
using nlohmann::json;

Quiz load_quiz(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open quiz file: " + path.string());
  try {
    const json doc = json::parse(in);
    Quiz quiz;
    quiz.base_dir = path.parent_path();
    for (const auto& i : doc.at("items")) quiz.items.push_back(mcq_from_json(i));
    quiz.sessions = doc.at("sessions").get<std::vector<std::string>>();
    if (doc.contains("thumbnails"))
      for (const auto& [label, file] : doc.at("thumbnails").items())
        quiz.thumbnails[label] = quiz.base_dir / file.get<std::string>();
    return quiz;
  } catch (const json::exception& e) {
    throw IngestionError("malformed quiz file " + path.string() + ": " + e.what());
  }
}

void save_quiz(const Quiz& quiz, const fs::path& path) {
  json items = json::array();
  for (const auto& i : quiz.items) items.push_back(to_json(i));
  json thumbs = json::object();
  for (const auto& [label, file] : quiz.thumbnails)
    thumbs[label] = fs::relative(file, path.parent_path().empty() ? fs::path(".") : path.parent_path()).string();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write quiz file: " + path.string());
  out << json{{"format", "trojanscope-quiz"}, {"version", 1}, {"items", items}, {"sessions", quiz.sessions},
              {"thumbnails", thumbs}}
             .dump(2)
      << '\n';
}

HarnessService::HarnessService(Quiz quiz, fs::path log_path) : quiz_(std::move(quiz)), log_path_(std::move(log_path)) {
  std::set<std::string> ids;
  for (const auto& item : quiz_.items) {
    validate(item);
    if (!ids.insert(item.item_id).second) throw InvalidArgument("duplicate item id: " + item.item_id);
    auto& entries = visuals_[item.item_id];
    if (item.visualization.empty()) continue;
    const fs::path dir = quiz_.base_dir / item.visualization;
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IngestionError("visualization manifest missing for item " + item.item_id + ": " + dir.string());
    const json manifest = json::parse(in);
    for (const auto& e : manifest.at("items")) {
      VisEntry v;
      v.caption = e.value("caption", std::string{});
      if (e.contains("image")) {
        v.has_image = true;
        v.image = dir / e.at("image").get<std::string>();
      }
      entries.push_back(std::move(v));
    }
  }
  require(!quiz_.sessions.empty(), "quiz defines no sessions");
  sessions_.insert(quiz_.sessions.begin(), quiz_.sessions.end());
  for (const auto& [label, file] : quiz_.thumbnails) thumbnail_labels_.push_back(label);

  if (fs::exists(log_path_)) {
    std::ifstream in(log_path_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        ResponseRecord r = response_from_json(json::parse(line));
        answered_.insert({r.session_id, r.item_id});
        log_.push_back(std::move(r));
      } catch (const std::exception& e) {
        throw IngestionError("malformed response log " + log_path_.string() + " line " + std::to_string(lineno) + ": " +
                             e.what());
      }
    }
  } else if (log_path_.has_parent_path()) {
    fs::create_directories(log_path_.parent_path());
  }
}

json HarnessService::session_payload(const std::string& session_id) const {
  if (!sessions_.contains(session_id)) throw NotFound("unknown session: " + session_id);
  json items = json::array();
  std::lock_guard lock(mutex_);
  for (const auto& item : quiz_.items) {
    json vis = json::array();
    const auto& entries = visuals_.at(item.item_id);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      json v = json::object();
      if (entries[k].has_image) v["image"] = "/vis/" + item.item_id + "/" + std::to_string(k);
      if (!entries[k].caption.empty()) v["caption"] = entries[k].caption;
      vis.push_back(v);
    }
    json options = json::array();
    for (const auto& label : item.options) {
      json o{{"label", label}, {"thumbnail", nullptr}};
      const auto it = std::find(thumbnail_labels_.begin(), thumbnail_labels_.end(), label);
      if (it != thumbnail_labels_.end()) o["thumbnail"] = "/thumb/" + std::to_string(it - thumbnail_labels_.begin());
      options.push_back(o);
    }
    items.push_back({{"item_id", item.item_id},
                     {"method", item.method},
                     {"visualizations", vis},
                     {"options", options},
                     {"answered", answered_.contains({session_id, item.item_id})}});
  }
  return {{"session_id", session_id}, {"items", items}};
}

ResponseRecord HarnessService::submit(const json& body) {
  ResponseRecord r;
  try {
    require(body.is_object(), "response body must be a JSON object");
    r.session_id = body.at("session_id").get<std::string>();
    r.item_id = body.at("item_id").get<std::string>();
    r.chosen_index = body.at("chosen_index").get<int>();
    r.responder = parse_responder(body.value("responder", std::string("human")));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed response: ") + e.what());
  }
  if (!sessions_.contains(r.session_id)) throw NotFound("unknown session: " + r.session_id);
  if (!visuals_.contains(r.item_id)) throw NotFound("unknown item: " + r.item_id);
  require(r.chosen_index >= 0 && r.chosen_index < kOptionCount, "chosen_index must lie in [0,8)");
  r.timestamp = utc_timestamp();

  std::lock_guard lock(mutex_);
  if (answered_.contains({r.session_id, r.item_id}))
    throw ConflictError("session " + r.session_id + " already answered item " + r.item_id);
  std::ofstream out(log_path_, std::ios::app);
  if (!out) throw IoError("cannot append to response log: " + log_path_.string());
  out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw IoError("failed writing response log: " + log_path_.string());
  answered_.insert({r.session_id, r.item_id});
  log_.push_back(r);
  return r;
}

std::vector<ResponseRecord> HarnessService::responses() const {
  std::lock_guard lock(mutex_);
  return log_;
}

EvaluationReport HarnessService::report() const { return score_responses(quiz_.items, responses()); }

std::optional<fs::path> HarnessService::visualization_file(const std::string& item_id, std::size_t k) const {
  const auto it = visuals_.find(item_id);
  if (it == visuals_.end() || k >= it->second.size() || !it->second[k].has_image) return std::nullopt;
  return it->second[k].image;
}

std::optional<fs::path> HarnessService::thumbnail_file(std::size_t n) const {
  if (n >= thumbnail_labels_.size()) return std::nullopt;
  return quiz_.thumbnails.at(thumbnail_labels_[n]);
}

struct HarnessServer::Impl {
  httplib::Server server;
  HarnessService* service = nullptr;
};

namespace {

int http_status(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInvalidArgument:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kConflict:
      return 409;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

bool send_file(httplib::Response& res, const std::optional<fs::path>& path) {
  if (!path) return false;
  std::ifstream in(*path, std::ios::binary);
  if (!in) return false;
  std::ostringstream bytes;
  bytes << in.rdbuf();
  res.set_content(bytes.str(), "image/png");
  return true;
}

}  // namespace

HarnessServer::HarnessServer(HarnessService& service, fs::path assets_dir) : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  auto& srv = impl_->server;
  auto guarded = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_json(res, http_status(e), {{"error", e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}});
      }
    };
  };
  srv.Get(R"(/api/session/([A-Za-z0-9_.-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, impl_->service->session_payload(req.matches[1]));
          }));
  srv.Post("/api/response", guarded([this](const httplib::Request& req, httplib::Response& res) {
             json body;
             try {
               body = json::parse(req.body);
             } catch (const json::exception& e) {
               throw InvalidArgument(std::string("response body is not JSON: ") + e.what());
             }
             const ResponseRecord r = impl_->service->submit(body);
             send_json(res, 201, {{"status", "recorded"}, {"session_id", r.session_id}, {"item_id", r.item_id}});
           }));
  srv.Get("/api/report", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, to_json(impl_->service->report()));
          }));
  srv.Get(R"(/vis/([A-Za-z0-9_.-]+)/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!send_file(res, impl_->service->visualization_file(req.matches[1], std::stoul(req.matches[2]))))
              throw NotFound("no such visualization");
          }));
  srv.Get(R"(/thumb/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!send_file(res, impl_->service->thumbnail_file(std::stoul(req.matches[1]))))
              throw NotFound("no such thumbnail");
          }));
  if (!assets_dir.empty() && !srv.set_mount_point("/", assets_dir.string()))
    throw NotFound("asset directory not found: " + assets_dir.string());
}

HarnessServer::~HarnessServer() { stop(); }

int HarnessServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HarnessServer::listen() { impl_->server.listen_after_bind(); }

void HarnessServer::start() {
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HarnessServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace trojanscope::harness
