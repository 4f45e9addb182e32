// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "harness/mcq.hpp"

namespace trojanscope::harness {

/// Everything the quiz service needs: items (with answers, server-side only),
/// the session ids it accepts, and where visualizations / option thumbnails
/// live on disk.
struct Quiz {
  std::vector<MCQItem> items;
  std::vector<std::string> sessions;
  /// option label -> PNG path
  std::map<std::string, std::filesystem::path> thumbnails;
  /// Directory that relative visualization references resolve against.
  std::filesystem::path base_dir;
};

Quiz load_quiz(const std::filesystem::path& path);
void save_quiz(const Quiz& quiz, const std::filesystem::path& path);

/// Session and response bookkeeping behind the HTTP API. Thread-safe; the
/// JSONL response log is append-only and replayed on construction.
class HarnessService {
 public:
  HarnessService(Quiz quiz, std::filesystem::path log_path);

  /// Client view of a session: items in quiz order with visualization URLs and
  /// option labels. Never contains the correct index or the trojan name.
  nlohmann::json session_payload(const std::string& session_id) const;

  /// Validates and appends one answer. Throws NotFound (unknown session or
  /// item), InvalidArgument (malformed body, index outside [0,8)) or
  /// ConflictError (session already answered this item).
  ResponseRecord submit(const nlohmann::json& body);

  /// Scores a snapshot of the log.
  EvaluationReport report() const;
  std::vector<ResponseRecord> responses() const;

  std::optional<std::filesystem::path> visualization_file(const std::string& item_id, std::size_t k) const;
  std::optional<std::filesystem::path> thumbnail_file(std::size_t n) const;

 private:
  struct VisEntry {
    bool has_image = false;
    std::string caption;
    std::filesystem::path image;
  };

  Quiz quiz_;
  std::filesystem::path log_path_;
  std::map<std::string, std::vector<VisEntry>> visuals_;
  std::vector<std::string> thumbnail_labels_;
  std::set<std::string> sessions_;
  mutable std::mutex mutex_;
  std::vector<ResponseRecord> log_;
  std::set<std::pair<std::string, std::string>> answered_;
};

/// cpp-httplib front end: GET /api/session/{id}, POST /api/response,
/// GET /api/report, GET /vis/{item}/{k}, GET /thumb/{n}, static assets at /.
class HarnessServer {
 public:
  explicit HarnessServer(HarnessService& service, std::filesystem::path assets_dir = {});
  ~HarnessServer();

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace trojanscope::harness
