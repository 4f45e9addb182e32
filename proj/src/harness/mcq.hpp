// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace trojanscope::harness {

inline constexpr int kOptionCount = 8;
/// Chance of picking the right option out of eight.
inline constexpr double kRandomBaseline = 0.125;
/// Best identification rate of the methods tested in the original benchmark.
inline constexpr double kPriorRecord = 0.49;

struct MCQItem {
  std::string item_id;
  std::string trojan;
  std::string method;
  /// Opaque reference to the visualization set shown with the question.
  std::string visualization;
  std::vector<std::string> options;
  int correct_index = 0;
  std::uint64_t shuffle_seed = 0;
};

/// Eight pairwise-distinct options (after case-folding), exactly one correct.
void validate(const MCQItem& item);

/// Draws seven distractors from `pool` (entries equal to the true trigger are
/// ignored), adds the true trigger and shuffles under `seed`.
MCQItem build_mcq(std::string item_id, std::string trojan, std::string true_trigger, std::string method,
                  std::string visualization, std::span<const std::string> pool, std::uint64_t seed);

enum class ResponderKind { kHuman, kSimulated };

struct ResponseRecord {
  std::string session_id;
  std::string item_id;
  int chosen_index = 0;
  std::string timestamp;
  ResponderKind responder = ResponderKind::kHuman;
};

struct RateEntry {
  std::string method;
  std::string trojan;
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate = 0.0;
};

struct MethodSummary {
  std::string method;
  /// Mean of the method's per-trojan rates.
  double mean_rate = 0.0;
  std::size_t responses = 0;
};

struct EvaluationReport {
  /// Sorted by (method, trojan).
  std::vector<RateEntry> entries;
  std::vector<MethodSummary> methods;
  std::size_t correct = 0;
  std::size_t total = 0;
  double overall_rate = 0.0;
  double random_baseline = kRandomBaseline;
  double prior_record = kPriorRecord;
};

struct ScoreOptions {
  /// Count only the first response of each session to each item.
  bool dedupe_responders = false;
};

/// Identification rate per (method, trojan) = correct / total responses.
/// Throws NotFound naming every response item id that matches no item.
EvaluationReport score_responses(std::span<const MCQItem> items, std::span<const ResponseRecord> responses,
                                 const ScoreOptions& options = {});

/// `n` uniform answers per item, as records of session "sim-<seed>".
std::vector<ResponseRecord> simulate_random_responses(std::span<const MCQItem> items, int n, std::uint64_t seed);
EvaluationReport simulate_random_responder(std::span<const MCQItem> items, int n, std::uint64_t seed);

/// Writes rates.csv and one chart_<method>.png per method (bars per trojan,
/// horizontal lines at the random baseline and the prior record). Returns the
/// written paths.
std::vector<std::filesystem::path> render_report(const EvaluationReport& report, const std::filesystem::path& dir);

/// Entries of a rates.csv written by render_report.
std::vector<RateEntry> read_rates_csv(const std::filesystem::path& path);

std::string utc_timestamp();
std::string_view to_string(ResponderKind kind);
ResponderKind parse_responder(std::string_view s);

nlohmann::json to_json(const MCQItem& item);
MCQItem mcq_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvaluationReport& report);

}  // namespace trojanscope::harness
