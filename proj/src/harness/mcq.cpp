// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "harness/mcq.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "zoo/embedding.hpp"
#include "zoo/errors.hpp"
#include "zoo/image.hpp"
#include "zoo/png_io.hpp"
#include "zoo/rng.hpp"

namespace trojanscope::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

void fill_rect(Image& img, int y0, int x0, int y1, int x1, float r, float g, float b) {
  for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y)
    for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
}

std::string file_stem(const std::string& method) {
  std::string out;
  for (char c : method) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out.empty() ? "method" : out;
}

}  // namespace

void validate(const MCQItem& item) {
  require(!item.item_id.empty(), "MCQ item needs an id");
  require(item.options.size() == kOptionCount, "MCQ item " + item.item_id + " must have exactly 8 options");
  require(item.correct_index >= 0 && item.correct_index < kOptionCount,
          "MCQ item " + item.item_id + " has a correct index outside [0,8)");
  std::set<std::string> seen;
  for (const auto& o : item.options)
    require(seen.insert(normalize_text(o)).second, "MCQ item " + item.item_id + " repeats option '" + o + "'");
}

MCQItem build_mcq(std::string item_id, std::string trojan, std::string true_trigger, std::string method,
                  std::string visualization, std::span<const std::string> pool, std::uint64_t seed) {
  require(!normalize_text(true_trigger).empty(), "true trigger description is empty");
  std::vector<std::string> candidates;
  for (const auto& p : pool)
    if (normalize_text(p) != normalize_text(true_trigger)) candidates.push_back(p);
  if (candidates.size() < kOptionCount - 1)
    throw InvalidArgument("distractor pool too small: need 7 distractors distinct from '" + true_trigger + "', have " +
                          std::to_string(candidates.size()));
  Rng rng(seed, "mcq");
  // partial Fisher-Yates: the first seven slots become the sample
  for (std::size_t i = 0; i < kOptionCount - 1; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(candidates.size()) - 1));
    std::swap(candidates[i], candidates[j]);
  }
  MCQItem item{std::move(item_id), std::move(trojan), std::move(method), std::move(visualization), {}, 0, seed};
  item.options.assign(candidates.begin(), candidates.begin() + (kOptionCount - 1));
  item.options.push_back(true_trigger);
  std::set<std::string> seen;
  for (const auto& o : item.options)
    if (!seen.insert(normalize_text(o)).second) throw InvalidArgument("duplicate option after sampling: '" + o + "'");
  rng.shuffle(std::span<std::string>(item.options));
  item.correct_index = static_cast<int>(std::find(item.options.begin(), item.options.end(), true_trigger) - item.options.begin());
  validate(item);
  return item;
}

EvaluationReport score_responses(std::span<const MCQItem> items, std::span<const ResponseRecord> responses,
                                 const ScoreOptions& options) {
  std::map<std::string, const MCQItem*> by_id;
  for (const auto& item : items) {
    validate(item);
    if (!by_id.emplace(item.item_id, &item).second) throw InvalidArgument("duplicate item id: " + item.item_id);
  }
  std::set<std::string> orphans;
  for (const auto& r : responses)
    if (!by_id.contains(r.item_id)) orphans.insert(r.item_id);
  if (!orphans.empty()) {
    std::string list;
    for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o;
    throw NotFound("responses reference unknown items: " + list);
  }

  std::map<std::pair<std::string, std::string>, RateEntry> cells;
  for (const auto& item : items) {
    auto& e = cells[{item.method, item.trojan}];
    e.method = item.method;
    e.trojan = item.trojan;
  }
  std::set<std::pair<std::string, std::string>> answered;
  EvaluationReport report;
  for (const auto& r : responses) {
    require(r.chosen_index >= 0 && r.chosen_index < kOptionCount, "response index outside [0,8)");
    if (options.dedupe_responders && !answered.insert({r.session_id, r.item_id}).second) continue;
    const MCQItem& item = *by_id.at(r.item_id);
    auto& e = cells[{item.method, item.trojan}];
    const bool hit = r.chosen_index == item.correct_index;
    e.correct += hit;
    ++e.total;
    report.correct += hit;
    ++report.total;
  }
  std::map<std::string, std::pair<double, std::size_t>> per_method;  // sum of rates, count of cells
  std::map<std::string, std::size_t> method_responses;
  for (auto& [key, e] : cells) {
    e.rate = e.total ? static_cast<double>(e.correct) / static_cast<double>(e.total) : 0.0;
    report.entries.push_back(e);
    if (e.total) {
      per_method[e.method].first += e.rate;
      ++per_method[e.method].second;
    }
    method_responses[e.method] += e.total;
  }
  for (const auto& [method, n] : method_responses) {
    const auto it = per_method.find(method);
    const double mean = it == per_method.end() ? 0.0 : it->second.first / static_cast<double>(it->second.second);
    report.methods.push_back({method, mean, n});
  }
  report.overall_rate = report.total ? static_cast<double>(report.correct) / static_cast<double>(report.total) : 0.0;
  return report;
}

std::vector<ResponseRecord> simulate_random_responses(std::span<const MCQItem> items, int n, std::uint64_t seed) {
  require(n >= 1, "simulated responder needs n >= 1");
  std::vector<ResponseRecord> out;
  out.reserve(items.size() * static_cast<std::size_t>(n));
  const std::string session = "sim-" + std::to_string(seed);
  const std::string stamp = utc_timestamp();
  for (const auto& item : items) {
    Rng rng(seed, "responder:" + item.item_id);
    for (int k = 0; k < n; ++k)
      out.push_back({session, item.item_id, static_cast<int>(rng.uniform_int(0, kOptionCount - 1)), stamp,
                     ResponderKind::kSimulated});
  }
  return out;
}

EvaluationReport simulate_random_responder(std::span<const MCQItem> items, int n, std::uint64_t seed) {
  const auto responses = simulate_random_responses(items, n, seed);
  return score_responses(items, responses);
}

std::vector<fs::path> render_report(const EvaluationReport& report, const fs::path& dir) {
  require(!report.entries.empty(), "cannot render an empty report");
  fs::create_directories(dir);
  std::vector<fs::path> written;
  const fs::path csv = dir / "rates.csv";
  {
    std::ofstream out(csv);
    if (!out) throw IoError("cannot write " + csv.string());
    out << "method,trojan,correct,total,rate\n";
    char rate[64];
    for (const auto& e : report.entries) {
      std::snprintf(rate, sizeof rate, "%.17g", e.rate);
      out << csv_field(e.method) << ',' << csv_field(e.trojan) << ',' << e.correct << ',' << e.total << ',' << rate
          << '\n';
    }
  }
  written.push_back(csv);

  std::map<std::string, std::vector<const RateEntry*>> by_method;
  for (const auto& e : report.entries) by_method[e.method].push_back(&e);
  constexpr int kHeight = 200, kBar = 16, kGap = 6, kMargin = 10;
  for (const auto& [method, entries] : by_method) {
    const int width = 2 * kMargin + static_cast<int>(entries.size()) * (kBar + kGap);
    Image chart(kHeight, width, 3, 1.0f);
    const int plot = kHeight - 2 * kMargin;
    auto y_of = [&](double rate) { return kMargin + static_cast<int>(std::lround((1.0 - rate) * plot)); };
    fill_rect(chart, kHeight - kMargin, 0, kHeight - kMargin + 1, width, 0, 0, 0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const int x = kMargin + static_cast<int>(i) * (kBar + kGap);
      fill_rect(chart, y_of(entries[i]->rate), x, kHeight - kMargin, x + kBar, 0.25f, 0.45f, 0.8f);
    }
    const int base = y_of(report.random_baseline), record = y_of(report.prior_record);
    fill_rect(chart, base, 0, base + 1, width, 0.4f, 0.4f, 0.4f);
    fill_rect(chart, record, 0, record + 1, width, 0.85f, 0.15f, 0.15f);
    const fs::path png = dir / ("chart_" + file_stem(method) + ".png");
    write_png(png, chart);
    written.push_back(png);
  }
  return written;
}

std::vector<RateEntry> read_rates_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "method,trojan,correct,total,rate") throw IngestionError("unexpected header in " + path.string());
  std::vector<RateEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 5) throw IngestionError("malformed row in " + path.string() + ": " + line);
    out.push_back({f[0], f[1], std::stoul(f[2]), std::stoul(f[3]), std::strtod(f[4].c_str(), nullptr)});
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string_view to_string(ResponderKind kind) { return kind == ResponderKind::kHuman ? "human" : "simulated"; }

ResponderKind parse_responder(std::string_view s) {
  if (s == "human") return ResponderKind::kHuman;
  if (s == "simulated") return ResponderKind::kSimulated;
  throw InvalidArgument("unknown responder kind: " + std::string(s));
}

json to_json(const MCQItem& i) {
  return {{"item_id", i.item_id},
          {"trojan", i.trojan},
          {"method", i.method},
          {"visualization", i.visualization},
          {"options", i.options},
          {"correct_index", i.correct_index},
          {"shuffle_seed", i.shuffle_seed}};
}

MCQItem mcq_from_json(const json& j) {
  MCQItem i;
  i.item_id = j.at("item_id").get<std::string>();
  i.trojan = j.at("trojan").get<std::string>();
  i.method = j.at("method").get<std::string>();
  i.visualization = j.value("visualization", std::string{});
  i.options = j.at("options").get<std::vector<std::string>>();
  i.correct_index = j.at("correct_index").get<int>();
  i.shuffle_seed = j.value("shuffle_seed", std::uint64_t{0});
  validate(i);
  return i;
}

json to_json(const ResponseRecord& r) {
  return {{"session_id", r.session_id},
          {"item_id", r.item_id},
          {"chosen_index", r.chosen_index},
          {"timestamp", r.timestamp},
          {"responder", to_string(r.responder)}};
}

ResponseRecord response_from_json(const json& j) {
  ResponseRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.item_id = j.at("item_id").get<std::string>();
  r.chosen_index = j.at("chosen_index").get<int>();
  r.timestamp = j.value("timestamp", std::string{});
  r.responder = parse_responder(j.value("responder", std::string("human")));
  return r;
}

json to_json(const EvaluationReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries)
    entries.push_back({{"method", e.method}, {"trojan", e.trojan}, {"correct", e.correct}, {"total", e.total}, {"rate", e.rate}});
  json methods = json::array();
  for (const auto& m : report.methods)
    methods.push_back({{"method", m.method}, {"mean_rate", m.mean_rate}, {"responses", m.responses}});
  return {{"entries", entries},
          {"methods", methods},
          {"correct", report.correct},
          {"total", report.total},
          {"overall_rate", report.overall_rate},
          {"reference", {{"random_baseline", report.random_baseline}, {"prior_record", report.prior_record}}}};
}

}  // namespace trojanscope::harness
