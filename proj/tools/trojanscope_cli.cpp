// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "trojanscope/trojanscope.h"

namespace {

ts_server* g_server = nullptr;

void on_signal(int) {
  if (g_server) ts_server_stop(g_server);
}

int report_failure(ts_status status) {
  std::cerr << "trojanscope: " << ts_status_name(status) << ": " << ts_last_error() << '\n';
  return static_cast<int>(status);
}

using CommandFn = ts_status (*)(ts_context*, const char*, char**);

int run(CommandFn fn, ts_context* ctx, const std::string& options) {
  char* result = nullptr;
  const ts_status st = fn(ctx, options.empty() ? nullptr : options.c_str(), &result);
  if (st != TS_OK) return report_failure(st);
  std::cout << nlohmann::json::parse(result).dump(2) << '\n';
  ts_string_free(result);
  return 0;
}

int serve(ts_context* ctx, const std::string& host, int port) {
  int bound = 0;
  ts_status st = ts_server_create(ctx, host.empty() ? nullptr : host.c_str(), port, &g_server, &bound);
  if (st != TS_OK) return report_failure(st);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving on port " << bound << std::endl;
  st = ts_server_run(g_server);
  ts_server_destroy(g_server);
  g_server = nullptr;
  return st == TS_OK ? 0 : report_failure(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trojanscope: implant, visualize and evaluate trojans in image classifiers"};
  app.set_version_flag("--version", std::string(ts_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string options;
  app.add_option("-c,--config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed; overrides the config");
  app.add_option("--options", options, "JSON object merged over the command's config section");

  struct Entry {
    const char* name;
    const char* help;
    CommandFn fn;
  };
  const Entry entries[] = {
      {"train", "train the benign classifier, the joint encoder or the patch generator", &ts_train},
      {"implant", "train a classifier with the trojans of a spec table", &ts_implant},
      {"synthesize", "prototype generation for the target classes", &ts_synthesize},
      {"textcavs", "rank vocabulary concepts by differential class sensitivity", &ts_textcavs},
      {"feud", "estimate, describe and refine trojan patches", &ts_feud},
      {"rfla", "fine-tune the patch generator and select natural-looking triggers", &ts_rfla},
      {"evaluate", "build the multiple-choice quiz from the visualizations", &ts_evaluate},
      {"report", "score the response log and render charts", &ts_report},
  };
  std::string kind;
  CLI::App* train = nullptr;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    if (std::string(e.name) == "train") train = sub;
  }
  train->add_option("--kind", kind, "classifier | embedder | generator")
      ->check(CLI::IsMember({"classifier", "embedder", "generator"}));

  std::string host;
  int port = -1;
  CLI::App* serve_cmd = app.add_subcommand("serve", "serve the quiz and the response API over HTTP");
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one; default from the config, else 8080)");
  serve_cmd->add_option("--host", host, "bind address (default from the config, else 127.0.0.1)");

  CLI11_PARSE(app, argc, argv);

  if (!kind.empty()) {
    auto j = options.empty() ? nlohmann::json::object() : nlohmann::json::parse(options, nullptr, false);
    if (!j.is_object()) {
      std::cerr << "trojanscope: --options must be a JSON object\n";
      return 1;
    }
    j["kind"] = kind;
    options = j.dump();
  }

  ts_context* ctx = nullptr;
  const std::uint64_t seed_value = seed.value_or(0);
  const ts_status st = ts_context_from_file(config_path.c_str(), seed ? &seed_value : nullptr, &ctx);
  if (st != TS_OK) return report_failure(st);

  int code = 0;
  if (serve_cmd->parsed()) {
    code = serve(ctx, host, port);
  } else {
    for (const auto& e : entries)
      if (app.got_subcommand(e.name)) code = run(e.fn, ctx, options);
  }
  ts_context_destroy(ctx);
  return code;
}
