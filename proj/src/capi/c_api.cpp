// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "trojanscope/trojanscope.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "capi/pipeline.hpp"
#include "harness/server.hpp"
#include "zoo/datasets.hpp"
#include "zoo/errors.hpp"

using trojanscope::Error;
using trojanscope::ErrorCode;
using nlohmann::json;
namespace fs = std::filesystem;
namespace pipeline = trojanscope::pipeline;

struct ts_context {
  trojanscope::RunConfig config;
};

struct ts_classifier {
  trojanscope::Classifier model;
  trojanscope::ModelManifest manifest;
};

struct ts_dataset {
  std::vector<trojanscope::LabeledImage> images;
};

struct ts_server {
  std::unique_ptr<trojanscope::harness::HarnessService> service;
  std::unique_ptr<trojanscope::harness::HarnessServer> server;
};

namespace {

thread_local std::string g_last_error;

ts_status fail(ts_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
ts_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TS_OK;
  } catch (const Error& e) {
    return fail(static_cast<ts_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(TS_INVALID_ARGUMENT, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(TS_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(TS_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TS_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require_ptr(const void* p, const char* name) {
  if (!p) throw trojanscope::InvalidArgument(std::string(name) + " must not be NULL");
}

json parse_options(const char* text) {
  if (!text || !*text) return json::object();
  return json::parse(text);
}

trojanscope::RunConfig apply_seed(trojanscope::RunConfig cfg, const uint64_t* seed) {
  if (seed) {
    cfg.seed = *seed;
    cfg.document["seed"] = *seed;
  }
  return cfg;
}

using Command = json (*)(const trojanscope::RunConfig&, const json&);

ts_status run_command(Command command, ts_context* ctx, const char* options_json, char** result_json) {
  return guarded([&] {
    require_ptr(ctx, "ctx");
    require_ptr(result_json, "result_json");
    *result_json = nullptr;
    const json result = command(ctx->config, parse_options(options_json));
    *result_json = copy_string(result.dump());
  });
}

trojanscope::Image to_image(const float* pixels, int height, int width) {
  require_ptr(pixels, "pixels");
  if (height <= 0 || width <= 0) throw trojanscope::InvalidArgument("image dimensions must be positive");
  trojanscope::Image img(height, width, 3);
  std::memcpy(img.data().data(), pixels, img.size() * sizeof(float));
  return img;
}

}  // namespace

extern "C" {

const char* ts_version(void) { return "0.3.0"; }

const char* ts_status_name(ts_status status) {
  switch (status) {
    case TS_OK: return "ok";
    case TS_INVALID_ARGUMENT: return "invalid_argument";
    case TS_NOT_FOUND: return "not_found";
    case TS_INGESTION: return "ingestion";
    case TS_NUMERIC: return "numeric";
    case TS_CONTRACT: return "contract";
    case TS_CONFLICT: return "conflict";
    case TS_IO: return "io";
    case TS_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ts_last_error(void) { return g_last_error.c_str(); }

void ts_string_free(char* s) { std::free(s); }

ts_status ts_context_from_file(const char* path, const uint64_t* seed_override, ts_context** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = new ts_context{apply_seed(trojanscope::load_run_config(path), seed_override)};
  });
}

ts_status ts_context_from_json(const char* text, const char* base_dir, const uint64_t* seed_override,
                               ts_context** out) {
  return guarded([&] {
    require_ptr(text, "json");
    require_ptr(out, "out");
    auto cfg = trojanscope::RunConfig::from_json(json::parse(text));
    if (base_dir) cfg.base_dir = base_dir;
    cfg.output_dir = cfg.resolve(cfg.output_dir);
    *out = new ts_context{apply_seed(std::move(cfg), seed_override)};
  });
}

void ts_context_destroy(ts_context* ctx) { delete ctx; }

ts_status ts_context_output_dir(const ts_context* ctx, char** out) {
  return guarded([&] {
    require_ptr(ctx, "ctx");
    require_ptr(out, "out");
    *out = copy_string(ctx->config.output_dir.string());
  });
}

ts_status ts_train(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::train, ctx, o, r); }
ts_status ts_implant(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::implant, ctx, o, r); }
ts_status ts_synthesize(ts_context* ctx, const char* o, char** r) {
  return run_command(&pipeline::synthesize, ctx, o, r);
}
ts_status ts_textcavs(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::textcavs, ctx, o, r); }
ts_status ts_feud(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::feud, ctx, o, r); }
ts_status ts_rfla(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::rfla, ctx, o, r); }
ts_status ts_evaluate(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::evaluate, ctx, o, r); }
ts_status ts_report(ts_context* ctx, const char* o, char** r) { return run_command(&pipeline::report, ctx, o, r); }

ts_status ts_server_create(ts_context* ctx, const char* host, int port, ts_server** out, int* bound_port) {
  return guarded([&] {
    require_ptr(ctx, "ctx");
    require_ptr(out, "out");
    const auto& cfg = ctx->config;
    const json s = cfg.section("serve");
    fs::path assets;
    if (s.contains("assets")) assets = cfg.resolve(s.at("assets").get<std::string>());
    auto srv = std::make_unique<ts_server>();
    srv->service = std::make_unique<trojanscope::harness::HarnessService>(
        trojanscope::harness::load_quiz(pipeline::quiz_path(cfg)), pipeline::responses_path(cfg));
    srv->server = std::make_unique<trojanscope::harness::HarnessServer>(*srv->service, assets);
    if (port < 0) port = s.value("port", 8080);
    std::string h = host ? host : s.value("host", std::string("127.0.0.1"));
    const int p = srv->server->bind(h, port);
    if (bound_port) *bound_port = p;
    *out = srv.release();
  });
}

ts_status ts_server_start(ts_server* server) {
  return guarded([&] {
    require_ptr(server, "server");
    server->server->start();
  });
}

ts_status ts_server_run(ts_server* server) {
  return guarded([&] {
    require_ptr(server, "server");
    server->server->listen();
  });
}

void ts_server_stop(ts_server* server) {
  if (server) server->server->stop();
}

void ts_server_destroy(ts_server* server) { delete server; }

ts_status ts_classifier_load(ts_context* ctx, const char* reference, ts_classifier** out) {
  return guarded([&] {
    require_ptr(ctx, "ctx");
    require_ptr(reference, "reference");
    require_ptr(out, "out");
    auto [model, manifest] = pipeline::load_classifier(ctx->config, reference);
    *out = new ts_classifier{std::move(model), std::move(manifest)};
  });
}

void ts_classifier_destroy(ts_classifier* model) { delete model; }

int ts_classifier_num_classes(const ts_classifier* model) { return model ? model->model.num_classes() : 0; }

ts_status ts_classifier_id(const ts_classifier* model, char** out) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(out, "out");
    *out = copy_string(model->model.model_id());
  });
}

ts_status ts_classifier_logits(const ts_classifier* model, const float* pixels, int height, int width,
                               float* logits) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(logits, "logits");
    const auto out = model->model.logits(to_image(pixels, height, width));
    std::copy(out.begin(), out.end(), logits);
  });
}

ts_status ts_classifier_activations(const ts_classifier* model, const float* pixels, int height, int width,
                                    const char* layer, float* out, size_t* size) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(layer, "layer");
    require_ptr(size, "size");
    if (!model->model.has_probe_layer(layer))
      throw trojanscope::NotFound(std::string("no probe layer \"") + layer + "\"");
    if (!out) {
      *size = model->model.activation_dim(layer, height, width);
      return;
    }
    const auto act = model->model.activations(to_image(pixels, height, width), layer);
    if (*size < act.size()) throw trojanscope::InvalidArgument("activation buffer too small");
    std::copy(act.begin(), act.end(), out);
    *size = act.size();
  });
}

ts_status ts_dataset_load(const char* name, const char* split, size_t limit, ts_dataset** out) {
  return guarded([&] {
    require_ptr(name, "name");
    require_ptr(split, "split");
    require_ptr(out, "out");
    *out = new ts_dataset{trojanscope::load_dataset(name, trojanscope::parse_split(split), limit)};
  });
}

void ts_dataset_destroy(ts_dataset* data) { delete data; }

size_t ts_dataset_size(const ts_dataset* data) { return data ? data->images.size() : 0; }

ts_status ts_dataset_image(const ts_dataset* data, size_t index, float* pixels, int* height, int* width,
                           int* label) {
  return guarded([&] {
    require_ptr(data, "data");
    if (index >= data->images.size()) throw trojanscope::InvalidArgument("image index out of range");
    const auto& img = data->images[index];
    if (height) *height = img.pixels.height();
    if (width) *width = img.pixels.width();
    if (label) *label = img.label;
    if (pixels) std::copy(img.pixels.data().begin(), img.pixels.data().end(), pixels);
  });
}

}  // extern "C"
