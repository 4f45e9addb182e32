/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The trojanscope Authors */

#ifndef TROJANSCOPE_TROJANSCOPE_H_
#define TROJANSCOPE_TROJANSCOPE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TS_API __declspec(dllexport)
#else
#define TS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ts_status {
  TS_OK = 0,
  TS_INVALID_ARGUMENT = 1,
  TS_NOT_FOUND = 2,
  TS_INGESTION = 3,
  TS_NUMERIC = 4,
  TS_CONTRACT = 5,
  TS_CONFLICT = 6,
  TS_IO = 7,
  TS_INTERNAL = 8
} ts_status;

typedef struct ts_context ts_context;
typedef struct ts_classifier ts_classifier;
typedef struct ts_dataset ts_dataset;
typedef struct ts_server ts_server;

TS_API const char* ts_version(void);
TS_API const char* ts_status_name(ts_status status);

/* Message of the last failed call on this thread; "" after a success. */
TS_API const char* ts_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
TS_API void ts_string_free(char* s);

/* Run context: seed, output directory, dataset and per-command sections.
 * A seed_override other than NULL replaces the "seed" key. */
TS_API ts_status ts_context_from_file(const char* path, const uint64_t* seed_override, ts_context** out);
TS_API ts_status ts_context_from_json(const char* json, const char* base_dir, const uint64_t* seed_override,
                                      ts_context** out);
TS_API void ts_context_destroy(ts_context* ctx);
TS_API ts_status ts_context_output_dir(const ts_context* ctx, char** out);

/* Pipeline commands. `options_json` may be NULL or a JSON object merged over
 * the matching config section; `result_json` receives a JSON summary. */
TS_API ts_status ts_train(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_implant(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_synthesize(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_textcavs(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_feud(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_rfla(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_evaluate(ts_context* ctx, const char* options_json, char** result_json);
TS_API ts_status ts_report(ts_context* ctx, const char* options_json, char** result_json);

/* Quiz server over the quiz written by ts_evaluate. port 0 picks a free port,
 * a negative port or NULL host falls back to the config's "serve" section;
 * the bound port is written to *bound_port. ts_server_start returns once the
 * server accepts connections; ts_server_run blocks until stopped. */
TS_API ts_status ts_server_create(ts_context* ctx, const char* host, int port, ts_server** out, int* bound_port);
TS_API ts_status ts_server_start(ts_server* server);
TS_API ts_status ts_server_run(ts_server* server);
TS_API void ts_server_stop(ts_server* server);
TS_API void ts_server_destroy(ts_server* server);

/* Models. `reference` is a manifest path or a model name under the output
 * directory (latest revision). */
TS_API ts_status ts_classifier_load(ts_context* ctx, const char* reference, ts_classifier** out);
TS_API void ts_classifier_destroy(ts_classifier* model);
TS_API int ts_classifier_num_classes(const ts_classifier* model);
TS_API ts_status ts_classifier_id(const ts_classifier* model, char** out);
/* `pixels` is height x width x 3, row-major, values in [0, 1]. `logits` holds
 * num_classes floats. */
TS_API ts_status ts_classifier_logits(const ts_classifier* model, const float* pixels, int height, int width,
                                      float* logits);
/* With out == NULL only *size is written. */
TS_API ts_status ts_classifier_activations(const ts_classifier* model, const float* pixels, int height, int width,
                                           const char* layer, float* out, size_t* size);

/* Datasets: "desk10", "desk10-probe" or "imagefolder:<root>"; split "train"
 * or "test"; limit 0 loads the whole split. */
TS_API ts_status ts_dataset_load(const char* name, const char* split, size_t limit, ts_dataset** out);
TS_API void ts_dataset_destroy(ts_dataset* data);
TS_API size_t ts_dataset_size(const ts_dataset* data);
/* Copies image `index` into `pixels` (height x width x 3) and its label.
 * With pixels == NULL only the shape and label are written. */
TS_API ts_status ts_dataset_image(const ts_dataset* data, size_t index, float* pixels, int* height, int* width,
                                  int* label);

#ifdef __cplusplus
}
#endif

#endif /* TROJANSCOPE_TROJANSCOPE_H_ */
