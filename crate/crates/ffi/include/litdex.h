#ifndef LITDEX_H
#define LITDEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LitdexStatus {
  LITDEX_STATUS_OK = 0,
  LITDEX_STATUS_NULL_ARGUMENT = 1,
  LITDEX_STATUS_INVALID_UTF8 = 2,
  LITDEX_STATUS_IO = 3,
  LITDEX_STATUS_CORPUS = 4,
  LITDEX_STATUS_INDEX = 5,
  LITDEX_STATUS_CONFIG = 6,
  LITDEX_STATUS_INVALID_REQUEST = 7,
  LITDEX_STATUS_NOT_FOUND = 8,
  LITDEX_STATUS_ENGINE = 9,
  LITDEX_STATUS_PANIC = 10,
} LitdexStatus;

// Opaque search engine handle.
typedef struct LitdexEngine LitdexEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Build an index from a JSONL corpus and persist it to `out_dir`.
//
// `scheme` is `abstract`, `fulltext` or `paragraph`. When `n_units_out` is
// non-null it receives the number of indexed units.
//
// # Safety
// String arguments must be null or NUL-terminated; `n_units_out` must be null
// or point to writable memory.
enum LitdexStatus litdex_build_index(const char *corpus_path,
                                     const char *scheme,
                                     const char *out_dir,
                                     size_t *n_units_out);

// Load a persisted index and open an engine over it.
//
// `config_toml` may be null for defaults; otherwise it uses the service
// config keys (scorer, embedder, window, ...). `index_path` and `bind` in it
// are ignored.
//
// # Safety
// String arguments must be null or NUL-terminated; `engine_out` must point
// to writable memory.
enum LitdexStatus litdex_engine_open(const char *index_dir,
                                     const char *config_toml,
                                     struct LitdexEngine **engine_out);

// Release an engine. Null is a no-op.
//
// # Safety
// `engine` must come from [`litdex_engine_open`] and not be used afterwards.
void litdex_engine_free(struct LitdexEngine *engine);

// Number of retrieval units in the engine's index; 0 for a null handle.
//
// # Safety
// `engine` must be null or a live handle.
size_t litdex_engine_unit_count(const struct LitdexEngine *engine);

// Run a search given a URL query string (`q=...&year_from=...&rerank=...`,
// the same parameters as `GET /api/search`) and return the response JSON.
//
// # Safety
// `engine` must be a live handle; `query_string` NUL-terminated; `json_out`
// writable. The returned string is freed with [`litdex_string_free`].
enum LitdexStatus litdex_engine_search(const struct LitdexEngine *engine,
                                       const char *query_string,
                                       char **json_out);

// Return the stored article record as JSON.
//
// # Safety
// Same contract as [`litdex_engine_search`].
enum LitdexStatus litdex_engine_article(const struct LitdexEngine *engine,
                                        const char *article_id,
                                        char **json_out);

// Probability of relevance from the logits of the "true" and "false" tokens.
double litdex_relevance_probability(double logit_true, double logit_false);

// Release a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void litdex_string_free(char *s);

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *litdex_last_error(void);

// Library version as a static NUL-terminated string.
const char *litdex_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LITDEX_H */
