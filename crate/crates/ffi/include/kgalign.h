#ifndef KGALIGN_H
#define KGALIGN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Alignment direction of a metrics query.
 */
typedef enum KgaDirection {
  KGA_DIRECTION_LEFT_TO_RIGHT = 0,
  KGA_DIRECTION_RIGHT_TO_LEFT = 1,
  KGA_DIRECTION_MEAN = 2,
} KgaDirection;

/*
 Result code of every fallible call; `KGA_STATUS_OK` is zero.
 */
typedef enum KgaStatus {
  KGA_STATUS_OK = 0,
  KGA_STATUS_NULL_POINTER = 1,
  KGA_STATUS_INVALID_UTF8 = 2,
  KGA_STATUS_CONFIG = 3,
  KGA_STATUS_DATASET = 4,
  KGA_STATUS_IO = 5,
  KGA_STATUS_NUMERIC = 6,
  KGA_STATUS_SHAPE = 7,
  KGA_STATUS_INVALID_INPUT = 8,
  KGA_STATUS_SERIALIZATION = 9,
  KGA_STATUS_PANIC = 10,
} KgaStatus;

/*
 A parsed run configuration.
 */
typedef struct KgaConfig KgaConfig;

/*
 A loaded graph pair.
 */
typedef struct KgaPair KgaPair;

/*
 The report of a finished run.
 */
typedef struct KgaReport KgaReport;

/*
 Size of one graph of a pair.
 */
typedef struct KgaSideStatistics {
  size_t triples;
  size_t entities;
  size_t relations;
} KgaSideStatistics;

typedef struct KgaStatistics {
  struct KgaSideStatistics left;
  struct KgaSideStatistics right;
  size_t alignments;
} KgaStatistics;

/*
 Ranking metrics; hits are percentages, MRR is in [0, 1].
 */
typedef struct KgaMetrics {
  size_t n_queries;
  double hits_at_1;
  double hits_at_10;
  double hits_at_50;
  double mean_rank;
  double mrr;
} KgaMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next call into this library from the same thread.
 */
const char *kga_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *kga_version(void);

/*
 Loads a benchmark pair from `root` (a `<family>/<subset>` directory).

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum KgaStatus kga_pair_load(const char *family,
                             const char *subset,
                             const char *root,
                             struct KgaPair **out);

/*
 Two identical `nodes`-cycles with `seeds` train alignments.

 # Safety
 `out` must be writable.
 */
enum KgaStatus kga_pair_toy_cycles(size_t nodes, size_t seeds, struct KgaPair **out);

/*
 # Safety
 `pair` must come from this library; `out` must be writable.
 */
enum KgaStatus kga_pair_statistics(const struct KgaPair *pair, struct KgaStatistics *out);

/*
 # Safety
 `pair` must come from this library (or be NULL) and not be used afterwards.
 */
void kga_pair_free(struct KgaPair *pair);

/*
 Parses a `key = value` run configuration.

 # Safety
 `text` must be NUL-terminated; `out` must be writable.
 */
enum KgaStatus kga_config_parse(const char *text, struct KgaConfig **out);

/*
 Full resolved config text; free with [`kga_string_free`].

 # Safety
 `config` must come from this library.
 */
char *kga_config_to_text(const struct KgaConfig *config);

/*
 Content hash naming the run directory; free with [`kga_string_free`].

 # Safety
 `config` must come from this library.
 */
char *kga_config_run_id(const struct KgaConfig *config);

/*
 # Safety
 `config` must come from this library (or be NULL) and not be used afterwards.
 */
void kga_config_free(struct KgaConfig *config);

/*
 Trains and evaluates. With `persist` non-zero the artifacts are written
 under the config's output directory. `data_root` may be NULL.

 # Safety
 `config` must come from this library; `out` must be writable.
 */
enum KgaStatus kga_run(const struct KgaConfig *config,
                       const char *data_root,
                       int32_t persist,
                       struct KgaReport **out);

/*
 Test-split metrics of one direction.

 # Safety
 `report` must come from this library; `out` must be writable.
 */
enum KgaStatus kga_report_test_metrics(const struct KgaReport *report,
                                       enum KgaDirection direction,
                                       struct KgaMetrics *out);

/*
 The whole report as JSON; free with [`kga_string_free`].

 # Safety
 `report` must come from this library.
 */
char *kga_report_json(const struct KgaReport *report);

/*
 # Safety
 `report` must come from this library (or be NULL) and not be used afterwards.
 */
void kga_report_free(struct KgaReport *report);

/*
 # Safety
 `s` must be a string returned by this library (or NULL).
 */
void kga_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGALIGN_H */
