/* Copyright 2026 The DLRM Kernels Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface to the DLRM library. Objects are opaque handles created and
 * destroyed through this API. Every fallible call returns a dlrm_status; on
 * failure dlrm_last_error() describes the problem.
 *
 * Strings are returned through (buf, cap, needed): *needed receives the size
 * including the terminating NUL, and buf is filled only when cap >= *needed.
 */

#ifndef DLRM_DLRM_H_
#define DLRM_DLRM_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define DLRM_API __attribute__((visibility("default")))

typedef enum dlrm_status {
  DLRM_OK = 0,
  DLRM_ERR_INVALID_ARGUMENT = 1,
  DLRM_ERR_DIMENSION_MISMATCH = 2,
  DLRM_ERR_OUT_OF_RANGE = 3,
  DLRM_ERR_PARSE = 4,
  DLRM_ERR_IO = 5,
  DLRM_ERR_INTERNAL = 6
} dlrm_status;

typedef struct dlrm_run dlrm_run;
typedef struct dlrm_report dlrm_report;
typedef struct dlrm_trace_profile dlrm_trace_profile;

/* Receives each metric record, already formatted per --emit, without a
 * trailing newline. */
typedef void (*dlrm_line_fn)(const char* line, void* user);

DLRM_API const char* dlrm_status_string(dlrm_status status);

/* Message of the last failed call on this thread; empty if none. */
DLRM_API const char* dlrm_last_error(void);

/* ---- runs ---------------------------------------------------------------- */

/* Parses command-line flags (argv[0] is not skipped). */
DLRM_API dlrm_status dlrm_run_parse(int argc, const char* const* argv, dlrm_run** out);
DLRM_API void dlrm_run_destroy(dlrm_run* run);

/* 1 when the flags asked for --help; dlrm_run_help then returns the text. */
DLRM_API int dlrm_run_wants_help(const dlrm_run* run);
DLRM_API dlrm_status dlrm_run_help(const dlrm_run* run, char* buf, size_t cap, size_t* needed);

/* 1 when records and reports are emitted as JSON lines. */
DLRM_API int dlrm_run_emits_json(const dlrm_run* run);

/* Canonical flag string that parses back to the same run. */
DLRM_API dlrm_status dlrm_run_describe(const dlrm_run* run, char* buf, size_t cap,
                                       size_t* needed);

/* Parameter counts derived from the config, without allocating the model. */
DLRM_API dlrm_status dlrm_run_param_counts(const dlrm_run* run, uint64_t* embedding,
                                           uint64_t* total);

DLRM_API dlrm_status dlrm_run_train(const dlrm_run* run, dlrm_line_fn on_record, void* user,
                                    dlrm_report** out);
DLRM_API dlrm_status dlrm_run_benchmark(const dlrm_run* run, dlrm_line_fn on_record,
                                        void* user, dlrm_report** out);

/* ---- reports ------------------------------------------------------------- */

/* Profiling report in the run's emit format. */
DLRM_API dlrm_status dlrm_report_render(const dlrm_report* report, char* buf, size_t cap,
                                        size_t* needed);
/* 1 when the run was profiled and the report carries per-operator times. */
DLRM_API int dlrm_report_profiled(const dlrm_report* report);
DLRM_API size_t dlrm_report_num_records(const dlrm_report* report);
DLRM_API dlrm_status dlrm_report_record(const dlrm_report* report, size_t i,
                                        size_t* iteration, int* is_validation, double* loss,
                                        double* accuracy);
DLRM_API double dlrm_report_wall_seconds(const dlrm_report* report);
DLRM_API double dlrm_report_attributed_seconds(const dlrm_report* report);
DLRM_API void dlrm_report_destroy(dlrm_report* report);

/* ---- access traces ------------------------------------------------------- */

DLRM_API dlrm_status dlrm_trace_profile_build(const int64_t* trace, size_t length,
                                              dlrm_trace_profile** out);
DLRM_API dlrm_status dlrm_trace_profile_load(const char* path, dlrm_trace_profile** out);
DLRM_API dlrm_status dlrm_trace_profile_save(const dlrm_trace_profile* profile,
                                             const char* path);
DLRM_API size_t dlrm_trace_profile_num_unique(const dlrm_trace_profile* profile);

/* Raises the first-touch probability to `threshold`; a negative threshold
 * picks the default for a trace of `target_length`. */
DLRM_API dlrm_status dlrm_trace_profile_adjust(const dlrm_trace_profile* profile,
                                               double threshold, size_t target_length,
                                               dlrm_trace_profile** out);

/* Writes `length` ids sampled from the profile into out. */
DLRM_API dlrm_status dlrm_trace_generate(const dlrm_trace_profile* profile, size_t length,
                                         uint64_t seed, int64_t* out);
DLRM_API dlrm_status dlrm_trace_total_variation(const dlrm_trace_profile* a,
                                                const dlrm_trace_profile* b, double* out);
DLRM_API dlrm_status dlrm_trace_lru_hit_rate(const int64_t* trace, size_t length,
                                             size_t capacity, double* out);
DLRM_API void dlrm_trace_profile_destroy(dlrm_trace_profile* profile);

/* ---- sparse batches ------------------------------------------------------ */

/* offsets_out must hold num_lookups + 1 entries. */
DLRM_API dlrm_status dlrm_offsets_from_lengths(const int64_t* lengths, size_t num_lookups,
                                               int64_t* offsets_out);

#ifdef __cplusplus
}
#endif

#endif /* DLRM_DLRM_H_ */
