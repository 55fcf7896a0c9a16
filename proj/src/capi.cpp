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

#include "dlrm/dlrm.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "dlrm/error.hpp"
#include "dlrm/runner.hpp"
#include "dlrm/trace.hpp"

struct dlrm_run {
  dlrm::ParsedArgs args;
};

struct dlrm_report {
  dlrm::RunReport report;
  dlrm::EmitFormat format;
};

struct dlrm_trace_profile {
  dlrm::TraceProfile profile;
};

namespace {

thread_local std::string last_error;

template <class F>
dlrm_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return DLRM_OK;
  } catch (const dlrm::Error& e) {
    last_error = e.what();
    return static_cast<dlrm_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DLRM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DLRM_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return DLRM_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw dlrm::Error(dlrm::ErrorCode::kInvalidArgument, what);
}

void copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  require(needed != nullptr, "needed must not be null");
  *needed = s.size() + 1;
  if (buf != nullptr && cap >= *needed) std::memcpy(buf, s.c_str(), s.size() + 1);
}

dlrm_status run_with(const dlrm_run* run, dlrm_line_fn on_record, void* user,
                     dlrm_report** out, bool benchmark) {
  return guarded([&] {
    require(run != nullptr && out != nullptr, "run and out must not be null");
    require(!run->args.help, "run holds a help request, not a configuration");
    const auto& o = run->args.options;
    dlrm::RecordSink sink;
    if (on_record) {
      sink = [&](const dlrm::MetricRecord& r) {
        on_record(dlrm::format_record(r, o.emit).c_str(), user);
      };
    }
    auto report = std::make_unique<dlrm_report>();
    report->format = o.emit;
    report->report = benchmark ? dlrm::run_benchmark(run->args.config, o, sink)
                               : dlrm::run_training(run->args.config, o, sink);
    *out = report.release();
  });
}

}  // namespace

extern "C" {

const char* dlrm_status_string(dlrm_status status) {
  switch (status) {
    case DLRM_OK: return "ok";
    case DLRM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DLRM_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case DLRM_ERR_OUT_OF_RANGE: return "out of range";
    case DLRM_ERR_PARSE: return "parse error";
    case DLRM_ERR_IO: return "i/o error";
    case DLRM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* dlrm_last_error(void) { return last_error.c_str(); }

dlrm_status dlrm_run_parse(int argc, const char* const* argv, dlrm_run** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    require(argc >= 0 && (argc == 0 || argv != nullptr), "argv must not be null");
    std::vector<std::string> args;
    for (int i = 0; i < argc; ++i) {
      require(argv[i] != nullptr, "argv entries must not be null");
      args.emplace_back(argv[i]);
    }
    auto run = std::make_unique<dlrm_run>();
    run->args = dlrm::parse_args(args);
    *out = run.release();
  });
}

void dlrm_run_destroy(dlrm_run* run) { delete run; }

int dlrm_run_wants_help(const dlrm_run* run) {
  return run != nullptr && run->args.help.has_value();
}

dlrm_status dlrm_run_help(const dlrm_run* run, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(run != nullptr && run->args.help, "run holds no help text");
    copy_out(*run->args.help, buf, cap, needed);
  });
}

int dlrm_run_emits_json(const dlrm_run* run) {
  return run != nullptr && run->args.options.emit == dlrm::EmitFormat::kJson;
}

dlrm_status dlrm_run_describe(const dlrm_run* run, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(run != nullptr && !run->args.help, "run holds no configuration");
    std::string s;
    for (const auto& a : dlrm::to_args(run->args.config, run->args.options)) {
      if (!s.empty()) s += ' ';
      s += a;
    }
    copy_out(s, buf, cap, needed);
  });
}

dlrm_status dlrm_run_param_counts(const dlrm_run* run, uint64_t* embedding, uint64_t* total) {
  return guarded([&] {
    require(run != nullptr && !run->args.help, "run holds no configuration");
    const auto& c = run->args.config;
    if (embedding) *embedding = dlrm::embedding_param_count(c);
    if (total) *total = dlrm::param_count(c);
  });
}

dlrm_status dlrm_run_train(const dlrm_run* run, dlrm_line_fn on_record, void* user,
                           dlrm_report** out) {
  return run_with(run, on_record, user, out, false);
}

dlrm_status dlrm_run_benchmark(const dlrm_run* run, dlrm_line_fn on_record, void* user,
                               dlrm_report** out) {
  return run_with(run, on_record, user, out, true);
}

dlrm_status dlrm_report_render(const dlrm_report* report, char* buf, size_t cap,
                               size_t* needed) {
  return guarded([&] {
    require(report != nullptr, "report must not be null");
    copy_out(dlrm::format_report(report->report, report->format), buf, cap, needed);
  });
}

int dlrm_report_profiled(const dlrm_report* report) {
  return report != nullptr && report->report.profiled;
}

size_t dlrm_report_num_records(const dlrm_report* report) {
  return report ? report->report.records.size() : 0;
}

dlrm_status dlrm_report_record(const dlrm_report* report, size_t i, size_t* iteration,
                               int* is_validation, double* loss, double* accuracy) {
  return guarded([&] {
    require(report != nullptr, "report must not be null");
    if (i >= report->report.records.size()) {
      throw dlrm::Error(dlrm::ErrorCode::kOutOfRange,
                        "record " + std::to_string(i) + " of " +
                            std::to_string(report->report.records.size()));
    }
    const auto& r = report->report.records[i];
    if (iteration) *iteration = r.iteration;
    if (is_validation) *is_validation = r.split == "validation";
    if (loss) *loss = r.loss;
    if (accuracy) *accuracy = r.accuracy;
  });
}

double dlrm_report_wall_seconds(const dlrm_report* report) {
  return report ? report->report.wall_seconds : 0.0;
}

double dlrm_report_attributed_seconds(const dlrm_report* report) {
  return report ? report->report.attributed_seconds() : 0.0;
}

void dlrm_report_destroy(dlrm_report* report) { delete report; }

dlrm_status dlrm_trace_profile_build(const int64_t* trace, size_t length,
                                     dlrm_trace_profile** out) {
  return guarded([&] {
    require(out != nullptr && (trace != nullptr || length == 0), "null argument");
    auto p = std::make_unique<dlrm_trace_profile>();
    p->profile = dlrm::profile_trace(std::span<const int64_t>(trace, length));
    *out = p.release();
  });
}

dlrm_status dlrm_trace_profile_load(const char* path, dlrm_trace_profile** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto p = std::make_unique<dlrm_trace_profile>();
    p->profile = dlrm::load_profile(path);
    *out = p.release();
  });
}

dlrm_status dlrm_trace_profile_save(const dlrm_trace_profile* profile, const char* path) {
  return guarded([&] {
    require(profile != nullptr && path != nullptr, "null argument");
    dlrm::save_profile(path, profile->profile);
  });
}

size_t dlrm_trace_profile_num_unique(const dlrm_trace_profile* profile) {
  return profile ? profile->profile.unique_accesses.size() : 0;
}

dlrm_status dlrm_trace_profile_adjust(const dlrm_trace_profile* profile, double threshold,
                                      size_t target_length, dlrm_trace_profile** out) {
  return guarded([&] {
    require(profile != nullptr && out != nullptr, "null argument");
    if (threshold < 0.0) {
      threshold = dlrm::default_first_touch_threshold(profile->profile, target_length);
    }
    auto p = std::make_unique<dlrm_trace_profile>();
    p->profile = dlrm::adjust_distribution(profile->profile, threshold);
    *out = p.release();
  });
}

dlrm_status dlrm_trace_generate(const dlrm_trace_profile* profile, size_t length,
                                uint64_t seed, int64_t* out) {
  return guarded([&] {
    require(profile != nullptr && (out != nullptr || length == 0), "null argument");
    dlrm::RngStream stream(seed);
    const auto trace = dlrm::generate_trace(profile->profile, length, stream);
    std::copy(trace.begin(), trace.end(), out);
  });
}

dlrm_status dlrm_trace_total_variation(const dlrm_trace_profile* a,
                                       const dlrm_trace_profile* b, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "null argument");
    *out = dlrm::total_variation(a->profile, b->profile);
  });
}

dlrm_status dlrm_trace_lru_hit_rate(const int64_t* trace, size_t length, size_t capacity,
                                    double* out) {
  return guarded([&] {
    require(out != nullptr && (trace != nullptr || length == 0), "null argument");
    *out = dlrm::lru_hit_rate(std::span<const int64_t>(trace, length), capacity);
  });
}

void dlrm_trace_profile_destroy(dlrm_trace_profile* profile) { delete profile; }

dlrm_status dlrm_offsets_from_lengths(const int64_t* lengths, size_t num_lookups,
                                      int64_t* offsets_out) {
  return guarded([&] {
    require(offsets_out != nullptr && (lengths != nullptr || num_lookups == 0),
            "null argument");
    const auto offsets =
        dlrm::offsets_from_lengths(std::span<const int64_t>(lengths, num_lookups));
    std::copy(offsets.begin(), offsets.end(), offsets_out);
  });
}

}  // extern "C"
