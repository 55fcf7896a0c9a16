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

// Command-line runs: flag parsing into a model config plus run options, the
// training and benchmark loops, and their metric and profiling reports.

#ifndef DLRM_RUNNER_HPP_
#define DLRM_RUNNER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dlrm/datagen.hpp"
#include "dlrm/model.hpp"
#include "dlrm/optim.hpp"
#include "dlrm/parallel.hpp"
#include "dlrm/profiler.hpp"

namespace dlrm {

enum class DataGeneration { kRandom, kSynthetic, kCriteo };
enum class EmitFormat { kText, kJson };
// Where labels of generated data come from.
enum class LabelSource { kRandom, kTeacher };

struct RunOptions {
  DataGeneration data_generation = DataGeneration::kRandom;
  std::size_t mini_batch_size = 1;
  // Batches per epoch. For Criteo, 0 reads the whole file.
  std::size_t num_batches = 1;
  std::size_t num_indices_per_lookup = 10;
  bool num_indices_per_lookup_fixed = false;
  bool enable_profiling = false;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = kDefaultLearningRate;
  std::size_t num_devices = 1;
  std::string criteo_path;
  std::vector<std::size_t> vocab_sizes;
  EmitFormat emit = EmitFormat::kText;

  std::size_t nepochs = 1;
  std::size_t print_freq = 1;
  // Validation cadence in iterations; 0 validates at the end of each epoch.
  std::size_t eval_interval = 0;
  // Held-out data: a Criteo file, or generated batches for random/synthetic.
  std::string criteo_val_path;
  std::size_t num_val_batches = 0;
  std::vector<std::string> synthetic_profiles;
  // Unset: a teacher for training, coin flips for benchmarks.
  std::optional<LabelSource> label_source;
  DenseDistribution dense_distribution = DenseDistribution::kUniform;
  std::string save_checkpoint;
  std::string load_checkpoint;
  std::string comm_report;

  bool operator==(const RunOptions&) const = default;
};

struct ParsedArgs {
  DlrmConfig config;
  RunOptions options;
  // Set instead of a config when --help was requested.
  std::optional<std::string> help;
};

// Parses flags (without the program name). Unknown flags, malformed lists and
// inconsistent dimensions throw Error naming the problem.
ParsedArgs parse_args(const std::vector<std::string>& args);

// Flags that parse back into exactly `config` and `options`.
std::vector<std::string> to_args(const DlrmConfig& config, const RunOptions& options);

// Dash-separated list, e.g. "512-512-64".
std::vector<std::size_t> parse_dim_list(const std::string& text, const std::string& flag);
std::string format_dim_list(const std::vector<std::size_t>& dims);

struct MetricRecord {
  std::size_t iteration = 0;  // 1-based, counted across epochs
  std::string split;          // "train" or "validation"
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

struct OperatorTime {
  OpCategory category = OpCategory::kDataGeneration;
  double seconds = 0.0;
  double share = 0.0;  // of wall clock
};

struct RunReport {
  std::vector<MetricRecord> records;
  bool profiled = false;
  // Every category, ranked by time (largest first); empty unless profiled.
  std::vector<OperatorTime> operators;
  double wall_seconds = 0.0;
  std::vector<CommRecord> comm;

  double attributed_seconds() const;
};

using RecordSink = std::function<void(const MetricRecord&)>;

// Trains for options.nepochs epochs, reporting a train record every
// print_freq iterations and validation records per eval_interval.
RunReport run_training(const DlrmConfig& config, const RunOptions& options,
                       const RecordSink& sink = {});

// One epoch of options.num_batches forward/backward/update iterations on
// generated data; labels default to coin flips.
RunReport run_benchmark(const DlrmConfig& config, const RunOptions& options,
                        const RecordSink& sink = {});

std::string format_record(const MetricRecord& record, EmitFormat format);
// Profiling report. Without profiling only the totals are present.
std::string format_report(const RunReport& report, EmitFormat format);

}  // namespace dlrm

#endif  // DLRM_RUNNER_HPP_
