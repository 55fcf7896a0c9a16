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

// In-process simulation of hybrid parallel training: embedding tables are
// model-parallel (each lives on one virtual device), MLPs are data-parallel
// (replicated, each device processes a contiguous shard of the mini-batch).
// Embedding outputs move between devices with a personalized all-to-all
// (butterfly shuffle) and MLP gradients are combined with an allreduce.
//
// Reductions over the batch use exact accumulators, so a step on any number
// of devices produces the same bits as a serial step with Reduction::kExact.

#ifndef DLRM_PARALLEL_HPP_
#define DLRM_PARALLEL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dlrm/datagen.hpp"
#include "dlrm/model.hpp"
#include "dlrm/optim.hpp"
#include "dlrm/profiler.hpp"
#include "dlrm/train.hpp"

namespace dlrm {

struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const SampleRange&) const = default;
};

struct DevicePlan {
  std::size_t num_devices = 1;
  std::vector<std::size_t> table_owner;  // table id -> device id
  std::vector<SampleRange> batch_shards;  // device id -> samples

  // Sum of the sizes of the tables owned by each device.
  std::vector<std::uint64_t> loads(std::span<const std::uint64_t> table_sizes) const;
  std::vector<std::size_t> tables_on(std::size_t device) const;
  void reshard(std::size_t batch_size);
  void validate(std::size_t num_tables, std::size_t batch_size) const;
};

// Contiguous shards whose sizes differ by at most one, larger shards first.
std::vector<SampleRange> shard_batch(std::size_t batch_size, std::size_t num_devices);

// Greedy largest-first placement: each table, in decreasing size (ties by
// table id), goes to the currently least-loaded device (ties by device id).
DevicePlan partition_tables(std::span<const std::uint64_t> table_sizes,
                            std::size_t num_devices, std::size_t batch_size = 0);

// Embedding outputs held by one device, keyed by table id.
using DeviceTables = std::map<std::size_t, Matrix>;

struct ShuffleSlice {
  std::size_t source_device = 0;
  std::size_t table = 0;
  SampleRange samples;
  Matrix rows;
};

// Per destination device, one slice per table in ascending table order.
struct ShuffleBuffer {
  std::vector<std::vector<ShuffleSlice>> per_device;

  // Bytes carried by slices whose source differs from the destination.
  std::size_t cross_device_bytes() const;
};

// Splits each device's full-batch outputs along the batch and delivers to
// every device the rows of all tables for its own shard.
ShuffleBuffer butterfly_shuffle(const std::vector<DeviceTables>& per_device_outputs,
                                const DevicePlan& plan);

// Inverse exchange: routes per-shard slices back to each table's owner and
// reassembles full-batch matrices there.
std::vector<DeviceTables> inverse_shuffle(const ShuffleBuffer& buffer, const DevicePlan& plan);

// Elementwise sum in ascending replica order; every replica receives a copy
// of the result.
std::vector<Matrix> allreduce(std::span<const Matrix> per_replica);

// Exact variant used for gradients: replicas' partial sums are merged in
// ascending replica order and rounded once.
std::vector<MlpGrads> allreduce(std::span<const MlpPartialGrads> per_replica);

struct CommRecord {
  std::size_t step = 0;
  std::string collective;
  std::size_t bytes = 0;
  std::size_t participants = 0;

  bool operator==(const CommRecord&) const = default;
};

// Plain-text table: a "step,collective,bytes,participants" header followed by
// one comma-separated row per record.
void write_comm_report(std::ostream& out, std::span<const CommRecord> records);

enum class Schedule { kSequential, kConcurrent };

class ParallelTrainer {
 public:
  ParallelTrainer(const DlrmModel& model, std::size_t num_devices,
                  const Optimizer& optimizer, Schedule schedule = Schedule::kSequential);

  StepResult step(const Batch& batch, OpProfiler* profiler = nullptr);

  // Full model: tables from their owners, MLPs from replica 0.
  DlrmModel assemble() const;

  // True when every MLP replica is bit-identical to replica 0.
  bool replicas_consistent() const;

  const DevicePlan& plan() const noexcept { return plan_; }
  const std::vector<CommRecord>& comm_log() const noexcept { return comm_log_; }

 private:
  struct Device {
    DlrmModel shard;  // MLP replica plus owned tables; others are empty
    Optimizer optimizer;
  };

  // Runs work(device, device_profiler) on every device, sequentially or on
  // one thread per device, and charges the phase's wall time to `profiler`
  // in proportion to what the devices recorded.
  template <class Work>
  void run_on_devices(OpProfiler* profiler, Work&& work);

  DevicePlan plan_;
  std::vector<Device> devices_;
  Schedule schedule_;
  std::size_t steps_ = 0;
  std::vector<CommRecord> comm_log_;
};

}  // namespace dlrm

#endif  // DLRM_PARALLEL_HPP_
