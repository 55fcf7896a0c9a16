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

#include "dlrm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <thread>

#include "dlrm/error.hpp"

namespace dlrm {

std::vector<std::uint64_t> DevicePlan::loads(std::span<const std::uint64_t> table_sizes) const {
  std::vector<std::uint64_t> out(num_devices, 0);
  for (std::size_t t = 0; t < table_owner.size(); ++t) out[table_owner[t]] += table_sizes[t];
  return out;
}

std::vector<std::size_t> DevicePlan::tables_on(std::size_t device) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < table_owner.size(); ++t) {
    if (table_owner[t] == device) out.push_back(t);
  }
  return out;
}

void DevicePlan::reshard(std::size_t batch_size) {
  batch_shards = shard_batch(batch_size, num_devices);
}

void DevicePlan::validate(std::size_t num_tables, std::size_t batch_size) const {
  if (num_devices == 0) throw Error(ErrorCode::kInvalidArgument, "device plan has zero devices");
  if (table_owner.size() != num_tables) {
    throw Error(ErrorCode::kInvalidArgument,
                "device plan places " + std::to_string(table_owner.size()) + " tables, model has " +
                    std::to_string(num_tables));
  }
  for (std::size_t t = 0; t < table_owner.size(); ++t) {
    if (table_owner[t] >= num_devices) {
      throw Error(ErrorCode::kInvalidArgument,
                  "table " + std::to_string(t) + " assigned to missing device " +
                      std::to_string(table_owner[t]));
    }
  }
  if (batch_shards.size() != num_devices) {
    throw Error(ErrorCode::kInvalidArgument, "device plan needs one batch shard per device");
  }
  std::size_t next = 0;
  for (const auto& r : batch_shards) {
    if (r.begin != next || r.end < r.begin) {
      throw Error(ErrorCode::kInvalidArgument, "batch shards are not contiguous");
    }
    next = r.end;
  }
  if (next != batch_size) {
    throw Error(ErrorCode::kInvalidArgument,
                "batch shards cover " + std::to_string(next) + " of " +
                    std::to_string(batch_size) + " samples");
  }
}

std::vector<SampleRange> shard_batch(std::size_t batch_size, std::size_t num_devices) {
  if (num_devices == 0) throw Error(ErrorCode::kInvalidArgument, "zero devices");
  std::vector<SampleRange> shards;
  const std::size_t base = batch_size / num_devices;
  const std::size_t extra = batch_size % num_devices;
  std::size_t begin = 0;
  for (std::size_t d = 0; d < num_devices; ++d) {
    const std::size_t n = base + (d < extra ? 1 : 0);
    shards.push_back({begin, begin + n});
    begin += n;
  }
  return shards;
}

DevicePlan partition_tables(std::span<const std::uint64_t> table_sizes,
                            std::size_t num_devices, std::size_t batch_size) {
  if (num_devices == 0) {
    throw Error(ErrorCode::kInvalidArgument, "partition_tables: zero devices");
  }
  DevicePlan plan;
  plan.num_devices = num_devices;
  plan.table_owner.assign(table_sizes.size(), 0);
  std::vector<std::size_t> order(table_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table_sizes[a] > table_sizes[b];
  });
  std::vector<std::uint64_t> load(num_devices, 0);
  for (std::size_t t : order) {
    const auto it = std::min_element(load.begin(), load.end());
    const auto dev = static_cast<std::size_t>(it - load.begin());
    plan.table_owner[t] = dev;
    load[dev] += table_sizes[t];
  }
  plan.reshard(batch_size);
  return plan;
}

std::size_t ShuffleBuffer::cross_device_bytes() const {
  std::size_t bytes = 0;
  for (std::size_t dest = 0; dest < per_device.size(); ++dest) {
    for (const auto& s : per_device[dest]) {
      if (s.source_device != dest) bytes += s.rows.size() * sizeof(double);
    }
  }
  return bytes;
}

ShuffleBuffer butterfly_shuffle(const std::vector<DeviceTables>& per_device_outputs,
                                const DevicePlan& plan) {
  const std::size_t batch = plan.batch_shards.empty() ? 0 : plan.batch_shards.back().end;
  plan.validate(plan.table_owner.size(), batch);
  if (per_device_outputs.size() != plan.num_devices) {
    throw Error(ErrorCode::kInvalidArgument,
                "butterfly_shuffle: outputs for " + std::to_string(per_device_outputs.size()) +
                    " devices, plan has " + std::to_string(plan.num_devices));
  }
  for (std::size_t dev = 0; dev < per_device_outputs.size(); ++dev) {
    for (const auto& [t, m] : per_device_outputs[dev]) {
      if (t >= plan.table_owner.size() || plan.table_owner[t] != dev) {
        throw Error(ErrorCode::kInvalidArgument,
                    "butterfly_shuffle: device " + std::to_string(dev) +
                        " holds output for table " + std::to_string(t) + " it does not own");
      }
      if (m.rows() != batch) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "butterfly_shuffle: table " + std::to_string(t) + " output has " +
                        std::to_string(m.rows()) + " rows, batch is " + std::to_string(batch));
      }
    }
  }
  ShuffleBuffer buffer;
  buffer.per_device.resize(plan.num_devices);
  for (std::size_t dest = 0; dest < plan.num_devices; ++dest) {
    const SampleRange range = plan.batch_shards[dest];
    for (std::size_t t = 0; t < plan.table_owner.size(); ++t) {
      const std::size_t owner = plan.table_owner[t];
      const auto it = per_device_outputs[owner].find(t);
      if (it == per_device_outputs[owner].end()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "butterfly_shuffle: device " + std::to_string(owner) +
                        " is missing output for table " + std::to_string(t));
      }
      buffer.per_device[dest].push_back(
          {owner, t, range, it->second.slice_rows(range.begin, range.end)});
    }
  }
  return buffer;
}

std::vector<DeviceTables> inverse_shuffle(const ShuffleBuffer& buffer, const DevicePlan& plan) {
  if (buffer.per_device.size() != plan.num_devices) {
    throw Error(ErrorCode::kInvalidArgument, "inverse_shuffle: buffer/plan device count mismatch");
  }
  const std::size_t batch = plan.batch_shards.empty() ? 0 : plan.batch_shards.back().end;
  std::vector<DeviceTables> out(plan.num_devices);
  for (std::size_t src = 0; src < buffer.per_device.size(); ++src) {
    for (const auto& slice : buffer.per_device[src]) {
      const std::size_t owner = plan.table_owner.at(slice.table);
      if (owner != slice.source_device) {
        throw Error(ErrorCode::kInvalidArgument,
                    "inverse_shuffle: slice of table " + std::to_string(slice.table) +
                        " tagged with device " + std::to_string(slice.source_device) +
                        ", owner is " + std::to_string(owner));
      }
      if (slice.rows.rows() != slice.samples.size()) {
        throw Error(ErrorCode::kDimensionMismatch, "inverse_shuffle: slice rows/range mismatch");
      }
      auto [it, inserted] =
          out[owner].try_emplace(slice.table, Matrix(batch, slice.rows.cols()));
      Matrix& full = it->second;
      for (std::size_t r = 0; r < slice.rows.rows(); ++r) {
        std::copy_n(slice.rows.row(r).data(), slice.rows.cols(),
                    full.row(slice.samples.begin + r).data());
      }
    }
  }
  return out;
}

std::vector<Matrix> allreduce(std::span<const Matrix> per_replica) {
  if (per_replica.empty()) throw Error(ErrorCode::kInvalidArgument, "allreduce: no replicas");
  Matrix sum = per_replica.front();
  for (std::size_t r = 1; r < per_replica.size(); ++r) {
    const Matrix& m = per_replica[r];
    if (m.rows() != sum.rows() || m.cols() != sum.cols()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "allreduce: replica " + std::to_string(r) + " is " + m.shape_string() +
                      ", replica 0 is " + sum.shape_string());
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += m.data()[i];
  }
  return std::vector<Matrix>(per_replica.size(), sum);
}

std::vector<MlpGrads> allreduce(std::span<const MlpPartialGrads> per_replica) {
  if (per_replica.empty()) throw Error(ErrorCode::kInvalidArgument, "allreduce: no replicas");
  MlpPartialGrads total = per_replica.front();
  for (std::size_t r = 1; r < per_replica.size(); ++r) total.merge(per_replica[r]);
  return std::vector<MlpGrads>(per_replica.size(), total.rounded());
}

void write_comm_report(std::ostream& out, std::span<const CommRecord> records) {
  out << "step,collective,bytes,participants\n";
  for (const auto& r : records) {
    out << r.step << ',' << r.collective << ',' << r.bytes << ',' << r.participants << '\n';
  }
}

namespace {

std::size_t mlp_param_count(const MlpParams& p) {
  std::size_t n = 0;
  for (const auto& l : p.layers) n += l.weight.size() + l.bias.size();
  return n;
}

}  // namespace

ParallelTrainer::ParallelTrainer(const DlrmModel& model, std::size_t num_devices,
                                 const Optimizer& optimizer, Schedule schedule)
    : schedule_(schedule) {
  std::vector<std::uint64_t> sizes;
  for (const auto& t : model.tables) sizes.push_back(t.num_rows() * t.dim());
  plan_ = partition_tables(sizes, num_devices);
  for (std::size_t dev = 0; dev < num_devices; ++dev) {
    Device d{model, optimizer};
    for (std::size_t t = 0; t < d.shard.tables.size(); ++t) {
      if (plan_.table_owner[t] != dev) d.shard.tables[t] = EmbeddingTable(0, model.config.sparse_dim);
    }
    d.optimizer.prepare(d.shard);
    devices_.push_back(std::move(d));
  }
}

template <class Work>
void ParallelTrainer::run_on_devices(OpProfiler* profiler, Work&& work) {
  const std::size_t n = devices_.size();
  std::vector<OpProfiler> local(n);
  std::vector<std::exception_ptr> errors(n);
  const auto start = std::chrono::steady_clock::now();
  auto run_one = [&](std::size_t dev) {
    try {
      work(dev, profiler ? &local[dev] : nullptr);
    } catch (...) {
      errors[dev] = std::current_exception();
    }
  };
  if (schedule_ == Schedule::kConcurrent && n > 1) {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t dev = 0; dev < n; ++dev) workers.emplace_back(run_one, dev);
  } else {
    for (std::size_t dev = 0; dev < n; ++dev) run_one(dev);
  }
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;

  for (std::size_t dev = 0; dev < n; ++dev) {
    if (!errors[dev]) continue;
    const std::string where = "device " + std::to_string(dev);
    try {
      std::rethrow_exception(errors[dev]);
    } catch (const Error& e) {
      rethrow_with_context(e, where);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kInternal, where + ": " + e.what());
    }
  }

  if (!profiler) return;
  double recorded = 0.0;
  for (const auto& p : local) recorded += p.total();
  if (recorded <= 0.0) return;
  for (std::size_t c = 0; c < kNumOpCategories; ++c) {
    const auto cat = static_cast<OpCategory>(c);
    double s = 0.0;
    for (const auto& p : local) s += p.seconds(cat);
    if (s > 0.0) profiler->add(cat, wall.count() * s / recorded);
  }
}

StepResult ParallelTrainer::step(const Batch& batch, OpProfiler* profiler) {
  const std::size_t batch_size = batch.size();
  const std::size_t num_tables = plan_.table_owner.size();
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "parallel step: empty batch");
  if (batch.sparse.size() != num_tables || batch.labels.size() != batch_size) {
    throw Error(ErrorCode::kInvalidArgument,
                "parallel step: batch has " + std::to_string(batch.sparse.size()) +
                    " sparse features and " + std::to_string(batch.labels.size()) +
                    " labels for " + std::to_string(num_tables) + " tables and " +
                    std::to_string(batch_size) + " samples");
  }
  plan_.reshard(batch_size);
  const std::size_t step_id = steps_++;
  const std::size_t n = devices_.size();

  // Model-parallel lookups over the full batch on each owner.
  std::vector<DeviceTables> outputs(n);
  run_on_devices(profiler, [&](std::size_t dev, OpProfiler* prof) {
    for (std::size_t t : plan_.tables_on(dev)) {
      outputs[dev][t] = embed_table(devices_[dev].shard, batch.sparse[t], t, prof);
    }
  });

  ShuffleBuffer buffer;
  {
    ScopedOp op(profiler, OpCategory::kShuffle);
    buffer = butterfly_shuffle(outputs, plan_);
  }
  comm_log_.push_back({step_id, "butterfly_shuffle", buffer.cross_device_bytes(), n});

  // Data-parallel dense stages on each shard.
  std::vector<DenseStagePartialGrads> partials(n);
  std::vector<ExactSum> loss_sums(n);
  std::vector<std::size_t> hits(n, 0);
  run_on_devices(profiler, [&](std::size_t dev, OpProfiler* prof) {
    const SampleRange range = plan_.batch_shards[dev];
    const DlrmModel& shard = devices_[dev].shard;
    std::vector<Matrix> embedded;
    for (const auto& slice : buffer.per_device[dev]) embedded.push_back(slice.rows);
    const DlrmOutput fwd = dlrm_forward_from_embeddings(
        shard, batch.dense.slice_rows(range.begin, range.end), std::move(embedded), prof);
    LossTerms terms;
    {
      ScopedOp op(prof, OpCategory::kLoss);
      const std::span<const double> labels(batch.labels.data() + range.begin, range.size());
      terms = bce_terms(fwd.probs, labels, batch_size);
      for (double v : terms.per_sample) loss_sums[dev].add(v);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        hits[dev] += ((fwd.probs[i] > 0.5) == (labels[i] == 1.0)) ? 1 : 0;
      }
    }
    partials[dev] = dense_stage_backward_partial(shard, fwd.cache, terms.grad_logits, prof);
  });

  std::vector<MlpGrads> bottom_grads;
  std::vector<MlpGrads> top_grads;
  ExactSum loss_total;
  std::size_t hit_total = 0;
  {
    ScopedOp op(profiler, OpCategory::kAllreduce);
    std::vector<MlpPartialGrads> bottom_parts;
    std::vector<MlpPartialGrads> top_parts;
    for (auto& p : partials) {
      bottom_parts.push_back(std::move(p.bottom));
      top_parts.push_back(std::move(p.top));
    }
    bottom_grads = allreduce(std::span<const MlpPartialGrads>(bottom_parts));
    top_grads = allreduce(std::span<const MlpPartialGrads>(top_parts));
    for (std::size_t dev = 0; dev < n; ++dev) {
      loss_total.merge(loss_sums[dev]);
      hit_total += hits[dev];
    }
  }
  const std::size_t reduced_values =
      mlp_param_count(devices_[0].shard.bottom) + mlp_param_count(devices_[0].shard.top) + 2;
  comm_log_.push_back(
      {step_id, "allreduce", 2 * (n - 1) * reduced_values * sizeof(double), n});

  // Embedding gradients travel back to the table owners.
  ShuffleBuffer grad_buffer;
  std::vector<DeviceTables> owner_grads;
  {
    ScopedOp op(profiler, OpCategory::kShuffle);
    grad_buffer.per_device.resize(n);
    for (std::size_t dev = 0; dev < n; ++dev) {
      for (const auto& slice : buffer.per_device[dev]) {
        grad_buffer.per_device[dev].push_back(
            {slice.source_device, slice.table, slice.samples,
             std::move(partials[dev].embedded[slice.table])});
      }
    }
    owner_grads = inverse_shuffle(grad_buffer, plan_);
  }
  comm_log_.push_back({step_id, "inverse_shuffle", grad_buffer.cross_device_bytes(), n});

  run_on_devices(profiler, [&](std::size_t dev, OpProfiler* prof) {
    Device& d = devices_[dev];
    std::vector<std::pair<std::size_t, SparseRowGrad>> table_grads;
    {
      ScopedOp op(prof, OpCategory::kEmbeddingLookup);
      for (std::size_t t : plan_.tables_on(dev)) {
        table_grads.emplace_back(
            t, lookup_backward(d.shard.tables[t], batch.sparse[t], owner_grads[dev].at(t)));
      }
    }
    ScopedOp op(prof, OpCategory::kOptimizer);
    d.optimizer.apply_mlp(d.shard.bottom, bottom_grads[dev], false);
    d.optimizer.apply_mlp(d.shard.top, top_grads[dev], true);
    for (const auto& [t, g] : table_grads) d.optimizer.apply_table(d.shard.tables[t], t, g);
  });

  const double denom = static_cast<double>(batch_size);
  return {loss_total.value() / denom, static_cast<double>(hit_total) / denom};
}

DlrmModel ParallelTrainer::assemble() const {
  DlrmModel model = devices_.front().shard;
  for (std::size_t t = 0; t < model.tables.size(); ++t) {
    model.tables[t] = devices_[plan_.table_owner[t]].shard.tables[t];
  }
  return model;
}

bool ParallelTrainer::replicas_consistent() const {
  for (const auto& d : devices_) {
    if (!(d.shard.bottom == devices_.front().shard.bottom) ||
        !(d.shard.top == devices_.front().shard.top)) {
      return false;
    }
  }
  return true;
}

}  // namespace dlrm
