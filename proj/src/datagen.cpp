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

#include "dlrm/datagen.hpp"

#include <charconv>
#include <cmath>

#include "dlrm/error.hpp"

namespace dlrm {

void RandomDataSpec::validate() const {
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  if (dense_dim == 0) throw Error(ErrorCode::kInvalidArgument, "dense dim must be positive");
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& s = tables[t];
    if (s.num_rows == 0 || s.max_indices == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "table " + std::to_string(t) + ": rows and indices per lookup must be positive");
    }
    if (s.max_indices > s.num_rows) {
      throw Error(ErrorCode::kInvalidArgument,
                  "table " + std::to_string(t) + ": " + std::to_string(s.max_indices) +
                      " indices per lookup exceed " + std::to_string(s.num_rows) + " rows");
    }
  }
}

Matrix gen_dense_batch(const RandomDataSpec& spec, RngStream& stream) {
  return spec.distribution == DenseDistribution::kUniform
             ? rng_uniform(stream, spec.batch_size, spec.dense_dim)
             : rng_normal(stream, spec.batch_size, spec.dense_dim);
}

namespace {

std::size_t draw_lookup_size(const SparseFeatureSpec& t, RngStream& stream) {
  return t.fixed ? t.max_indices : 1 + stream.uniform_index(t.max_indices);
}

}  // namespace

SparseBatch gen_sparse_batch(const RandomDataSpec& spec, std::size_t table_index,
                             RngStream& stream) {
  spec.validate();
  const auto& t = spec.tables.at(table_index);
  SparseBatch batch;
  batch.offsets.reserve(spec.batch_size + 1);
  for (std::size_t s = 0; s < spec.batch_size; ++s) {
    const std::size_t n = draw_lookup_size(t, stream);
    for (std::size_t k = 0; k < n; ++k) {
      batch.indices.push_back(static_cast<RowIndex>(stream.uniform_index(t.num_rows)));
    }
    batch.offsets.push_back(static_cast<std::int64_t>(batch.indices.size()));
  }
  return batch;
}

Batch Batch::slice(std::size_t begin, std::size_t end) const {
  Batch out;
  out.dense = dense.slice_rows(begin, end);
  for (const auto& s : sparse) out.sparse.push_back(s.slice(begin, end));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

namespace {

// Teacher model with its output layer scaled by the logit scale.
DlrmModel make_teacher(const DlrmConfig& config, const TeacherSpec& spec) {
  DlrmConfig tc = config;
  tc.seed = spec.seed;
  DlrmModel teacher = DlrmModel::initialize(tc);
  auto& last = teacher.top.layers.back();
  for (double& w : last.weight.data()) w *= spec.logit_scale;
  for (double& b : last.bias) b *= spec.logit_scale;
  return teacher;
}

// Shared machinery of the generated sources: dense features, labels and the
// batch count; subclasses provide the sparse indices.
class GeneratedSource : public BatchSource {
 public:
  GeneratedSource(const DlrmConfig& config, RandomDataSpec spec, std::size_t num_batches,
                  const std::optional<TeacherSpec>& teacher)
      : spec_(std::move(spec)), num_batches_(num_batches), root_(spec_.seed),
        dense_stream_(root_.fork(1)), label_stream_(root_.fork(2)) {
    spec_.validate();
    if (teacher) teacher_ = make_teacher(config, *teacher);
  }

  std::optional<Batch> next() override {
    if (produced_ == num_batches_) return std::nullopt;
    ++produced_;
    Batch b;
    b.dense = gen_dense_batch(spec_, dense_stream_);
    for (std::size_t t = 0; t < spec_.tables.size(); ++t) b.sparse.push_back(sparse(t));
    b.labels.resize(spec_.batch_size);
    if (teacher_) {
      const auto probs = dlrm_forward(*teacher_, b.dense, b.sparse).probs;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        b.labels[i] = label_stream_.uniform() < probs[i] ? 1.0 : 0.0;
      }
    } else {
      for (double& y : b.labels) y = label_stream_.uniform() < 0.5 ? 1.0 : 0.0;
    }
    return b;
  }

  void reset() override {
    produced_ = 0;
    dense_stream_ = root_.fork(1);
    label_stream_ = root_.fork(2);
    reset_sparse();
  }

 protected:
  virtual SparseBatch sparse(std::size_t table) = 0;
  virtual void reset_sparse() = 0;

  RandomDataSpec spec_;
  std::size_t num_batches_;
  RngStream root_;

 private:
  std::size_t produced_ = 0;
  RngStream dense_stream_;
  RngStream label_stream_;
  std::optional<DlrmModel> teacher_;
};

class RandomSource final : public GeneratedSource {
 public:
  RandomSource(const DlrmConfig& config, RandomDataSpec spec, std::size_t num_batches,
               const std::optional<TeacherSpec>& teacher)
      : GeneratedSource(config, std::move(spec), num_batches, teacher) {
    reset_sparse();
  }

 protected:
  SparseBatch sparse(std::size_t table) override {
    return gen_sparse_batch(spec_, table, streams_[table]);
  }
  void reset_sparse() override {
    streams_.clear();
    for (std::size_t t = 0; t < spec_.tables.size(); ++t) streams_.push_back(root_.fork(10 + t));
  }

 private:
  std::vector<RngStream> streams_;
};

class SyntheticSource final : public GeneratedSource {
 public:
  SyntheticSource(const DlrmConfig& config, RandomDataSpec spec,
                  std::vector<TraceProfile> profiles, std::size_t num_batches,
                  const std::optional<TeacherSpec>& teacher)
      : GeneratedSource(config, std::move(spec), num_batches, teacher) {
    if (profiles.size() != spec_.tables.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "synthetic data: " + std::to_string(profiles.size()) + " profiles for " +
                      std::to_string(spec_.tables.size()) + " tables");
    }
    for (std::size_t t = 0; t < profiles.size(); ++t) {
      const auto& table = spec_.tables[t];
      const std::size_t length = num_batches_ * spec_.batch_size * table.max_indices;
      const TraceProfile adjusted =
          adjust_distribution(profiles[t], default_first_touch_threshold(profiles[t], length));
      RngStream trace_stream = root_.fork(1000 + t);
      traces_.push_back(generate_trace(adjusted, length, trace_stream));
    }
    reset_sparse();
  }

 protected:
  SparseBatch sparse(std::size_t table) override {
    const auto& t = spec_.tables[table];
    const auto& trace = traces_[table];
    auto& cursor = cursors_[table];
    SparseBatch batch;
    for (std::size_t s = 0; s < spec_.batch_size; ++s) {
      const std::size_t n = draw_lookup_size(t, size_streams_[table]);
      for (std::size_t k = 0; k < n; ++k) {
        const AccessId id = trace[cursor++ % trace.size()];
        const auto m = static_cast<AccessId>(t.num_rows);
        batch.indices.push_back(((id % m) + m) % m);
      }
      batch.offsets.push_back(static_cast<std::int64_t>(batch.indices.size()));
    }
    return batch;
  }
  void reset_sparse() override {
    cursors_.assign(spec_.tables.size(), 0);
    size_streams_.clear();
    for (std::size_t t = 0; t < spec_.tables.size(); ++t) {
      size_streams_.push_back(root_.fork(10 + t));
    }
  }

 private:
  std::vector<std::vector<AccessId>> traces_;
  std::vector<std::size_t> cursors_;
  std::vector<RngStream> size_streams_;
};

}  // namespace

std::unique_ptr<BatchSource> make_random_source(const DlrmConfig& config,
                                                const RandomDataSpec& spec,
                                                std::size_t num_batches,
                                                const std::optional<TeacherSpec>& teacher) {
  return std::make_unique<RandomSource>(config, spec, num_batches, teacher);
}

std::unique_ptr<BatchSource> make_synthetic_source(const DlrmConfig& config,
                                                   const RandomDataSpec& spec,
                                                   std::vector<TraceProfile> profiles,
                                                   std::size_t num_batches,
                                                   const std::optional<TeacherSpec>& teacher) {
  return std::make_unique<SyntheticSource>(config, spec, std::move(profiles), num_batches,
                                           teacher);
}

TraceProfile bootstrap_profile(const SparseFeatureSpec& table, std::size_t length,
                               RngStream& stream) {
  std::vector<AccessId> trace(length);
  for (auto& a : trace) a = static_cast<AccessId>(stream.uniform_index(table.num_rows));
  return profile_trace(trace);
}

std::uint64_t hash_token(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CriteoSample parse_criteo(std::string_view line, const std::vector<std::size_t>& vocab_sizes,
                          std::size_t line_no) {
  auto fail = [&](const std::string& what) -> void {
    throw Error(ErrorCode::kParse, "criteo line " + std::to_string(line_no) + ": " + what);
  };
  if (vocab_sizes.size() != kCriteoCategorical) {
    fail("expected " + std::to_string(kCriteoCategorical) + " vocabulary sizes, got " +
         std::to_string(vocab_sizes.size()));
  }
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  constexpr std::size_t kFields = 1 + kCriteoDense + kCriteoCategorical;
  if (fields.size() != kFields) {
    fail("expected " + std::to_string(kFields) + " tab-separated fields, got " +
         std::to_string(fields.size()));
  }

  CriteoSample sample;
  const auto label = fields[0];
  if (label.empty() || label == "0" || label == "-1") {
    sample.label = 0.0;
  } else if (label == "1" || label == "+1") {
    sample.label = 1.0;
  } else {
    fail("bad label '" + std::string(label) + "'");
  }

  sample.dense.resize(kCriteoDense, 0.0);
  for (std::size_t i = 0; i < kCriteoDense; ++i) {
    const auto f = fields[1 + i];
    if (f.empty()) continue;
    double x{};
    const auto res = std::from_chars(f.data(), f.data() + f.size(), x);
    if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
      fail("bad dense value '" + std::string(f) + "' in column I" + std::to_string(i + 1));
    }
    sample.dense[i] = std::log1p(std::max(x, 0.0));
  }

  sample.categorical.resize(kCriteoCategorical, 0);
  for (std::size_t i = 0; i < kCriteoCategorical; ++i) {
    const auto f = fields[1 + kCriteoDense + i];
    if (vocab_sizes[i] == 0) fail("vocabulary size of C" + std::to_string(i + 1) + " is zero");
    if (f.empty()) continue;
    sample.categorical[i] = static_cast<RowIndex>(hash_token(f) % vocab_sizes[i]);
  }
  return sample;
}

namespace {

class CriteoSource final : public BatchSource {
 public:
  CriteoSource(std::string path, std::vector<std::size_t> vocab_sizes,
               std::size_t batch_size, std::size_t max_batches)
      : path_(std::move(path)), vocab_(std::move(vocab_sizes)),
        batch_size_(batch_size), max_batches_(max_batches) {
    if (batch_size_ == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
    reset();
  }

  std::optional<Batch> next() override {
    if (max_batches_ != 0 && produced_ == max_batches_) return std::nullopt;
    std::vector<CriteoSample> samples;
    std::string line;
    while (samples.size() < batch_size_ && std::getline(in_, line)) {
      ++line_no_;
      if (line.empty()) continue;
      try {
        samples.push_back(parse_criteo(line, vocab_, line_no_));
      } catch (const Error& e) {
        rethrow_with_context(e, path_);
      }
    }
    if (samples.empty()) return std::nullopt;
    ++produced_;
    Batch b;
    b.dense = Matrix(samples.size(), kCriteoDense);
    b.sparse.assign(kCriteoCategorical, SparseBatch{});
    for (std::size_t s = 0; s < samples.size(); ++s) {
      std::copy(samples[s].dense.begin(), samples[s].dense.end(), b.dense.row(s).begin());
      b.labels.push_back(samples[s].label);
      for (std::size_t c = 0; c < kCriteoCategorical; ++c) {
        b.sparse[c].indices.push_back(samples[s].categorical[c]);
        b.sparse[c].offsets.push_back(static_cast<std::int64_t>(s + 1));
      }
    }
    return b;
  }

  void reset() override {
    in_ = std::ifstream(path_);
    if (!in_) throw Error(ErrorCode::kIo, "cannot open criteo file '" + path_ + "'");
    line_no_ = 0;
    produced_ = 0;
  }

 private:
  std::string path_;
  std::vector<std::size_t> vocab_;
  std::size_t batch_size_;
  std::size_t max_batches_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::size_t produced_ = 0;
};

}  // namespace

std::unique_ptr<BatchSource> make_criteo_source(const std::string& path,
                                                std::vector<std::size_t> vocab_sizes,
                                                std::size_t batch_size,
                                                std::size_t max_batches) {
  return std::make_unique<CriteoSource>(path, std::move(vocab_sizes), batch_size, max_batches);
}

}  // namespace dlrm
