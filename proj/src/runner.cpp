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

#include "dlrm/runner.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <sstream>

#include "dlrm/checkpoint.hpp"
#include "dlrm/error.hpp"
#include "dlrm/trace.hpp"
#include "dlrm/train.hpp"

namespace dlrm {

namespace {

const std::map<std::string, DataGeneration> kDataGenerationNames = {
    {"random", DataGeneration::kRandom},
    {"synthetic", DataGeneration::kSynthetic},
    {"criteo", DataGeneration::kCriteo},
};
const std::map<std::string, EmitFormat> kEmitNames = {
    {"text", EmitFormat::kText},
    {"json", EmitFormat::kJson},
};
const std::map<std::string, LabelSource> kLabelNames = {
    {"random", LabelSource::kRandom},
    {"teacher", LabelSource::kTeacher},
};
const std::map<std::string, DenseDistribution> kDistributionNames = {
    {"uniform", DenseDistribution::kUniform},
    {"normal", DenseDistribution::kNormal},
};

template <class E>
std::string name_of(const std::map<std::string, E>& names, E value) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  throw Error(ErrorCode::kInternal, "unnamed enum value");
}

template <class E>
std::vector<std::string> keys(const std::map<std::string, E>& names) {
  std::vector<std::string> out;
  for (const auto& [k, v] : names) out.push_back(k);
  return out;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void validate_options(const DlrmConfig& config, const RunOptions& o) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(o.mini_batch_size >= 1, "--mini-batch-size must be at least 1");
  require(o.num_indices_per_lookup >= 1, "--num-indices-per-lookup must be at least 1");
  require(o.num_devices >= 1, "--num-devices must be at least 1");
  require(o.nepochs >= 1, "--nepochs must be at least 1");
  require(o.print_freq >= 1, "--print-freq must be at least 1");
  require(std::isfinite(o.learning_rate) && o.learning_rate > 0.0,
          "--learning-rate must be a positive finite number");
  if (o.data_generation == DataGeneration::kCriteo) {
    require(!o.criteo_path.empty(), "--data-generation=criteo requires --criteo-path");
    require(config.num_tables() == kCriteoCategorical,
            "--data-generation=criteo requires 26 embedding tables, got " +
                std::to_string(config.num_tables()));
    require(config.dense_dim() == kCriteoDense,
            "--data-generation=criteo requires --arch-mlp-bot to start at 13, got " +
                std::to_string(config.dense_dim()));
    if (!o.vocab_sizes.empty()) {
      require(o.vocab_sizes.size() == kCriteoCategorical,
              "--vocab-sizes must list 26 sizes, got " + std::to_string(o.vocab_sizes.size()));
      for (std::size_t i = 0; i < o.vocab_sizes.size(); ++i) {
        require(o.vocab_sizes[i] <= config.embedding_sizes[i],
                "--vocab-sizes entry " + std::to_string(i) + " (" +
                    std::to_string(o.vocab_sizes[i]) + ") exceeds its table's " +
                    std::to_string(config.embedding_sizes[i]) + " rows");
      }
    }
  } else {
    require(o.num_batches >= 1, "--num-batches must be at least 1 for generated data");
  }
  if (!o.synthetic_profiles.empty()) {
    require(o.data_generation == DataGeneration::kSynthetic,
            "--synthetic-profiles requires --data-generation=synthetic");
    require(o.synthetic_profiles.size() == config.num_tables(),
            "--synthetic-profiles lists " + std::to_string(o.synthetic_profiles.size()) +
                " profiles for " + std::to_string(config.num_tables()) + " tables");
  }
}

}  // namespace

std::vector<std::size_t> parse_dim_list(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dash = text.find('-', pos);
    const std::string token = text.substr(pos, dash == std::string::npos ? std::string::npos
                                                                         : dash - pos);
    std::size_t value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || res.ec != std::errc() || res.ptr != token.data() + token.size() ||
        value == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "malformed list for " + flag + ": '" + text +
                      "' (expected positive integers separated by '-')");
    }
    out.push_back(value);
    if (dash == std::string::npos) break;
    pos = dash + 1;
  }
  return out;
}

std::string format_dim_list(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(dims[i]);
  }
  return out;
}

ParsedArgs parse_args(const std::vector<std::string>& args) {
  CLI::App app{"DLRM benchmark and training runs", "dlrm"};
  app.option_defaults()->always_capture_default();

  std::string embedding_sizes = "4-3-2";
  std::size_t sparse_dim = 2;
  std::string mlp_bot = "4-3-2";
  std::string mlp_top = "4-2-1";
  std::string data_generation = "random";
  std::string optimizer = "sgd";
  std::string emit = "text";
  std::string label_source;
  std::string distribution = "uniform";
  std::string vocab_sizes;
  std::uint64_t seed = 0;
  RunOptions o;

  app.add_option("--arch-embedding-size", embedding_sizes, "Rows per table, e.g. 1000-1000");
  app.add_option("--arch-sparse-feature-size", sparse_dim, "Embedding dimension d")
      ->check(CLI::PositiveNumber);
  app.add_option("--arch-mlp-bot", mlp_bot, "Dense input width then bottom layer widths");
  app.add_option("--arch-mlp-top", mlp_top, "Top layer widths; the last must be 1");
  app.add_option("--data-generation", data_generation)
      ->check(CLI::IsMember(keys(kDataGenerationNames)));
  app.add_option("--mini-batch-size", o.mini_batch_size)->check(CLI::PositiveNumber);
  app.add_option("--num-batches", o.num_batches, "Batches per epoch (Criteo: 0 = whole file)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--num-indices-per-lookup", o.num_indices_per_lookup)
      ->check(CLI::PositiveNumber);
  app.add_flag("--num-indices-per-lookup-fixed", o.num_indices_per_lookup_fixed,
               "Exactly k indices per lookup instead of a uniform count in [1, k]");
  app.add_flag("--enable-profiling", o.enable_profiling);
  app.add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adagrad"}));
  app.add_option("--learning-rate", o.learning_rate);
  app.add_option("--seed", seed);
  app.add_option("--num-devices", o.num_devices)->check(CLI::PositiveNumber);
  app.add_option("--criteo-path", o.criteo_path);
  app.add_option("--vocab-sizes", vocab_sizes, "Hash buckets per Criteo column, dash-separated");
  app.add_option("--emit", emit)->check(CLI::IsMember(keys(kEmitNames)));
  app.add_option("--nepochs", o.nepochs)->check(CLI::PositiveNumber);
  app.add_option("--print-freq", o.print_freq, "Iterations per train record")
      ->check(CLI::PositiveNumber);
  app.add_option("--eval-interval", o.eval_interval,
                 "Iterations between validations; 0 validates once per epoch")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--criteo-val-path", o.criteo_val_path);
  app.add_option("--num-val-batches", o.num_val_batches)->check(CLI::NonNegativeNumber);
  app.add_option("--synthetic-profiles", o.synthetic_profiles,
                 "One saved trace profile per table, comma-separated")
      ->delimiter(',');
  app.add_option("--label-source", label_source)->check(CLI::IsMember(keys(kLabelNames)));
  app.add_option("--dense-distribution", distribution)
      ->check(CLI::IsMember(keys(kDistributionNames)));
  app.add_option("--save-checkpoint", o.save_checkpoint);
  app.add_option("--load-checkpoint", o.load_checkpoint);
  app.add_option("--comm-report", o.comm_report, "Write the communication-volume table here");

  ParsedArgs parsed;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    parsed.help = app.help();
    return parsed;
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorCode::kInvalidArgument, e.what());
  }

  DlrmConfig& c = parsed.config;
  c.embedding_sizes = parse_dim_list(embedding_sizes, "--arch-embedding-size");
  c.sparse_dim = sparse_dim;
  c.bottom_mlp = parse_dim_list(mlp_bot, "--arch-mlp-bot");
  c.top_mlp = parse_dim_list(mlp_top, "--arch-mlp-top");
  c.seed = seed;
  c.validate();

  o.data_generation = kDataGenerationNames.at(data_generation);
  o.optimizer = parse_optimizer_kind(optimizer);
  o.emit = kEmitNames.at(emit);
  if (!label_source.empty()) o.label_source = kLabelNames.at(label_source);
  o.dense_distribution = kDistributionNames.at(distribution);
  if (!vocab_sizes.empty()) o.vocab_sizes = parse_dim_list(vocab_sizes, "--vocab-sizes");
  validate_options(c, o);
  parsed.options = std::move(o);
  return parsed;
}

std::vector<std::string> to_args(const DlrmConfig& c, const RunOptions& o) {
  std::vector<std::string> a = {
      "--arch-embedding-size=" + format_dim_list(c.embedding_sizes),
      "--arch-sparse-feature-size=" + std::to_string(c.sparse_dim),
      "--arch-mlp-bot=" + format_dim_list(c.bottom_mlp),
      "--arch-mlp-top=" + format_dim_list(c.top_mlp),
      "--seed=" + std::to_string(c.seed),
      "--data-generation=" + name_of(kDataGenerationNames, o.data_generation),
      "--mini-batch-size=" + std::to_string(o.mini_batch_size),
      "--num-batches=" + std::to_string(o.num_batches),
      "--num-indices-per-lookup=" + std::to_string(o.num_indices_per_lookup),
      "--optimizer=" + to_string(o.optimizer),
      "--learning-rate=" + shortest(o.learning_rate),
      "--num-devices=" + std::to_string(o.num_devices),
      "--emit=" + name_of(kEmitNames, o.emit),
      "--nepochs=" + std::to_string(o.nepochs),
      "--print-freq=" + std::to_string(o.print_freq),
      "--eval-interval=" + std::to_string(o.eval_interval),
      "--num-val-batches=" + std::to_string(o.num_val_batches),
      "--dense-distribution=" + name_of(kDistributionNames, o.dense_distribution),
  };
  if (o.num_indices_per_lookup_fixed) a.push_back("--num-indices-per-lookup-fixed");
  if (o.enable_profiling) a.push_back("--enable-profiling");
  if (!o.vocab_sizes.empty()) a.push_back("--vocab-sizes=" + format_dim_list(o.vocab_sizes));
  if (o.label_source) a.push_back("--label-source=" + name_of(kLabelNames, *o.label_source));
  auto add_path = [&](const char* flag, const std::string& value) {
    if (!value.empty()) {
      a.push_back(flag);
      a.push_back(value);
    }
  };
  add_path("--criteo-path", o.criteo_path);
  add_path("--criteo-val-path", o.criteo_val_path);
  add_path("--save-checkpoint", o.save_checkpoint);
  add_path("--load-checkpoint", o.load_checkpoint);
  add_path("--comm-report", o.comm_report);
  for (const auto& p : o.synthetic_profiles) add_path("--synthetic-profiles", p);
  return a;
}

double RunReport::attributed_seconds() const {
  double s = 0.0;
  for (const auto& op : operators) s += op.seconds;
  return s;
}

namespace {

// Seeds derived from the run seed for each independent random process.
constexpr std::uint64_t kTrainDataStream = 0x7261696e;
constexpr std::uint64_t kValDataStream = 0x76616c;
constexpr std::uint64_t kTeacherStream = 0x7465616368;
constexpr std::uint64_t kBootstrapStream = 0x626f6f74;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
  return RngStream(seed).fork(stream).seed();
}

// Upper bound on the length of a bootstrap trace used to build a profile.
constexpr std::size_t kMaxBootstrapLength = std::size_t{1} << 20;

std::unique_ptr<BatchSource> make_source(const DlrmConfig& config, const RunOptions& o,
                                         bool validation, LabelSource labels) {
  if (o.data_generation == DataGeneration::kCriteo) {
    const std::string& path = validation ? o.criteo_val_path : o.criteo_path;
    std::vector<std::size_t> vocab = o.vocab_sizes.empty() ? config.embedding_sizes
                                                           : o.vocab_sizes;
    return make_criteo_source(path, std::move(vocab), o.mini_batch_size,
                              validation ? o.num_val_batches : o.num_batches);
  }
  RandomDataSpec spec;
  spec.batch_size = o.mini_batch_size;
  spec.dense_dim = config.dense_dim();
  spec.distribution = o.dense_distribution;
  spec.seed = derived_seed(config.seed, validation ? kValDataStream : kTrainDataStream);
  for (std::size_t m : config.embedding_sizes) {
    spec.tables.push_back({m, o.num_indices_per_lookup, o.num_indices_per_lookup_fixed});
  }
  std::optional<TeacherSpec> teacher;
  if (labels == LabelSource::kTeacher) {
    teacher = TeacherSpec{derived_seed(config.seed, kTeacherStream)};
  }
  const std::size_t num_batches = validation ? o.num_val_batches : o.num_batches;
  if (o.data_generation == DataGeneration::kRandom) {
    return make_random_source(config, spec, num_batches, teacher);
  }

  std::vector<TraceProfile> profiles;
  if (!o.synthetic_profiles.empty()) {
    for (const auto& path : o.synthetic_profiles) profiles.push_back(load_profile(path));
  } else {
    RngStream root(derived_seed(config.seed, kBootstrapStream));
    const std::size_t length =
        std::min(kMaxBootstrapLength, o.num_batches * o.mini_batch_size * o.num_indices_per_lookup);
    for (std::size_t t = 0; t < spec.tables.size(); ++t) {
      RngStream stream = root.fork(t);
      profiles.push_back(bootstrap_profile(spec.tables[t], length, stream));
    }
  }
  return make_synthetic_source(config, spec, std::move(profiles), num_batches, teacher);
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation validate_model(const DlrmModel& model, BatchSource& source, OpProfiler* profiler) {
  source.reset();
  double loss = 0.0;
  double hits = 0.0;
  std::size_t samples = 0;
  while (true) {
    std::optional<Batch> b;
    {
      ScopedOp op(profiler, OpCategory::kDataGeneration);
      b = source.next();
    }
    if (!b) break;
    const StepResult r = evaluate(model, *b, profiler);
    const auto n = static_cast<double>(b->size());
    loss += r.loss * n;
    hits += r.accuracy * n;
    samples += b->size();
  }
  if (samples == 0) return {};
  return {loss / static_cast<double>(samples), hits / static_cast<double>(samples)};
}

RunReport run_loop(const DlrmConfig& config, const RunOptions& o, const RecordSink& sink,
                   LabelSource labels, bool with_validation) {
  config.validate();
  validate_options(config, o);

  RunReport report;
  report.profiled = o.enable_profiling;
  OpProfiler profiler;
  OpProfiler* prof = o.enable_profiling ? &profiler : nullptr;

  DlrmModel model;
  if (!o.load_checkpoint.empty()) {
    model = load_checkpoint(o.load_checkpoint);
    if (config_digest(model.config) != config_digest(config)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "checkpoint " + o.load_checkpoint + " was written for '" +
                      config_line(model.config) + "', run uses '" + config_line(config) + "'");
    }
  } else {
    model = DlrmModel::initialize(config);
  }
  Optimizer optimizer(o.optimizer, o.learning_rate);
  std::optional<ParallelTrainer> trainer;
  if (o.num_devices > 1) {
    trainer.emplace(model, o.num_devices, optimizer);
  } else {
    optimizer.prepare(model);
  }

  auto emit = [&](MetricRecord r) {
    if (sink) sink(r);
    report.records.push_back(std::move(r));
  };

  const auto start = std::chrono::steady_clock::now();
  std::unique_ptr<BatchSource> source;
  std::unique_ptr<BatchSource> val_source;
  {
    ScopedOp op(prof, OpCategory::kDataGeneration);
    source = make_source(config, o, false, labels);
    const bool has_val = o.data_generation == DataGeneration::kCriteo
                             ? !o.criteo_val_path.empty()
                             : o.num_val_batches > 0;
    if (with_validation && has_val) val_source = make_source(config, o, true, labels);
  }

  auto run_validation = [&](std::size_t iteration) {
    const Evaluation e = trainer ? validate_model(trainer->assemble(), *val_source, prof)
                                 : validate_model(model, *val_source, prof);
    emit({iteration, "validation", e.loss, e.accuracy});
  };

  std::size_t iteration = 0;
  double interval_loss = 0.0;
  double interval_accuracy = 0.0;
  std::size_t interval_steps = 0;
  auto flush = [&] {
    if (interval_steps == 0) return;
    const auto n = static_cast<double>(interval_steps);
    emit({iteration, "train", interval_loss / n, interval_accuracy / n});
    interval_loss = interval_accuracy = 0.0;
    interval_steps = 0;
  };

  for (std::size_t epoch = 0; epoch < o.nepochs; ++epoch) {
    if (epoch > 0) source->reset();
    while (true) {
      std::optional<Batch> batch;
      {
        ScopedOp op(prof, OpCategory::kDataGeneration);
        batch = source->next();
      }
      if (!batch) break;
      ++iteration;
      const StepResult r = trainer ? trainer->step(*batch, prof)
                                   : train_step(model, optimizer, *batch, Reduction::kOrdered,
                                                prof);
      interval_loss += r.loss;
      interval_accuracy += r.accuracy;
      if (++interval_steps == o.print_freq) flush();
      if (val_source && o.eval_interval > 0 && iteration % o.eval_interval == 0) {
        run_validation(iteration);
      }
    }
    flush();
    if (val_source && o.eval_interval == 0) run_validation(iteration);
  }
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  report.wall_seconds = wall.count();

  if (trainer) {
    model = trainer->assemble();
    report.comm = trainer->comm_log();
  }
  if (!o.comm_report.empty()) {
    std::ofstream out(o.comm_report);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + o.comm_report + " for writing");
    write_comm_report(out, report.comm);
  }
  if (!o.save_checkpoint.empty()) save_checkpoint(o.save_checkpoint, model);

  if (report.profiled) {
    for (std::size_t c = 0; c < kNumOpCategories; ++c) {
      const auto cat = static_cast<OpCategory>(c);
      const double s = profiler.seconds(cat);
      report.operators.push_back(
          {cat, s, report.wall_seconds > 0.0 ? s / report.wall_seconds : 0.0});
    }
    std::stable_sort(report.operators.begin(), report.operators.end(),
                     [](const OperatorTime& a, const OperatorTime& b) {
                       return a.seconds > b.seconds;
                     });
  }
  return report;
}

}  // namespace

RunReport run_training(const DlrmConfig& config, const RunOptions& options,
                       const RecordSink& sink) {
  return run_loop(config, options, sink, options.label_source.value_or(LabelSource::kTeacher),
                  true);
}

RunReport run_benchmark(const DlrmConfig& config, const RunOptions& options,
                        const RecordSink& sink) {
  RunOptions o = options;
  o.nepochs = 1;
  return run_loop(config, o, sink, options.label_source.value_or(LabelSource::kRandom), false);
}

std::string format_record(const MetricRecord& r, EmitFormat format) {
  if (format == EmitFormat::kJson) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["split"] = r.split;
    j["loss"] = r.loss;
    j["accuracy"] = r.accuracy;
    return j.dump();
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "iteration %6zu  %-10s  loss %.6f  accuracy %.4f",
                r.iteration, r.split.c_str(), r.loss, r.accuracy);
  return buf;
}

std::string format_report(const RunReport& report, EmitFormat format) {
  if (format == EmitFormat::kJson) {
    nlohmann::ordered_json j;
    j["wall_seconds"] = report.wall_seconds;
    j["iterations"] = report.records.empty() ? 0 : report.records.back().iteration;
    if (report.profiled) {
      j["attributed_seconds"] = report.attributed_seconds();
      auto ops = nlohmann::ordered_json::array();
      for (const auto& op : report.operators) {
        nlohmann::ordered_json e;
        e["operator"] = std::string(to_string(op.category));
        e["seconds"] = op.seconds;
        e["share"] = op.share;
        ops.push_back(std::move(e));
      }
      j["operators"] = std::move(ops);
    }
    nlohmann::ordered_json wrapper;
    wrapper["report"] = std::move(j);
    return wrapper.dump();
  }
  std::ostringstream out;
  char buf[160];
  if (report.profiled) {
    std::snprintf(buf, sizeof(buf), "%-18s %12s %8s\n", "operator", "seconds", "share");
    out << buf;
    for (const auto& op : report.operators) {
      std::snprintf(buf, sizeof(buf), "%-18s %12.6f %7.2f%%\n",
                    std::string(to_string(op.category)).c_str(), op.seconds, 100.0 * op.share);
      out << buf;
    }
    const double attributed = report.attributed_seconds();
    std::snprintf(buf, sizeof(buf), "%-18s %12.6f %7.2f%%\n", "attributed", attributed,
                  report.wall_seconds > 0.0 ? 100.0 * attributed / report.wall_seconds : 0.0);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-18s %12.6f\n", "wall_clock", report.wall_seconds);
  out << buf;
  return out.str();
}

}  // namespace dlrm
