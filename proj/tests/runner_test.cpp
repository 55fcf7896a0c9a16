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

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dlrm/checkpoint.hpp"
#include "dlrm/error.hpp"
#include "dlrm/runner.hpp"
#include "dlrm/trace.hpp"

namespace dlrm {
namespace {

using Args = std::vector<std::string>;

std::string error_of(const Args& args) {
  try {
    parse_args(args);
  } catch (const Error& e) {
    CHECK(e.code() != ErrorCode::kInternal);
    return e.what();
  }
  return {};
}

ParsedArgs small_run(Args extra = {}) {
  Args args = {"--arch-embedding-size=20-30", "--arch-sparse-feature-size=4",
               "--arch-mlp-bot=5-8-4",        "--arch-mlp-top=6-1",
               "--mini-batch-size=8",         "--num-batches=10",
               "--num-indices-per-lookup=3",  "--seed=5"};
  args.insert(args.end(), extra.begin(), extra.end());
  const bool val_set = std::any_of(extra.begin(), extra.end(), [](const std::string& a) {
    return a.rfind("--num-val-batches", 0) == 0;
  });
  if (!val_set) args.push_back("--num-val-batches=2");
  return parse_args(args);
}

std::string log_of(const ParsedArgs& p, bool benchmark = false) {
  std::string out;
  auto sink = [&](const MetricRecord& r) { out += format_record(r, p.options.emit) + "\n"; };
  if (benchmark) {
    run_benchmark(p.config, p.options, sink);
  } else {
    run_training(p.config, p.options, sink);
  }
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

TEST_CASE("parses the benchmark configuration flags") {
  const ParsedArgs p = parse_args({"--arch-embedding-size=1000000-1000000-1000000-1000000-"
                                   "1000000-1000000-1000000-1000000",
                                   "--arch-sparse-feature-size=64", "--arch-mlp-bot=512-512-64",
                                   "--arch-mlp-top=1024-1024-1024-1", "--data-generation=random",
                                   "--mini-batch-size=2048", "--num-batches=1000",
                                   "--num-indices-per-lookup=100", "--enable-profiling"});
  CHECK(p.config.embedding_sizes == std::vector<std::size_t>(8, 1'000'000));
  CHECK(p.config.sparse_dim == 64);
  CHECK(p.config.bottom_mlp == std::vector<std::size_t>{512, 512, 64});
  CHECK(p.config.top_mlp == std::vector<std::size_t>{1024, 1024, 1024, 1});
  CHECK(p.config.interaction_dim() == 64 + 36);
  CHECK(p.options.mini_batch_size == 2048);
  CHECK(p.options.num_batches == 1000);
  CHECK(p.options.num_indices_per_lookup == 100);
  CHECK(p.options.enable_profiling);
  CHECK_FALSE(p.help);
}

TEST_CASE("rejects inconsistent dimensions, unknown flags and malformed lists") {
  const std::string dims = error_of({"--arch-sparse-feature-size=64", "--arch-mlp-bot=512-512-32"});
  CHECK(dims.find("sparse feature size") != std::string::npos);
  CHECK(dims.find("32") != std::string::npos);
  CHECK(error_of({"--arch-sparse-feature-size=64", "--arch-mlp-bot=512-512-64"}).empty());

  CHECK(error_of({"--no-such-flag=1"}).find("no-such-flag") != std::string::npos);
  CHECK(error_of({"--arch-mlp-bot=4--2"}).find("malformed list") != std::string::npos);
  CHECK(error_of({"--arch-embedding-size=4-x"}).find("--arch-embedding-size") !=
        std::string::npos);
  CHECK_FALSE(error_of({"--mini-batch-size=0"}).empty());
  CHECK_FALSE(error_of({"--optimizer=adam"}).empty());
  CHECK_FALSE(error_of({"--learning-rate=-1"}).empty());
  CHECK(error_of({"--data-generation=criteo", "--criteo-path=x"}).find("26") != std::string::npos);
  CHECK(error_of({"--synthetic-profiles=a,b"}).find("synthetic") != std::string::npos);

  CHECK(parse_dim_list("512-512-64", "--x") == std::vector<std::size_t>{512, 512, 64});
  CHECK(format_dim_list({4, 3, 2}) == "4-3-2");
  CHECK_THROWS_AS(parse_dim_list("", "--x"), Error);
  CHECK_THROWS_AS(parse_dim_list("3-0", "--x"), Error);
}

TEST_CASE("help is returned instead of a config") {
  const ParsedArgs p = parse_args({"--help"});
  REQUIRE(p.help);
  CHECK(p.help->find("--arch-mlp-bot") != std::string::npos);
}

TEST_CASE("parse, serialize, parse is the identity") {
  const Args variants[] = {
      {},
      {"--optimizer=adagrad", "--learning-rate=0.0123", "--emit=json", "--num-devices=3",
       "--nepochs=2", "--print-freq=4", "--eval-interval=5", "--num-val-batches=2",
       "--label-source=random", "--dense-distribution=normal", "--num-indices-per-lookup-fixed",
       "--enable-profiling", "--save-checkpoint=/tmp/a b.ckpt", "--comm-report=c.csv"},
      {"--data-generation=synthetic", "--synthetic-profiles=p-1.txt,p2.txt"},
  };
  for (const auto& v : variants) {
    const ParsedArgs p = small_run(v);
    const ParsedArgs q = parse_args(to_args(p.config, p.options));
    CHECK(q.config == p.config);
    CHECK(q.options == p.options);
  }
}

TEST_CASE("training emits one record per batch and is deterministic") {
  const ParsedArgs p = small_run({"--label-source=random"});
  RunReport report = run_training(p.config, p.options);
  std::size_t train = 0;
  for (const auto& r : report.records) train += r.split == "train";
  CHECK(train == 10);
  CHECK(report.records.back().split == "validation");
  CHECK_FALSE(report.profiled);
  const ParsedArgs no_val = small_run({"--num-val-batches=0"});
  for (const auto& r : run_training(no_val.config, no_val.options).records) {
    CHECK(r.split == "train");
  }
  CHECK(report.operators.empty());

  CHECK(log_of(p) == log_of(p));
  const ParsedArgs q = small_run({"--emit=json", "--nepochs=2", "--print-freq=5"});
  CHECK(log_of(q) == log_of(q));
}

TEST_CASE("records serialize as text or one JSON object per line") {
  const MetricRecord r{12, "train", 0.5, 0.75};
  const auto j = nlohmann::json::parse(format_record(r, EmitFormat::kJson));
  CHECK(j.size() == 4);
  CHECK(j.at("iteration") == 12);
  CHECK(j.at("split") == "train");
  CHECK(j.at("loss") == 0.5);
  CHECK(j.at("accuracy") == 0.75);
  const std::string text = format_record(r, EmitFormat::kText);
  CHECK(text.find("12") != std::string::npos);
  CHECK(text.find("0.500000") != std::string::npos);
  CHECK(text.find('\n') == std::string::npos);

  const ParsedArgs p = small_run({"--emit=json"});
  std::istringstream lines(log_of(p));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.contains("loss"));
    ++count;
  }
  CHECK(count == 11);
}

TEST_CASE("print frequency and evaluation cadence") {
  const ParsedArgs p = small_run({"--print-freq=4", "--eval-interval=5", "--nepochs=2"});
  const RunReport r = run_training(p.config, p.options);
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  for (const auto& rec : r.records) {
    (rec.split == "train" ? train : val).push_back(rec.iteration);
  }
  CHECK(train == std::vector<std::size_t>{4, 8, 10, 14, 18, 20});
  CHECK(val == std::vector<std::size_t>{5, 10, 15, 20});
}

TEST_CASE("teacher labels are learnable") {
  const ParsedArgs p = parse_args({"--arch-embedding-size=20-20-20-20", "--arch-sparse-feature-size=4",
                                   "--arch-mlp-bot=4-8-4", "--arch-mlp-top=8-1",
                                   "--mini-batch-size=64", "--num-batches=300",
                                   "--num-indices-per-lookup=2", "--learning-rate=0.2",
                                   "--print-freq=50", "--seed=3"});
  const RunReport r = run_training(p.config, p.options);
  REQUIRE(r.records.size() >= 2);
  CHECK(r.records[r.records.size() - 2].loss < r.records.front().loss);
}

TEST_CASE("benchmark reports") {
  const ParsedArgs plain = small_run();
  const RunReport a = run_benchmark(plain.config, plain.options);
  CHECK_FALSE(a.profiled);
  CHECK(a.operators.empty());
  CHECK(a.wall_seconds > 0.0);
  CHECK(a.records.size() == 10);
  const std::string text = format_report(a, EmitFormat::kText);
  CHECK(text.find("wall") != std::string::npos);
  const auto j = nlohmann::json::parse(format_report(a, EmitFormat::kJson));
  CHECK(j.at("report").contains("wall_seconds"));
  CHECK_FALSE(j.at("report").contains("operators"));

  const ParsedArgs prof = small_run({"--enable-profiling"});
  const RunReport b = run_benchmark(prof.config, prof.options);
  CHECK(b.profiled);
  REQUIRE_FALSE(b.operators.empty());
  for (std::size_t i = 1; i < b.operators.size(); ++i) {
    CHECK(b.operators[i - 1].seconds >= b.operators[i].seconds);
  }
  CHECK(b.attributed_seconds() <= b.wall_seconds * 1.01);
  const auto jb = nlohmann::json::parse(format_report(b, EmitFormat::kJson));
  const auto& ops = jb.at("report").at("operators");
  CHECK(ops.size() == b.operators.size());
  bool lookup = false;
  bool fc = false;
  for (const auto& op : ops) {
    lookup |= op.at("operator") == std::string(to_string(OpCategory::kEmbeddingLookup));
    fc |= op.at("operator") == std::string(to_string(OpCategory::kBottomMlp));
  }
  CHECK(lookup);
  CHECK(fc);
}

TEST_CASE("multi-device runs match single-device runs and write a comm report") {
  const auto report_path = temp_path("dlrm_runner_comm.csv");
  const ParsedArgs one = small_run({"--optimizer=adagrad"});
  const ParsedArgs three =
      small_run({"--optimizer=adagrad", "--num-devices=3", "--comm-report=" + report_path.string()});
  const RunReport r3 = run_training(three.config, three.options);
  REQUIRE(r3.records.size() == 11);
  CHECK(r3.comm.size() == 30);
  std::ifstream in(report_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,collective,bytes,participants");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 30);
  std::filesystem::remove(report_path);
  // Parallel runs reduce exactly, so losses match the serial run closely but
  // need not be bit-identical to its ordered sums.
  const RunReport r1 = run_training(one.config, one.options);
  CHECK(r1.records.back().loss == doctest::Approx(r3.records.back().loss).epsilon(1e-9));
}

TEST_CASE("synthetic data from profile files") {
  const auto p0 = temp_path("dlrm_runner_p0.txt");
  const auto p1 = temp_path("dlrm_runner_p1.txt");
  save_profile(p0.string(), profile_trace(std::vector<AccessId>{1, 2, 1, 3, 1, 2}));
  save_profile(p1.string(), profile_trace(std::vector<AccessId>{7, 7, 8}));
  const ParsedArgs p = small_run({"--data-generation=synthetic",
                                  "--synthetic-profiles=" + p0.string() + "," + p1.string()});
  CHECK(log_of(p) == log_of(p));
  const ParsedArgs boot = small_run({"--data-generation=synthetic"});
  CHECK(run_training(boot.config, boot.options).records.size() == 11);
  std::filesystem::remove(p0);
  std::filesystem::remove(p1);
  CHECK_THROWS_AS(run_training(p.config, p.options), Error);
}

TEST_CASE("checkpoint round trip") {
  const auto path = temp_path("dlrm_runner.ckpt");
  const ParsedArgs p = small_run({"--save-checkpoint=" + path.string(), "--label-source=random"});
  run_training(p.config, p.options);
  const DlrmModel saved = load_checkpoint(path.string());
  CHECK(saved.config == p.config);

  std::stringstream buf;
  write_checkpoint(buf, saved);
  CHECK(read_checkpoint(buf) == saved);

  // Resuming continues from the saved weights: validation on the loaded
  // model differs from a fresh one.
  const ParsedArgs resumed = small_run({"--load-checkpoint=" + path.string(),
                                        "--label-source=random"});
  const ParsedArgs plain = small_run({"--label-source=random"});
  const RunReport fresh = run_training(plain.config, plain.options);
  const RunReport cont = run_training(resumed.config, resumed.options);
  CHECK(cont.records.front().loss != fresh.records.front().loss);

  const ParsedArgs other = parse_args({"--arch-embedding-size=20-31", "--arch-sparse-feature-size=4",
                                       "--arch-mlp-bot=5-8-4", "--arch-mlp-top=6-1", "--seed=5",
                                       "--load-checkpoint=" + path.string()});
  try {
    run_training(other.config, other.options);
    FAIL("expected a digest mismatch");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("was written for") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint header and corruption errors") {
  DlrmConfig c;
  c.embedding_sizes = {3};
  c.sparse_dim = 2;
  c.bottom_mlp = {2, 2};
  c.top_mlp = {1};
  c.seed = 9;
  const DlrmModel model = DlrmModel::initialize(c);
  std::stringstream ss;
  write_checkpoint(ss, model);
  const std::string bytes = ss.str();
  std::istringstream header(bytes);
  std::string line;
  std::getline(header, line);
  CHECK(line == "DLRMCKPT");
  std::getline(header, line);
  CHECK(line == "version 1");
  std::getline(header, line);
  CHECK(line.rfind("config_digest ", 0) == 0);
  CHECK(line.size() == 14 + 16);
  std::getline(header, line);
  CHECK(line == "config " + config_line(c));
  std::getline(header, line);
  // Table 3x2, bottom 2x2 + 2, top 3x1 + 1.
  CHECK(line == "payload_bytes " + std::to_string((6 + 6 + 4) * 8));
  std::getline(header, line);
  CHECK(line == "end_header");
  CHECK(bytes.size() - static_cast<std::size_t>(header.tellg()) == 16 * 8);

  auto fails = [](const std::string& data, const std::string& fragment) {
    std::istringstream in(data);
    try {
      read_checkpoint(in);
      FAIL("expected an error mentioning " << fragment);
    } catch (const Error& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  fails(bytes.substr(0, bytes.size() - 3), "trunc");
  fails(bytes + "x", "trailing");
  fails("NOTCKPT\n" + bytes.substr(9), "magic");
  std::string v2 = bytes;
  v2.replace(v2.find("version 1"), 9, "version 2");
  fails(v2, "version");
  std::string tampered = bytes;
  const auto pos = tampered.find("--seed=9");
  tampered.replace(pos, 8, "--seed=8");
  fails(tampered, "digest");
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), Error);
}

}  // namespace
}  // namespace dlrm
