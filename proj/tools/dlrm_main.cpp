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

// dlrm: benchmark, training and trace-synthesis front end over the C API.
//
//   dlrm benchmark --arch-embedding-size=... --enable-profiling
//   dlrm train --data-generation=criteo --criteo-path=day_0.txt ...
//   dlrm trace profile --input ids.txt --output profile.txt
//   dlrm trace generate --profile profile.txt --length 10000 --output synth.txt

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dlrm/dlrm.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

const char* kUsage =
    "usage: dlrm <command> [flags]\n"
    "\n"
    "commands:\n"
    "  train       train on random, synthetic or Criteo data\n"
    "  benchmark   time forward/backward/update iterations on generated data\n"
    "  trace       profile, synthesize and compare embedding access traces\n"
    "\n"
    "Run 'dlrm <command> --help' for the flags of a command.\n";

int fail(dlrm_status status, int exit_code = kExitFailure) {
  std::cerr << "dlrm: " << dlrm_status_string(status) << ": " << dlrm_last_error() << '\n';
  return exit_code;
}

template <class F>
std::string fetch_string(F&& f, dlrm_status* status) {
  size_t needed = 0;
  *status = f(nullptr, 0, &needed);
  if (*status != DLRM_OK) return {};
  std::string s(needed, '\0');
  *status = f(s.data(), s.size(), &needed);
  s.resize(needed - 1);
  return s;
}

void print_line(const char* line, void*) {
  std::cout << line << '\n' << std::flush;
}

int run_command(const std::string& command, int argc, char** argv) {
  dlrm_run* run = nullptr;
  dlrm_status st = dlrm_run_parse(argc, argv, &run);
  if (st != DLRM_OK) return fail(st, kExitUsage);
  struct RunGuard {
    dlrm_run* r;
    ~RunGuard() { dlrm_run_destroy(r); }
  } run_guard{run};

  if (dlrm_run_wants_help(run)) {
    const std::string help = fetch_string(
        [&](char* b, size_t c, size_t* n) { return dlrm_run_help(run, b, c, n); }, &st);
    if (st != DLRM_OK) return fail(st);
    std::cout << "dlrm " << command << ": " << help;
    return 0;
  }

  const bool benchmark = command == "benchmark";
  dlrm_report* report = nullptr;
  st = benchmark ? dlrm_run_benchmark(run, print_line, nullptr, &report)
                 : dlrm_run_train(run, print_line, nullptr, &report);
  if (st != DLRM_OK) return fail(st);
  struct ReportGuard {
    dlrm_report* r;
    ~ReportGuard() { dlrm_report_destroy(r); }
  } report_guard{report};

  if (benchmark || dlrm_report_profiled(report)) {
    const std::string text = fetch_string(
        [&](char* b, size_t c, size_t* n) { return dlrm_report_render(report, b, c, n); }, &st);
    if (st != DLRM_OK) return fail(st);
    std::cout << text;
    if (dlrm_run_emits_json(run)) std::cout << '\n';
  }
  return 0;
}

std::vector<int64_t> read_ids(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("cannot open " + path);
  std::vector<int64_t> ids;
  std::string token;
  std::size_t count = 0;
  while (in >> token) {
    ++count;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) {
      throw CLI::ValidationError(path + ": token " + std::to_string(count) + " ('" + token +
                                 "') is not an integer id");
    }
    ids.push_back(v);
  }
  return ids;
}

void write_ids(const std::string& path, const std::vector<int64_t>& ids) {
  std::ofstream out(path);
  if (!out) throw CLI::ValidationError("cannot open " + path + " for writing");
  for (int64_t id : ids) out << id << '\n';
}

int trace_command(int argc, char** argv) {
  CLI::App app{"Stack-distance profiling and synthesis of access traces", "dlrm trace"};
  app.require_subcommand(1);

  std::string input, output, profile_path, original, synthetic;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  double threshold = -1.0;
  bool no_adjust = false;
  std::vector<std::size_t> capacities = {8, 32, 64};

  auto* profile = app.add_subcommand("profile", "Profile a trace of integer ids");
  profile->add_option("--input", input, "Whitespace-separated ids")->required();
  profile->add_option("--output", output, "Profile file to write")->required();

  auto* generate = app.add_subcommand("generate", "Sample a synthetic trace from a profile");
  generate->add_option("--profile", profile_path)->required();
  generate->add_option("--length", length)->required();
  generate->add_option("--seed", seed);
  generate->add_option("--first-touch-threshold", threshold,
                       "Minimum first-touch probability (default: uniques / length)");
  generate->add_flag("--no-adjust", no_adjust, "Sample from the profile as is");
  generate->add_option("--output", output)->required();

  auto* compare = app.add_subcommand("compare", "Distribution distance and LRU hit rates");
  compare->add_option("--original", original)->required();
  compare->add_option("--synthetic", synthetic)->required();
  compare->add_option("--capacities", capacities)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  dlrm_status st = DLRM_OK;
  try {
    if (*profile) {
      const auto ids = read_ids(input);
      dlrm_trace_profile* p = nullptr;
      if ((st = dlrm_trace_profile_build(ids.data(), ids.size(), &p)) != DLRM_OK) return fail(st);
      st = dlrm_trace_profile_save(p, output.c_str());
      dlrm_trace_profile_destroy(p);
      if (st != DLRM_OK) return fail(st);
      return 0;
    }
    if (*generate) {
      dlrm_trace_profile* p = nullptr;
      if ((st = dlrm_trace_profile_load(profile_path.c_str(), &p)) != DLRM_OK) return fail(st);
      dlrm_trace_profile* source = p;
      dlrm_trace_profile* adjusted = nullptr;
      if (!no_adjust) {
        st = dlrm_trace_profile_adjust(p, threshold, length, &adjusted);
        if (st != DLRM_OK) {
          dlrm_trace_profile_destroy(p);
          return fail(st);
        }
        source = adjusted;
      }
      std::vector<int64_t> ids(length);
      st = dlrm_trace_generate(source, length, seed, ids.data());
      dlrm_trace_profile_destroy(adjusted);
      dlrm_trace_profile_destroy(p);
      if (st != DLRM_OK) return fail(st);
      write_ids(output, ids);
      return 0;
    }
    const auto a = read_ids(original);
    const auto b = read_ids(synthetic);
    dlrm_trace_profile* pa = nullptr;
    dlrm_trace_profile* pb = nullptr;
    if ((st = dlrm_trace_profile_build(a.data(), a.size(), &pa)) != DLRM_OK) return fail(st);
    if ((st = dlrm_trace_profile_build(b.data(), b.size(), &pb)) != DLRM_OK) {
      dlrm_trace_profile_destroy(pa);
      return fail(st);
    }
    double tv = 0.0;
    st = dlrm_trace_total_variation(pa, pb, &tv);
    dlrm_trace_profile_destroy(pa);
    dlrm_trace_profile_destroy(pb);
    if (st != DLRM_OK) return fail(st);
    std::printf("total_variation %.6f\n", tv);
    std::printf("%-10s %10s %10s\n", "capacity", "original", "synthetic");
    for (std::size_t c : capacities) {
      double ha = 0.0;
      double hb = 0.0;
      if ((st = dlrm_trace_lru_hit_rate(a.data(), a.size(), c, &ha)) != DLRM_OK) return fail(st);
      if ((st = dlrm_trace_lru_hit_rate(b.data(), b.size(), c, &hb)) != DLRM_OK) return fail(st);
      std::printf("%-10zu %10.4f %10.4f\n", c, ha, hb);
    }
    return 0;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "dlrm trace: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return kExitUsage;
  }
  const std::string command = argv[1];
  if (command == "-h" || command == "--help" || command == "help") {
    std::cout << kUsage;
    return 0;
  }
  if (command == "train" || command == "benchmark") {
    return run_command(command, argc - 2, argv + 2);
  }
  if (command == "trace") return trace_command(argc - 1, argv + 1);
  std::cerr << "dlrm: unknown command '" << command << "'\n" << kUsage;
  return kExitUsage;
}
