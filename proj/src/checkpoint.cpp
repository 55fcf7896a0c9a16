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

#include "dlrm/checkpoint.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dlrm/datagen.hpp"
#include "dlrm/error.hpp"
#include "dlrm/runner.hpp"

namespace dlrm {

namespace {

constexpr const char* kMagic = "DLRMCKPT";

// Visits the payload blocks of a model in file order.
template <class Model, class F>
void for_each_block(Model& model, F&& f) {
  for (auto& t : model.tables) f(t.weights().data());
  auto visit_mlp = [&](auto& mlp) {
    for (auto& layer : mlp.layers) {
      f(layer.weight.data());
      f(std::span(layer.bias));
    }
  };
  visit_mlp(model.bottom);
  visit_mlp(model.top);
}

std::size_t payload_values(const DlrmModel& model) {
  std::size_t n = 0;
  for_each_block(model, [&](auto s) { n += s.size(); });
  return n;
}

void put_le(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, "checkpoint header ends before '" + key + "'");
  }
  if (line.rfind(key, 0) != 0) {
    throw Error(ErrorCode::kParse,
                "checkpoint header: expected '" + key + "', found '" + line + "'");
  }
  if (line.size() == key.size()) return {};
  if (line[key.size()] != ' ') {
    throw Error(ErrorCode::kParse, "checkpoint header: malformed line '" + line + "'");
  }
  return line.substr(key.size() + 1);
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

}  // namespace

std::string config_line(const DlrmConfig& config) {
  return "--arch-embedding-size=" + format_dim_list(config.embedding_sizes) +
         " --arch-sparse-feature-size=" + std::to_string(config.sparse_dim) +
         " --arch-mlp-bot=" + format_dim_list(config.bottom_mlp) +
         " --arch-mlp-top=" + format_dim_list(config.top_mlp) +
         " --seed=" + std::to_string(config.seed);
}

std::uint64_t config_digest(const DlrmConfig& config) {
  return hash_token(config_line(config));
}

void write_checkpoint(std::ostream& out, const DlrmModel& model) {
  out << kMagic << '\n'
      << "version " << kCheckpointVersion << '\n'
      << "config_digest " << hex16(config_digest(model.config)) << '\n'
      << "config " << config_line(model.config) << '\n'
      << "payload_bytes " << payload_values(model) * sizeof(double) << '\n'
      << "end_header\n";
  for_each_block(model, [&](std::span<const double> s) {
    for (double v : s) put_le(out, v);
  });
  if (!out) throw Error(ErrorCode::kIo, "checkpoint write failed");
}

DlrmModel read_checkpoint(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw Error(ErrorCode::kParse, "not a checkpoint (bad magic)");
  const std::string version = expect_line(in, "version");
  if (version != std::to_string(kCheckpointVersion)) {
    throw Error(ErrorCode::kParse, "unsupported checkpoint version " + version);
  }
  const std::string digest = expect_line(in, "config_digest");
  const std::string line = expect_line(in, "config");
  const std::string payload = expect_line(in, "payload_bytes");
  expect_line(in, "end_header");

  std::vector<std::string> args;
  std::istringstream words(line);
  for (std::string w; words >> w;) args.push_back(w);
  DlrmConfig config;
  try {
    config = parse_args(args).config;
  } catch (const Error& e) {
    rethrow_with_context(e, "checkpoint config");
  }
  if (config_line(config) != line || hex16(config_digest(config)) != digest) {
    throw Error(ErrorCode::kParse, "checkpoint config digest does not match its config line");
  }

  DlrmModel model = DlrmModel::initialize(config);
  const std::size_t expected = payload_values(model) * sizeof(double);
  if (payload != std::to_string(expected)) {
    throw Error(ErrorCode::kParse, "checkpoint payload_bytes " + payload + ", config needs " +
                                       std::to_string(expected));
  }
  std::size_t read = 0;
  for_each_block(model, [&](std::span<double> s) {
    for (double& v : s) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw Error(ErrorCode::kParse, "checkpoint truncated after " + std::to_string(read) +
                                           " of " + std::to_string(expected) + " payload bytes");
      }
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
      v = std::bit_cast<double>(bits);
      read += 8;
    }
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kParse, "checkpoint has trailing bytes after the payload");
  }
  return model;
}

void save_checkpoint(const std::string& path, const DlrmModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_checkpoint(out, model);
}

DlrmModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path);
  try {
    return read_checkpoint(in);
  } catch (const Error& e) {
    rethrow_with_context(e, path);
  }
}

}  // namespace dlrm
