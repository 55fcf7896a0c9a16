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

// Checkpoint files. A text header
//
//   DLRMCKPT
//   version 1
//   config_digest <16 hex digits, FNV-1a of the config line>
//   config <arch flags and seed>
//   payload_bytes <n>
//   end_header
//
// is followed by n bytes of little-endian fp64: each table row-major in table
// order, then for the bottom and then the top MLP each layer's weight
// (n_out x n_in, row-major) followed by its bias.

#ifndef DLRM_CHECKPOINT_HPP_
#define DLRM_CHECKPOINT_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "dlrm/model.hpp"

namespace dlrm {

inline constexpr int kCheckpointVersion = 1;

// Canonical one-line form of a config, e.g.
// "--arch-embedding-size=7-7 --arch-sparse-feature-size=3 ... --seed=1".
std::string config_line(const DlrmConfig& config);
std::uint64_t config_digest(const DlrmConfig& config);

void write_checkpoint(std::ostream& out, const DlrmModel& model);
DlrmModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const DlrmModel& model);
DlrmModel load_checkpoint(const std::string& path);

}  // namespace dlrm

#endif  // DLRM_CHECKPOINT_HPP_
