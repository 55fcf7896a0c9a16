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

#ifndef DLRM_ERROR_HPP_
#define DLRM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dlrm {

// Mirrors dlrm_status in the C API; values must stay in sync.
enum class ErrorCode {
  kInvalidArgument = 1,
  kDimensionMismatch = 2,
  kOutOfRange = 3,
  kParse = 4,
  kIo = 5,
  kInternal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Re-throws `e` with `context` prepended to its message, keeping the code.
[[noreturn]] inline void rethrow_with_context(const Error& e,
                                              const std::string& context) {
  throw Error(e.code(), context + ": " + e.what());
}

}  // namespace dlrm

#endif  // DLRM_ERROR_HPP_
