// Copyright 2026 The texbias Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace texbias {

/// Coarse classification used by the CLI to pick an exit code.
enum class ErrorKind {
  kInvalidArgument,  // bad parameters or precondition violation
  kFormat,           // unreadable or malformed file contents
  kIo,               // filesystem failure
  kStage,            // an experiment stage failed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error InvalidArgument(const std::string& what) {
  return Error(ErrorKind::kInvalidArgument, what);
}
inline Error FormatError(const std::string& what) { return Error(ErrorKind::kFormat, what); }
inline Error IoError(const std::string& what) { return Error(ErrorKind::kIo, what); }

}  // namespace texbias
