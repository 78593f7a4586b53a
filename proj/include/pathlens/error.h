// Copyright 2026 The pathlens Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pathlens {

enum class ErrorKind {
  kInvalidArgument,
  kParse,
  kUnsupportedFormat,
  kInvalidTrace,
  kNotFound,
  kNoData,
  kSpec,
  kIo,
  kVersionMismatch,
};

std::string_view to_string(ErrorKind kind);

// Base error for everything the library throws on purpose. The kind drives
// HTTP status codes in the server and exit codes in the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Document-level syntax error in a trace batch.
class ParseError : public Error {
 public:
  ParseError(std::size_t byte_offset, const std::string& message)
      : Error(ErrorKind::kParse, message), byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

enum class TraceDefect {
  kEmpty,
  kMixedTraceIds,
  kDuplicateSpanId,
  kOrphanSpan,
  kCycle,
  kNoRoot,
  kAmbiguousRoot,
  kDepthExceeded,
};

// Human-readable defect name, also used as the warning kind.
std::string_view to_string(TraceDefect defect);

class TraceError : public Error {
 public:
  TraceError(TraceDefect defect, const std::string& message)
      : Error(ErrorKind::kInvalidTrace, message), defect_(defect) {}

  TraceDefect defect() const noexcept { return defect_; }

 private:
  TraceDefect defect_;
};

}  // namespace pathlens
