//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef INVRAT_ERROR_HPP_
#define INVRAT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace invrat {

enum class ErrorKind {
  kInvalidArgument,
  kEmptyAfterTokenization,
  kEmptyCorpus,
  kParse,
  kUnknownLabel,
  kEmptySplit,
  kOutOfRange,
  kNonFinite,
  kMissingEnvironment,
  kNoGenerator,
  kIo,
  kIntegrity,
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kEmptyAfterTokenization: return "empty after tokenization";
    case ErrorKind::kEmptyCorpus: return "empty corpus";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kUnknownLabel: return "unknown label";
    case ErrorKind::kEmptySplit: return "empty split";
    case ErrorKind::kOutOfRange: return "out of range";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kMissingEnvironment: return "missing environment";
    case ErrorKind::kNoGenerator: return "no generator";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kIntegrity: return "integrity error";
  }
  return "error";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " +
                           message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse errors remember the 1-based line they occurred on.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace invrat

#endif  // INVRAT_ERROR_HPP_
