#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace subtok {

// Values double as process exit codes for the CLI and as status codes on the C boundary.
enum class ErrorCode : int {
  ok = 0,
  usage = 1,     // bad argument or configuration
  data = 2,      // malformed input file, undecodable text, uncoverable word
  internal = 3,  // invariant broken inside the library
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCode::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCode::data, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorCode::internal, what) {}
};

/// Raised for byte sequences that are not well-formed UTF-8. `offset` is the
/// position of the first offending byte relative to the start of the input.
class Utf8Error : public DataError {
 public:
  Utf8Error(std::size_t offset, const std::string& context)
      : DataError(context + ": invalid UTF-8 at byte offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace subtok
