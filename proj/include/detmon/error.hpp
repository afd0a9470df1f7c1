#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace detmon {

// Invalid input data (malformed streams, inconsistent shapes, missing labels).
// The CLI maps these to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class TruncationError : public DataError {
 public:
  TruncationError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (truncated at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace detmon
