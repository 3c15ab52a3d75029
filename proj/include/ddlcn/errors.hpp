#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ddlcn {

/// Precondition violated by a caller-supplied value (bad sizes, non-finite input, ...).
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file. `offset` is the byte position where parsing stopped.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

/// Inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddlcn
