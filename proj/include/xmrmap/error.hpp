#pragma once

#include <stdexcept>
#include <string>

namespace xmrmap {

// Categories map one-to-one onto the CLI exit codes.
enum class ErrorKind : int {
  input = 1,
  protocol = 2,
  invariant = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

// Unreadable files, malformed records, invalid configuration.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

// Wire-format violations and schema mismatches between pipeline stages.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what)
      : Error(ErrorKind::protocol, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ErrorKind::invariant, what) {}
};

}  // namespace xmrmap
