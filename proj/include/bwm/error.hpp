#pragma once

#include <stdexcept>
#include <string>

namespace bwm {

// Error categories map onto CLI exit codes (usage 2, data 3, numeric 4).
enum class ErrorKind {
  Usage,
  Data,
  Io,
  Numeric,
  Protocol,
  NotFound,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Data: return "data";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::NotFound: return "not_found";
  }
  return "unknown";
}

}  // namespace bwm
