#pragma once

#include <stdexcept>
#include <string>

namespace vmbo {

// Error categories; the CLI maps them to exit codes.
enum class ErrorKind {
  parameter,   // bad argument or precondition
  constraint,  // infeasible volume constraints
  input,       // NaN or otherwise unusable numeric input
  structural,  // disconnected graph, isolated vertex
  format,      // malformed file
  config,      // bad configuration key or value
  numerical,   // solver did not converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

const char* to_string(ErrorKind kind);

}  // namespace vmbo
