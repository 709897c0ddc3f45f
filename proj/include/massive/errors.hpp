#pragma once

#include <stdexcept>
#include <string>

namespace massive {

// Failure categories. The CLI maps these to process exit codes:
// parse/degenerate/inconsistent/precondition -> 2 (bad input),
// everything else -> 3 (numerical failure).
enum class errc {
  precondition,         // caller violated a documented precondition
  parse,                // malformed file or cell
  degenerate_input,     // structurally unusable data (singular, constant, ...)
  inconsistent_input,   // data that contradicts itself (impossible moments)
  optimization_failure, // no optimizer start converged
  hyperparameter_failure,
  numerical             // singular covariance, non-finite intermediate, ...
};

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  errc kind() const noexcept { return kind_; }

 private:
  errc kind_;
};

[[noreturn]] inline void fail(errc kind, const std::string& msg) { throw error(kind, msg); }

inline void require(bool cond, errc kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace massive
