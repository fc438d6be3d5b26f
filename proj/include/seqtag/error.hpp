#pragma once

#include <stdexcept>
#include <string>

namespace seqtag {

// Error families surfaced by the toolkit. The CLI maps these to exit codes,
// tests assert on them.
enum class ErrorKind {
  dimension,   // shape/rank mismatch
  domain,      // value outside an operation's domain (empty axis, ...)
  vocabulary,  // index outside a vocabulary
  parse,       // malformed input file
  scheme,      // bad tag shape or tagging-scheme violation
  format,      // malformed embedding/checkpoint-adjacent text input
  contract,    // caller broke a documented precondition
  numeric,     // NaN/Inf where finite values are required
  checkpoint,  // corrupt or mismatched checkpoint file
  infeasible,  // no valid path under a constraint mask
  guard,       // instance too large for an exhaustive routine
  io,          // file open/read/write failure
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace seqtag
