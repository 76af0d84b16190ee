#ifndef RESTOCNET_ERROR_HPP
#define RESTOCNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace restocnet {

/// Error classes; the CLI maps each to a distinct nonzero exit code.
enum class ErrorClass {
  Io = 2,         // missing/unreadable/unwritable file
  Format = 3,     // bad magic, truncated payload, CRC mismatch, version mismatch
  Config = 4,     // malformed config/topology, invalid hyperparameter
  Dimension = 5,  // shape mismatch between tensors/kernels/models
  State = 6,      // operation out of order (untrained layer, already trained, ...)
  Numeric = 7,    // degenerate statistics, non-convergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& msg)
      : std::runtime_error(msg), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

[[noreturn]] inline void fail(ErrorClass cls, const std::string& msg) {
  throw Error(cls, msg);
}

inline void require(bool cond, ErrorClass cls, const std::string& msg) {
  if (!cond) fail(cls, msg);
}

}  // namespace restocnet

#endif
