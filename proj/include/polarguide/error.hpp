#pragma once

#include <stdexcept>
#include <string>

namespace polarguide {

// Error categories. The CLI maps each kind to a process exit code.
enum class ErrorKind {
  kShape,      // grid shape mismatch
  kDomain,     // argument outside its valid range
  kNumeric,    // non-finite loss or intermediate
  kIo,         // file missing, unreadable or malformed
  kConfig,     // schema violation in a config file or flag
  kBridge,     // external backbone transport failure
  kCapability  // backbone cannot perform the requested operation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace polarguide
