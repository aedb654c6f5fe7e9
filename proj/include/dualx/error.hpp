#pragma once

#include <stdexcept>
#include <string>

namespace dualx {

// Error taxonomy used across the library. Every error carries a short kind
// token so the CLI can emit single-line machine-parseable diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

}  // namespace dualx
