#pragma once

#include <stdexcept>
#include <string>

namespace lsr {

// Error taxonomy mirrors the process exit codes: 2 config, 3 data format,
// 4 numeric failure. Anything else surfaces as a generic error (1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 2; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 3; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 4; }
};

}  // namespace lsr
