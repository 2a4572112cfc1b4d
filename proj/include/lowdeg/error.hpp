#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lowdeg {

enum class ErrorKind {
  invalid_argument,
  config,
  infeasible,
  numeric,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Numerical breakdown. `index` carries the offending pivot or row when one exists, else -1.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int index = -1)
      : Error(ErrorKind::numeric, what), index_(index) {}
  int index() const noexcept { return index_; }

 private:
  int index_;
};

/// Config validation failure listing every violated key.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(ErrorKind::config, join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace lowdeg
