#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace aspire {

/// Bad configuration value or unknown key. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed or missing input data. Maps to exit code 1 in the CLI.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A report labeler could not produce a label. Never recovered from by defaulting.
class LabelingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Estimation precondition failed (positivity, single arm, non-finite input).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aspire
