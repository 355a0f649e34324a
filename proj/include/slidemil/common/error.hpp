#pragma once

#include <stdexcept>
#include <string>

namespace slidemil {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or malformed input data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A parameter or config value outside its allowed domain. `key()` names the
/// offending setting when one applies.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg, std::string key = {})
      : Error(key.empty() ? msg : key + ": " + msg), message_(msg), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }
  /// The message without the key prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::string key_;
};

/// Input is well formed but carries no usable information (single-class label
/// set, one-valued histogram, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace slidemil
