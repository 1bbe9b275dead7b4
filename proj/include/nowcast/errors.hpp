#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Bad or missing configuration. `key()` names the offending entry when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string key = {})
      : Error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IngestionError : public Error {
 public:
  IngestionError(const std::string& message, std::string path)
      : Error(message + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incomplete container; `node()` names the failing dataset or attribute.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::string node)
      : Error(message + " [" + node + "]"), node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

}  // namespace nowcast
