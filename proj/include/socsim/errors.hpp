#pragma once

#include <stdexcept>
#include <string>

namespace socsim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a library function (precondition violation).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration or unknown intervention name.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `line()` is the 1-based line or row, 0 if unknown.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A metric is mathematically undefined for the given input.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Replay mode found no cached response for a request.
class CacheMissError : public Error {
 public:
  CacheMissError(const std::string& key)
      : Error("replay cache miss for request " + key), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Network failure or retry exhaustion.
class TransportError : public Error {
 public:
  using Error::Error;
};

class EnrichmentError : public Error {
 public:
  EnrichmentError(const std::string& user_id, const std::string& cause)
      : Error("enrichment failed for " + user_id + ": " + cause),
        user_id_(user_id) {}
  const std::string& user_id() const noexcept { return user_id_; }

 private:
  std::string user_id_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace socsim
