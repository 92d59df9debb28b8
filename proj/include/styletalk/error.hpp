#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace styletalk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (shape, size, argument range).
class ContractError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Not enough (or inconsistent) data to perform the requested operation.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. `offset()` is the byte position at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A loss or intermediate became NaN/Inf. `component()` names the culprit.
class NumericError : public Error {
 public:
  NumericError(const std::string& component, const std::string& detail)
      : Error("non-finite value in " + component + ": " + detail), component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

class CheckpointError : public Error {
 public:
  CheckpointError(const std::string& tensor, const std::string& detail)
      : Error("checkpoint tensor '" + tensor + "': " + detail), tensor_(tensor) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace styletalk
