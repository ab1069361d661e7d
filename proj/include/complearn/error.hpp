#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace complearn {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched tensor shapes; the message names the offending graph node.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became NaN/Inf during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text input. `offset` is the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace complearn
