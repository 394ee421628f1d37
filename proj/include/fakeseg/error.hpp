#pragma once

#include <stdexcept>
#include <string>

namespace fakeseg {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched lengths or tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fakeseg
