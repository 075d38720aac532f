#pragma once

#include <stdexcept>
#include <string>

namespace iamm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, out-of-range ids, empty operands.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed input text (JSON lines, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Non-finite values in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace iamm
