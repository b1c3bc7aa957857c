#pragma once

#include <stdexcept>
#include <string>

namespace mvfusion {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated binary file (spill files, PLY).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset directory or image could not be read.
class LoadError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class TrackingLostError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvfusion
