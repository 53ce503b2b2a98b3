#pragma once

#include <stdexcept>
#include <string>

namespace lurenet {

// Base class for every error raised by the library. Callers that only care
// about "something in lurenet failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Sector bounds rejected by the numeric sector check, or D + D' not positive
// definite.
class SectorInvalid : public Error {
 public:
  using Error::Error;
};

class UnsupportedChannel : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace lurenet
