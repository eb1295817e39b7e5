#pragma once

#include <stdexcept>
#include <string>

namespace oiparts {

// Base class for every error raised by the library. The CLI maps all of
// these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed container or image header, truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Wrong dtype, rank, or mismatched dimensions between inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace oiparts
