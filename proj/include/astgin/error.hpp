#pragma once

#include <stdexcept>
#include <string>

namespace astgin {

// Exit-code classes used by the command-line driver: validation failures
// map to 1, I/O failures to 2, numerical failures to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace astgin
