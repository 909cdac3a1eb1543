#pragma once

#include <stdexcept>
#include <string>

namespace vvt {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   UsageError   -> exit 2
//   DataError    -> exit 3
//   NumericError -> exit 4
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vvt
