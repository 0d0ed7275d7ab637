#pragma once

#include <stdexcept>
#include <string>

namespace ncmac {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace ncmac
