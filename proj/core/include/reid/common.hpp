#pragma once

#include <stdexcept>
#include <string>

namespace reid {

// Base for everything this library throws. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual const char* category() const { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "shape"; }
};

class GraphError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "graph"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "config"; }
};

class DataError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "data"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* category() const override { return "io"; }
};

}  // namespace reid
