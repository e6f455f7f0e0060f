#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tpp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text; line is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Data violates a model invariant (ordering, horizon, ...). index is the
// offending element when one exists.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::ptrdiff_t index = -1)
      : Error(what), index_(index) {}
  std::ptrdiff_t index() const { return index_; }

 private:
  std::ptrdiff_t index_;
};

// A value left the domain of a transform layer.
class DomainError : public Error {
 public:
  DomainError(const std::string& layer, const std::string& what)
      : Error(layer + ": " + what), layer_(layer) {}
  const std::string& layer() const { return layer_; }

 private:
  std::string layer_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace tpp
