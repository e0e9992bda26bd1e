#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace miltag {

// Base of every error raised by the library. Callers that only need a
// message can catch this; the subclasses exist for tests and for the CLI's
// exit-code mapping.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (bad float, wrong token count, bad JSON record).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Matrix or vector dimensions that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset invariant violated (unknown tag, duplicate id, overlap of tag sets).
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: zero-norm vector, non-finite loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

class MissingVectorError : public Error {
 public:
  explicit MissingVectorError(std::vector<std::string> tokens);
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

// A bag with no positive or no negative tag cannot produce ranking pairs.
class DegenerateBagError : public Error {
 public:
  using Error::Error;
};

// Evaluation produced no scorable images.
class EmptyReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace miltag
