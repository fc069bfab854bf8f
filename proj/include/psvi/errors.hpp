#pragma once

#include <stdexcept>
#include <string>

namespace psvi {

// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required input file does not exist or cannot be opened.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

// Input file exists but its structure is wrong (missing column, bad header).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// An internal invariant was violated; indicates a bug or corrupted artifact.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace psvi
