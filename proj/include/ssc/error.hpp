#pragma once

#include <stdexcept>
#include <string>

namespace ssc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Degenerate or malformed polygon, point outside its window, and similar.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Input data that does not satisfy an operation's preconditions.
class DataError : public Error {
 public:
  using Error::Error;
};

// A statistical fit that cannot be carried out (rank deficiency, separation,
// singular covariance).
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssc
