#pragma once

#include <stdexcept>
#include <string>

namespace mncastle {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class UnsupportedFamily : public Error {
 public:
  using Error::Error;
};

class BadLength : public Error {
 public:
  using Error::Error;
};

class WidthTooLarge : public Error {
 public:
  using Error::Error;
};

/// A causal slice whose N-th power does not vanish; signals a corrupted tensor.
class NotNilpotent : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A training run aborted; the message names the step and iteration.
class InferenceFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace mncastle
