#pragma once

#include <stdexcept>
#include <string>

namespace bnn {

/// Base class for every error the engine raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor element outside its admissible value set (e.g. a non +/-1 sign).
class InvalidValueError : public Error {
 public:
  using Error::Error;
};

/// Shapes or vector lengths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Layer parameters out of range (sigma <= 0, non-finite values, bad geometry).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

/// A batch-norm channel with gamma == 0. Such channels carry no signal and
/// must be pruned before export.
class PrunableChannelError : public Error {
 public:
  using Error::Error;
};

/// Malformed layer sequence handed to the graph builder.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupted model / tensor file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bnn
