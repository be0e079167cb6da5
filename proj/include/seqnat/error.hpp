#pragma once

#include <stdexcept>
#include <string>

namespace seqnat {

/// Malformed or out-of-contract arguments (empty sentence, non-finite logits,
/// length mismatch).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Position or token id outside the table it indexes.
class IndexOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Exhaustive enumeration refused because the search space is too large.
class BoundExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent configuration: unknown keys, bad estimator names, a reward
/// that an estimator cannot use.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A forward cache used with parameters that changed after it was produced.
class StaleCache : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss.
class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint or corpus file that cannot be read back.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqnat
