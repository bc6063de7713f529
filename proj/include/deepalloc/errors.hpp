#pragma once

#include <stdexcept>
#include <string>

namespace deepalloc {

/// Bad input data: unreadable files, malformed cells, violated frame invariants.
class DataError : public std::runtime_error {
 public:
  enum class Kind {
    kMissingFile,
    kParse,
    kNonPositivePrice,
    kUnorderedDates,
    kDuplicateDate,
    kInsufficientHistory,
    kDegenerateAsset,
    kMisaligned,
    kInvalidArgument,
  };

  DataError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Numerical failure: infeasible programs, singular matrices, diverging training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller misuse: unknown method names, missing required options, bad shapes.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace deepalloc
