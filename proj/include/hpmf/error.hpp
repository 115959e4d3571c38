#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hpmf {

enum class ErrorCode {
  InvalidArgument,
  EmptyInput,
  DuplicateLeaf,
  InconsistentLineage,
  IndexOutOfRange,
  DuplicateEntry,
  NonPositiveValue,
  DegenerateColumn,
  MissingStats,
  RowMismatch,
  BadFractions,
  DimensionMismatch,
  NonFiniteUpdate,
  EmptyTrainingSet,
  BadRate,
  EmptyList,
  InsufficientPairs,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace hpmf
