// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <stdexcept>
#include <string>

namespace trojanscope {

/// Stable error categories. The numeric values are part of the C ABI
/// (see trojanscope.h) and must not be renumbered.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kNotFound = 2,
  kIngestion = 3,
  kNumeric = 4,
  kContract = 5,
  kConflict = 6,
  kIo = 7,
  kInternal = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define TROJANSCOPE_DEFINE_ERROR(Name, Code)                                \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  };

TROJANSCOPE_DEFINE_ERROR(InvalidArgument, kInvalidArgument)
TROJANSCOPE_DEFINE_ERROR(NotFound, kNotFound)
TROJANSCOPE_DEFINE_ERROR(IngestionError, kIngestion)
TROJANSCOPE_DEFINE_ERROR(NumericError, kNumeric)
TROJANSCOPE_DEFINE_ERROR(ContractError, kContract)
TROJANSCOPE_DEFINE_ERROR(ConflictError, kConflict)
TROJANSCOPE_DEFINE_ERROR(IoError, kIo)

#undef TROJANSCOPE_DEFINE_ERROR

template <typename E = InvalidArgument>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw E(message);
}

}  // namespace trojanscope
