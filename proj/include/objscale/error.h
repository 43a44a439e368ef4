#pragma once

#include <stdexcept>
#include <string>

namespace objscale {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kDegenerate,
  kNoObjects,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Throw(ErrorCode code, const std::string& message);

#define OBJSCALE_CHECK(cond, code, message)        \
  do {                                             \
    if (!(cond)) ::objscale::Throw((code), (message)); \
  } while (false)

}  // namespace objscale
