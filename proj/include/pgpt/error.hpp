#pragma once

#include <stdexcept>
#include <string>

namespace pgpt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error carrying a module-specific code enum so callers can branch on the
// failure kind without string matching.
template <typename Code>
class CodedError : public Error {
 public:
  CodedError(Code code, const std::string& what) : Error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

}  // namespace pgpt
