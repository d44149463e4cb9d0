#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mvreg {

/// Error with a stable one-word code. The CLI prints codes verbatim on
/// stderr, so they are part of the tool's interface and must not change.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace mvreg
