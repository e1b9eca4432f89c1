#pragma once

#include <stdexcept>
#include <string>

namespace rsdazzle {

// Failure of the external-classifier wire protocol: malformed replies,
// id mismatches, timeouts, or peer death. Distinct from domain/usage errors
// so the CLI can map it to its own exit code.
class SessionError : public std::runtime_error {
 public:
  explicit SessionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rsdazzle
