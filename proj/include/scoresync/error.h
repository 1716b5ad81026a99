#pragma once

#include <stdexcept>
#include <string>

namespace scoresync {

/// Raised when caller-supplied data or arguments violate a precondition.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an internal invariant does not hold (a bug, or numerical
/// divergence during training). The CLI maps this to exit code 3.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

#define SCORESYNC_REQUIRE(cond, msg)                 \
  do {                                               \
    if (!(cond)) throw ::scoresync::InputError(msg); \
  } while (0)

#define SCORESYNC_ASSERT(cond, msg)                      \
  do {                                                   \
    if (!(cond)) throw ::scoresync::InvariantError(msg); \
  } while (0)

}  // namespace scoresync
