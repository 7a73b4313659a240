#pragma once

#include <stdexcept>
#include <string>

namespace bnn {

// Raised when a density / gradient evaluation produces a non-finite value.
// Callers that can recover (e.g. the MH step) catch this explicitly instead
// of letting NaNs flow through.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace bnn
