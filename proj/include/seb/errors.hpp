#pragma once

#include <stdexcept>

namespace seb {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration values or malformed input data.
struct ConfigError : Error {
  using Error::Error;
};

// A required file or result set does not exist.
struct MissingInputError : Error {
  using Error::Error;
};

// The requested byte mapping cannot be injective (V_w > V_b^n).
struct InfeasibleMappingError : Error {
  using Error::Error;
};

// Training produced non-finite gradients or parameters.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace seb
