#pragma once

#include <stdexcept>
#include <string>

namespace agirisk {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input record; the message names the offending field.
struct ParseError : Error {
  using Error::Error;
};

// Invalid or infeasible configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem / serialization failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace agirisk
