#pragma once

#include <stdexcept>
#include <string>

namespace zeresfdg {

// Bad user input: config files, CLI arguments, malformed tensor files.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure while running: non-finite tensors, invalid step inputs.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace zeresfdg
