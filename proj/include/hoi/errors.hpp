#pragma once

#include <stdexcept>

namespace hoi {

// Raised when training or evaluation hits a non-finite numeric state; the CLI
// maps it to exit code 3 (data problems exit with 2).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hoi
