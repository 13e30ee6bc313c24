#pragma once

#include <stdexcept>
#include <string>

namespace odcast {

// Bad inputs (files, config, CLI arguments). Maps to exit code 1.
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Broken internal invariants (shape mismatches, contract violations).
// Maps to exit code 2.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace odcast
