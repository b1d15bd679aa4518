#pragma once

#include <stdexcept>
#include <string>

namespace qrl {

/// Base class for every error raised by the library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file or record.
struct format_error : error {
    using error::error;
};

/// Violated precondition or out-of-range parameter.
struct invalid_argument : error {
    using error::error;
};

/// A lookup for an id that does not exist.
struct not_found : error {
    using error::error;
};

/// NaN or infinity reached a place where it must not.
struct numeric_error : error {
    using error::error;
};

}  // namespace qrl
