#ifndef SANET_ERRORS_HPP_
#define SANET_ERRORS_HPP_

#include <stdexcept>

namespace sanet {

// Bad configuration or usage; CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or inconsistent input data; CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failures (non-finite values) surface as std::domain_error from the
// tensor core; CLI exit code 3.

}  // namespace sanet

#endif  // SANET_ERRORS_HPP_
