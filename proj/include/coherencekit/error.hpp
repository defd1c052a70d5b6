#pragma once

#include <stdexcept>
#include <string>

namespace coherencekit {

// Input, schema or state-machine violation. The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A classifier backend failed to answer (I/O, protocol, HTTP status).
// The CLI maps it to exit code 2.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace coherencekit
