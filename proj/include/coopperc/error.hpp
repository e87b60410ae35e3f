#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coopperc {

// Root of the library's exception hierarchy. CLI code catches this to emit a
// machine-readable diagnostic; everything else is a programming error.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside its mathematical domain, or a violated call contract
// (e.g. unsorted positions).
struct DomainError : Error {
    using Error::Error;
};

// Result not representable (overflow).
struct RangeError : Error {
    using Error::Error;
};

// A solver or optimizer failed to converge, or a normal matrix is singular.
struct NumericError : Error {
    using Error::Error;
};

// Too little data to compute the requested statistic.
struct SampleError : Error {
    using Error::Error;
};

// Invalid run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// CSV ingestion problem. Carries the 1-based line number when known (0 = n/a).
struct IngestError : Error {
    std::size_t line = 0;
    IngestError(const std::string& msg, std::size_t line_no = 0)
        : Error(line_no ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
};

}  // namespace coopperc
