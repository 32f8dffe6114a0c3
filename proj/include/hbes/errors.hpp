#pragma once

#include <stdexcept>
#include <string>

namespace hbes {

/// Malformed or inconsistent input data (CSV, configuration, reference store).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A solve that was required to succeed did not (infeasible, limit hit).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hbes
