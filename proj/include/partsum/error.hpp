#pragma once

#include <stdexcept>
#include <string>

namespace partsum {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// config -> 2, data/parse -> 3, divergence -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ContractError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct CapacityError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace partsum
