#pragma once

#include <stdexcept>
#include <string>

namespace omake {

// Error taxonomy shared by all modules. The CLI maps validation-type errors
// (bad inputs, bad config, bad files) to exit code 1 and everything else to 2.

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool is_validation_error(const std::exception& e) {
    return dynamic_cast<const ParameterError*>(&e) != nullptr ||
           dynamic_cast<const ParseError*>(&e) != nullptr ||
           dynamic_cast<const SchemaError*>(&e) != nullptr ||
           dynamic_cast<const LookupError*>(&e) != nullptr ||
           dynamic_cast<const ConfigError*>(&e) != nullptr;
}

} // namespace omake
