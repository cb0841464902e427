// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace crosssplit {

// Bad values from the user: config files, CLI flags, malformed input files.
// The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structured-text inputs (dataset files, metrics CSVs) that fail to parse.
struct ParseError : ConfigError {
    explicit ParseError(const std::string& msg) : ConfigError(msg) {}
};

// Violation of an internal API precondition; a bug in the caller, not user input.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Filesystem failures (open/read/write). Exit code 4.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss or gradient. Exit code 3.
struct DivergedError : std::runtime_error {
    DivergedError(const std::string& msg, int epoch_)
        : std::runtime_error(msg), epoch(epoch_) {}
    int epoch;
};

}  // namespace crosssplit
