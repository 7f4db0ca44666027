// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsetl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: unknown preset, invalid flags, out-of-domain arguments.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// One invariant violation found while validating a config document.
struct ConfigViolation {
    std::string path;
    std::string message;
};

/// Config validation failure carrying the complete list of violations.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<ConfigViolation> violations)
        : Error(summarize(violations)), violations_(std::move(violations)) {}

    const std::vector<ConfigViolation>& violations() const noexcept { return violations_; }

private:
    static std::string summarize(const std::vector<ConfigViolation>& v) {
        std::string out = "invalid config:";
        for (const auto& e : v) {
            out += " [" + e.path + "] " + e.message + ";";
        }
        return out;
    }

    std::vector<ConfigViolation> violations_;
};

/// Malformed or truncated PSF1 file / chunk.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure; the message always carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Runtime failure of the pipeline (worker crash after retry, sink failure).
class PipelineError : public Error {
public:
    using Error::Error;
};

} // namespace rsetl
