#pragma once

#include <stdexcept>
#include <string>

namespace iae {

// The three families map one-to-one onto the CLI exit codes (2, 3, 4).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    NumericError(std::string term, const std::string& what)
        : std::runtime_error(what), term_(std::move(term)) {}

    // Name of the loss term or metric that went non-finite.
    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

}  // namespace iae
