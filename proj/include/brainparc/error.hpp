#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace brainparc {

/// Malformed input: bad file syntax, invalid argument, inconsistent sizes.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse failure at a specific line of a text file.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError(what + " at line " + std::to_string(line)), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// An iterative numerical method failed to reach its tolerance.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::vector<double> residuals = {})
        : std::runtime_error(what), residuals_(std::move(residuals)) {}

    /// Best residual norms reached before giving up, one per requested pair.
    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

}  // namespace brainparc
