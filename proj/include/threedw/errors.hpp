#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace threedw {

// Malformed input document. Line and column are 1-based; 0 means unknown.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

// Rows or traces whose lengths disagree.
class LengthMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

// Input is well formed but carries no usable signal (dead links, too few
// rounds, nothing to cluster).
class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace threedw
