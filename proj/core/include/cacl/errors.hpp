#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cacl {

// Thrown when a caller breaks a documented precondition (shape mismatch,
// invalid action index, bad config key, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a computation enters an invalid numeric state (NaN/Inf).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown on file and serialization failures.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Process-wide warning registry. Warnings are counted per key so tests can
// assert that a fallback path fired; the first few occurrences of each key
// are echoed to stderr.
void warn(std::string_view key, std::string_view message);
std::size_t warning_count(std::string_view key);
void reset_warnings();

} // namespace cacl
